import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from outage_lab.constellation import (
    Constellation,
    MiTable,
    awgn_mutual_information,
    build_constellation,
    build_mi_table,
    mi_lookup,
)
from outage_lab.errors import UnsupportedConstellation


@pytest.mark.parametrize("kind,M", [("PSK", 1), ("PSK", 2), ("PSK", 3), ("QAM", 1), ("QAM", 2), ("QAM", 4), ("QAM", 6)])
def test_invariants(kind, M):
    c = build_constellation(kind, M)
    assert c.points.size == 2**M
    assert abs(c.points.mean()) <= 1e-12
    assert abs(np.mean(np.abs(c.points) ** 2) - 1) <= 1e-12
    assert np.unique(np.round(c.points, 9)).size == 2**M


def test_bpsk_points():
    c = build_constellation("PSK", 1)
    assert sorted(c.points.real) == [-1.0, 1.0]
    assert np.all(c.points.imag == 0)


def test_qpsk_spacing():
    c = build_constellation("PSK", 2)
    ang = np.sort(np.angle(c.points) % (2 * np.pi))
    assert np.allclose(np.diff(ang), np.pi / 2)
    assert np.allclose(np.abs(c.points), 1)


def test_qam16_scaling():
    # mean |x|^2 over the odd-integer grid {±1, ±3}^2 is 10
    grid = np.array([a + 1j * b for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)])
    assert np.mean(np.abs(grid) ** 2) == pytest.approx(10, rel=1e-15)
    c = build_constellation("QAM", 4)
    assert np.allclose(np.sort_complex(c.points), np.sort_complex(grid / np.sqrt(10)))


def test_qam_gray_neighbours():
    # adjacent in-phase levels differ in exactly one label bit
    c = build_constellation("QAM", 4)
    pts = c.points.reshape(4, 4)
    for j in range(4):
        col = pts[:, j].real
        order = np.argsort(col)
        labels = order
        for a, b in zip(labels, labels[1:]):
            assert bin(a ^ b).count("1") == 1


@pytest.mark.parametrize("kind,M", [("QAM", 3), ("QAM", 5), ("FSK", 2), ("PSK", 0)])
def test_unsupported(kind, M):
    with pytest.raises(UnsupportedConstellation, match="unsupported|M must"):
        build_constellation(kind, M)


def test_custom_constellation_validated():
    with pytest.raises(UnsupportedConstellation):
        Constellation(np.array([1.0, 1.0]), 1)
    with pytest.raises(UnsupportedConstellation):
        Constellation(np.array([0.0, 2.0]), 1)


def test_mi_zero_snr(bpsk):
    assert awgn_mutual_information(bpsk, 0.0, 10, 0) == (0.0, 0.0)


def test_mi_saturates(bpsk):
    mi, _ = awgn_mutual_information(bpsk, 1e6, 10_000, 0)
    assert abs(mi - 1) <= 1e-3


def test_mi_overflow_safe(bpsk):
    for s in (1e8, 1e11, 1e12, 1e15):
        mi, _ = awgn_mutual_information(bpsk, s, 1000, 0)
        assert np.isfinite(mi) and mi == pytest.approx(1.0, abs=1e-9)


def test_mi_reproducible(qpsk):
    a = awgn_mutual_information(qpsk, 0.7, 5000, 11)
    b = awgn_mutual_information(qpsk, 0.7, 5000, 11)
    assert a == b


def test_qpsk_is_two_bpsk_at_half_snr(bpsk, qpsk):
    # QPSK splits into two BPSK channels, each carrying half the symbol energy
    for s in (0.1, 1.0, 10.0):
        iq, sq = awgn_mutual_information(qpsk, s, 400_000, 1)
        ib, sb = awgn_mutual_information(bpsk, s / 2, 400_000, 2)
        assert abs(iq - 2 * ib) <= 3 * np.hypot(sq, 2 * sb)


def test_mi_bounded_and_increasing(qpsk):
    vals = [awgn_mutual_information(qpsk, s, 20_000, 5)[0] for s in (0.01, 0.1, 1, 10, 100)]
    assert all(0 <= v <= 2 for v in vals)
    assert vals == sorted(vals)


def test_table_example(bpsk):
    t = build_mi_table(bpsk, 1e-3, 1e6, 16, 20_000, seed=0)
    assert t.mi_values[-1] >= 0.999
    assert t.snr_grid[0] == 0 and t.mi_values[0] == 0
    assert np.all(np.diff(t.mi_values) >= 0)
    assert t.abs_error_bound > 0


def test_table_rejects_bad_args(bpsk):
    with pytest.raises(ValueError):
        build_mi_table(bpsk, 1.0, 0.5, 16)
    with pytest.raises(ValueError):
        build_mi_table(bpsk, 1e-3, 1.0, 8)


def test_lookup_nodes_and_anchors(bpsk_table):
    t = bpsk_table
    for s, v in zip(t.snr_grid, t.mi_values):
        assert mi_lookup(t, s) == pytest.approx(v, abs=1e-12)
    assert mi_lookup(t, 0.0) == 0.0
    below = mi_lookup(t, t.snr_grid[1] / 10)
    assert 0 <= below <= t.mi_values[1]
    assert mi_lookup(t, 1e9) == pytest.approx(t.mi_values[-1])
    assert mi_lookup(t, 1e13) == pytest.approx(t.mi_values[-1])


def test_lookup_tracks_direct_estimate(bpsk, bpsk_table):
    for s in (0.05, 0.5, 3.0):
        direct, se = awgn_mutual_information(bpsk, s, 200_000, 9)
        assert abs(mi_lookup(bpsk_table, s) - direct) <= bpsk_table.abs_error_bound + 3 * se


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1e7), st.floats(0, 1e7))
def test_lookup_monotone(bpsk_table, a, b):
    lo, hi = sorted((a, b))
    va, vb = mi_lookup(bpsk_table, lo), mi_lookup(bpsk_table, hi)
    assert 0 <= va <= vb <= 1


def test_lookup_vectorised(bpsk_table):
    s = np.array([0.0, 0.1, 10.0])
    out = mi_lookup(bpsk_table, s)
    assert out.shape == (3,)
    assert list(out) == [mi_lookup(bpsk_table, x) for x in s]


def test_table_json_roundtrip(bpsk_table, tmp_path):
    p = tmp_path / "t.json"
    bpsk_table.save(p)
    doc = json.loads(p.read_text())
    assert set(doc) == {"kind", "M", "snr_grid", "mi_values", "abs_error_bound"}
    t2 = MiTable.load(p)
    assert np.array_equal(t2.snr_grid, bpsk_table.snr_grid)
    assert np.array_equal(t2.mi_values, bpsk_table.mi_values)
    assert mi_lookup(t2, 2.5) == mi_lookup(bpsk_table, 2.5)


def test_table_rejects_nonmonotone():
    with pytest.raises(ValueError):
        MiTable("PSK", 1, [0, 1, 2], [0, 0.5, 0.4])
