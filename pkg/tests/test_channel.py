import numpy as np
import pytest

from outage_lab import rng
from outage_lab.channel import (
    ChannelParams,
    csit_noise_variance,
    draw_gains,
    exponent_coords,
    sample_channel,
)
from outage_lab.errors import CsitNoiseError


@pytest.mark.parametrize("d_e,snr,want", [(0, 37.0, 1.0), (1, 100, 0.01), (0.5, 1e4, 0.01)])
def test_csit_noise_variance(d_e, snr, want):
    assert csit_noise_variance(d_e, snr) == pytest.approx(want, rel=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(0)
    with pytest.raises(ValueError):
        ChannelParams(2, 1, -0.1)


def test_sample_consistency():
    p = ChannelParams(3, 2, 0.7)
    s = sample_channel(p, 50.0, seed=4, stream=9)
    assert s.h.shape == (3, 2)
    assert np.array_equal(s.h, s.h_hat + s.e)
    assert np.allclose(s.gamma, np.sum(np.abs(s.h) ** 2, axis=1), atol=1e-12)
    assert np.allclose(s.gamma_hat, np.sum(np.abs(s.h_hat) ** 2, axis=1), atol=1e-12)
    var_e = csit_noise_variance(0.7, 50.0)
    assert np.allclose(s.gamma_bar, 2 / var_e * s.gamma, rtol=1e-12)


def test_stream_determinism():
    p = ChannelParams(2, 1, 0.5)
    a = sample_channel(p, 10.0, 1, 5)
    sample_channel(p, 10.0, 1, 6)
    b = sample_channel(p, 10.0, 1, 5)
    assert np.array_equal(a.h, b.h)
    c = sample_channel(p, 10.0, 1, 7)
    assert not np.array_equal(a.h, c.h)


def test_perfect_csit_limit():
    p = ChannelParams(2, 2, 400.0)  # sigma_e^2 = 1e-400 underflows to 0
    s = sample_channel(p, 10.0, 0, 0)
    assert np.allclose(s.gamma, s.gamma_hat)
    assert np.all(s.e == 0)


def test_no_csit_split():
    s = sample_channel(ChannelParams(3, 1, 0.0), 1e3, 0, 0)
    assert np.all(s.gamma_hat == 0)
    assert np.all(s.h_hat == 0)


def test_rejects_noisy_csit():
    with pytest.raises(CsitNoiseError, match="noisier"):
        sample_channel(ChannelParams(1, 1, 0.5), 0.5)


def test_gamma_mean_unit_exponential():
    g_hat, e = draw_gains(ChannelParams(1, 1, 0.0), 10.0, 1_000_000, rng.stream(2))
    gamma = np.abs(g_hat + e)[:, 0, 0] ** 2
    # Exp(1): mean 1, std 1
    assert abs(gamma.mean() - 1) <= 3 / np.sqrt(gamma.size)


@pytest.mark.parametrize("m,d_e,snr", [(1, 0.5, 10.0), (2, 1.0, 100.0), (3, 0.25, 1e4)])
def test_marginal_statistics(m, d_e, snr):
    p = ChannelParams(2, m, d_e)
    var_e = csit_noise_variance(d_e, snr)
    h_hat, e = draw_gains(p, snr, 100_000, rng.stream(8, m))
    h = h_hat + e
    assert np.var(h) == pytest.approx(1.0, rel=0.02)
    assert np.var(e) == pytest.approx(var_e, rel=0.02)
    g_hat = np.sum(np.abs(h_hat) ** 2, axis=2).ravel()
    want = m * (1 - var_e)
    # chi-square with 2m dof scaled by (1 - var_e)/2: variance m (1 - var_e)^2
    sd = np.sqrt(m) * (1 - var_e) / np.sqrt(g_hat.size)
    assert abs(g_hat.mean() - want) <= 3 * sd


def test_exponent_coords():
    class S:
        gamma_hat = np.array([1 / 100, 1.0, 100.0**2, 0.0])
        gamma_bar = np.array([1.0, 1 / 100, 1.0, 1.0])

    a_hat, a_bar = exponent_coords(S, 100.0)
    assert a_hat[:3] == pytest.approx([1.0, 0.0, -2.0])
    assert a_hat[3] == np.inf
    assert a_bar[:2] == pytest.approx([0.0, 1.0])
    with pytest.raises(ValueError):
        exponent_coords(S, 1.0)
