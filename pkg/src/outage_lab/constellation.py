"""Signal constellations and discrete-input AWGN mutual information."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import isotonic_regression

from outage_lab import rng
from outage_lab.errors import UnsupportedConstellation

# Above this SNR every supported constellation is decoded error-free to
# double precision; the estimator returns M without sampling.
SATURATION_SNR = 1e12

DEFAULT_N_NOISE = 200_000

# Upper bound on the number of (noise, x, x') terms evaluated at once.
_WORK_ELEMS = 1 << 22


@dataclass(frozen=True, eq=False)
class Constellation:
    points: np.ndarray
    bits_per_symbol: int
    kind: str = "custom"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).ravel()
        object.__setattr__(self, "points", pts)
        if pts.size != 2**self.bits_per_symbol:
            raise UnsupportedConstellation(
                f"{pts.size} points do not match M={self.bits_per_symbol}"
            )
        if abs(pts.mean()) > 1e-12:
            raise UnsupportedConstellation("constellation mean is not zero")
        if abs(np.mean(np.abs(pts) ** 2) - 1.0) > 1e-12:
            raise UnsupportedConstellation("constellation energy is not one")
        if np.unique(np.round(pts, 12)).size != pts.size:
            raise UnsupportedConstellation("constellation points are not distinct")

    @property
    def M(self):
        return self.bits_per_symbol

    @property
    def size(self):
        return self.points.size

    def to_dict(self):
        return {"kind": self.kind, "M": self.M}


def _gray(n):
    return n ^ (n >> 1)


def _pam_levels(bits):
    """Gray-ordered PAM levels -(2^b - 1), ..., 2^b - 1."""
    L = 1 << bits
    levels = np.empty(L)
    for k in range(L):
        levels[_gray(k)] = 2 * k - (L - 1)
    return levels


def build_constellation(kind, M):
    """Unit-energy, zero-mean ``2^M``-PSK or QAM.

    QAM points are indexed so that the label bits split into a Gray-coded
    in-phase and quadrature part. ``("QAM", 1)`` is BPSK.
    """
    kind = str(kind).upper()
    M = int(M)
    if M < 1:
        raise UnsupportedConstellation(f"M must be >= 1, got {M}")
    if kind == "PSK":
        k = np.arange(2**M)
        phase = 2 * np.pi * k / 2**M
        pts = np.cos(phase) + 1j * np.sin(phase)
        pts.real[np.abs(pts.real) < 1e-15] = 0.0
        pts.imag[np.abs(pts.imag) < 1e-15] = 0.0
    elif kind == "QAM":
        if M not in (1, 2, 4, 6):
            raise UnsupportedConstellation(f"unsupported constellation: QAM with M={M}")
        if M == 1:
            pts = np.array([-1.0, 1.0], dtype=complex)
        else:
            half = M // 2
            i_lv = _pam_levels(half)
            q_lv = _pam_levels(half)
            # label = (i bits, q bits)
            pts = (i_lv[:, None] + 1j * q_lv[None, :]).ravel()
        pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    else:
        raise UnsupportedConstellation(f"unsupported constellation: {kind} with M={M}")
    return Constellation(pts, M, kind)


def _log2_sum_exp(a, axis):
    amax = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - amax).sum(axis=axis, keepdims=True)) + amax
    return np.squeeze(out, axis=axis) / np.log(2.0)


def _noise(n, gen):
    return (gen.standard_normal(n) + 1j * gen.standard_normal(n)) * np.sqrt(0.5)


def _mi_terms(points, s, w):
    """Per-noise-draw value of log2 sum_x' exp(|w|^2 - |sqrt(s)(x - x') + w|^2),
    averaged over the transmitted symbol x."""
    diff = np.sqrt(s) * (points[:, None] - points[None, :])  # (x, x')
    K = points.size
    step = max(1, _WORK_ELEMS // (K * K))
    out = np.empty(w.size)
    for start in range(0, w.size, step):
        wc = w[start : start + step]
        z = diff[None, :, :] + wc[:, None, None]
        metric = np.abs(wc)[:, None, None] ** 2 - np.abs(z) ** 2
        out[start : start + step] = _log2_sum_exp(metric, axis=2).mean(axis=1)
    return out


def awgn_mutual_information(c, s, n_noise=DEFAULT_N_NOISE, seed=0):
    """Monte Carlo estimate of I_X(s) in bits per channel use.

    Noise is unit-variance circular complex Gaussian; every input symbol is
    enumerated for each noise draw and the denominator sums over all ``2^M``
    hypotheses. Returns ``(mi, stderr)``.
    """
    if s < 0:
        raise ValueError(f"SNR must be nonnegative, got {s}")
    if n_noise < 1:
        raise ValueError("n_noise must be >= 1")
    if s == 0:
        return 0.0, 0.0
    if s >= SATURATION_SNR:
        return float(c.M), 0.0
    w = _noise(n_noise, rng.stream(seed))
    t = _mi_terms(c.points, s, w)
    mi = c.M - t.mean()
    se = t.std(ddof=1) / np.sqrt(n_noise) if n_noise > 1 else 0.0
    return float(min(max(mi, 0.0), c.M)), float(se)


@dataclass(frozen=True, eq=False)
class MiTable:
    kind: str
    M: int
    snr_grid: np.ndarray
    mi_values: np.ndarray
    abs_error_bound: float = 0.0
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.snr_grid, dtype=float)
        vals = np.asarray(self.mi_values, dtype=float)
        object.__setattr__(self, "snr_grid", grid)
        object.__setattr__(self, "mi_values", vals)
        if grid.shape != vals.shape or grid.size < 2:
            raise ValueError("snr_grid and mi_values must have equal length >= 2")
        if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ValueError("snr_grid must start at 0 and increase strictly")
        if np.any(np.diff(vals) < 0):
            raise ValueError("mi_values must be nondecreasing")
        if abs(vals[0]) > max(self.abs_error_bound, 0.0):
            raise ValueError("mi_values[0] must be 0 at s=0")

    @property
    def s_max(self):
        return float(self.snr_grid[-1])

    @cached_property
    def interpolator(self):
        return PchipInterpolator(np.log1p(self.snr_grid), self.mi_values, extrapolate=False)

    def __call__(self, s):
        return mi_lookup(self, s)

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "M": self.M,
                "snr_grid": self.snr_grid.tolist(),
                "mi_values": self.mi_values.tolist(),
                "abs_error_bound": self.abs_error_bound,
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["kind"], int(d["M"]), d["snr_grid"], d["mi_values"], float(d["abs_error_bound"]))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def build_mi_table(c, s_min=1e-3, s_max=1e6, n_points=64, n_noise=DEFAULT_N_NOISE, seed=0):
    """Tabulate I_X on a log grid over ``[s_min, s_max]`` plus the s=0 anchor.

    Values are clamped to ``[0, M]`` and projected onto nondecreasing
    sequences before storage. Each grid node uses its own noise stream.
    """
    if not 0 < s_min < s_max:
        raise ValueError("need 0 < s_min < s_max")
    if n_points < 16:
        raise ValueError("n_points must be >= 16")
    grid = np.geomspace(s_min, s_max, n_points)
    vals = np.empty(n_points)
    errs = np.empty(n_points)
    for k, s in enumerate(grid):
        vals[k], errs[k] = awgn_mutual_information(c, s, n_noise, seed=_node_seed(seed, k))
    vals = np.clip(isotonic_regression(vals).x, 0.0, c.M)
    x = np.log1p(grid)
    # Error of predicting each interior node from its neighbours, a proxy for
    # the interpolation error at half the grid spacing.
    lin = vals[:-2] + (vals[2:] - vals[:-2]) * (x[1:-1] - x[:-2]) / (x[2:] - x[:-2])
    interp_err = float(np.max(np.abs(vals[1:-1] - lin))) if n_points > 2 else 0.0
    bound = 3.0 * float(errs.max()) + interp_err
    return MiTable(
        c.kind,
        c.M,
        np.concatenate([[0.0], grid]),
        np.concatenate([[0.0], vals]),
        bound,
    )


def _node_seed(seed, k):
    return int(np.random.SeedSequence(int(seed), spawn_key=(k,)).generate_state(1)[0])


def mi_lookup(t, s):
    """Shape-preserving interpolation of ``t`` in log(1+s).

    Queries above the last node return the last stored value.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("SNR must be nonnegative")
    x = np.log1p(np.minimum(s_arr, t.s_max))
    out = t.interpolator(x)
    out = np.clip(out, 0.0, t.M)
    if out.ndim == 0:
        return float(out)
    return out
