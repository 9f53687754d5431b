"""Full-diversity rotations for precoding groups of N fading blocks."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from outage_lab import rng
from outage_lab.constellation import SATURATION_SNR, _log2_sum_exp, _noise
from outage_lab.errors import BudgetExceeded, OutageLabError

ZERO_TOL = 1e-9
VERIFY_BUDGET = 2**20
GROUP_MI_BUDGET = 2**16
_WORK_ELEMS = 1 << 22

# Generator of the Vandermonde rotation: a root of x^N - theta0 whose
# conjugates over Q(i) are all N-th roots of theta0 * (unit).
_CYCLOTOMIC_THETA = {
    1: 1.0 + 0j,
    2: np.exp(1j * np.pi / 4),
    3: np.exp(2j * np.pi / 9),
    4: np.exp(1j * np.pi / 8),
}


def _check_unitary(U, tol=1e-10):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise OutageLabError("rotation must be a square matrix")
    err = np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0])))
    if err > tol:
        raise OutageLabError(f"matrix is not unitary (error {err:.3g})")
    return U


def build_rotation(family, N):
    """N x N unitary rotation. ``family`` is ``identity`` or ``cyclotomic``.

    The cyclotomic rotation is the normalised Vandermonde matrix
    ``U[k, l] = theta_k^l / sqrt(N)`` with ``theta_k = theta * exp(2j pi k / N)``.
    """
    family = str(family).lower()
    if family == "identity":
        return np.eye(N, dtype=complex)
    if family != "cyclotomic" or N not in _CYCLOTOMIC_THETA:
        raise OutageLabError(f"unsupported rotation: {family} N={N}")
    if N == 1:
        return np.ones((1, 1), dtype=complex)
    theta = _CYCLOTOMIC_THETA[N] * np.exp(2j * np.pi * np.arange(N) / N)
    U = theta[:, None] ** np.arange(N)[None, :] / np.sqrt(N)
    # Orthonormalise to remove rounding drift.
    q, r = np.linalg.qr(U)
    U = q * (np.diag(r) / np.abs(np.diag(r)))[None, :]
    return _check_unitary(U)


def load_rotation(path):
    """Read a matrix stored as rows of ``[re, im]`` pairs."""
    with open(path) as f:
        rows = json.load(f)
    if isinstance(rows, dict):
        rows = rows["matrix"]
    U = np.array([[complex(re, im) for re, im in row] for row in rows])
    return _check_unitary(U)


def dump_rotation(U):
    return json.dumps([[[z.real, z.imag] for z in row] for row in np.asarray(U)])


@dataclass(frozen=True, eq=False)
class RotationScheme:
    """Block-diagonal precoder made of K copies of an N x N rotation."""

    N: int
    K: int
    matrices: tuple
    family: str = "custom"

    def __post_init__(self):
        if len(self.matrices) != self.K:
            raise OutageLabError("need exactly K matrices")
        for U in self.matrices:
            if np.asarray(U).shape != (self.N, self.N):
                raise OutageLabError("rotation matrices must be N x N")
            _check_unitary(U)

    @property
    def B(self):
        return self.N * self.K

    @classmethod
    def build(cls, family, N, B):
        if B % N:
            raise OutageLabError(f"N={N} does not divide B={B}")
        U = build_rotation(family, N)
        return cls(N, B // N, tuple(U for _ in range(B // N)), family)

    def block_matrix(self):
        out = np.zeros((self.B, self.B), dtype=complex)
        for k, U in enumerate(self.matrices):
            out[k * self.N : (k + 1) * self.N, k * self.N : (k + 1) * self.N] = U
        return out


def difference_set(c):
    """Distinct symbol differences x - x', ordered with positive parts first."""
    d = (c.points[:, None] - c.points[None, :]).ravel()
    d = np.unique(np.round(d, 12))
    order = np.lexsort((-d.imag, -d.real))
    return d[order]


def verify_full_diversity(U, c):
    """Exhaustively check that U maps every nonzero difference vector over
    the constellation to a vector with no zero entry.

    Returns a dict ``{ok, min_product_distance, witness}``.
    """
    U = _check_unitary(U)
    N = U.shape[0]
    if c.size**N > VERIFY_BUDGET:
        raise BudgetExceeded(f"|X|^N = {c.size**N} exceeds {VERIFY_BUDGET}")
    D = difference_set(c)
    vecs = np.array(list(itertools.product(D, repeat=N)), dtype=complex).reshape(-1, N)
    vecs = vecs[np.any(np.abs(vecs) > ZERO_TOL, axis=1)]
    mags = np.abs(vecs @ U.T)
    prod = np.prod(mags, axis=1)
    bad = np.flatnonzero(np.any(mags <= ZERO_TOL, axis=1))
    witness = None
    if bad.size:
        w = vecs[bad[0]]
        witness = [complex(z) for z in w]
    return {
        "ok": bad.size == 0,
        "min_product_distance": float(prod.min()),
        "witness": witness,
        "n_differences": int(vecs.shape[0]),
    }


def _group_symbols(c, N):
    idx = np.array(list(itertools.product(range(c.size), repeat=N)), dtype=np.intp).reshape(-1, N)
    return c.points[idx]


def rotated_group_mi(U, c, effective_snrs, n_noise=20_000, seed=0):
    """Per-block mutual information of one rotated group.

    The group channel is ``z_i = sqrt(snr_i) (U s)_i + w_i`` with ``s``
    uniform on X^N and unit-variance complex noise. The transmitted vector is
    drawn at random per noise draw; the denominator enumerates all 2^(MN)
    hypotheses. Returns ``(mi, stderr)`` in bits per channel use per block.
    """
    U = _check_unitary(U)
    N = U.shape[0]
    snrs = np.asarray(effective_snrs, dtype=float)
    if snrs.shape != (N,) or np.any(snrs < 0):
        raise OutageLabError("need N nonnegative effective SNRs")
    if c.size**N > GROUP_MI_BUDGET:
        raise BudgetExceeded(f"2^(MN) = {c.size**N} exceeds {GROUP_MI_BUDGET}")
    if np.all(snrs == 0):
        return 0.0, 0.0
    snrs = np.minimum(snrs, SATURATION_SNR)
    S = _group_symbols(c, N)  # (K, N)
    X = S @ U.T  # rotated hypotheses
    gain = np.sqrt(snrs)
    gen = rng.stream(seed)
    K = S.shape[0]
    tx = gen.integers(0, K, n_noise)
    w = _noise(n_noise * N, gen).reshape(n_noise, N)
    step = max(1, _WORK_ELEMS // (K * N))
    t = np.empty(n_noise)
    for a in range(0, n_noise, step):
        wc = w[a : a + step]
        diff = (X[tx[a : a + step]][:, None, :] - X[None, :, :]) * gain  # (n, K, N)
        z = diff + wc[:, None, :]
        metric = (np.abs(wc) ** 2).sum(axis=1)[:, None] - (np.abs(z) ** 2).sum(axis=2)
        t[a : a + step] = _log2_sum_exp(metric, axis=1)
    total = N * c.M - t.mean()
    se = t.std(ddof=1) / np.sqrt(n_noise) / N if n_noise > 1 else 0.0
    return float(min(max(total / N, 0.0), c.M)), float(se)


@dataclass(frozen=True, eq=False)
class GroupMiTable:
    """Rotated-group MI tabulated on a square log grid (N = 2 only)."""

    M: int
    snr_axis: np.ndarray
    values: np.ndarray
    matrix: np.ndarray = field(repr=False, default=None)

    @cached_property
    def _interp(self):
        x = np.log1p(self.snr_axis)
        return RegularGridInterpolator((x, x), self.values, method="linear")

    def __call__(self, snrs):
        s = np.minimum(np.asarray(snrs, dtype=float), self.snr_axis[-1])
        out = self._interp(np.log1p(s))
        return np.clip(out, 0.0, self.M)


def build_group_mi_table(U, c, s_min=1e-2, s_max=1e4, n_points=24, n_noise=4000, seed=0):
    """Tabulate ``rotated_group_mi`` for N = 2 on a log grid plus the s=0 row.

    The table is made nondecreasing along both axes by running maxima.
    """
    U = _check_unitary(U)
    if U.shape[0] != 2:
        raise BudgetExceeded("rotated simulation tables are supported for N=2 only")
    axis = np.concatenate([[0.0], np.geomspace(s_min, s_max, n_points)])
    L = axis.size
    vals = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            # Same noise stream at every node keeps the surface smooth.
            vals[i, j] = rotated_group_mi(U, c, (axis[i], axis[j]), n_noise, seed)[0]
    vals = np.maximum.accumulate(np.maximum.accumulate(vals, axis=0), axis=1)
    return GroupMiTable(c.M, axis, vals, U)
