"""Outage SNR exponents: closed forms and a brute-force LP oracle.

The closed forms cover plain coded modulation under a peak-to-average
exponent constraint and rotated (precoded) transmission without a peak
constraint. The oracle recomputes the same exponents from scratch by
minimising the large-deviation rate function over the asymptotic outage
set, split into finitely many polyhedra, each solved by exhaustive vertex
enumeration.

An exponent of ``INF`` means the outage probability decays faster than any
power of the SNR.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from outage_lab.errors import BudgetExceeded, OutageLabError

INF = math.inf

ORACLE_MAX_B = 6
_SNAP = 1e-9


def _ceil(x):
    """Ceiling that treats values within 1e-9 of an integer as that integer."""
    r = round(x)
    if abs(x - r) < _SNAP:
        return int(r)
    return math.ceil(x)


def _is_int(x):
    return abs(x - round(x)) < _SNAP


def _fmt(v):
    return "inf" if v == INF else v


@dataclass(frozen=True)
class ExponentQuery:
    B: int
    m: int
    R: float
    M: int
    d_e: float = 0.0
    d_peak: float = INF
    N: int = 1

    def __post_init__(self):
        if self.B < 1 or self.m < 1 or self.M < 1 or self.N < 1:
            raise OutageLabError("B, m, M and N must be positive integers")
        if not 0 < self.R <= self.M:
            raise OutageLabError(f"need 0 < R <= M, got R={self.R}, M={self.M}")
        if self.d_e < 0:
            raise OutageLabError("d_e must be nonnegative")
        if not self.d_peak > 0:
            raise OutageLabError("d_peak must be positive")
        if self.B % self.N:
            raise OutageLabError(f"N={self.N} does not divide B={self.B}")

    @property
    def load(self):
        """BR/M, the number of blocks worth of information per codeword."""
        return self.B * self.R / self.M

    @property
    def full_rate(self):
        return abs(self.R - self.M) < _SNAP

    @property
    def at_step(self):
        """True when R sits on a discontinuity of the exponent staircase."""
        return _is_int(self.load / self.N)

    def to_dict(self):
        d = asdict(self)
        d["d_peak"] = _fmt(self.d_peak)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        dp = d.get("d_peak", INF)
        d["d_peak"] = INF if dp in (None, "inf", "Infinity") else float(dp)
        return cls(**d)


@dataclass
class ExponentResult:
    d: float
    case_label: str
    d_n_table: list = field(default_factory=list)  # (n, branch, value)
    regime: str | None = None
    argmin: list = field(default_factory=list)  # (n, branch) pairs attaining d
    at_step: bool = False
    d_above: float | None = None  # value just above R when at_step
    grid_d: float | None = None
    detail: dict = field(default_factory=dict)

    def to_record(self, q):
        return {
            "query": q.to_dict(),
            "d": _fmt(self.d),
            "case_label": self.case_label,
            "regime": self.regime,
            "d_n_table": [
                {"n": n, "branch": br, "d_n": _fmt(v)} for n, br, v in self.d_n_table
            ],
            "at_step": self.at_step,
            "d_above": None if self.d_above is None else _fmt(self.d_above),
        }

    def to_json(self, q):
        return json.dumps(self.to_record(q))


def _min_finite(values):
    vals = [v for v in values if v != INF]
    return min(vals) if vals else INF


def _argmin(table, d, tol=1e-9):
    if d == INF:
        return []
    return [(n, br) for n, br, v in table if v != INF and abs(v - d) <= tol]


# --------------------------------------------------------------------------
# closed forms


def singleton_bound(B, R, M):
    """Block-diversity Singleton bound B - ceil(BR/M) + 1."""
    if not 0 < R <= M:
        raise OutageLabError("need 0 < R <= M")
    return B - _ceil(B * R / M) + 1


def singleton_bound_rotated(B, R, M, N):
    """Singleton bound with full-diversity rotations of size N."""
    if N < 1 or B % N:
        raise OutageLabError(f"N={N} does not divide B={B}")
    if not 0 < R <= M:
        raise OutageLabError("need 0 < R <= M")
    return B + N - N * _ceil(B * R / (M * N))


def _regime(q):
    """Which of the proof's parameter regimes the query falls in."""
    if q.d_peak < q.d_e:
        return "1.1"
    dsb = singleton_bound(q.B, q.R, q.M)
    if q.d_peak >= 1 + q.m * q.B * q.d_e:
        return "A"
    if q.d_peak > 1 + q.m * q.d_e * dsb:
        return "B"
    return "C"


def case_exponent_dn(q, n, branch):
    """Per-region exponent d_n^(branch) from the case analysis.

    Branch 1 is the peak-limited region (power at snr^d_peak), branch 2 the
    inversion region (power at snr^(1 + m sum alpha_hat)). ``n`` counts the
    blocks whose estimate is above the CSIT noise level.
    """
    if q.N != 1:
        raise OutageLabError("case formulas are for unrotated transmission")
    if not 0 <= n <= q.B:
        raise OutageLabError(f"n must be in [0, B], got {n}")
    B, m, de, dp, load = q.B, q.m, q.d_e, q.d_peak, q.load
    outage_possible = load - n > _SNAP
    if branch == 1:
        if dp < de:
            if outage_possible:
                return m * (B - n) * de
            return m * (B - n) * de + m * dp * (n - _ceil(load) + 1)
        if not outage_possible or dp == INF:
            return INF
        return m * (dp - de) * (B - n + 1 - _ceil(load - n)) + max(dp - 1, m * (B - n) * de)
    if branch == 2:
        if dp < 1 + m * (B - n) * de or not outage_possible:
            return INF
        k = B - n - _ceil(load - n) + 1
        return m * (B - n) * de + m * k * (1 + m * (B - n) * de - de)
    raise OutageLabError("branch must be 1 or 2")


def outage_exponent_thm1(q):
    """Exponent of plain coded modulation with noisy-CSIT power control."""
    if q.N != 1:
        raise OutageLabError("use outage_exponent_thm2 for rotated transmission")
    m = q.m
    dsb = singleton_bound(q.B, q.R, q.M)
    knee = 1 + m * dsb * q.d_e
    if q.d_peak <= knee:
        d, label = m * dsb * q.d_peak, "Peak-limited"
    else:
        d, label = m * dsb * knee, "CSIT-limited"
    table = [(n, br, case_exponent_dn(q, n, br)) for n in range(q.B + 1) for br in (1, 2)]
    res = ExponentResult(d, label, table, regime=_regime(q), at_step=q.at_step)
    res.argmin = _argmin(table, d)
    if q.at_step and not q.full_rate:
        dsb_up = dsb - 1
        knee_up = 1 + m * dsb_up * q.d_e
        res.d_above = m * dsb_up * min(q.d_peak, knee_up)
    return res


def rotated_case_dn(q, n):
    """d_n for rotated transmission, n known blocks packed into the fewest groups."""
    B, m, de, N = q.B, q.m, q.d_e, q.N
    groups_known = _ceil(n / N)
    per_group = q.load / N
    if groups_known >= per_group - _SNAP:
        return INF
    K_n = _ceil(per_group - groups_known) - 1
    return m * N * (B // N - groups_known - K_n) * (1 + m * (B - n) * de - de) + m * (B - n) * de


def outage_exponent_thm2(q):
    """Exponent with full-diversity rotations of size N and no peak constraint."""
    if q.d_peak != INF:
        raise OutageLabError("rotated exponent defined for unconstrained peak only")
    m = q.m
    drot = singleton_bound_rotated(q.B, q.R, q.M, q.N)
    d = m * drot * (1 + m * drot * q.d_e)
    table = [(n, 2, rotated_case_dn(q, n)) for n in range(q.B + 1)]
    res = ExponentResult(d, "rotated", table, regime=None, at_step=q.at_step)
    res.argmin = _argmin(table, d)
    if q.at_step and not q.full_rate:
        drot_up = drot - q.N
        res.d_above = m * drot_up * (1 + m * drot_up * q.d_e)
    return res


# --------------------------------------------------------------------------
# LP oracle


@lru_cache(maxsize=None)
def _combos(p, k):
    return np.array(list(itertools.combinations(range(p), k)), dtype=np.intp).reshape(-1, k)


def solve_lp_vertices(c, A, b, tol=1e-9):
    """min c.x subject to A x >= b, by enumerating every basic solution.

    The feasible set must be pointed and the objective bounded below on it,
    so the optimum (when feasible) sits at a vertex. Returns ``(value, x)``;
    ``(INF, None)`` if infeasible.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    p, k = A.shape
    if k == 0:
        return (0.0, np.zeros(0)) if np.all(b <= tol) else (INF, None)
    if p < k:
        return INF, None
    idx = _combos(p, k)
    As = A[idx]
    bs = b[idx]
    det = np.linalg.det(As)
    ok = np.abs(det) > 1e-10
    if not ok.any():
        return INF, None
    xs = np.linalg.solve(As[ok], bs[ok][..., None])[..., 0]
    slack = xs @ A.T - b
    feas = np.all(slack >= -tol * (1 + np.abs(b)), axis=1)
    if not feas.any():
        return INF, None
    vals = xs[feas] @ c
    j = int(np.argmin(vals))
    return float(vals[j]), xs[feas][j]


# Variable layout of the per-class LP: alpha_hat and alpha_bar of untied bad
# blocks, of untied free blocks, alpha_hat of tied bad and tied free blocks.
_VARS = ("ah_ub", "ab_ub", "ah_uf", "ab_uf", "ah_tb", "ah_tf")


def class_lp(counts, m, d_e, d_peak, branch):
    """Exponent of one outage polyhedron.

    ``counts = (untied bad, untied free, tied bad, tied free)`` block counts.
    Untied blocks carry alpha_hat >= d_e, alpha_bar >= 0; tied blocks carry
    0 <= alpha_hat <= d_e with alpha_bar = alpha_hat - d_e. A bad block's
    alpha_bar is at least pi - d_e, where pi = d_peak in branch 1 and
    pi = 1 + m sum(alpha_hat) in branch 2. Free blocks are unconstrained
    beyond their region. Every class is exchangeable, so one coordinate per
    class suffices. Returns ``(value, {var: value})``.
    """
    n_ub, n_uf, n_tb, n_tf = counts
    size = {"ah_ub": n_ub, "ab_ub": n_ub, "ah_uf": n_uf, "ab_uf": n_uf, "ah_tb": n_tb, "ah_tf": n_tf}
    live = [v for v in _VARS if size[v] > 0]
    pos = {v: i for i, v in enumerate(live)}
    k = len(live)
    rows, rhs = [], []

    def row(coefs, r):
        a = np.zeros(k)
        for v, cf in coefs.items():
            if v in pos:
                a[pos[v]] += cf
        rows.append(a)
        rhs.append(r)

    S = {v: size[v] for v in ("ah_ub", "ah_uf", "ah_tb", "ah_tf")}
    mS = {v: m * s for v, s in S.items()}
    neg_mS = {v: -c for v, c in mS.items()}

    for v in ("ah_ub", "ah_uf"):
        if v in pos:
            row({v: 1.0}, d_e)
    for v in ("ab_ub", "ab_uf"):
        if v in pos:
            row({v: 1.0}, 0.0)
    for v in ("ah_tb", "ah_tf"):
        if v in pos:
            row({v: 1.0}, 0.0)
            row({v: -1.0}, -d_e)

    if branch == 1:
        if d_peak == INF:
            return INF, None
        row(mS, d_peak - 1.0)
        if "ab_ub" in pos:
            row({"ab_ub": 1.0}, d_peak - d_e)
        if "ah_tb" in pos:
            row({"ah_tb": 1.0}, d_peak)
    else:
        if d_peak != INF:
            row(neg_mS, 1.0 - d_peak)
        if "ab_ub" in pos:
            row({"ab_ub": 1.0, **neg_mS}, 1.0 - d_e)
        if "ah_tb" in pos:
            coefs = dict(neg_mS)
            coefs["ah_tb"] = coefs.get("ah_tb", 0.0) + 1.0
            row(coefs, 1.0)

    cost = np.array([m * size[v] for v in live], dtype=float)
    A = np.array(rows).reshape(len(rows), k)
    val, x = solve_lp_vertices(cost, A, np.array(rhs))
    if x is None:
        return INF, None
    return val, {v: float(x[pos[v]]) for v in live}


def _oracle_table(q, tied_sets_for, groups, threshold):
    """Minimise over all (n, tied set, group pattern, branch) polyhedra.

    ``groups`` partitions the blocks; a pattern marks each group good or bad
    and is an outage pattern when fewer than ``threshold`` groups are good.
    Blocks in bad groups are constrained bad; the rest are free.
    """
    B = q.B
    K = len(groups)
    branches = (1, 2) if q.d_peak != INF else (2,)
    memo = {}
    table, witness = [], {}
    for n in range(B + 1):
        best = {br: INF for br in branches}
        arg = {br: None for br in branches}
        for tied in tied_sets_for(n):
            tied = set(tied)
            for pattern in itertools.product((False, True), repeat=K):
                if sum(pattern) >= threshold - _SNAP:
                    continue
                bad = set()
                for good, g in zip(pattern, groups):
                    if not good:
                        bad.update(g)
                counts = (
                    sum(1 for i in range(B) if i not in tied and i in bad),
                    sum(1 for i in range(B) if i not in tied and i not in bad),
                    sum(1 for i in tied if i in bad),
                    sum(1 for i in tied if i not in bad),
                )
                for br in branches:
                    key = (counts, br)
                    if key not in memo:
                        memo[key] = class_lp(counts, q.m, q.d_e, q.d_peak, br)
                    val, x = memo[key]
                    if val < best[br] - 1e-12:
                        best[br] = val
                        arg[br] = {"tied": sorted(tied), "pattern": pattern, "counts": counts, "x": x}
        for br in (1, 2):
            table.append((n, br, best.get(br, INF)))
            witness[(n, br)] = arg.get(br)
    return table, witness


def _check_budget(q):
    if q.B > ORACLE_MAX_B:
        raise BudgetExceeded(f"oracle budget exceeded: B={q.B} > {ORACLE_MAX_B}")


def oracle_exponent(q, grid_step=None):
    """Brute-force exponent of plain coded modulation.

    For every n, the last n blocks are the ones whose estimates sit above
    the CSIT noise level. With ``grid_step`` a coarse grid search over the
    original (non-relaxed) outage set is run as well and stored in
    ``grid_d``.
    """
    _check_budget(q)
    if q.N != 1:
        raise OutageLabError("use oracle_exponent_rotated for rotated transmission")
    B = q.B
    groups = [(i,) for i in range(B)]
    table, wit = _oracle_table(q, lambda n: [range(B - n, B)], groups, q.load)
    d = _min_finite(v for _, _, v in table)
    arg = _argmin(table, d)
    label = "CSIT-limited" if any(br == 2 for _, br in arg) else "Peak-limited"
    res = ExponentResult(d, label, table, regime=_regime(q), argmin=arg, at_step=q.at_step)
    res.detail = {"witness": {f"{n},{br}": wit[(n, br)] for n, br in arg}}
    if grid_step is not None:
        res.grid_d = grid_exponent(q, grid_step)
    return res


def oracle_exponent_rotated(q):
    """Brute-force exponent with full-diversity rotations of size N.

    A rotation group delivers its MN bits as soon as one member block is
    good, so outage needs fewer than BR/(MN) good groups. All placements of
    the n well-estimated blocks are enumerated. The closed-form per-n chain
    is reported alongside as ``detail["chain"]``.
    """
    _check_budget(q)
    if q.d_peak != INF:
        raise OutageLabError("rotated exponent defined for unconstrained peak only")
    B, N = q.B, q.N
    groups = [tuple(range(k * N, (k + 1) * N)) for k in range(B // N)]
    table, wit = _oracle_table(
        q, lambda n: itertools.combinations(range(B), n), groups, q.load / N
    )
    d = _min_finite(v for _, _, v in table)
    res = ExponentResult(d, "rotated", table, argmin=_argmin(table, d), at_step=q.at_step)
    chain = [rotated_case_dn(q, n) for n in range(B + 1)]
    res.detail = {
        "chain": chain,
        "chain_d": _min_finite(chain),
        "witness": {f"{n},{br}": wit[(n, br)] for n, br in res.argmin},
    }
    return res


# --------------------------------------------------------------------------
# grid search


def grid_exponent(q, step=0.05, max_points=2 * 10**8):
    """Minimum of the rate function over a grid of the outage set.

    Strict inequalities are applied as stated: untied blocks have
    alpha_bar > 0 and alpha_hat >= d_e, tied blocks 0 <= alpha_hat < d_e,
    and block i is good iff alpha_bar_i <= pi - d_e.
    """
    B, m, de, dp = q.B, q.m, q.d_e, q.d_peak
    amax = 1 + m * B * de + de + min(dp, 1 + m * B * de)
    half = step / 2
    untied_hat = np.arange(de, amax + half, step)
    untied_bar = np.arange(step, amax + half, step)
    tied_hat = np.arange(0.0, de - half, step) if de > 0 else np.zeros(0)
    best = INF
    for n in range(B + 1):
        axes = [untied_hat] * (B - n) + [untied_bar] * (B - n) + [tied_hat] * n
        if any(a.size == 0 for a in axes):
            continue
        total = math.prod(a.size for a in axes)
        if total > max_points:
            raise BudgetExceeded(f"grid of {total} points exceeds budget")
        # iterate over the first axis to bound memory
        rest = axes[1:]
        mesh_rest = np.meshgrid(*rest, indexing="ij") if rest else []
        mesh_rest = [g.ravel() for g in mesh_rest]
        for v0 in axes[0]:
            cols = [np.full(mesh_rest[0].size if rest else 1, v0)] + mesh_rest
            u_hat = np.stack(cols[: B - n], axis=1) if B - n else np.zeros((cols[0].size, 0))
            u_bar = np.stack(cols[B - n : 2 * (B - n)], axis=1) if B - n else np.zeros((cols[0].size, 0))
            t_hat = np.stack(cols[2 * (B - n) :], axis=1) if n else np.zeros((cols[0].size, 0))
            S = u_hat.sum(axis=1) + t_hat.sum(axis=1)
            pi = np.minimum(dp, 1 + m * S)
            good = (u_bar <= (pi - de)[:, None]).sum(axis=1) + (t_hat - de <= (pi - de)[:, None]).sum(axis=1)
            out = good < q.load - _SNAP
            if out.any():
                obj = m * S[out] + m * u_bar[out].sum(axis=1)
                best = min(best, float(obj.min()))
    return best


# --------------------------------------------------------------------------
# staircases


def staircase(B, m, d_e, d_peak=INF, N=1, ratios=None, oracle=False):
    """Exponent against R/M for a fixed channel. Returns a list of dicts."""
    if ratios is None:
        ratios = [k / 100 for k in range(1, 101)]
    rows = []
    for r in ratios:
        q = ExponentQuery(B, m, r, 1, d_e, d_peak, N)
        res = outage_exponent_thm1(q) if N == 1 else outage_exponent_thm2(q)
        row = {"R_over_M": r, "d": res.d, "case_label": res.case_label}
        if oracle:
            orc = oracle_exponent(q) if N == 1 else oracle_exponent_rotated(q)
            row["d_oracle"] = orc.d
            row["agree"] = abs(orc.d - res.d) <= 1e-9 or (orc.d == res.d == INF)
        rows.append(row)
    return rows
