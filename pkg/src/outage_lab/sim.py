"""Monte Carlo outage probability and empirical exponent fits."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from outage_lab import rng
from outage_lab.channel import ChannelParams, draw_gains
from outage_lab.constellation import build_constellation, build_mi_table, mi_lookup
from outage_lab.errors import BudgetExceeded, OutageLabError
from outage_lab.exponents import (
    INF,
    ExponentQuery,
    outage_exponent_thm1,
    outage_exponent_thm2,
    singleton_bound,
    singleton_bound_rotated,
)
from outage_lab.power import PowerPolicy, _snr_key, allocate_power, calibrate_scale
from outage_lab.rotation import RotationScheme, build_group_mi_table

log = logging.getLogger(__name__)

Z95 = float(norm.ppf(0.975))
CSV_COLUMNS = ("snr_db", "pout", "ci_low", "ci_high", "n", "events")


@dataclass(frozen=True, eq=False)
class SimConfig:
    params: ChannelParams
    constellation: object
    rate_R: float
    policy: PowerPolicy
    snr_grid_db: tuple
    n_samples: int
    seed: int = 0
    rotation: RotationScheme | None = None
    min_events: int = 100
    n_pilot: int = 1_000_000
    label: str = ""

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise OutageLabError("snr_grid_db must be strictly increasing")
        if not 0 < self.rate_R < self.constellation.M:
            raise OutageLabError("need 0 < R < M")
        if self.n_samples < 0:
            raise OutageLabError("n_samples must be >= 0")
        if self.rotation is not None and self.rotation.B != self.params.B:
            raise OutageLabError("rotation size does not match B")

    @property
    def N(self):
        return 1 if self.rotation is None else self.rotation.N


@dataclass(frozen=True)
class OutageEstimate:
    snr_db: float
    pout: float
    ci_low: float
    ci_high: float
    n: int
    events: int

    @property
    def snr(self):
        return 10 ** (self.snr_db / 10)


@dataclass(frozen=True)
class SlopeFit:
    slope: float  # empirical exponent, -d log pout / d log snr
    stderr: float
    points_used: int


def wilson_interval(k, n, z=Z95):
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = n + z * z
    center = (k + z * z / 2) / denom
    half = z / denom * math.sqrt(k * (n - k) / n + z * z / 4)
    return max(0.0, min(p, center - half)), min(1.0, max(p, center + half))


@lru_cache(maxsize=8)
def default_mi_table(kind, M, seed=0):
    c = build_constellation(kind, M)
    return build_mi_table(c, 1e-3, 1e6, 64, 200_000, seed)


@lru_cache(maxsize=4)
def _group_table(family, kind, M):
    from outage_lab.rotation import build_rotation

    return build_group_mi_table(build_rotation(family, 2), build_constellation(kind, M))


def check_coverage(table, c):
    if table.M != c.M:
        raise OutageLabError("MI table constellation does not match")
    if table.mi_values[-1] < c.M - 1e-3:
        raise OutageLabError(
            f"MI table does not reach saturation (I={table.mi_values[-1]:.4f} at s={table.s_max:g})"
        )


def _count_chunk(cfg, snr, scale, table, group_table, key, idx, n):
    gen = rng.stream(cfg.seed, *key, idx)
    h_hat, e = draw_gains(cfg.params, snr, n, gen)
    gamma_hat = np.sum(np.abs(h_hat) ** 2, axis=2)
    gamma = np.sum(np.abs(h_hat + e) ** 2, axis=2)
    if cfg.policy.kind == "Uniform":
        P = np.full(n, snr * scale)
    else:
        P = allocate_power(cfg.policy, gamma_hat, snr, scale=scale)
    eff = P[:, None] * gamma
    if group_table is None:
        mi = mi_lookup(table, eff).mean(axis=1)
    else:
        N = cfg.N
        pairs = eff.reshape(n * cfg.rotation.K, N)
        mi = group_table(pairs).reshape(n, cfg.rotation.K).mean(axis=1)
    return int(np.count_nonzero(mi < cfg.rate_R))


def _workers(workers):
    if workers is None:
        workers = int(os.environ.get("OUTAGE_LAB_THREADS", "1") or 1)
    return max(1, int(workers))


def estimate_outage(cfg, mi_table=None, workers=None):
    """Outage probability at every SNR of ``cfg``.

    Samples are drawn in fixed-size chunks, each from its own counter-based
    stream keyed by (seed, snr, chunk), so the event counts do not depend on
    ``workers``.
    """
    if cfg.n_samples == 0:
        return []
    c = cfg.constellation
    group_table = None
    if cfg.N == 1:
        table = mi_table if mi_table is not None else default_mi_table(c.kind, c.M)
        check_coverage(table, c)
    else:
        if cfg.N != 2:
            raise BudgetExceeded("rotated simulation supports N <= 2")
        if c.kind not in ("PSK", "QAM"):
            raise OutageLabError("rotated simulation needs a built-in constellation")
        table = None
        group_table = _group_table(cfg.rotation.family, c.kind, c.M)
    nw = _workers(workers)
    out = []
    for snr_db in cfg.snr_grid_db:
        snr = 10 ** (snr_db / 10)
        if cfg.policy.auto_scale:
            scale = calibrate_scale(cfg.policy, cfg.params, snr, cfg.n_pilot, cfg.seed)
        else:
            scale = float(cfg.policy.scale)
        key = (0, _snr_key(snr))
        jobs = list(rng.chunks(cfg.n_samples))

        def run(job):
            idx, a, b = job
            return _count_chunk(cfg, snr, scale, table, group_table, key, idx, b - a)

        if nw > 1:
            with ThreadPoolExecutor(nw) as ex:
                events = sum(ex.map(run, jobs))
        else:
            events = sum(map(run, jobs))
        n = cfg.n_samples
        lo, hi = wilson_interval(events, n)
        out.append(OutageEstimate(snr_db, events / n, lo, hi, n, events))
        log.debug("snr=%.2f dB pout=%.3g events=%d", snr_db, events / n, events)
    return out


def fit_slope(estimates, min_events=100):
    """Weighted least-squares exponent from points with enough events.

    Weights are the event counts, the inverse variance of log pout.
    """
    pts = [e for e in estimates if e.events >= min_events and e.pout > 0]
    if len(pts) < 2:
        raise OutageLabError(f"need at least 2 points with >= {min_events} events, got {len(pts)}")
    x = np.log10([e.snr for e in pts])
    y = np.log10([e.pout for e in pts])
    w = np.array([e.events for e in pts], dtype=float) * np.log(10) ** 2
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    b = np.sum(w * (x - xm) * (y - ym)) / sxx
    return SlopeFit(float(-b), float(math.sqrt(1.0 / sxx)), len(pts))


def theory_exponent(cfg):
    """Asymptotic exponent predicted for the configuration."""
    p = cfg.params
    M = cfg.constellation.M
    if cfg.policy.kind == "Uniform" or p.d_e == 0:
        if cfg.N == 1:
            return p.m * singleton_bound(p.B, cfg.rate_R, M)
        return p.m * singleton_bound_rotated(p.B, cfg.rate_R, M, cfg.N)
    q = ExponentQuery(p.B, p.m, cfg.rate_R, M, p.d_e, cfg.policy.d_peak, cfg.N)
    if cfg.N == 1:
        return outage_exponent_thm1(q).d
    if q.d_peak != INF:
        return None
    return outage_exponent_thm2(q).d


def estimates_csv(estimates):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in estimates:
        w.writerow([repr(e.snr_db), repr(e.pout), repr(e.ci_low), repr(e.ci_high), e.n, e.events])
    return buf.getvalue()


SUMMARY_COLUMNS = ("config", "label", "slope", "stderr", "points_used", "theory_d", "error")


def sweep(cfgs, mi_table=None, workers=None):
    """Run every config; errors are recorded per row instead of raised.

    Returns a list of dicts with the estimates and the slope fit.
    """
    rows = []
    for i, cfg in enumerate(cfgs):
        row = {"config": i, "label": cfg.label, "estimates": [], "fit": None, "error": ""}
        try:
            row["theory_d"] = theory_exponent(cfg)
        except OutageLabError as exc:
            row["theory_d"] = None
            row["error"] = str(exc)
        try:
            row["estimates"] = estimate_outage(cfg, mi_table, workers)
            row["fit"] = fit_slope(row["estimates"], cfg.min_events)
        except OutageLabError as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows


def summary_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        fit = r["fit"]
        td = r.get("theory_d")
        w.writerow(
            [
                r["config"],
                r["label"],
                "" if fit is None else repr(fit.slope),
                "" if fit is None else repr(fit.stderr),
                "" if fit is None else fit.points_used,
                "" if td is None else ("inf" if td == INF else repr(td)),
                r["error"],
            ]
        )
    return buf.getvalue()
