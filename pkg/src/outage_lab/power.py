"""Long-term power control driven by the CSIT estimates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from outage_lab import rng
from outage_lab.channel import draw_gains

KINDS = ("Uniform", "TruncatedInversion")


@dataclass(frozen=True)
class PowerPolicy:
    """Per-codeword power rule.

    ``TruncatedInversion`` realises the exponent-optimal allocation
    ``P = scale * min(snr^d_peak, snr * prod_i clip(gamma_hat_i, snr^-alpha_cap, 1)^-m)``.
    ``scale="auto"`` asks the simulator to calibrate the constant per SNR so
    that the average-power constraint holds with equality.
    """

    kind: str = "Uniform"
    d_peak: float = math.inf
    m: int = 1
    d_e: float = 0.0
    scale: float | str = 1.0
    alpha_cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown power policy {self.kind!r}")
        if self.d_peak < 1:
            raise ValueError("d_peak must be >= 1")
        if self.scale != "auto" and not self.scale > 0:
            raise ValueError("scale must be positive or 'auto'")

    @property
    def auto_scale(self):
        return self.scale == "auto"

    def cap(self, B):
        """Largest estimate exponent the inversion reacts to."""
        if self.alpha_cap is not None:
            return self.alpha_cap
        if math.isfinite(self.d_peak):
            return self.d_peak + 1.0
        # Estimates below the CSIT noise floor carry no information about the
        # true gain; inverting them only burns average power.
        return self.d_e

    def with_scale(self, scale):
        return replace(self, scale=float(scale))

    def to_dict(self):
        dp = self.d_peak if math.isfinite(self.d_peak) else "inf"
        return {"kind": self.kind, "d_peak": dp, "scale": self.scale}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d, m=1, d_e=0.0):
        dp = d.get("d_peak", math.inf)
        dp = math.inf if dp in (None, "inf", "Infinity") else float(dp)
        scale = d.get("scale", 1.0)
        scale = "auto" if scale == "auto" else float(scale)
        return cls(d["kind"], dp, m, d_e, scale)

    @classmethod
    def from_json(cls, text, m=1, d_e=0.0):
        return cls.from_dict(json.loads(text), m, d_e)


def power_exponent(policy, gamma_hat, snr):
    """log P / log snr before scaling, for gamma_hat of shape (..., B)."""
    g = np.asarray(gamma_hat, dtype=float)
    if policy.kind == "Uniform":
        return np.ones(g.shape[:-1])
    B = g.shape[-1]
    log_snr = math.log(snr)
    with np.errstate(divide="ignore"):
        a_hat = -np.log(g) / log_snr
    # exponents live on the nonnegative orthant; strong estimates earn no rebate
    a_hat = np.clip(a_hat, 0.0, policy.cap(B))
    return np.minimum(policy.d_peak, 1.0 + policy.m * a_hat.sum(axis=-1))


def allocate_power(policy, gamma_hat, snr, scale=None):
    """Per-codeword power, used on every block.

    Accepts a single length-B vector or a batch of shape ``(n, B)``.
    """
    if snr <= 0 or (policy.kind != "Uniform" and snr <= 1):
        raise ValueError("power control needs snr > 1")
    g = np.asarray(gamma_hat, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma_hat must be nonnegative")
    if scale is None:
        if policy.auto_scale:
            raise ValueError("policy scale is 'auto'; calibrate it first")
        scale = policy.scale
    if policy.kind == "Uniform":
        P = np.full(g.shape[:-1], float(snr))
    else:
        P = np.exp(power_exponent(policy, g, snr) * math.log(snr))
    P = scale * P
    return float(P) if P.ndim == 0 else P


def _mean_power(policy, params, snr, n, seed, key):
    """Unscaled sample mean of P over ``n`` channel draws."""
    total = 0.0
    peak = 0.0
    for idx, a, b in rng.chunks(n):
        h_hat, _ = draw_gains(params, snr, b - a, rng.stream(seed, *key, idx))
        g_hat = np.sum(np.abs(h_hat) ** 2, axis=2)
        P = allocate_power(policy, g_hat, snr, scale=1.0)
        total += float(P.sum())
        peak = max(peak, float(P.max()))
    return total / n, peak


def calibrate_scale(policy, params, snr, n_pilot=1_000_000, seed=0):
    """scale = snr / E[P] estimated on a pilot stream."""
    if policy.kind == "Uniform":
        return 1.0
    mean, _ = _mean_power(policy, params, snr, n_pilot, seed, key=(1, _snr_key(snr)))
    return min(1.0, snr / mean)


def _snr_key(snr):
    return int(round(1000 * 10 * math.log10(snr))) & 0xFFFFFFFF


def audit_average_power(policy, params, snr_grid, n_samples=100_000, seed=0, n_pilot=None):
    """Empirical average power against the long-term constraint.

    ``snr_grid`` is linear. A policy with ``scale="auto"`` is calibrated on a
    pilot stream disjoint from the audit stream. Returns a dict with per-SNR
    ``ratio`` (E[P]/snr), ``peak_ok`` flags, the log-log ``slope`` of E[P]
    and ``violation`` (slope > 1.1).
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be >= 1e4")
    ratios, peak_ok, means, scales = [], [], [], []
    for snr in snr_grid:
        if policy.auto_scale:
            scale = calibrate_scale(policy, params, snr, n_pilot or n_samples, seed)
        else:
            scale = policy.scale
        mean, peak = _mean_power(policy, params, snr, n_samples, seed, key=(2, _snr_key(snr)))
        mean *= scale
        peak *= scale
        means.append(mean)
        scales.append(scale)
        ratios.append(mean / snr)
        peak_ok.append(peak <= scale * snr**policy.d_peak * (1 + 1e-12))
    x = np.log10(np.asarray(snr_grid, dtype=float))
    y = np.log10(means)
    slope = float(np.polyfit(x, y, 1)[0]) if len(x) >= 2 else float("nan")
    return {
        "snr": list(map(float, snr_grid)),
        "mean_power": means,
        "ratio": ratios,
        "scale": scales,
        "peak_ok": peak_ok,
        "slope": slope,
        "violation": bool(slope > 1.1),
    }
