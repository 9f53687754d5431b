"""Block-fading Rayleigh channel with noisy CSIT, h = h_hat + e."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from outage_lab import rng
from outage_lab.errors import CsitNoiseError


@dataclass(frozen=True)
class ChannelParams:
    B: int
    m: int = 1
    d_e: float = 0.0
    block_length_L: int = 1  # metadata only

    def __post_init__(self):
        if self.B < 1 or self.m < 1:
            raise ValueError("B and m must be >= 1")
        if self.d_e < 0:
            raise ValueError("d_e must be nonnegative")


@dataclass(frozen=True, eq=False)
class ChannelSample:
    h: np.ndarray
    h_hat: np.ndarray
    e: np.ndarray
    gamma: np.ndarray
    gamma_hat: np.ndarray
    gamma_bar: np.ndarray


def csit_noise_variance(d_e, snr):
    """sigma_e^2 = snr^(-d_e)."""
    if snr <= 0 or d_e < 0:
        raise ValueError("need snr > 0 and d_e >= 0")
    return float(snr) ** (-float(d_e))


def _cgauss(gen, shape, var):
    if var == 0:
        return np.zeros(shape, dtype=complex)
    return (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) * np.sqrt(var / 2)


def _split_variances(p, snr):
    var_e = csit_noise_variance(p.d_e, snr)
    if var_e > 1.0:
        raise CsitNoiseError(f"CSIT noisier than channel: sigma_e^2={var_e:g} > 1 at snr={snr:g}")
    return var_e, max(1.0 - var_e, 0.0)


def draw_gains(p, snr, n, gen):
    """Draw ``n`` independent channel realisations from ``gen``.

    Returns ``(h_hat, e)`` with shape ``(n, B, m)``.
    """
    var_e, var_hat = _split_variances(p, snr)
    shape = (n, p.B, p.m)
    h_hat = _cgauss(gen, shape, var_hat)
    e = _cgauss(gen, shape, var_e)
    return h_hat, e


def sample_channel(p, snr, seed=0, stream=0):
    """One joint draw of true gains, CSIT estimates and magnitudes."""
    var_e = csit_noise_variance(p.d_e, snr)
    h_hat, e = draw_gains(p, snr, 1, rng.stream(seed, stream))
    h_hat, e = h_hat[0], e[0]
    h = h_hat + e
    gamma = np.sum(np.abs(h) ** 2, axis=1)
    gamma_hat = np.sum(np.abs(h_hat) ** 2, axis=1)
    with np.errstate(over="ignore", divide="ignore"):
        gamma_bar = (2.0 / np.float64(var_e)) * gamma
    return ChannelSample(h, h_hat, e, gamma, gamma_hat, gamma_bar)


def exponent_coords(s, snr):
    """(alpha_hat, alpha_bar) = (-log gamma_hat, -log gamma_bar) / log snr.

    Zero magnitudes map to +inf.
    """
    if snr <= 1:
        raise ValueError("exponent coordinates need snr > 1")
    log_snr = np.log(snr)
    with np.errstate(divide="ignore"):
        a_hat = -np.log(np.asarray(s.gamma_hat, dtype=float)) / log_snr
        a_bar = -np.log(np.asarray(s.gamma_bar, dtype=float)) / log_snr
    return a_hat, a_bar
