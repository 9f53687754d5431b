"""Outage probabilities and outage SNR exponents for coded modulation over
block-fading channels with mismatched CSIT and long-term power control."""

from outage_lab.constellation import (
    Constellation,
    MiTable,
    awgn_mutual_information,
    build_constellation,
    build_mi_table,
    mi_lookup,
)
from outage_lab.channel import (
    ChannelParams,
    ChannelSample,
    csit_noise_variance,
    exponent_coords,
    sample_channel,
)
from outage_lab.power import PowerPolicy, allocate_power, audit_average_power
from outage_lab.exponents import (
    INF,
    ExponentQuery,
    ExponentResult,
    case_exponent_dn,
    oracle_exponent,
    oracle_exponent_rotated,
    outage_exponent_thm1,
    outage_exponent_thm2,
    singleton_bound,
    singleton_bound_rotated,
)
from outage_lab.rotation import (
    RotationScheme,
    build_rotation,
    rotated_group_mi,
    verify_full_diversity,
)
from outage_lab.sim import OutageEstimate, SimConfig, SlopeFit, estimate_outage, fit_slope, sweep

__version__ = "0.1.0"
