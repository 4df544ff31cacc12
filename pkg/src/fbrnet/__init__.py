"""Finite-blocklength rate, outage and meta-distribution analysis of Poisson cellular downlinks."""

__version__ = "0.1.0"

from .meta import MetaQuery, meta_cdf_beta, meta_cdf_gilpelaez, moment_set
from .network import LinkGeometry, NetworkConfig, gamma_fit, interference_cdf, serving_distance
from .numerics import ConvergenceError, DomainError
from .outage import OutageBounds, OutageQuery, outage_bounds, outage_spatial_eta4, reliability
from .qam import Constellation, avg_rate_qam_fixed_r0, avg_rate_qam_spatial, make_qam
from .rates import (
    CodingConfig,
    RateResult,
    avg_capacity_ar,
    avg_rate_fixed_r0,
    avg_rate_spatial,
    avg_sqrt_dispersion,
    awgn_fbr_rate,
)
from .simulator import SimPlan, empirical_avg_rate, empirical_meta, empirical_outage, sample_links

__all__ = [
    "CodingConfig",
    "Constellation",
    "ConvergenceError",
    "DomainError",
    "LinkGeometry",
    "MetaQuery",
    "NetworkConfig",
    "OutageBounds",
    "OutageQuery",
    "RateResult",
    "SimPlan",
    "avg_capacity_ar",
    "avg_rate_fixed_r0",
    "avg_rate_qam_fixed_r0",
    "avg_rate_qam_spatial",
    "avg_rate_spatial",
    "avg_sqrt_dispersion",
    "awgn_fbr_rate",
    "empirical_avg_rate",
    "empirical_meta",
    "empirical_outage",
    "gamma_fit",
    "interference_cdf",
    "make_qam",
    "meta_cdf_beta",
    "meta_cdf_gilpelaez",
    "moment_set",
    "outage_bounds",
    "outage_spatial_eta4",
    "reliability",
    "sample_links",
    "serving_distance",
]
