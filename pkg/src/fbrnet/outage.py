"""
Rate outage and reliability
===========================

Outage of the Shannon rate, bounds on the finite-blocklength outage for a
fixed serving distance, their spatial averages (with a closed form for
``eta = 4``) and the guaranteed reliability that follows.

With ``a = log2(e) Q^-1(eps) / sqrt(n)`` and ``b = log2(n) / (2n)`` the
finite-blocklength rate at SINR ``v`` is

    log2(1 + v) - a K(v) + b,    K(v) = sqrt(1 - (1 + v)^-2) in [0, 1),

so replacing ``K`` by 0 and 1 sandwiches the outage between the Shannon
outage at ``R_t`` and at ``R_t + a - b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sps

from .network import NetworkConfig, interference_exponent
from .numerics import LOG2E, DomainError, IntegrationSpec, integrate
from .qam import Constellation
from .rates import CodingConfig, correction_term
from .simulator import McEstimate, SimPlan, empirical_outage

__all__ = [
    "OutageQuery",
    "PenaltyTerms",
    "OutageBounds",
    "penalty_terms",
    "outage_ar",
    "outage_bounds",
    "outage_spatial_ar",
    "outage_spatial_upper",
    "outage_spatial_eta4",
    "reliability",
    "outage_qam_mc",
]


@dataclass(frozen=True)
class OutageQuery:
    """Target rate, coding constraint and serving distance.

    ``coding.eps`` is read as the FER threshold.  ``r0=None`` asks for the
    average over the serving-distance law.
    """

    target_rate: float
    coding: CodingConfig
    r0: float | None = None

    def __post_init__(self):
        if self.target_rate < 0:
            raise DomainError("target rate must be non-negative")
        if self.r0 is not None and self.r0 <= 0:
            raise DomainError("r0 must be positive")

    @property
    def spatial(self) -> bool:
        return self.r0 is None


@dataclass(frozen=True)
class PenaltyTerms:
    a: float
    b: float

    @property
    def shift(self) -> float:
        """Rate shift ``a - b`` applied by the upper bound."""
        return self.a - self.b


@dataclass(frozen=True)
class OutageBounds:
    lower: float
    upper: float


def penalty_terms(coding: CodingConfig) -> PenaltyTerms:
    return PenaltyTerms(LOG2E * coding.backoff, correction_term(coding.n))


def _mu(rate):
    return np.expm1(np.maximum(rate, 0.0) * math.log(2.0))


def outage_ar(r0: float, target_rate, cfg: NetworkConfig):
    """Probability that ``log2(1 + SINR) < target_rate`` at serving distance ``r0``."""
    rate = np.asarray(target_rate, dtype=float)
    if np.any(rate < 0):
        raise DomainError("target rate must be non-negative")
    mu = _mu(rate)
    inv_snr = cfg.noise * r0 ** cfg.eta / cfg.power
    with np.errstate(over="ignore", invalid="ignore"):
        expo = mu * inv_snr + math.pi * cfg.density * r0 * r0 * interference_exponent(mu, cfg.eta)
        out = -np.expm1(-expo)
    out = np.where(np.isinf(mu), 1.0, out)
    return out if out.ndim else float(out)


def outage_bounds(query: OutageQuery, cfg: NetworkConfig) -> OutageBounds:
    """Shannon outage (lower) and shifted-threshold outage (upper) at fixed ``r0``."""
    if query.spatial:
        lo = outage_spatial_ar(query.target_rate, cfg)
        return OutageBounds(lo, outage_spatial_upper(query, cfg))
    pen = penalty_terms(query.coding)
    lo = outage_ar(query.r0, query.target_rate, cfg)
    up = outage_ar(query.r0, max(query.target_rate + pen.shift, 0.0), cfg)
    return OutageBounds(lo, up)


# ---------------------------------------------------------------------------
#  Spatial averages
# ---------------------------------------------------------------------------

def _spatial_complement(mu: float, cfg: NetworkConfig) -> float:
    """``E exp(-mu/alpha0(r0)) L(mu)`` over the serving distance.

    With ``s = pi lambda r0^2 ~ Exp(1)`` the interference factor is
    ``exp(-s h(mu))`` and the noise factor ``exp(-c s^(eta/2))``.
    """
    if mu == 0:
        return 1.0
    if not math.isfinite(mu):
        return 0.0
    h = float(interference_exponent(mu, cfg.eta))
    c = mu * cfg.noise / cfg.power * (math.pi * cfg.density) ** (-cfg.eta / 2.0)
    if c == 0:
        return 1.0 / (1.0 + h)
    k = 0.5 * cfg.eta
    # the integrand is below 1e-300 beyond this point
    s_hi = min(700.0 / (1.0 + h), (700.0 / c) ** (1.0 / k))
    quad = IntegrationSpec.finite(0.0, s_hi, rel_tol=1e-12, abs_tol=1e-15, max_subdivisions=500)
    return integrate(lambda s: math.exp(-s * (1.0 + h) - c * s ** k), quad)


def outage_spatial_ar(target_rate: float, cfg: NetworkConfig) -> float:
    """Shannon-rate outage averaged over the serving distance."""
    if target_rate < 0:
        raise DomainError("target rate must be non-negative")
    return 1.0 - _spatial_complement(float(_mu(target_rate)), cfg)


def outage_spatial_upper(query: OutageQuery, cfg: NetworkConfig) -> float:
    """Upper bound on the finite-blocklength outage averaged over ``r0``."""
    pen = penalty_terms(query.coding)
    return 1.0 - _spatial_complement(float(_mu(query.target_rate + pen.shift)), cfg)


def outage_spatial_eta4(query: OutageQuery, cfg: NetworkConfig) -> float:
    """Closed form of :func:`outage_spatial_upper` for ``eta = 4``.

    ``1 - pi lambda sqrt(pi P/(N mu)) exp(N mu z^2/(4P)) Q(sqrt(z^2 mu N/(2P)))``
    with ``z = lambda pi P (sqrt(mu) atan(sqrt(mu)) + 1)/(N mu)``.  The
    exponential-times-Q product is evaluated as ``erfcx/2``.  Without noise
    the limit ``1 - 1/(1 + sqrt(mu) atan(sqrt(mu)))`` is returned.
    """
    if cfg.eta != 4:
        raise DomainError("closed form requires eta = 4")
    pen = penalty_terms(query.coding)
    mu = float(_mu(query.target_rate + pen.shift))
    if mu == 0:
        return 0.0
    if not math.isfinite(mu):
        return 1.0
    sm = math.sqrt(mu)
    g = sm * math.atan(sm) + 1.0
    P, N, lam = cfg.power, cfg.noise, cfg.density
    if N == 0:
        return 1.0 - 1.0 / g
    z = lam * math.pi * P * g / (N * mu)
    y = math.sqrt(z * z * mu * N / (2.0 * P))
    return 1.0 - math.pi * lam * math.sqrt(math.pi * P / (N * mu)) * 0.5 * _sps.erfcx(y / math.sqrt(2.0))


# ---------------------------------------------------------------------------
#  Reliability
# ---------------------------------------------------------------------------

def reliability(query: OutageQuery, cfg: NetworkConfig, *, regime: str = "fbr",
                outage: float | None = None) -> float:
    """Probability that a link meets its rate target and is decoded.

    Parameters
    ----------
    regime : {"fbr", "ar"}
        ``fbr`` gives ``(1 - O_u)(1 - eps)`` with the upper-bound outage, a
        guaranteed value; ``ar`` gives ``1 - O`` with the Shannon outage.
    outage : float, optional
        Replace the bound by a supplied (e.g. simulated) outage.
    """
    if regime not in ("fbr", "ar"):
        raise DomainError("regime must be 'fbr' or 'ar'")
    if regime == "ar":
        if outage is None:
            outage = (outage_spatial_ar(query.target_rate, cfg) if query.spatial
                      else outage_ar(query.r0, query.target_rate, cfg))
        return 1.0 - outage
    if outage is None:
        outage = outage_bounds(query, cfg).upper
    return (1.0 - outage) * (1.0 - query.coding.eps)


def outage_qam_mc(const: Constellation, query: OutageQuery, cfg: NetworkConfig,
                  plan: SimPlan) -> McEstimate:
    """Simulated outage of an M-ary input (no Gamma approximation)."""
    plan = SimPlan(**{**plan.__dict__, "r0": query.r0})
    return empirical_outage(cfg, query.target_rate, query.coding, plan, const)
