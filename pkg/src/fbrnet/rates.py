"""
Finite-blocklength rates
========================

Normal approximation of the maximal coding rate over AWGN, its average
over Rayleigh fading plus Poisson interference for a fixed serving
distance, and the spatial average over the nearest-BS distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import LinkGeometry, NetworkConfig, interference_exponent
from scipy.optimize import brentq

from .numerics import LOG2E, DomainError, composite_gauss_legendre, gauss_legendre, q_inverse

__all__ = [
    "CodingConfig",
    "RateResult",
    "correction_term",
    "dispersion",
    "awgn_fbr_rate",
    "avg_capacity_ar",
    "avg_sqrt_dispersion",
    "avg_rate_fixed_r0",
    "avg_rate_spatial",
    "spatial_average",
    "sinr_threshold",
]


@dataclass(frozen=True)
class CodingConfig:
    """Blocklength ``n`` and target frame error rate ``eps``."""

    n: int
    eps: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("blocklength must be a positive integer")
        if not 0.0 < self.eps < 0.5:
            raise DomainError("eps must lie in (0, 0.5)")

    @property
    def backoff(self) -> float:
        """``Q^-1(eps) / sqrt(n)``."""
        return q_inverse(self.eps) / math.sqrt(self.n)


@dataclass(frozen=True)
class RateResult:
    """Rate in bits per channel use and its three constituent terms."""

    rate: float
    capacity_term: float
    dispersion_term: float
    correction_term: float

    @property
    def rate_clamped(self):
        return np.maximum(self.rate, 0.0)


def correction_term(n: int) -> float:
    """``log2(n) / (2 n)``."""
    return math.log2(n) / (2.0 * n)


def dispersion(alpha):
    """AWGN channel dispersion in bits^2."""
    a = np.asarray(alpha, dtype=float)
    return a * (a + 2.0) / (a + 1.0) ** 2 * LOG2E ** 2


def sinr_threshold(target_rate: float, coding: CodingConfig) -> float:
    """Smallest SINR at which the normal-approximation rate reaches ``target_rate``.

    The rate dips below ``log2(n)/(2n)`` just above zero SINR before it
    grows, so the root is taken on the increasing branch.  Returns 0 when
    the target is met at every SINR.
    """
    corr = correction_term(coding.n)
    bo = coding.backoff

    def excess(y):
        k = math.sqrt(max(0.0, 1.0 - 1.0 / (1.0 + y) ** 2))
        return math.log2(1.0 + y) - LOG2E * k * bo + corr - target_rate

    if target_rate <= 0:
        return 0.0
    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("target rate is unreachable")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    if excess(lo) >= 0:
        # the target is met at the left end: look for the dip
        ys = np.concatenate([[0.0], np.geomspace(1e-12, hi, 400)])
        ex = np.array([excess(y) for y in ys])
        neg = np.flatnonzero(ex < 0)
        if neg.size == 0:
            return 0.0
        lo, hi = ys[neg[-1]], ys[neg[-1] + 1]
    return brentq(excess, lo, hi, xtol=1e-300, rtol=1e-14)


def awgn_fbr_rate(alpha, coding: CodingConfig) -> RateResult:
    """Normal approximation of the maximal coding rate at SNR ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise DomainError("SNR must be non-negative")
    cap = np.log2(1.0 + a)
    disp = np.sqrt(dispersion(a)) * coding.backoff
    corr = correction_term(coding.n)
    rate = cap - disp + corr
    if rate.ndim == 0:
        return RateResult(float(rate), float(cap), float(disp), corr)
    return RateResult(rate, cap, disp, np.full_like(rate, corr))


# ---------------------------------------------------------------------------
#  Fixed serving distance
# ---------------------------------------------------------------------------

def _laplace_norm(x, cfg: NetworkConfig, r0: float):
    """Interference Laplace transform at normalised argument x = u P r0^-eta."""
    return np.exp(-math.pi * cfg.density * r0 * r0 * interference_exponent(x, cfg.eta))


def _upper_limit(geom: LinkGeometry, cfg: NetworkConfig) -> float:
    """Normalised SINR threshold above which the integrands are < 1e-14."""
    hi = 32.3 * geom.avg_snr if math.isfinite(geom.avg_snr) else math.inf
    kappa = math.pi * cfg.density * geom.r0 ** 2
    y = 1.0
    while y < hi and y < 1e300:
        if kappa * interference_exponent(y, cfg.eta) > 35.0:
            return y
        y *= 4.0
    return min(hi, y)


def avg_capacity_ar(geom: LinkGeometry, cfg: NetworkConfig, *, nodes: int = 12) -> float:
    """Average Shannon capacity for a fixed serving distance.

    With ``c = log2(1 + y)`` the capacity integral becomes
    ``ln(2)^-1 int_0^inf exp(-y/alpha0) L(y) / (1 + y) dy`` which is
    evaluated on geometric panels up to the point where
    ``exp(-(2^c - 1)/alpha0)`` (or the Laplace factor) drops below 1e-14.
    """
    alpha0, r0 = geom.avg_snr, geom.r0
    if alpha0 == 0:
        return 0.0
    y_hi = _upper_limit(geom, cfg)
    y_lo = min(1e-6, y_hi * 1e-9)
    edges = np.concatenate([[0.0], np.geomspace(y_lo, y_hi, max(2, int(np.ceil(np.log2(y_hi / y_lo)))) + 1)])
    inv_a = 0.0 if math.isinf(alpha0) else 1.0 / alpha0

    def f(y):
        return np.exp(-y * inv_a) * _laplace_norm(y, cfg, r0) / (1.0 + y)

    return float(composite_gauss_legendre(f, edges, nodes)) * LOG2E


def avg_sqrt_dispersion(geom: LinkGeometry, cfg: NetworkConfig, *, nodes: int = 20) -> float:
    """Average of ``sqrt(V(SINR))`` for a fixed serving distance.

    The CDF-complement integral over ``v in [0, log2 e]`` is taken after
    the substitution ``v = log2(e) sin(phi)``, for which
    ``z(v) = sec(phi) - 1`` and ``dv = log2(e) cos(phi) dphi``.
    """
    alpha0, r0 = geom.avg_snr, geom.r0
    if alpha0 == 0:
        return 0.0
    inv_a = 0.0 if math.isinf(alpha0) else 1.0 / alpha0
    # grade panels towards phi = 0 where exp(-z/alpha0) lives when alpha0 is small
    scale = min(math.pi / 2, math.sqrt(2.0 * alpha0)) if math.isfinite(alpha0) else math.pi / 2
    edges = np.unique(np.concatenate([
        np.linspace(0.0, math.pi / 2, 17),
        scale * np.geomspace(2.0 ** -20, 4.0, 23),
        [0.0],
    ]))
    edges = edges[edges <= math.pi / 2]

    def f(phi):
        c = np.cos(phi)
        z = np.where(c > 0, 1.0 / np.maximum(c, 1e-300) - 1.0, np.inf)
        z = np.minimum(z, 1e300)
        val = np.exp(-z * inv_a) * _laplace_norm(z, cfg, r0) * c
        return np.where(c > 0, val, 0.0)

    return float(composite_gauss_legendre(f, edges, nodes)) * LOG2E


def avg_rate_fixed_r0(geom: LinkGeometry, cfg: NetworkConfig, coding: CodingConfig) -> RateResult:
    """Average finite-blocklength rate for a fixed serving distance."""
    cap = avg_capacity_ar(geom, cfg)
    disp = avg_sqrt_dispersion(geom, cfg) * coding.backoff
    corr = correction_term(coding.n)
    return RateResult(cap - disp + corr, cap, disp, corr)


# ---------------------------------------------------------------------------
#  Spatial average
# ---------------------------------------------------------------------------

def spatial_average(func, cfg: NetworkConfig, *, tail: float = 1e-12, nodes: int = 16):
    """Average ``func(r0)`` over the nearest-BS distance law.

    The variable ``s = pi lambda r0^2`` is standard exponential; the
    integral over ``s`` is cut at the ``1 - tail`` quantile and uses
    geometric panels towards ``s = 0`` where rates grow like ``log(1/s)``.
    ``func`` may return a scalar or a 1-D array.
    """
    s_max = -math.log(tail)
    edges = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, 13), np.linspace(1.0, s_max, 9)[1:]])
    g, gw = gauss_legendre(nodes)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        for s, w in zip(a + (b - a) * g, (b - a) * gw):
            r0 = math.sqrt(s / (math.pi * cfg.density))
            total = total + w * math.exp(-s) * np.asarray(func(r0), dtype=float)
    return total / -math.expm1(-s_max)


def avg_rate_spatial(cfg: NetworkConfig, coding: CodingConfig) -> RateResult:
    """Finite-blocklength rate averaged over the serving distance."""
    cap, sd = spatial_average(
        lambda r0: (avg_capacity_ar(cfg.link(r0), cfg), avg_sqrt_dispersion(cfg.link(r0), cfg)), cfg)
    disp = float(sd) * coding.backoff
    corr = correction_term(coding.n)
    return RateResult(float(cap) - disp + corr, float(cap), disp, corr)
