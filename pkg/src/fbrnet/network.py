"""
Poisson downlink model
======================

Network parameters, the Laplace transform of the aggregate interference
power, its Gamma moment-matching surrogate, the SINR law that follows from
it and the nearest-BS (serving) distance distribution.

Units are SI: metres, watts, BS per square metre.  ``NetworkConfig``
offers constructors from the km / dBm quantities used on the command line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import special as _sps

from .numerics import (
    ConvergenceError,
    DomainError,
    IntegrationSpec,
    gauss_2f1_nonpos,
    gil_pelaez_cdf,
)

__all__ = [
    "NetworkConfig",
    "LinkGeometry",
    "GammaApprox",
    "ConstellationMoments",
    "SeriesResult",
    "TruncationError",
    "dbm_to_watt",
    "interference_exponent",
    "laplace_b_gaussian",
    "laplace_b_series",
    "b_moments",
    "gamma_fit",
    "interference_cdf",
    "sinr_pdf_gamma",
    "sinr_cdf_gamma",
    "ServingDistance",
    "serving_distance",
]

PER_KM2 = 1e-6


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """BS density, transmit power, path-loss exponent and noise power.

    Attributes
    ----------
    density : float
        BS intensity in BS per m^2.
    power : float
        Transmit power in watts.
    eta : float
        Path-loss exponent, must exceed 2.
    noise : float
        Noise power in watts.  Zero means interference limited.
    """

    density: float
    power: float = 1.0
    eta: float = 4.0
    noise: float = 0.0

    def __post_init__(self):
        if not self.density > 0:
            raise DomainError("density must be positive")
        if not self.power > 0:
            raise DomainError("power must be positive")
        if not self.eta > 2:
            raise DomainError("path-loss exponent must exceed 2")
        if not self.noise >= 0:
            raise DomainError("noise must be non-negative")

    @classmethod
    def from_units(cls, lambda_per_km2, power_dbm, noise_dbm=None, eta=4.0):
        """Build from BS/km^2 and dBm.  ``noise_dbm=None`` means no noise."""
        noise = 0.0 if noise_dbm is None else float(dbm_to_watt(noise_dbm))
        return cls(lambda_per_km2 * PER_KM2, float(dbm_to_watt(power_dbm)), eta, noise)

    @classmethod
    def from_snr_db(cls, snr_db, lambda_per_km2, eta=4.0, ref_distance=1000.0, power=1.0):
        """Build from a transmit SNR quoted at a reference distance.

        ``snr_db`` is ``P d_ref^-eta / noise`` in dB.  With the default 1 km
        reference this is the "P over noise" axis of km-scaled plots.
        """
        noise = power * ref_distance ** (-eta) * 10.0 ** (-snr_db / 10.0)
        return cls(lambda_per_km2 * PER_KM2, power, eta, noise)

    def with_snr_db(self, snr_db, ref_distance=1000.0):
        noise = self.power * ref_distance ** (-self.eta) * 10.0 ** (-snr_db / 10.0)
        return replace(self, noise=noise)

    def snr_db(self, ref_distance=1000.0) -> float:
        if self.noise == 0:
            return math.inf
        return 10.0 * math.log10(self.power * ref_distance ** (-self.eta) / self.noise)

    @property
    def lambda_per_km2(self) -> float:
        return self.density / PER_KM2

    def link(self, r0: float) -> "LinkGeometry":
        return LinkGeometry.from_config(self, r0)


@dataclass(frozen=True)
class LinkGeometry:
    """Serving distance and the average SNR it implies."""

    r0: float
    avg_snr: float

    def __post_init__(self):
        if not self.r0 > 0:
            raise DomainError("r0 must be positive")

    @classmethod
    def from_config(cls, cfg: NetworkConfig, r0: float):
        r0 = float(r0)
        if not r0 > 0:
            raise DomainError("r0 must be positive")
        rx = cfg.power * r0 ** (-cfg.eta)
        return cls(r0, math.inf if cfg.noise == 0 else rx / cfg.noise)


# ---------------------------------------------------------------------------
#  Laplace transform of the interference power
# ---------------------------------------------------------------------------

def interference_exponent(x, eta):
    """Normalised exponent ``h`` with ``L(u) = exp(-pi lambda r0^2 h(x))``.

    ``x = u P / r0^eta`` may be real (``>= 0``) or complex with
    non-negative real part.  ``h(x) = 2 x 2F1(1, 1-2/eta; 2-2/eta; -x)/(eta-2)``.
    """
    d = 2.0 / eta
    x = np.asarray(x)
    return 2.0 * x * gauss_2f1_nonpos(1.0, 1.0 - d, 2.0 - d, -x) / (eta - 2.0)


def laplace_b_gaussian(u, cfg: NetworkConfig, r0: float):
    """Laplace transform of the interference power with Gaussian codebooks.

    Parameters
    ----------
    u : array_like
        Transform variable in 1/W, non-negative.
    cfg : NetworkConfig
    r0 : float
        Serving distance; interferers lie beyond it.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise DomainError("u must be non-negative")
    x = u * cfg.power * r0 ** (-cfg.eta)
    out = np.exp(-math.pi * cfg.density * r0 * r0 * interference_exponent(x, cfg.eta))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConstellationMoments:
    """Even absolute moments ``E|s|^(2k)``, ``k = 1..K``."""

    even_moments: tuple

    def __post_init__(self):
        m = np.asarray(self.even_moments, dtype=float)
        if m.size < 1 or abs(m[0] - 1.0) > 1e-9 or np.any(m < 0):
            raise DomainError("moments must start with E|s|^2 = 1 and be non-negative")

    @classmethod
    def gaussian(cls, K=20):
        """Circular complex Gaussian symbols: ``E|s|^(2k) = k!``."""
        return cls(tuple(float(math.factorial(k)) for k in range(1, K + 1)))

    @classmethod
    def from_symbols(cls, symbols, K=20):
        a2 = np.abs(np.asarray(symbols, dtype=complex)) ** 2
        a2 = a2 / a2.mean()
        return cls(tuple(float(np.mean(a2 ** k)) for k in range(1, K + 1)))

    @property
    def K(self) -> int:
        return len(self.even_moments)


class SeriesResult(NamedTuple):
    value: float
    last_term: float


class TruncationError(ConvergenceError):
    """The truncated series has not converged at the requested argument."""


def laplace_b_series(u, cfg: NetworkConfig, r0: float, moments: ConstellationMoments,
                     K: int | None = None, tol: float = 1e-12) -> SeriesResult:
    """Laplace transform for a general constellation by its power series.

    The exponent is the ``K``-term truncation of the alternating series in
    the constellation's even moments.  ``last_term`` is the magnitude of
    the last retained exponent term.

    Raises
    ------
    TruncationError
        If ``last_term`` exceeds ``tol``.
    """
    if u < 0:
        raise DomainError("u must be non-negative")
    K = moments.K if K is None else K
    if K > moments.K:
        raise DomainError("not enough moments for K terms")
    x = u * cfg.power * r0 ** (-cfg.eta)
    lead = 2.0 * math.pi * cfg.density * r0 * r0
    terms = [(-1) ** k * lead * x ** k * moments.even_moments[k - 1]
             / ((cfg.eta * k - 2.0) * math.factorial(k)) for k in range(1, K + 1)]
    expo = math.fsum(terms)
    last = abs(terms[-1])
    if last > tol:
        raise TruncationError(f"series not converged, last term {last:.3g}",
                              estimate=math.exp(expo), error=last)
    return SeriesResult(math.exp(expo), last)


def b_moments(cfg: NetworkConfig, r0: float):
    """First two moments of the aggregate interference power (W, W^2)."""
    lam, P, eta = cfg.density, cfg.power, cfg.eta
    mean = 2.0 * math.pi * lam * r0 ** (2.0 - eta) * P / (eta - 2.0)
    var = math.pi * lam * r0 ** (2.0 - 2.0 * eta) * P * P / (eta - 1.0)
    return mean, var + mean * mean


@dataclass(frozen=True)
class GammaApprox:
    """Gamma law with shape ``q`` and scale ``theta`` (W)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("shape and scale must be positive")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    def cdf(self, x):
        return _sps.gammainc(self.shape, np.asarray(x, dtype=float) / self.scale)

    def laplace(self, u):
        return (1.0 + self.scale * np.asarray(u, dtype=float)) ** (-self.shape)


def gamma_fit(cfg: NetworkConfig, r0: float) -> GammaApprox:
    """Match a Gamma law to the first two interference moments."""
    eta = cfg.eta
    q = 4.0 * math.pi * cfg.density * r0 * r0 * (eta - 1.0) / (eta - 2.0) ** 2
    theta = (eta - 2.0) * cfg.power / (2.0 * (eta - 1.0) * r0 ** eta)
    return GammaApprox(q, theta)


def interference_cdf(x, cfg: NetworkConfig, r0: float, method: str = "exact",
                     quad: IntegrationSpec | None = None):
    """CDF of the interference power.

    ``method="exact"`` inverts the characteristic function
    ``phi(w) = L(-j w)`` numerically; ``method="gamma"`` evaluates the
    moment-matched Gamma CDF.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise DomainError("x must be positive")
    if method == "gamma":
        out = gamma_fit(cfg, r0).cdf(xs)
        return out if out.ndim else float(out)
    if method != "exact":
        raise DomainError(f"unknown method {method!r}")
    # work with B r0^eta / P so the variable is of order one
    scale = r0 ** cfg.eta / cfg.power
    kappa = math.pi * cfg.density * r0 * r0
    eta = cfg.eta

    def charfn(w):
        return np.exp(-kappa * interference_exponent(-1j * np.asarray(w), eta))

    mean = b_moments(cfg, r0)[0] * scale
    out = gil_pelaez_cdf(charfn, xs * scale, quad, t_start=1.0 / mean)
    return out


def sinr_pdf_gamma(v, cfg: NetworkConfig, r0: float):
    """SINR density when the interference power is Gamma(q, theta)."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("SINR must be non-negative")
    g = gamma_fit(cfg, r0)
    rx = cfg.power * r0 ** (-cfg.eta)
    s = 1.0 + g.scale * v / rx
    out = np.exp(-v * cfg.noise / rx) / rx * (s * cfg.noise + g.shape * g.scale) * s ** (-g.shape - 1.0)
    return out if out.ndim else float(out)


def sinr_cdf_gamma(v, cfg: NetworkConfig, r0: float):
    """SINR CDF under the Gamma interference law (Rayleigh serving link)."""
    v = np.asarray(v, dtype=float)
    g = gamma_fit(cfg, r0)
    rx = cfg.power * r0 ** (-cfg.eta)
    out = 1.0 - np.exp(-v * cfg.noise / rx) * (1.0 + g.scale * v / rx) ** (-g.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
#  Serving distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ServingDistance:
    """Distance to the nearest point of a PPP of intensity ``density``."""

    density: float

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        a = math.pi * self.density
        return np.where(r >= 0, 2.0 * a * r * np.exp(-a * r * r), 0.0)

    def cdf(self, r):
        r = np.maximum(np.asarray(r, dtype=float), 0.0)
        return -np.expm1(-math.pi * self.density * r * r)

    def ppf(self, p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(-np.log1p(-p) / (math.pi * self.density))

    @property
    def mode(self) -> float:
        return 1.0 / math.sqrt(2.0 * math.pi * self.density)

    @property
    def median(self) -> float:
        return float(self.ppf(0.5))

    def sample(self, rng: np.random.Generator, size=None):
        return np.sqrt(rng.standard_exponential(size) / (math.pi * self.density))


def serving_distance(cfg: NetworkConfig) -> ServingDistance:
    return ServingDistance(cfg.density)
