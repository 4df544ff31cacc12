"""
Meta distribution of the coding rate
====================================

Distribution over network realizations of the per-link probability that
the finite-blocklength rate meets a target, in the interference-limited
setting.

At high SIR the success probability given the interferer distances is
the product ``prod_i 1/(1 + T (r0/r_i)^eta)`` with ``T = 2^(R_t+a-b) - 1``.
Its moments have the form

    log M_d = -2 pi lambda (r0^2/eta) int_0^1 x^(-delta-1) (1 - (1 + T x)^-d) dx,

``delta = 2/eta``.  With ``w = log(1 + T x)`` this becomes
``T^delta int_0^W g(w) (1 - exp(-d w)) dw`` where
``g(w) = exp(-delta w) (1 - exp(-w))^(-1-delta)`` and ``W = log(1 + T)``.
The ``w^-delta`` behaviour at the origin is absorbed by a Gauss-Jacobi
rule and the oscillation of ``exp(-j t w)`` is resolved by panels one
period wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .network import NetworkConfig
from .numerics import (
    LOG2E,
    DomainError,
    IntegrationSpec,
    _jacobi01,
    gauss_legendre,
    gil_pelaez_cdf,
    reg_inc_beta,
)
from .rates import CodingConfig, correction_term, sinr_threshold
from .simulator import MetaSamples, NetworkRealization, SimPlan, empirical_meta

__all__ = [
    "MetaQuery",
    "MomentSet",
    "threshold",
    "approx_moment",
    "moment_set",
    "success_prob_conditional",
    "meta_cdf_gilpelaez",
    "meta_cdf_beta",
    "meta_empirical",
]


@dataclass(frozen=True)
class MetaQuery:
    """Rate target, coding constraint, reliability target and serving distance.

    ``ar=True`` drops both finite-blocklength penalty terms, giving the
    Shannon-rate baseline through the same code path.
    """

    target_rate: float
    n: int
    eps_bar: float
    p_t: float = 0.9
    r0: float = 150.0
    ar: bool = False

    def __post_init__(self):
        if self.target_rate < 0:
            raise DomainError("target rate must be non-negative")
        if not 0.0 < self.p_t < 1.0:
            raise DomainError("p_t must lie in (0, 1)")
        if self.r0 <= 0:
            raise DomainError("r0 must be positive")
        CodingConfig(self.n, self.eps_bar)

    @property
    def coding(self) -> CodingConfig:
        return CodingConfig(self.n, self.eps_bar)

    def as_ar(self) -> "MetaQuery":
        return replace(self, ar=True)

    def with_pt(self, p_t: float) -> "MetaQuery":
        return replace(self, p_t=p_t)


def threshold(query: MetaQuery) -> float:
    """SIR threshold ``T = 2^(R_t + a - b) - 1`` (``a = b = 0`` in AR mode)."""
    shift = 0.0
    if not query.ar:
        c = query.coding
        shift = LOG2E * c.backoff - correction_term(c.n)
    return math.expm1(max(query.target_rate + shift, 0.0) * math.log(2.0))


# ---------------------------------------------------------------------------
#  Moments
# ---------------------------------------------------------------------------

_JAC_NODES = 24
_GL_NODES = 12


def _g_scaled(w, delta):
    """``w^delta g(w)``, analytic at the origin."""
    w = np.asarray(w, dtype=float)
    em = -np.expm1(-w)
    small = w < 1e-8
    ratio = np.where(small, 1.0 + 0.5 * w, w / np.where(small, 1.0, em))
    return ratio ** (1.0 + delta) * np.exp(-delta * w) / w


def _log_moment_unit(d: complex, T: float, delta: float) -> complex:
    """``T^delta int_0^W g(w)(1 - exp(-d w)) dw`` for ``Im d >= 0``."""
    if T == 0 or d == 0:
        return 0.0
    W = math.log1p(T)
    t = abs(d.imag)
    w1 = min(W, 0.5, 2.0 * math.pi / t if t > 0 else W)
    x, wx = _jacobi01(_JAC_NODES, -delta)
    # int_0^w1 w^-delta f(w) dw with f smooth
    u = w1 * x
    f = _g_scaled(u, delta) * -np.expm1(-d * u)
    total = complex(w1 ** (1.0 - delta) * np.dot(wx, f))
    if W > w1:
        width = min(2.0 * math.pi / t if t > 0 else 0.5, 0.5)
        npan = max(1, int(math.ceil((W - w1) / width)))
        edges = np.linspace(w1, W, npan + 1)
        g, gw = gauss_legendre(_GL_NODES)
        h = np.diff(edges)
        u = (edges[:-1, None] + h[:, None] * g).ravel()
        wt = (h[:, None] * gw).ravel()
        gu = np.exp(-delta * u) * (-np.expm1(-u)) ** (-1.0 - delta)
        total += complex(np.dot(wt, gu * -np.expm1(-d * u)))
    return T ** delta * total


def approx_moment(d, query: MetaQuery, cfg: NetworkConfig):
    """Moment ``E[P_s^d]`` of the high-SIR success probability.

    ``d`` may be complex (``Re d >= 0``) and array valued; moments at
    ``Im d < 0`` follow from conjugate symmetry.
    """
    darr = np.asarray(d, dtype=complex)
    if np.any(darr.real < 0):
        raise DomainError("Re(d) must be non-negative")
    T = threshold(query)
    delta = 2.0 / cfg.eta
    scale = 2.0 * math.pi * cfg.density * query.r0 ** 2 / cfg.eta
    out = np.empty(darr.shape, dtype=complex)
    for idx, dv in np.ndenumerate(darr):
        conj = dv.imag < 0
        val = _log_moment_unit(dv.conjugate() if conj else dv, T, delta)
        m = np.exp(-scale * val)
        out[idx] = np.conj(m) if conj else m
    if np.isrealobj(d):
        out = out.real
    return out if out.ndim else out[()]


@dataclass(frozen=True)
class MomentSet:
    """First two moments, the complex moment function and the beta fit."""

    m1: float
    m2: float
    complex_moment: Callable = None

    def __post_init__(self):
        if not (0.0 <= self.m2 <= self.m1 + 1e-15 and self.m1 <= 1.0 + 1e-15):
            raise DomainError("moments must satisfy m2 <= m1 <= 1")

    @property
    def variance(self) -> float:
        return self.m2 - self.m1 * self.m1

    @property
    def degenerate(self) -> bool:
        return self.variance <= 1e-14 * max(self.m1, 1e-300)

    @property
    def beta_params(self):
        """``(alpha, beta)`` of the moment-matched beta law.

        ``alpha / (alpha + beta)`` equals ``m1``.
        """
        if self.degenerate:
            return (math.inf, math.inf)
        k = (self.m1 - self.m2) / self.variance
        return self.m1 * k, (1.0 - self.m1) * k


def moment_set(query: MetaQuery, cfg: NetworkConfig) -> MomentSet:
    m1 = float(np.real(approx_moment(1.0, query, cfg)))
    m2 = float(np.real(approx_moment(2.0, query, cfg)))
    return MomentSet(m1, m2, lambda t: approx_moment(1j * np.asarray(t, dtype=float), query, cfg))


# ---------------------------------------------------------------------------
#  Conditional success probability
# ---------------------------------------------------------------------------

def success_prob_conditional(realization: NetworkRealization, query: MetaQuery, cfg: NetworkConfig,
                             *, mode: str = "approx", draws: int = 2000,
                             rng: np.random.Generator | None = None) -> float:
    """Success probability of the link given the interferer distances.

    Parameters
    ----------
    mode : {"approx", "exact"}
        ``approx`` is the closed product with the shifted threshold.
        ``exact`` estimates ``P(R(SIR) >= R_t)`` over ``draws`` fresh
        fading draws of every link, using the true finite-blocklength
        threshold.
    """
    x = (realization.r0 / realization.distances) ** cfg.eta
    if mode == "approx":
        return math.exp(-float(np.sum(np.log1p(threshold(query) * x))))
    if mode != "exact":
        raise DomainError("mode must be 'approx' or 'exact'")
    rng = rng if rng is not None else np.random.default_rng()
    omega = (2.0 ** query.target_rate - 1.0) if query.ar else sinr_threshold(query.target_rate, query.coding)
    g0 = rng.standard_exponential(draws)
    I = rng.standard_exponential((draws, x.size)) @ x
    return float(np.mean(g0 >= omega * I))


# ---------------------------------------------------------------------------
#  Meta distribution
# ---------------------------------------------------------------------------

def meta_cdf_gilpelaez(query: MetaQuery, cfg: NetworkConfig, p_t=None, quad: IntegrationSpec | None = None):
    """Fraction of links whose success probability exceeds ``p_t``.

    Inverts the characteristic function ``t -> M_jt`` of ``log P_s``.
    ``p_t`` defaults to ``query.p_t`` and may be an array.
    """
    p = np.asarray(query.p_t if p_t is None else p_t, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise DomainError("p_t must lie in (0, 1)")
    if threshold(query) == 0:
        out = np.zeros_like(p)
        return out if out.ndim else float(out)
    m1 = float(np.real(approx_moment(1.0, query, cfg)))
    scale = max(-math.log(max(m1, 1e-300)), 1e-6)
    quad = quad or IntegrationSpec(abs_tol=1e-7, max_subdivisions=50000)

    def charfn(t):
        return approx_moment(1j * np.asarray(t, dtype=float), query, cfg)

    cdf = gil_pelaez_cdf(charfn, np.log(p), quad, t_min=1e-4 / scale, t_start=1.0 / scale, clip=False)
    out = np.clip(1.0 - np.asarray(cdf), 0.0, 1.0)
    return out if out.ndim else float(out)


def meta_cdf_beta(query: MetaQuery, cfg: NetworkConfig, p_t=None):
    """Beta approximation ``1 - I_p(alpha, beta)`` of the meta distribution."""
    p = np.asarray(query.p_t if p_t is None else p_t, dtype=float)
    ms = moment_set(query, cfg)
    if ms.degenerate:
        out = (p < ms.m1).astype(float)
    else:
        a, b = ms.beta_params
        out = 1.0 - np.asarray(reg_inc_beta(p, a, b))
    return out if out.ndim else float(out)


def meta_empirical(query: MetaQuery, cfg: NetworkConfig, plan: SimPlan, *,
                   include_noise: bool = False) -> MetaSamples:
    """Simulated per-link success probabilities at ``query.r0``."""
    return empirical_meta(cfg, query.r0, query.target_rate, query.coding, plan,
                          include_noise=include_noise, ar=query.ar)
