"""
Numerical building blocks
=========================

Special functions, quadrature rules and characteristic-function inversion
shared by the analytic modules.

Everything here is a pure function of its arguments.  Vectorised routines
accept numpy arrays and broadcast in the usual way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate as _spi
from scipy import special as _sps

__all__ = [
    "DomainError",
    "ConvergenceError",
    "IntegrationSpec",
    "Hermite2DRule",
    "q_function",
    "q_inverse",
    "gauss_2f1_nonpos",
    "gauss_2f1_series",
    "reg_inc_beta",
    "integrate",
    "gauss_legendre",
    "composite_gauss_legendre",
    "hermite2d_rule",
    "integrate_hermite2d",
    "gil_pelaez_cdf",
]

LOG2E = 1.0 / math.log(2.0)


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


class ConvergenceError(ArithmeticError):
    """Raised when a numerical procedure fails to reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    estimate : float or ndarray, optional
        Best estimate available when the procedure stopped.
    error : float, optional
        Error bound achieved for that estimate.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


# ---------------------------------------------------------------------------
#  Integration settings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationSpec:
    """Interval and tolerances for a one-dimensional integral.

    An infinite ``upper`` makes the interval semi-infinite.  For
    :func:`gil_pelaez_cdf` only the tolerances and ``max_subdivisions`` are
    used.
    """

    lower: float = 0.0
    upper: float = math.inf
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be at least 1")
        if math.isnan(self.lower) or math.isinf(self.lower):
            raise DomainError("lower limit must be finite")
        if not self.upper > self.lower:
            raise DomainError("need lower < upper")

    @property
    def kind(self) -> str:
        return "semi-infinite" if math.isinf(self.upper) else "finite"

    @classmethod
    def finite(cls, a, b, **kw):
        return cls(lower=float(a), upper=float(b), **kw)

    @classmethod
    def semi_infinite(cls, a=0.0, **kw):
        return cls(lower=float(a), upper=math.inf, **kw)


# ---------------------------------------------------------------------------
#  Gaussian tail
# ---------------------------------------------------------------------------

def q_function(x):
    """Upper tail probability of the standard normal distribution.

    Parameters
    ----------
    x : array_like
        Real argument.

    Returns
    -------
    ndarray or float
        ``Q(x) = 0.5 * erfc(x / sqrt(2))``.
    """
    out = 0.5 * _sps.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return out if np.ndim(out) else float(out)


def q_inverse(p):
    """Inverse of :func:`q_function`.

    A starting point from ``erfcinv`` is polished by three Newton steps on
    ``Q(x) - p``, which keeps full relative accuracy deep in both tails.

    Raises
    ------
    DomainError
        If any ``p`` lies outside the open interval (0, 1).
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise DomainError("q_inverse needs 0 < p < 1")
    x = math.sqrt(2.0) * _sps.erfcinv(2.0 * p_arr)
    for _ in range(3):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        x = x + (0.5 * _sps.erfc(x / math.sqrt(2.0)) - p_arr) / pdf
    return x if np.ndim(x) else float(x)


# ---------------------------------------------------------------------------
#  Gauss hypergeometric function on the non-positive half plane
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _jacobi01(n: int, beta: float):
    """Nodes/weights on [0, 1] for the weight s**beta."""
    x, w = _sps.roots_jacobi(n, 0.0, beta)
    s = 0.5 * (1.0 + x)
    return s, w * 2.0 ** (-beta - 1.0)


@lru_cache(maxsize=16)
def gauss_legendre(n: int):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _euler_2f1_block(a, b, c, z, nodes):
    x = np.abs(z)
    t0 = np.where(x > 2.0, 1.0 / np.maximum(x, 2.0), 0.5)

    # [0, t0] with the t**(b-1) singularity absorbed in the rule
    s, w = _jacobi01(nodes, b - 1.0)
    ts = t0[:, None] * s[None, :]
    f = (1.0 - ts) ** (c - b - 1.0) * (1.0 - z[:, None] * ts) ** (-a)
    total = t0 ** b * (f @ w)

    # [t0, 1/2] in the logarithmic variable, panels at most one unit wide
    far = t0 < 0.5
    if np.any(far):
        zf, tf = z[far], t0[far]
        span = np.log(0.5 / tf)
        npan = max(1, int(np.ceil(span.max())))
        g, gw = gauss_legendre(16)
        u = (np.arange(npan)[:, None] + g[None, :]).ravel() / npan
        y = np.log(tf)[:, None] + span[:, None] * u[None, :]
        t = np.exp(y)
        f = t ** b * (1.0 - t) ** (c - b - 1.0) * (1.0 - zf[:, None] * t) ** (-a)
        total[far] += (span / npan) * (f @ np.tile(gw, npan))

    # [1/2, 1] with the (1 - t)**(c-b-1) singularity absorbed
    r, w = _jacobi01(nodes, c - b - 1.0)
    t = 1.0 - 0.5 * r
    f = t[None, :] ** (b - 1.0) * (1.0 - z[:, None] * t[None, :]) ** (-a)
    total += 0.5 ** (c - b) * (f @ w)
    return total


def gauss_2f1_nonpos(a, b, c, z, *, nodes: int = 40):
    """Gauss hypergeometric function 2F1(a, b; c; z) for Re(z) <= 0.

    The Euler integral

    .. math:: \\frac{\\Gamma(c)}{\\Gamma(b)\\Gamma(c-b)}
              \\int_0^1 t^{b-1}(1-t)^{c-b-1}(1-zt)^{-a}\\,dt

    is split at ``t0 = min(1/2, 1/|z|)`` and ``1/2``.  Both end pieces use
    Gauss-Jacobi rules that absorb the algebraic endpoint factors, and the
    middle piece is a composite Gauss-Legendre rule in ``log t`` that
    follows the kink of ``(1 - z t)**-a`` for large ``|z|``.

    Parameters
    ----------
    a, b, c : float
        Parameters with ``c > b > 0``.
    z : array_like
        Real values ``<= 0`` or complex values with non-positive real part.
    nodes : int
        Order of the Gauss-Jacobi end rules.

    Returns
    -------
    ndarray or scalar
        Real when ``z`` is real, complex otherwise.
    """
    if not (c > b > 0):
        raise DomainError("gauss_2f1_nonpos needs c > b > 0")
    z_arr = np.asarray(z)
    is_complex = np.iscomplexobj(z_arr)
    if is_complex:
        if np.any(z_arr.real > 0) or np.any(~np.isfinite(z_arr)):
            raise DomainError("need finite z with Re(z) <= 0")
    elif np.any(~(z_arr <= 0)) or np.any(~np.isfinite(z_arr)):
        raise DomainError("need finite z <= 0")

    flat = z_arr.astype(complex).ravel()
    out = np.empty(flat.shape, dtype=complex)
    block = 4096
    for i in range(0, flat.size, block):
        out[i:i + block] = _euler_2f1_block(a, b, c, flat[i:i + block], nodes)
    pref = math.exp(math.lgamma(c) - math.lgamma(b) - math.lgamma(c - b))
    out = (pref * out).reshape(z_arr.shape)
    if not is_complex:
        out = out.real
    return out if out.ndim else out.item()


def gauss_2f1_series(a, b, c, z, *, terms: int = 400):
    """Power series of 2F1 for ``|z| < 1``; intended as a cross-check."""
    z = np.asarray(z, dtype=complex if np.iscomplexobj(z) else float)
    if np.any(np.abs(z) >= 1):
        raise DomainError("series needs |z| < 1")
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(terms):
        term = term * (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total if total.ndim else total.item()


def reg_inc_beta(z, x, y):
    """Regularised incomplete beta function ``I_z(x, y)``.

    Raises
    ------
    DomainError
        Unless ``0 <= z <= 1``, ``x > 0`` and ``y > 0``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(~((z >= 0) & (z <= 1))) or not (np.all(np.asarray(x) > 0) and np.all(np.asarray(y) > 0)):
        raise DomainError("reg_inc_beta needs z in [0,1], x > 0, y > 0")
    out = _sps.betainc(x, y, z)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
#  Quadrature
# ---------------------------------------------------------------------------

def integrate(f: Callable[[float], float], quad: IntegrationSpec) -> float:
    """Adaptive quadrature of a scalar function.

    Finite intervals use QUADPACK's QAGS (which tolerates integrable
    endpoint singularities), semi-infinite ones QAGI's ``1/(1+t)``
    transformation.

    Raises
    ------
    ConvergenceError
        If the requested tolerance is not met.  The exception carries the
        best estimate and its error bound.
    """
    val, err, info = _spi.quad(
        f, quad.lower, quad.upper,
        epsabs=quad.abs_tol, epsrel=quad.rel_tol,
        limit=quad.max_subdivisions, full_output=1,
    )[:3]
    if err > max(quad.abs_tol, quad.rel_tol * abs(val)) * 10.0:
        raise ConvergenceError(
            f"quadrature did not converge (estimate {val:.6g}, error {err:.2g})",
            estimate=val, error=err,
        )
    return float(val)


def composite_gauss_legendre(f, breakpoints, nodes: int = 16):
    """Integrate a vectorised ``f`` over consecutive panels.

    Parameters
    ----------
    f : callable
        Maps an array of abscissae to an array of the same shape (extra
        trailing axes in the output are allowed).
    breakpoints : array_like
        Increasing panel edges.
    nodes : int
        Gauss-Legendre order per panel.
    """
    edges = np.asarray(breakpoints, dtype=float)
    g, gw = gauss_legendre(nodes)
    width = np.diff(edges)
    t = (edges[:-1, None] + width[:, None] * g[None, :]).ravel()
    w = (width[:, None] * gw[None, :]).ravel()
    vals = np.asarray(f(t))
    return np.tensordot(w, vals, axes=(0, 0))


@dataclass(frozen=True)
class Hermite2DRule:
    """Tensor Gauss-Hermite rule for the weight ``exp(-|t|^2)`` on the plane."""

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


@lru_cache(maxsize=8)
def hermite2d_rule(order: int = 240, prune: float = 0.0) -> Hermite2DRule:
    """Build (and cache) the ``order x order`` tensor Hermite rule.

    Nodes whose weight is below ``prune`` times the largest weight are
    dropped.  ``prune=0`` keeps the full tensor rule, which integrates
    monomials of per-dimension degree below ``2 order - 1`` exactly.
    """
    if order < 1:
        raise DomainError("order must be positive")
    x, w = _sps.roots_hermite(order)
    t1, t2 = np.meshgrid(x, x, indexing="ij")
    nodes = np.column_stack([t1.ravel(), t2.ravel()])
    weights = np.outer(w, w).ravel()
    if prune > 0:
        keep = weights >= prune * weights.max()
        nodes, weights = nodes[keep], weights[keep]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return Hermite2DRule(order, nodes, weights)


def integrate_hermite2d(g, rule: Hermite2DRule | None = None) -> float:
    """Approximate the integral of ``exp(-|t|^2) g(t)`` over the plane.

    ``g`` receives an ``(N, 2)`` array of nodes and returns ``N`` values.
    """
    rule = rule or hermite2d_rule()
    vals = np.asarray(g(rule.nodes), dtype=float)
    return float(math.fsum(rule.weights * vals))


# ---------------------------------------------------------------------------
#  Characteristic-function inversion
# ---------------------------------------------------------------------------

def _gl_panels(a, b, nodes):
    g, gw = gauss_legendre(nodes)
    width = (b - a)
    t = a[:, None] + width[:, None] * g[None, :]
    w = width[:, None] * gw[None, :]
    return t, w


def gil_pelaez_cdf(charfn, x, quad: IntegrationSpec | None = None, *,
                   t_min: float = 1e-6, t_start: float = 1.0,
                   nodes: int = 12, clip: bool = True):
    """CDF from a characteristic function by the Gil-Pelaez formula.

    .. math:: F(x) = \\tfrac12 - \\tfrac1\\pi\\int_0^\\infty
              \\frac{\\operatorname{Im}(e^{-j\\omega x}\\varphi(\\omega))}{\\omega}\\,d\\omega

    The integral runs over ``[t_min, t_start]`` and then over doubling
    segments ``[T, 2T]``.  Each segment is split adaptively (a panel is
    accepted when halving it changes the result by less than
    ``quad.abs_tol``).  Integration stops once a segment contributes less
    than ``quad.abs_tol`` and ``|charfn(2T)| / 2T`` is below it too.

    Parameters
    ----------
    charfn : callable
        Vectorised characteristic function, real array to complex array.
    x : float or array_like
        Evaluation points.  All points share the charfn evaluations.
    quad : IntegrationSpec, optional
        Tolerances; defaults to ``abs_tol=1e-8`` and 20000 panels.
    t_start : float
        End of the first segment, roughly the inverse scale of the variable.
    clip : bool
        Clip the result to [0, 1].

    Raises
    ------
    ConvergenceError
        If the panel budget runs out before the truncation test passes.
    """
    if quad is None:
        quad = IntegrationSpec(abs_tol=1e-8, max_subdivisions=20000)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    tol = quad.abs_tol

    def integrand(t):
        phi = np.asarray(charfn(t), dtype=complex)
        ph = np.exp(-1j * np.multiply.outer(xs, t)) * phi
        return ph.imag / t

    def panel_sum(a, b):
        t, w = _gl_panels(a, b, nodes)
        vals = integrand(t.ravel()).reshape(xs.size, *t.shape)
        return np.einsum("xpn,pn->xp", vals, w)

    # the integrand tends to E[X] - x at the origin, so [0, t_min] is a rectangle
    total = t_min * integrand(np.array([t_min]))[:, 0]
    used = 0
    lo, hi = t_min, t_start
    for _ in range(200):
        # adaptive refinement of [lo, hi]
        n0 = 4
        edges = np.linspace(lo, hi, n0 + 1)
        a, b = edges[:-1], edges[1:]
        coarse = panel_sum(a, b)
        seg = np.zeros(xs.size)
        while a.size:
            used += a.size
            if used > quad.max_subdivisions:
                raise ConvergenceError(
                    "Gil-Pelaez panel budget exhausted",
                    estimate=0.5 - total / math.pi, error=None)
            m = 0.5 * (a + b)
            left = panel_sum(a, m)
            right = panel_sum(m, b)
            fine = left + right
            ok = np.all(np.abs(fine - coarse) <= tol, axis=0)
            seg += fine[:, ok].sum(axis=1)
            bad = ~ok
            a = np.concatenate([a[bad], m[bad]])
            b = np.concatenate([m[bad], b[bad]])
            coarse = np.concatenate([left[:, bad], right[:, bad]], axis=1)
        total += seg
        env = abs(complex(np.asarray(charfn(np.array([hi])))[0])) / hi
        if lo > t_min and np.max(np.abs(seg)) < tol and env < tol:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError("Gil-Pelaez truncation test never met",
                               estimate=0.5 - total / math.pi)

    cdf = 0.5 - total / math.pi
    if clip:
        cdf = np.clip(cdf, 0.0, 1.0)
    return cdf if np.ndim(x) else float(cdf[0])
