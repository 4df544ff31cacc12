"""
Finite-constellation rates
==========================

Conditional mutual information and channel dispersion of M-QAM over
complex AWGN, computed with a tensor Gauss-Hermite rule, and their
averages over the Gamma-approximate SINR law.

Symbols are treated as points of the real plane.  With unit-variance
circular noise the per-symbol log-likelihood sum is

    g_m(t) = log2 sum_l exp(-2 sqrt(v) t.d_ml - v |d_ml|^2),  d_ml = s_m - s_l,

and ``t`` is distributed with density ``exp(-|t|^2)/pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp

from .network import LinkGeometry, NetworkConfig, gamma_fit, sinr_cdf_gamma, sinr_pdf_gamma
from .numerics import LOG2E, DomainError, Hermite2DRule, gauss_legendre, hermite2d_rule
from .rates import CodingConfig, RateResult, correction_term, spatial_average

__all__ = [
    "Constellation",
    "CondRatePair",
    "make_qam",
    "cond_mi",
    "cond_dispersion",
    "cond_rate_pair",
    "CondRateTable",
    "cond_rate_table",
    "avg_rate_qam_fixed_r0",
    "avg_rate_qam_spatial",
]


@dataclass(frozen=True)
class Constellation:
    """Unit-power constellation.

    ``symbols[i]`` carries the bit label ``labels[i]`` (an integer whose
    ``log2(M)`` bits are read most significant first).
    """

    name: str
    symbols: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=complex)
        lab = np.asarray(self.labels, dtype=int)
        M = s.size
        if M < 2 or M & (M - 1):
            raise DomainError("order must be a power of two")
        if abs(np.mean(np.abs(s) ** 2) - 1.0) > 1e-12:
            raise DomainError("constellation must have unit average power")
        if np.unique(np.round(s, 12)).size != M:
            raise DomainError("symbols must be distinct")
        if sorted(lab.tolist()) != list(range(M)):
            raise DomainError("labels must be a bijection onto 0..M-1")
        s.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "symbols", s)
        object.__setattr__(self, "labels", lab)

    @property
    def order(self) -> int:
        return self.symbols.size

    @property
    def bits(self) -> int:
        return int(round(math.log2(self.order)))

    @property
    def points(self) -> np.ndarray:
        """Symbols as an ``(M, 2)`` real array."""
        return np.column_stack([self.symbols.real, self.symbols.imag])

    def bit_matrix(self) -> np.ndarray:
        """``(M, log2 M)`` array of label bits, most significant first."""
        m = self.bits
        return (self.labels[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1

    def by_label(self) -> np.ndarray:
        """Symbols reordered so that entry ``i`` carries label ``i``."""
        out = np.empty_like(self.symbols)
        out[self.labels] = self.symbols
        return out


def _gray(k: int) -> np.ndarray:
    i = np.arange(2 ** k)
    return i ^ (i >> 1)


def _pam(k: int) -> np.ndarray:
    """Gray-labelled 2^k-PAM levels, indexed by label."""
    n = 2 ** k
    levels = 2.0 * np.arange(n) - (n - 1)
    out = np.empty(n)
    out[_gray(k)] = levels
    return out


def make_qam(M: int) -> Constellation:
    """BPSK, QPSK, rectangular 8-QAM or square 16-QAM with Gray labels.

    8-QAM is the 4 x 2 grid (4-PAM in-phase, BPSK quadrature); the two
    most significant label bits select the in-phase level.
    """
    if M == 2:
        return Constellation("BPSK", np.array([1.0, -1.0]), np.arange(2))
    if M == 4:
        ki, kq = 1, 1
    elif M == 8:
        ki, kq = 2, 1
    elif M == 16:
        ki, kq = 2, 2
    else:
        raise DomainError(f"unsupported order {M}; choose 2, 4, 8 or 16")
    lab = np.arange(M)
    re = _pam(ki)[lab >> kq]
    im = _pam(kq)[lab & ((1 << kq) - 1)]
    s = re + 1j * im
    s = s / math.sqrt(np.mean(np.abs(s) ** 2))
    name = {4: "QPSK", 8: "8-QAM", 16: "16-QAM"}[M]
    return Constellation(name, s, lab)


@dataclass(frozen=True)
class CondRatePair:
    mi: float
    disp: float


def _g_values(const: Constellation, v: float, rule: Hermite2DRule) -> np.ndarray:
    """``g_m(t_k)`` in bits, shape ``(M, K)``."""
    pts = const.points
    d = pts[:, None, :] - pts[None, :, :]                     # (M, M, 2)
    dn = np.sum(d * d, axis=-1)                                # (M, M)
    proj = np.einsum("mlc,kc->mlk", d, rule.nodes)            # (M, M, K)
    expo = -2.0 * math.sqrt(v) * proj - v * dn[:, :, None]
    return logsumexp(expo, axis=1) * LOG2E


def cond_rate_pair(const: Constellation, v: float, rule: Hermite2DRule | None = None) -> CondRatePair:
    """Mutual information and dispersion at SINR ``v`` from one set of nodes."""
    if v < 0:
        raise DomainError("SINR must be non-negative")
    rule = rule or hermite2d_rule(240, prune=1e-25)
    g = _g_values(const, float(v), rule)
    w = rule.weights / math.pi
    e1 = g @ w
    e2 = (g * g) @ w
    mi = const.bits - float(np.mean(e1))
    disp = float(np.mean(e2 - e1 * e1))
    return CondRatePair(min(max(mi, 0.0), const.bits), max(disp, 0.0))


def cond_mi(const: Constellation, v: float, rule: Hermite2DRule | None = None) -> float:
    """Mutual information (bits/use) of the constellation at SINR ``v``."""
    return cond_rate_pair(const, v, rule).mi


def cond_dispersion(const: Constellation, v: float, rule: Hermite2DRule | None = None) -> float:
    """Variance of the information density (bits^2) at SINR ``v``."""
    return cond_rate_pair(const, v, rule).disp


# ---------------------------------------------------------------------------
#  Tabulated conditional terms
# ---------------------------------------------------------------------------

class CondRateTable:
    """Cubic-spline interpolant of ``mi(v)`` and ``sqrt(disp(v))`` in ``log v``.

    Beyond the table the mutual information is taken as ``log2 M`` and the
    dispersion as zero; below it both are continued linearly to the origin.
    """

    def __init__(self, const: Constellation, v_min=1e-4, v_max=1e4, per_decade=25, order=240):
        self.const = const
        self.v_min, self.v_max = v_min, v_max
        nd = int(round(per_decade * math.log10(v_max / v_min)))
        v = np.geomspace(v_min, v_max, nd + 1)
        rule = hermite2d_rule(order, prune=1e-25)
        pairs = [cond_rate_pair(const, x, rule) for x in v]
        mi = np.array([p.mi for p in pairs])
        sd = np.sqrt(np.array([p.disp for p in pairs]))
        self._mi = CubicSpline(np.log(v), mi)
        self._sd = CubicSpline(np.log(v), sd)
        self._mi0, self._sd0 = mi[0], sd[0]

    def __call__(self, v):
        """Return ``(mi, sqrt_disp)`` arrays for SINR values ``v``."""
        v = np.asarray(v, dtype=float)
        lv = np.log(np.clip(v, self.v_min, self.v_max))
        mi = self._mi(lv)
        sd = self._sd(lv)
        low = v < self.v_min
        mi = np.where(low, self._mi0 * v / self.v_min, mi)
        sd = np.where(low, self._sd0 * np.sqrt(np.maximum(v, 0) / self.v_min), sd)
        high = v > self.v_max
        mi = np.where(high, self.const.bits, mi)
        sd = np.where(high, 0.0, sd)
        return np.clip(mi, 0.0, self.const.bits), np.maximum(sd, 0.0)


@lru_cache(maxsize=16)
def _table(name, symbols, labels, order):
    const = Constellation(name, np.array(symbols), np.array(labels))
    return CondRateTable(const, order=order)


def cond_rate_table(const: Constellation, order: int = 240) -> CondRateTable:
    """Cached :class:`CondRateTable` for a constellation."""
    return _table(const.name, tuple(const.symbols.tolist()), tuple(const.labels.tolist()), order)


# ---------------------------------------------------------------------------
#  Averages over the SINR law
# ---------------------------------------------------------------------------

def _gamma_sinr_average(table: CondRateTable, geom: LinkGeometry, cfg: NetworkConfig, nodes=10):
    """``E[mi]`` and ``E[sqrt(disp)]`` under the Gamma-approximate SINR density."""
    r0 = geom.r0
    v_lo, v_hi = table.v_min, table.v_max
    edges = np.geomspace(v_lo, v_hi, int(round(2 * math.log10(v_hi / v_lo))) + 1)
    if math.isfinite(geom.avg_snr) and v_lo < geom.avg_snr < v_hi:
        edges = np.unique(np.append(edges, geom.avg_snr))
    g, gw = gauss_legendre(nodes)
    width = np.diff(edges)
    v = (edges[:-1, None] + width[:, None] * g).ravel()
    w = (width[:, None] * gw).ravel() * sinr_pdf_gamma(v, cfg, r0)
    mi, sd = table(v)
    cap = float(w @ mi)
    sdisp = float(w @ sd)
    # tails: above the table mi is saturated and disp vanishes,
    # below it both are tiny and grow linearly
    F_lo = float(sinr_cdf_gamma(v_lo, cfg, r0))
    F_hi = float(sinr_cdf_gamma(v_hi, cfg, r0))
    m0, s0 = table(np.array([v_lo]))
    cap += table.const.bits * (1.0 - F_hi) + 0.5 * float(m0[0]) * F_lo
    sdisp += 0.5 * float(s0[0]) * F_lo
    return cap, sdisp


def avg_rate_qam_fixed_r0(const: Constellation, geom: LinkGeometry, cfg: NetworkConfig,
                          coding: CodingConfig) -> RateResult:
    """Average finite-blocklength rate of an M-ary constellation at fixed ``r0``.

    The interference power is replaced by its moment-matched Gamma law.
    """
    cap, sd = _gamma_sinr_average(cond_rate_table(const), geom, cfg)
    disp = sd * coding.backoff
    corr = correction_term(coding.n)
    return RateResult(cap - disp + corr, cap, disp, corr)


def avg_rate_qam_spatial(const: Constellation, cfg: NetworkConfig, coding: CodingConfig) -> RateResult:
    """Average finite-blocklength rate of an M-ary constellation over ``r0``."""
    table = cond_rate_table(const)
    cap, sd = spatial_average(lambda r0: _gamma_sinr_average(table, cfg.link(r0), cfg), cfg)
    disp = float(sd) * coding.backoff
    corr = correction_term(coding.n)
    return RateResult(float(cap) - disp + corr, float(cap), disp, corr)
