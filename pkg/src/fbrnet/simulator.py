"""
Poisson network Monte Carlo
===========================

Draws of the downlink seen by a typical user: a homogeneous PPP of base
stations in a disc, Rayleigh fading on every link and the resulting SINR.
The samples feed empirical counterparts of every analytic quantity in the
package.

Randomness is organised in chunks.  Chunk ``c`` of a run with seed ``s``
always uses the Philox stream keyed by ``(s, stream, c)``, so results
depend on the seed and plan only and not on how many worker threads
evaluate the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .network import NetworkConfig
from .numerics import LOG2E, DomainError
from .qam import Constellation, cond_rate_table
from .rates import CodingConfig, awgn_fbr_rate, correction_term, sinr_threshold

__all__ = [
    "SimPlan",
    "NetworkRealization",
    "LinkSamples",
    "McEstimate",
    "MetaSamples",
    "substream",
    "batch_means",
    "sample_realization",
    "sample_links",
    "empirical_avg_rate",
    "empirical_outage",
    "empirical_meta",
    "conditional_rates",
]

# stream identifiers keep independent experiments on disjoint substreams
_LINKS, _META, _FRAMES, _META_FADING = 1, 2, 3, 4


@dataclass(frozen=True)
class SimPlan:
    """Sample budget and layout of a simulation run.

    Parameters
    ----------
    realizations : int
        Number of network draws.
    fading_draws : int
        Fading draws per realization (used for per-link success
        probabilities; averages use one draw per realization).
    region_scale : float
        Disc radius in units of the mean nearest-BS scale ``1/sqrt(pi lambda)``.
    seed : int
    r0 : float or None
        Fixed serving distance in metres; ``None`` samples it.
    workers : int
        Threads used to evaluate chunks.
    chunk : int
        Realizations per chunk (the unit of RNG substreams).
    batches : int
        Batches used for batch-means confidence intervals.
    """

    realizations: int = 100_000
    fading_draws: int = 1
    region_scale: float = 30.0
    seed: int = 0
    r0: float | None = None
    workers: int = 1
    chunk: int = 4000
    batches: int = 40

    def __post_init__(self):
        if self.realizations < 1 or self.fading_draws < 1 or self.chunk < 1 or self.workers < 1:
            raise DomainError("counts must be >= 1")
        if self.batches < 2:
            raise DomainError("need at least two batches")
        if self.r0 is not None and self.r0 <= 0:
            raise DomainError("r0 must be positive")

    def region_radius(self, cfg: NetworkConfig) -> float:
        scale = 1.0 / math.sqrt(math.pi * cfg.density)
        R = self.region_scale * scale
        if R < 10.0 * max(self.r0 or 0.0, scale):
            raise DomainError("region radius must be at least 10 max(r0, 1/sqrt(pi lambda))")
        return R

    @property
    def fixed(self) -> bool:
        return self.r0 is not None


def substream(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for chunk ``index`` of ``stream``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream, index))))


def _chunks(total: int, size: int):
    return [(i, min(size, total - i * size)) for i in range((total + size - 1) // size)]


def _run_chunks(fn, plan: SimPlan, total: int, workers: int | None = None):
    jobs = _chunks(total, plan.chunk)
    workers = workers or plan.workers
    if workers == 1 or len(jobs) == 1:
        return [fn(i, m) for i, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda job: fn(*job), jobs))


# ---------------------------------------------------------------------------
#  Single realizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkRealization:
    """One PPP draw seen from the typical user at the origin.

    ``distances`` are the interferer distances (ascending, all beyond
    ``r0``) and ``fading`` their complex channel gains; ``interference``
    is ``sum P |h_i|^2 r_i^-eta``.
    """

    r0: float
    distances: np.ndarray = field(repr=False)
    h0: complex
    fading: np.ndarray = field(repr=False)
    interference: float

    def __post_init__(self):
        d = self.distances
        if d.size and (np.any(np.diff(d) < 0) or d[0] <= self.r0):
            raise DomainError("interferer distances must be sorted and beyond r0")
        if self.interference < 0:
            raise DomainError("interference power must be non-negative")

    @property
    def count(self) -> int:
        return self.distances.size


def _cn(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / math.sqrt(2.0)


def sample_realization(cfg: NetworkConfig, plan: SimPlan, rng: np.random.Generator) -> NetworkRealization:
    """Draw one network: Poisson count in the disc, uniform placement.

    In fixed-``r0`` mode the points are placed in the annulus beyond ``r0``
    and the server sits at ``r0``; otherwise the nearest point serves.
    """
    R = plan.region_radius(cfg)
    if plan.fixed:
        r0 = float(plan.r0)
        n = rng.poisson(cfg.density * math.pi * (R * R - r0 * r0))
        r = np.sort(np.sqrt(r0 * r0 + rng.random(n) * (R * R - r0 * r0)))
    else:
        n = 0
        while n == 0:
            n = rng.poisson(cfg.density * math.pi * R * R)
        r = np.sort(R * np.sqrt(rng.random(n)))
        r0, r = float(r[0]), r[1:]
    h = _cn(rng, r.size)
    h0 = complex(_cn(rng, 1)[0])
    B = float(cfg.power * np.sum(np.abs(h) ** 2 * r ** (-cfg.eta)))
    return NetworkRealization(r0, r, h0, h, B)


# ---------------------------------------------------------------------------
#  Batched link samples
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkSamples:
    """Per-realization serving distance, serving fading power and interference.

    ``b_norm = B r0^eta / P`` does not depend on the transmit power, so a
    single draw serves a whole SNR sweep (common random numbers).
    """

    r0: np.ndarray
    g0: np.ndarray
    b_norm: np.ndarray

    def __len__(self):
        return self.r0.size

    def sinr(self, cfg: NetworkConfig) -> np.ndarray:
        inv_snr = cfg.noise * self.r0 ** cfg.eta / cfg.power
        return self.g0 / (self.b_norm + inv_snr)

    def sir(self) -> np.ndarray:
        return self.g0 / self.b_norm


def _interference_norm(r0, R, cfg: NetworkConfig, rng):
    """``sum_i |h_i|^2 (r0/r_i)^eta`` for each entry of ``r0``."""
    lam_area = cfg.density * math.pi * (R * R - r0 * r0)
    cnt = rng.poisson(lam_area)
    idx = np.repeat(np.arange(r0.size), cnt)
    a2 = r0[idx] ** 2
    r2 = a2 + rng.random(idx.size) * (R * R - a2)
    ratio = a2 / r2
    gain = ratio * ratio if cfg.eta == 4 else ratio ** (0.5 * cfg.eta)
    contrib = rng.standard_exponential(idx.size) * gain
    return np.bincount(idx, contrib, minlength=r0.size)


def sample_links(cfg: NetworkConfig, plan: SimPlan) -> LinkSamples:
    """Draw ``plan.realizations`` independent links.

    Given the nearest BS at ``r0`` the remaining points form a PPP on the
    annulus beyond it, so each chunk draws ``r0`` first and then the
    interferers.
    """
    R = plan.region_radius(cfg)

    def run(i, m):
        rng = substream(plan.seed, _LINKS, i)
        if plan.fixed:
            r0 = np.full(m, float(plan.r0))
        else:
            r0 = np.sqrt(rng.standard_exponential(m) / (math.pi * cfg.density))
            r0 = np.minimum(r0, 0.999 * R)
        g0 = rng.standard_exponential(m)
        return r0, g0, _interference_norm(r0, R, cfg, rng)

    parts = _run_chunks(run, plan, plan.realizations)
    return LinkSamples(*(np.concatenate([p[k] for p in parts]) for k in range(3)))


# ---------------------------------------------------------------------------
#  Estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McEstimate:
    """Sample mean with a batch-means confidence interval."""

    mean: float
    ci_low: float
    ci_high: float
    stderr: float
    samples: int

    def contains(self, x: float) -> bool:
        return self.ci_low <= x <= self.ci_high


def batch_means(x, batches: int = 40, level: float = 0.99) -> McEstimate:
    """Mean of ``x`` with a Student-t interval from ``batches`` contiguous batches."""
    x = np.asarray(x, dtype=float).ravel()
    n = x.size
    batches = min(batches, n)
    if batches < 2:
        raise DomainError("need at least two samples")
    size = n // batches
    bm = x[: size * batches].reshape(batches, size).mean(axis=1)
    mean = float(np.mean(x))
    se = float(np.std(bm, ddof=1) / math.sqrt(batches))
    half = float(stats.t.ppf(0.5 + level / 2.0, batches - 1)) * se
    return McEstimate(mean, mean - half, mean + half, se, n)


def conditional_rates(v, coding: CodingConfig, const: Constellation | None = None) -> np.ndarray:
    """Normal-approximation rate at SINR ``v``, Gaussian or M-ary input."""
    v = np.asarray(v, dtype=float)
    if const is None:
        return awgn_fbr_rate(v, coding).rate
    mi, sd = cond_rate_table(const)(v)
    return mi - sd * coding.backoff + correction_term(coding.n)


def empirical_avg_rate(cfg: NetworkConfig, coding: CodingConfig, plan: SimPlan,
                       const: Constellation | None = None, *, links: LinkSamples | None = None,
                       level: float = 0.99) -> McEstimate:
    """Average rate over simulated SINR samples.

    With ``const=None`` the Gaussian-codebook rate is averaged; otherwise
    the constellation's mutual information and dispersion are evaluated at
    the exact simulated SINR.
    """
    links = links if links is not None else sample_links(cfg, plan)
    rate = conditional_rates(links.sinr(cfg), coding, const)
    return batch_means(rate, plan.batches, level)


def empirical_outage(cfg: NetworkConfig, target_rate: float, coding: CodingConfig, plan: SimPlan,
                     const: Constellation | None = None, *, links: LinkSamples | None = None,
                     level: float = 0.99) -> McEstimate:
    """Fraction of samples whose finite-blocklength rate falls below ``target_rate``."""
    links = links if links is not None else sample_links(cfg, plan)
    v = links.sinr(cfg)
    if const is None:
        out = v < sinr_threshold(target_rate, coding)
    else:
        out = np.maximum(conditional_rates(v, coding, const), 0.0) < target_rate
    return batch_means(out.astype(float), plan.batches, level)


# ---------------------------------------------------------------------------
#  Per-link success probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetaSamples:
    """Per-realization success probabilities.

    ``exact`` uses the true finite-blocklength SIR threshold, estimated over
    fading draws; ``approx`` is the closed product with the shifted
    threshold ``2^(R_t+a-b) - 1``.
    """

    exact: np.ndarray
    approx: np.ndarray

    def ccdf(self, p, which: str = "exact"):
        x = np.sort(getattr(self, which))
        p = np.asarray(p, dtype=float)
        return 1.0 - np.searchsorted(x, p, side="right") / x.size


def empirical_meta(cfg: NetworkConfig, r0: float, target_rate: float, coding: CodingConfig, plan: SimPlan,
                   *, include_noise: bool = False, fading: str = "mc", ar: bool = False) -> MetaSamples:
    """Success probability of the link at ``r0`` for each simulated network.

    Parameters
    ----------
    fading : {"mc", "analytic"}
        ``mc`` averages over ``plan.fading_draws`` interferer fading draws,
        with the serving-link fading integrated in closed form
        (``P(|h0|^2 > x) = exp(-x)``); ``analytic`` uses the exact product
        over interferers.
    ar : bool
        Use the Shannon threshold ``2^R_t - 1`` in place of the
        finite-blocklength one.
    """
    if fading not in ("mc", "analytic"):
        raise DomainError("fading must be 'mc' or 'analytic'")
    R = SimPlan(**{**plan.__dict__, "r0": r0}).region_radius(cfg)
    if ar:
        omega = 2.0 ** target_rate - 1.0
        T = omega
    else:
        omega = sinr_threshold(target_rate, coding)
        shift = LOG2E * coding.backoff - correction_term(coding.n)
        T = 2.0 ** max(target_rate + shift, 0.0) - 1.0
    noise_n = cfg.noise * r0 ** cfg.eta / cfg.power if include_noise else 0.0
    F = plan.fading_draws

    def run(i, m):
        rng = substream(plan.seed, _META, i)
        # fading has its own stream so both fading modes see the same networks
        frng = substream(plan.seed, _META_FADING, i)
        cnt = rng.poisson(cfg.density * math.pi * (R * R - r0 * r0), size=m)
        exact = np.empty(m)
        approx = np.empty(m)
        for j in range(m):
            x = (r0 * r0 / (r0 * r0 + rng.random(cnt[j]) * (R * R - r0 * r0))) ** (0.5 * cfg.eta)
            approx[j] = math.exp(-np.sum(np.log1p(T * x)))
            if fading == "analytic":
                exact[j] = math.exp(-np.sum(np.log1p(omega * x)) - omega * noise_n)
            else:
                I = frng.standard_exponential((F, x.size)) @ x
                exact[j] = float(np.mean(np.exp(-omega * (I + noise_n))))
        return exact, approx

    parts = _run_chunks(run, SimPlan(**{**plan.__dict__, "chunk": min(plan.chunk, 50)}), plan.realizations)
    return MetaSamples(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
