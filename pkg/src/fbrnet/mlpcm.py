"""
Multilevel polar-coded modulation
=================================

One polar code per bit level of an M-ary constellation, multistage
decoding with successive-cancellation (SC) decoders, and the rate-sweep
protocol that turns frame-error measurements into an achieved rate.

Polar transform convention: ``x = u F^{(x)m}`` over GF(2) with
``F = [[1, 0], [1, 1]]`` in natural (non bit-reversed) order, so for
``n = 2`` the codeword is ``(u0 ^ u1, u1)``.  LLRs are ``log P(0)/P(1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .network import NetworkConfig
from .numerics import DomainError, hermite2d_rule
from .qam import Constellation, cond_mi, make_qam
from .simulator import NetworkRealization, substream

__all__ = [
    "PolarCode",
    "MlpcmScheme",
    "FrameResult",
    "SweepPoint",
    "ga_reliabilities",
    "polar_construct",
    "polar_transform",
    "polar_encode",
    "polar_sc_decode",
    "sp_qam",
    "make_scheme",
    "level_capacities",
    "ml_map",
    "stage_llr",
    "mlpcm_transmit_decode",
    "measure_fer",
    "rate_sweep",
    "network_average",
]

_LLR_CAP = 1e12


# ---------------------------------------------------------------------------
#  Polar codes
# ---------------------------------------------------------------------------

def _phi(x):
    """Gaussian-approximation function for LLR mean ``x`` (Chung's fit)."""
    x = np.asarray(x, dtype=float)
    small = np.exp(-0.4527 * np.power(np.maximum(x, 1e-300), 0.86) + 0.0218)
    xl = np.maximum(x, 10.0)
    large = np.sqrt(math.pi / xl) * np.exp(-xl / 4.0) * (1.0 - 10.0 / (7.0 * xl))
    return np.where(x <= 0, 1.0, np.where(x < 10.0, small, large))


def _phi_inv(y):
    """Inverse of :func:`_phi` by bisection on a log scale."""
    y = np.asarray(y, dtype=float)
    lo = np.full(y.shape, 1e-12)
    hi = np.full(y.shape, 1e6)
    for _ in range(100):
        mid = np.sqrt(lo * hi)
        big = _phi(mid) > y
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    return np.sqrt(lo * hi)


def ga_reliabilities(n: int, design_snr_db: float) -> np.ndarray:
    """Mean LLR of each synthetic channel under Gaussian approximation.

    The channel is BPSK over real AWGN with ``Es/N0 = design_snr_db``
    (initial LLR mean ``4 Es/N0``).
    """
    m = int(round(math.log2(n)))
    if n < 1 or 2 ** m != n:
        raise DomainError("code length must be a power of two")
    mean = np.array([4.0 * 10.0 ** (design_snr_db / 10.0)])
    for _ in range(m):
        worse = _phi_inv(1.0 - (1.0 - _phi(mean)) ** 2)
        better = 2.0 * mean
        # the split applied first to the channel is the index MSB
        mean = np.stack([worse, better], axis=1).ravel()
    return mean


@dataclass(frozen=True)
class PolarCode:
    """Length-``n`` polar code with ``k`` information bits."""

    n: int
    k: int
    frozen: np.ndarray = field(repr=False)
    design_snr: float = 0.0

    def __post_init__(self):
        fr = np.asarray(self.frozen, dtype=bool)
        if fr.size != self.n or self.n & (self.n - 1):
            raise DomainError("frozen mask must have power-of-two length n")
        if not 0 <= self.k <= self.n or int(self.n - fr.sum()) != self.k:
            raise DomainError("frozen set size must equal n - k")
        fr.setflags(write=False)
        object.__setattr__(self, "frozen", fr)

    @property
    def frozen_set(self) -> np.ndarray:
        return np.flatnonzero(self.frozen)

    @property
    def info_set(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)

    @property
    def rate(self) -> float:
        return self.k / self.n


def polar_construct(n: int, k: int, design_snr: float) -> PolarCode:
    """Freeze the ``n - k`` least reliable synthetic channels."""
    if not 0 <= k <= n:
        raise DomainError("need 0 <= k <= n")
    rel = ga_reliabilities(n, design_snr)
    order = np.argsort(rel, kind="stable")
    frozen = np.zeros(n, dtype=bool)
    frozen[order[: n - k]] = True
    return PolarCode(n, k, frozen, design_snr)


def polar_transform(u) -> np.ndarray:
    """``u F^{(x)m}`` along the last axis (an involution over GF(2))."""
    x = np.array(u, dtype=np.uint8, copy=True)
    shape = x.shape
    n = shape[-1]
    x = x.reshape(-1, n)
    h = 1
    while h < n:
        v = x.reshape(x.shape[0], n // (2 * h), 2, h)
        v[:, :, 0, :] ^= v[:, :, 1, :]
        h *= 2
    return x.reshape(shape)


def polar_encode(code: PolarCode, info_bits) -> np.ndarray:
    """Codeword(s) for ``info_bits`` of shape ``(..., k)``."""
    info = np.asarray(info_bits, dtype=np.uint8)
    if info.shape[-1] != code.k:
        raise DomainError(f"expected {code.k} information bits")
    u = np.zeros(info.shape[:-1] + (code.n,), dtype=np.uint8)
    u[..., code.info_set] = info
    return polar_transform(u)


def _boxplus(a, b):
    """Exact check-node combination of two LLRs."""
    s = np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))
    return s + np.log1p(np.exp(-np.abs(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def _sc(llr, frozen):
    """Return ``(u_hat, x_hat)`` for a batch of LLR rows."""
    N = llr.shape[1]
    if N == 1:
        if frozen[0]:
            u = np.zeros((llr.shape[0], 1), dtype=np.uint8)
        else:
            u = (llr < 0).astype(np.uint8)
        return u, u
    if frozen.all():
        z = np.zeros(llr.shape, dtype=np.uint8)
        return z, z
    if not frozen.any():
        # unconstrained subtree: hard decisions are optimal
        x = (llr < 0).astype(np.uint8)
        return polar_transform(x), x
    h = N // 2
    a, b = llr[:, :h], llr[:, h:]
    u1, v1 = _sc(_boxplus(a, b), frozen[:h])
    u2, v2 = _sc(b + (1.0 - 2.0 * v1) * a, frozen[h:])
    return np.concatenate([u1, u2], axis=1), np.concatenate([v1 ^ v2, v2], axis=1)


def polar_sc_decode(code: PolarCode, llrs, *, return_codeword: bool = False):
    """Successive-cancellation decoding of one or more frames.

    Parameters
    ----------
    llrs : array_like, shape (..., n)
        Channel LLRs, positive favouring bit 0.
    return_codeword : bool
        Also return the re-encoded hard decisions.
    """
    l = np.asarray(llrs, dtype=float)
    if l.shape[-1] != code.n:
        raise DomainError(f"expected {code.n} LLRs")
    lead = l.shape[:-1]
    l = np.clip(l.reshape(-1, code.n), -_LLR_CAP, _LLR_CAP)
    u, x = _sc(l, code.frozen)
    info = u[:, code.info_set].reshape(lead + (code.k,))
    if return_codeword:
        return info, x.reshape(lead + (code.n,))
    return info


# ---------------------------------------------------------------------------
#  Labelling and mapping
# ---------------------------------------------------------------------------

def sp_qam(M: int) -> Constellation:
    """Set-partitioning labelled QAM on the same grid as :func:`make_qam`.

    The most significant label bit splits the grid into two checkerboard
    cosets (the least protected level); each further bit halves the
    current subset so that its minimum distance grows.
    """
    base = make_qam(M)
    if M == 2:
        return Constellation("BPSK-SP", base.symbols, base.labels)
    pts = base.points
    step = np.min(np.diff(np.unique(np.round(pts[:, 0], 12))))
    i = np.round((pts[:, 0] - pts[:, 0].min()) / step).astype(int)
    q = np.round((pts[:, 1] - pts[:, 1].min()) / step).astype(int) if M > 2 else np.zeros_like(i)
    bits = [(i + q) & 1, i & 1]
    if M >= 8:
        bits.append(((i >> 1) + (q >> 1)) & 1 if M == 16 else i >> 1)
    if M == 16:
        bits.append(i >> 1)
    m = len(bits)
    lab = sum(b << (m - 1 - j) for j, b in enumerate(bits))
    return Constellation(base.name + "-SP", base.symbols, lab)


@dataclass(frozen=True)
class MlpcmScheme:
    """Constellation plus one polar code per label bit (level 1 = MSB)."""

    constellation: Constellation
    codes: tuple
    labeling: str = "gray"

    def __post_init__(self):
        if len(self.codes) != self.constellation.bits:
            raise DomainError("need one code per label bit")
        if len({c.n for c in self.codes}) != 1:
            raise DomainError("all levels must share the code length")

    @property
    def levels(self) -> int:
        return len(self.codes)

    @property
    def n(self) -> int:
        return self.codes[0].n

    @property
    def k(self) -> int:
        return sum(c.k for c in self.codes)

    @property
    def rate(self) -> float:
        """Information bits per channel use."""
        return self.k / self.n


def level_capacities(const: Constellation, snr_db: float, order: int = 48) -> np.ndarray:
    """Mutual information of each level given the previous ones (bits).

    ``I(Y; b_i | b_1..b_{i-1})`` over complex AWGN at ``Es/N0 = snr_db``,
    from differences of subset mutual informations on a Hermite rule.
    """
    v = 10.0 ** (snr_db / 10.0)
    rule = hermite2d_rule(order)
    pts = const.points
    bm = const.bit_matrix()
    m = const.bits
    # H(Y | b_1..b_j) - H(Y | s) for j = 0..m via the entropy of subset mixtures
    cond = []
    for j in range(m + 1):
        acc = 0.0
        for s_idx in range(const.order):
            same = np.all(bm[:, :j] == bm[s_idx, :j], axis=1)
            d = pts[s_idx] - pts[same]
            proj = rule.nodes @ d.T
            e = -2.0 * math.sqrt(v) * proj - v * np.sum(d * d, axis=1)
            acc += float(rule.weights @ (logsumexp(e, axis=1) - math.log(same.sum()))) / math.pi
        cond.append(acc / const.order / math.log(2.0))
    # cond[j] = -I(Y; s | b_1..b_j)
    mi = [-c for c in cond]
    return np.array([mi[j] - mi[j + 1] for j in range(m)])


def _equiv_bpsk_snr(cap: float) -> float:
    """Real BPSK ``Es/N0`` (dB) whose capacity equals ``cap``."""
    bpsk = make_qam(2)
    rule = hermite2d_rule(48)
    lo, hi = -30.0, 30.0
    cap = min(max(cap, 1e-6), 1.0 - 1e-9)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        # complex noise of variance 1/v gives real BPSK Es/N0 = v
        if cond_mi(bpsk, 10.0 ** (mid / 10.0), rule) < cap:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_scheme(M: int, n: int, k: int, snr_db: float, *, labeling: str = "gray") -> MlpcmScheme:
    """Equal-rate scheme with per-level Gaussian-approximation construction.

    Each level's code is designed at the BPSK SNR whose capacity matches
    that level's capacity at ``snr_db``.
    """
    if labeling not in ("gray", "sp"):
        raise DomainError("labeling must be 'gray' or 'sp'")
    const = make_qam(M) if labeling == "gray" else sp_qam(M)
    caps = level_capacities(const, snr_db)
    codes = tuple(polar_construct(n, k, _equiv_bpsk_snr(c)) for c in caps)
    return MlpcmScheme(const, codes, labeling)


def ml_map(scheme: MlpcmScheme, codewords) -> np.ndarray:
    """Symbols for a ``(..., levels, n)`` bit array; level 1 is the label MSB."""
    U = np.asarray(codewords, dtype=np.int64)
    m = scheme.levels
    if U.shape[-2:] != (m, scheme.n):
        raise DomainError(f"expected trailing shape ({m}, {scheme.n})")
    w = (1 << np.arange(m - 1, -1, -1))[:, None]
    labels = np.sum(U * w, axis=-2)
    return scheme.constellation.by_label()[labels]


def _lse(x):
    """log-sum-exp over the last axis (finite inputs)."""
    mx = x.max(axis=-1)
    return mx + np.log(np.exp(x - mx[..., None]).sum(axis=-1))


def stage_llr(y, gain, noise_var, scheme: MlpcmScheme, level: int, prev_bits=None) -> np.ndarray:
    """Bit LLR of ``level`` (1-based) given the decided bits of earlier levels.

    Parameters
    ----------
    y : array_like
        Received samples ``gain * s + w`` with ``w ~ CN(0, noise_var)``.
    prev_bits : array_like, shape (level - 1, ...) or None
        Bits of levels ``1..level-1`` for each sample.
    """
    y = np.asarray(y, dtype=complex)
    m = scheme.levels
    if not 1 <= level <= m:
        raise DomainError("level out of range")
    sym = scheme.constellation.by_label()
    K = 1 << (m - level + 1)
    prefix = np.zeros(y.shape, dtype=np.int64)
    if level > 1:
        pb = np.asarray(prev_bits, dtype=np.int64).reshape((level - 1,) + y.shape)
        for j in range(level - 1):
            prefix = (prefix << 1) | pb[j]
    # labels consistent with the earlier levels; the first half has bit 0
    cand = sym[prefix[..., None] * K + np.arange(K)]
    metric = -np.abs(y[..., None] - np.asarray(gain)[..., None] * cand) ** 2 / np.asarray(noise_var)[..., None]
    return _lse(metric[..., : K // 2]) - _lse(metric[..., K // 2:])


# ---------------------------------------------------------------------------
#  Transmission
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameResult:
    decoded: np.ndarray
    level_errors: np.ndarray

    @property
    def frame_errors(self) -> np.ndarray:
        return self.level_errors.any(axis=-1)


def _channel(scheme, channel, frames, cfg):
    """Per-frame complex gain and noise variance."""
    if isinstance(channel, NetworkRealization):
        if cfg is None:
            raise DomainError("a network channel needs the NetworkConfig")
        g = math.sqrt(cfg.power) * channel.h0 * channel.r0 ** (-cfg.eta / 2.0)
        return np.full(frames, g), np.full(frames, cfg.noise + channel.interference)
    v = np.asarray(channel, dtype=float)
    if np.any(v < 0):
        raise DomainError("SNR must be non-negative")
    v = np.broadcast_to(v, (frames,))
    with np.errstate(divide="ignore"):
        return np.ones(frames, dtype=complex), np.where(v > 0, 1.0 / v, np.inf)


def mlpcm_transmit_decode(scheme: MlpcmScheme, message, channel, rng: np.random.Generator,
                          *, cfg: NetworkConfig | None = None, genie: bool = False) -> FrameResult:
    """Encode, transmit and multistage-decode a batch of frames.

    Parameters
    ----------
    message : array_like, shape (frames, sum of k)
        Information bits, level 1 first.
    channel : float, array_like or NetworkRealization
        Linear SNR per frame (AWGN, unit gain), or a network draw whose
        serving gain and realised interference power set the channel.
    genie : bool
        Feed the true bits of earlier levels to later demappers.
    """
    msg = np.atleast_2d(np.asarray(message, dtype=np.uint8))
    frames = msg.shape[0]
    if msg.shape[1] != scheme.k:
        raise DomainError(f"expected {scheme.k} message bits per frame")
    splits = np.cumsum([c.k for c in scheme.codes])[:-1]
    parts = np.split(msg, splits, axis=1)
    U = np.stack([polar_encode(c, p) for c, p in zip(scheme.codes, parts)], axis=1)
    s = ml_map(scheme, U)
    gain, nv = _channel(scheme, channel, frames, cfg)
    if np.any(np.isinf(nv)):
        raise DomainError("zero SNR cannot be decoded")
    w = (rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)) * np.sqrt(nv / 2.0)[:, None]
    y = gain[:, None] * s + w
    # noiseless frames still need a finite metric scale
    nv_eff = np.maximum(nv, 1e-30)[:, None]
    decided = []
    out = []
    errs = np.zeros((frames, scheme.levels), dtype=bool)
    for i, code in enumerate(scheme.codes):
        prev = None
        if i:
            prev = U[:, :i, :].transpose(1, 0, 2) if genie else np.stack(decided)
        llr = stage_llr(y, gain[:, None], nv_eff, scheme, i + 1, prev)
        info, x = polar_sc_decode(code, llr, return_codeword=True)
        decided.append(x)
        out.append(info)
        errs[:, i] = np.any(info != parts[i], axis=1)
    return FrameResult(np.concatenate(out, axis=1), errs)


# ---------------------------------------------------------------------------
#  Rate sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    k: int
    rate: float
    fer: float
    ci_low: float
    ci_high: float


def _wilson(errors: int, frames: int, z: float = 2.5758):
    p = errors / frames
    den = 1.0 + z * z / frames
    c = (p + z * z / (2 * frames)) / den
    h = z * math.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames)) / den
    return max(0.0, c - h), min(1.0, c + h)


def measure_fer(scheme: MlpcmScheme, snr_db: float, frames: int, rng: np.random.Generator,
                *, batch: int = 1000, genie: bool = False, max_errors: int | None = None) -> tuple[int, int]:
    """Frame errors over AWGN at ``snr_db``; returns ``(errors, frames run)``.

    With ``max_errors`` the run stops early once that many errors are seen.
    """
    v = 10.0 ** (snr_db / 10.0)
    errors = 0
    done = 0
    while done < frames and (max_errors is None or errors <= max_errors):
        b = min(batch, frames - done)
        msg = rng.integers(0, 2, size=(b, scheme.k), dtype=np.uint8)
        errors += int(mlpcm_transmit_decode(scheme, msg, v, rng, genie=genie).frame_errors.sum())
        done += b
    return errors, done


def rate_sweep(M: int, snr_grid, target_fer: float, frames: int, *, n: int = 128, seed: int = 0,
               step: int = 4, labeling: str = "gray") -> list[SweepPoint]:
    """Largest equal per-level ``k`` (multiple of ``step``) meeting ``target_fer``.

    At each SNR the codes are rebuilt for the operating point and ``k`` is
    found by bisection assuming the FER grows with ``k``.  Each
    ``(SNR index, k)`` pair draws its frames from its own substream.
    """
    out = []
    m = int(round(math.log2(M)))
    for si, snr in enumerate(np.atleast_1d(np.asarray(snr_grid, dtype=float))):
        def fer_at(k):
            scheme = make_scheme(M, n, k, float(snr), labeling=labeling)
            rng = substream(seed, 100 + si, k)
            # a run is a failure as soon as its error count exceeds the budget
            return measure_fer(scheme, float(snr), frames, rng, max_errors=int(target_fer * frames))

        cache = {}
        lo, hi = 0, n // step
        # invariant: lo*step passes (k = 0 trivially), hi*step + step fails or is n
        while lo < hi:
            mid = (lo + hi + 1) // 2
            e, f = cache.setdefault(mid, fer_at(mid * step))
            if e / f <= target_fer:
                lo = mid
            else:
                hi = mid - 1
        k = lo * step
        if k:
            e, f = cache[lo]
        else:
            e, f = 0, frames
        lo_ci, hi_ci = _wilson(e, f)
        out.append(SweepPoint(float(snr), k, k * m / n, e / f, lo_ci, hi_ci))
    return out


def network_average(points: list[SweepPoint], sinr) -> float:
    """Average of the swept rate over SINR samples (linear in dB, zero below the grid)."""
    snr = np.array([p.snr_db for p in points])
    rate = np.array([p.rate for p in points])
    x = 10.0 * np.log10(np.maximum(np.asarray(sinr, dtype=float), 1e-300))
    r = np.interp(x, snr, rate, left=0.0, right=rate[-1])
    return float(np.mean(r))
