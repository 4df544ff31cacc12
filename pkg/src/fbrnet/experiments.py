"""
Experiment presets
==================

Each preset is a generator of result rows plus a table of default
parameters.  :func:`run_experiment` validates the parameters, streams the
rows to CSV under a provenance header and returns the table.

Rows are flushed as they are produced, so an interrupted run leaves a
valid partial file.  The header records only deterministic provenance
(parameters, library version, seed); wall time goes to a JSON sidecar so
that re-running with the same seed reproduces the CSV byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from . import __version__
from .meta import MetaQuery, meta_cdf_beta, meta_cdf_gilpelaez, meta_empirical
from .mlpcm import network_average, rate_sweep
from .network import PER_KM2, NetworkConfig, b_moments, interference_cdf, serving_distance, sinr_pdf_gamma
from .numerics import DomainError
from .outage import (
    OutageQuery,
    outage_bounds,
    outage_spatial_eta4,
    reliability,
)
from .qam import avg_rate_qam_fixed_r0, avg_rate_qam_spatial, make_qam
from .rates import CodingConfig, avg_capacity_ar, avg_rate_fixed_r0, avg_rate_spatial
from .simulator import SimPlan, empirical_avg_rate, empirical_outage, sample_links

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "REGISTRY",
    "parse_value",
    "run_experiment",
    "write_csv",
]


class ConfigError(ValueError):
    """Invalid experiment id or parameter; the message names the field."""


Row = dict


@dataclass(frozen=True)
class Preset:
    func: Callable[[dict, "ExperimentConfig"], Iterator[Row]]
    columns: tuple
    defaults: dict
    summary: str
    budget: str


@dataclass(frozen=True)
class ExperimentConfig:
    """Experiment id, parameter overrides, output path, seed and worker cap."""

    experiment: str
    params: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    threads: int = 1

    def resolved(self) -> dict:
        """Defaults merged with overrides, each coerced to its default's type."""
        preset = _preset(self.experiment)
        merged = dict(preset.defaults)
        for key, value in self.params.items():
            if key not in preset.defaults:
                raise ConfigError(f"{self.experiment}.{key}: unknown parameter; "
                                  f"expected one of {sorted(preset.defaults)}")
            merged[key] = _coerce(self.experiment, key, value, preset.defaults[key])
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads: must be a positive integer")
        return merged


@dataclass
class ExperimentResult:
    experiment: str
    columns: tuple
    rows: list
    params: dict
    seed: int
    wall_time: float = 0.0
    interrupted: bool = False

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])


# ---------------------------------------------------------------------------
#  Parameter parsing
# ---------------------------------------------------------------------------

def parse_value(text: str):
    """Parse ``"1e-2"``, ``"128"``, ``"inf"``, ``"a,b,c"`` or a bare word."""
    text = text.strip()
    if "," in text:
        return [parse_value(t) for t in text.split(",") if t.strip()]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "yes", "on"):
        return True
    if text.lower() in ("false", "no", "off"):
        return False
    return text


def _kind(default) -> str:
    if isinstance(default, list):
        return f"list of {type(default[0]).__name__ if default else 'float'}"
    return type(default).__name__


def _coerce(exp, key, value, default):
    where = f"{exp}.{key}"
    if isinstance(value, str) and not isinstance(default, str):
        value = parse_value(value)
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, list):
            items = value if isinstance(value, list) else [value]
            kind = type(default[0]) if default else float
            return [kind(v) for v in items]
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise TypeError
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot interpret {value!r} as {_kind(default)}") from None


def _grid(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0 or stop < start:
        raise ConfigError("grid: need step > 0 and stop >= start")
    return np.round(np.arange(start, stop + 0.5 * step, step), 10)


def _plan(p: dict, cfg: ExperimentConfig, **kw) -> SimPlan | None:
    """Simulation plan, or ``None`` when the preset asks for zero realizations."""
    if not kw.get("realizations"):
        return None
    return SimPlan(seed=cfg.seed, workers=cfg.threads, **kw)


def _alpha0_to_ref(alpha0_db: float, r0: float, eta: float) -> float:
    """Transmit SNR at 1 km that gives average SNR ``alpha0_db`` at ``r0``."""
    return alpha0_db + 10.0 * eta * math.log10(r0 / 1000.0)


# ---------------------------------------------------------------------------
#  Presets
# ---------------------------------------------------------------------------

def _fig1(p, cfg):
    net = NetworkConfig.from_snr_db(0.0, p["lambda_km2"], eta=p["eta"])
    for r0 in p["r0"]:
        mean = b_moments(net, r0)[0]
        x = mean * np.geomspace(p["x_min"], p["x_max"], p["points"])
        exact = interference_cdf(x, net, r0, method="exact")
        gamma = interference_cdf(x, net, r0, method="gamma")
        for xi, e, g in zip(x, exact, gamma):
            yield {"r0": r0, "x": xi, "cdf_exact": e, "cdf_gamma": g}


def _fig2a(p, cfg):
    r0 = p["r0"]
    for snr in _grid(p["snr_min"], p["snr_max"], p["snr_step"]):
        net = NetworkConfig.from_snr_db(snr, p["lambda_km2"], eta=p["eta"])
        geom = net.link(r0)
        ar = avg_capacity_ar(geom, net)
        yield {"snr_db": snr, "n": 0, "eps": 0.0, "rate": ar}
        for n in p["n"]:
            for eps in p["eps"]:
                res = avg_rate_fixed_r0(geom, net, CodingConfig(n, eps))
                yield {"snr_db": snr, "n": n, "eps": eps, "rate": res.rate}


def _fig3a(p, cfg):
    net = NetworkConfig.from_snr_db(p["snr_db"], p["lambda_km2"], eta=p["eta"])
    v = np.geomspace(p["sinr_min"], p["sinr_max"], p["points"])
    K = np.sqrt(1.0 - (1.0 + v) ** -2)
    for r0 in p["r0"]:
        pdf = sinr_pdf_gamma(v, net, r0)
        for vi, ki, fi in zip(v, K, pdf):
            yield {"r0": r0, "sinr": vi, "K": ki, "pdf": fi}


def _fig3b(p, cfg):
    r0 = p["r0"]
    coding = CodingConfig(p["n"], p["eps"])
    base = NetworkConfig.from_snr_db(0.0, p["lambda_km2"], eta=p["eta"])
    plan = _plan(p, cfg, realizations=p["realizations"], r0=r0)
    links = sample_links(base, plan) if plan else None
    for a0 in _grid(p["alpha0_min"], p["alpha0_max"], p["alpha0_step"]):
        net = base.with_snr_db(_alpha0_to_ref(a0, r0, base.eta))
        for M in p["M"]:
            const = make_qam(M)
            th = avg_rate_qam_fixed_r0(const, net.link(r0), net, coding).rate
            row = {"alpha0_db": a0, "M": M, "rate_theory": th,
                   "rate_mc": math.nan, "ci_low": math.nan, "ci_high": math.nan}
            if links is not None:
                est = empirical_avg_rate(net, coding, plan, const, links=links)
                row.update(rate_mc=est.mean, ci_low=est.ci_low, ci_high=est.ci_high)
            yield row


def _fig4a(p, cfg):
    for snr in _grid(p["snr_min"], p["snr_max"], p["snr_step"]):
        net = NetworkConfig.from_snr_db(snr, p["lambda_km2"], eta=p["eta"])
        for n in p["n"]:
            for eps in p["eps"]:
                res = avg_rate_spatial(net, CodingConfig(n, eps))
                yield {"snr_db": snr, "n": n, "eps": eps, "rate": res.rate}


def _fig4b(p, cfg):
    coding = CodingConfig(p["n"], p["eps"])
    for snr in _grid(p["snr_min"], p["snr_max"], p["snr_step"]):
        net = NetworkConfig.from_snr_db(snr, p["lambda_km2"], eta=p["eta"])
        yield {"snr_db": snr, "M": 0, "rate": avg_rate_spatial(net, coding).rate}
        for M in p["M"]:
            yield {"snr_db": snr, "M": M, "rate": avg_rate_qam_spatial(make_qam(M), net, coding).rate}


def _fig5(p, cfg):
    r0 = p["r0"]
    coding = CodingConfig(p["n"], p["fer"])
    base = NetworkConfig.from_snr_db(0.0, p["lambda_km2"], eta=p["eta"])
    plan = _plan(p, cfg, realizations=p["realizations"], r0=r0)
    if plan is None:
        raise ConfigError("fig5.realizations: must be positive")
    links = sample_links(base, plan)
    alpha0 = _grid(p["alpha0_min"], p["alpha0_max"], p["alpha0_step"])
    awgn = _grid(p["awgn_min"], p["awgn_max"], p["awgn_step"])
    for M in p["M"]:
        pts = rate_sweep(M, awgn, p["fer"], p["frames"], n=p["n"], seed=cfg.seed)
        for a0 in alpha0:
            net = base.with_snr_db(_alpha0_to_ref(a0, r0, base.eta))
            th = avg_rate_qam_fixed_r0(make_qam(M), net.link(r0), net, coding).rate
            yield {"alpha0_db": a0, "M": M, "rate_theory": th,
                   "rate_mlpcm": network_average(pts, links.sinr(net))}


def _fig6(p, cfg):
    rt = p["target_rate"]
    for lam in p["lambda_km2"]:
        net = NetworkConfig.from_snr_db(p["snr_db"], lam, eta=p["eta"])
        law = serving_distance(net)
        for r0 in _grid(p["r0_min"], p["r0_max"], p["r0_step"]):
            plan = _plan(p, cfg, realizations=p["realizations"], r0=float(r0))
            links = sample_links(net, plan) if plan else None
            for n in p["n"]:
                for eps in p["eps"]:
                    q = OutageQuery(rt, CodingConfig(n, eps), float(r0))
                    b = outage_bounds(q, net)
                    row = {"lambda_km2": lam, "n": n, "eps": eps, "r0": r0, "pdf_r0": float(law.pdf(r0)),
                           "lower": b.lower, "upper": b.upper, "simulated": math.nan,
                           "ci_low": math.nan, "ci_high": math.nan}
                    if links is not None:
                        est = empirical_outage(net, rt, q.coding, plan, links=links)
                        row.update(simulated=est.mean, ci_low=est.ci_low, ci_high=est.ci_high)
                    yield row


def _fig7(p, cfg):
    net = NetworkConfig.from_snr_db(p["snr_db"], p["lambda_km2"], eta=p["eta"])
    plan = _plan(p, cfg, realizations=p["realizations"])
    links = sample_links(net, plan) if plan else None
    for rt in _grid(p["rate_min"], p["rate_max"], p["rate_step"]):
        for n in p["n"]:
            for eps in p["eps"]:
                q = OutageQuery(float(rt), CodingConfig(n, eps))
                b = outage_bounds(q, net)
                closed = outage_spatial_eta4(q, net) if net.eta == 4 else math.nan
                row = {"target_rate": rt, "n": n, "eps": eps, "lower": b.lower, "upper": b.upper,
                       "upper_closed": closed, "simulated": math.nan}
                if links is not None:
                    row["simulated"] = empirical_outage(net, float(rt), q.coding, plan, links=links).mean
                yield row


def _fig8(p, cfg):
    net = NetworkConfig.from_snr_db(p["snr_db"], p["lambda_km2"], eta=p["eta"])
    coding = CodingConfig(p["n"], p["eps"])
    consts = [make_qam(M) for M in p["M"]]
    if not p["realizations"]:
        raise ConfigError("fig8.realizations: must be positive")

    def rows(r0, rt, plan, links):
        q = OutageQuery(rt, coding, r0)
        b = outage_bounds(q, net)
        row = {"r0": math.nan if r0 is None else r0, "target_rate": rt, "lower": b.lower, "upper": b.upper}
        for M, const in zip(p["M"], consts):
            row[f"M{M}"] = empirical_outage(net, rt, coding, plan, const, links=links).mean
        return row

    for r0 in _grid(p["r0_min"], p["r0_max"], p["r0_step"]):
        plan = _plan(p, cfg, realizations=p["realizations"], r0=float(r0))
        links = sample_links(net, plan)
        for rt in p["target_rates"]:
            yield rows(float(r0), rt, plan, links)
    plan = _plan(p, cfg, realizations=p["realizations"])
    links = sample_links(net, plan)
    for rt in _grid(p["rate_min"], p["rate_max"], p["rate_step"]):
        yield rows(None, float(rt), plan, links)


def _meta_rows(q: MetaQuery, net, p_grid, plan, tag: dict):
    gp = meta_cdf_gilpelaez(q, net, p_grid)
    beta = meta_cdf_beta(q, net, p_grid)
    sim = np.full(p_grid.shape, math.nan)
    if plan is not None:
        sim = meta_empirical(q, net, plan).ccdf(p_grid, "exact")
    for i, pt in enumerate(p_grid):
        yield {**tag, "p_t": pt, "gilpelaez": gp[i], "beta": beta[i], "simulated": sim[i]}


def _meta_plan(p, cfg):
    return _plan(p, cfg, realizations=p["realizations"], fading_draws=p["fading_draws"],
                 region_scale=p["region_scale"], chunk=50)


def _fig9a(p, cfg):
    net = NetworkConfig(p["lambda_km2"] * PER_KM2, eta=p["eta"])
    p_grid = np.linspace(p["p_min"], p["p_max"], p["points"])
    plan = _meta_plan(p, cfg)
    for rt in p["target_rates"]:
        q = MetaQuery(rt, p["n"], p["eps_bar"], r0=p["r0"])
        yield from _meta_rows(q, net, p_grid, plan, {"target_rate": rt, "regime": "fbr"})
        yield from _meta_rows(q.as_ar(), net, p_grid, plan, {"target_rate": rt, "regime": "ar"})


def _fig9b(p, cfg):
    net = NetworkConfig(p["lambda_km2"] * PER_KM2, eta=p["eta"])
    p_grid = np.linspace(p["p_min"], p["p_max"], p["points"])
    plan = _meta_plan(p, cfg)
    for r0 in p["r0"]:
        q = MetaQuery(p["target_rate"], p["n"], p["eps_bar"], r0=r0)
        yield from _meta_rows(q, net, p_grid, plan, {"r0": r0})


def _fig11(p, cfg):
    eps_grid = np.geomspace(p["eps_min"], p["eps_max"], p["points"])
    cases = [("fixed", NetworkConfig.from_snr_db(p["fixed_snr_db"], p["fixed_lambda_km2"], eta=p["eta"]),
              p["fixed_r0"]),
             ("random", NetworkConfig.from_snr_db(p["random_snr_db"], p["random_lambda_km2"], eta=p["eta"]),
              None)]
    for case, net, r0 in cases:
        for n in p["n"]:
            for rt in p["target_rates"]:
                ar = None
                for eps in eps_grid:
                    q = OutageQuery(rt, CodingConfig(n, float(eps)), r0)
                    if ar is None:
                        ar = reliability(q, net, regime="ar")
                    yield {"case": case, "n": n, "target_rate": rt, "eps_bar": eps,
                           "fbr": reliability(q, net, regime="fbr"), "ar": ar}


def _custom(p, cfg):
    net = NetworkConfig.from_snr_db(p["snr_db"], p["lambda_km2"], eta=p["eta"])
    coding = CodingConfig(p["n"], p["eps"])
    r0 = p["r0"] if p["r0"] > 0 else None
    const = make_qam(p["M"]) if p["M"] else None
    if r0 is None:
        rate = (avg_rate_spatial(net, coding) if const is None else avg_rate_qam_spatial(const, net, coding)).rate
    else:
        geom = net.link(r0)
        rate = (avg_rate_fixed_r0(geom, net, coding) if const is None
                else avg_rate_qam_fixed_r0(const, geom, net, coding)).rate
    q = OutageQuery(p["target_rate"], coding, r0)
    b = outage_bounds(q, net)
    row = {"rate": rate, "outage_lower": b.lower, "outage_upper": b.upper,
           "reliability": reliability(q, net), "rate_mc": math.nan, "outage_mc": math.nan}
    if p["realizations"]:
        plan = _plan(p, cfg, realizations=p["realizations"], r0=r0)
        links = sample_links(net, plan)
        row["rate_mc"] = empirical_avg_rate(net, coding, plan, const, links=links).mean
        row["outage_mc"] = empirical_outage(net, p["target_rate"], coding, plan, const, links=links).mean
    yield row


_NET = {"lambda_km2": 1.0, "eta": 4.0}
_META_SIM = {"realizations": 0, "fading_draws": 2000, "region_scale": 40.0}

REGISTRY: dict[str, Preset] = {
    "fig1": Preset(_fig1, ("r0", "x", "cdf_exact", "cdf_gamma"),
                   {**_NET, "r0": [150.0, 250.0], "x_min": 1e-2, "x_max": 1e2, "points": 60},
                   "interference power CDF, numerical inversion vs Gamma fit", "< 1 min"),
    "fig2a": Preset(_fig2a, ("snr_db", "n", "eps", "rate"),
                    {**_NET, "r0": 250.0, "n": [128, 2048], "eps": [1e-2, 1e-5, 1e-6],
                     "snr_min": -20.0, "snr_max": 40.0, "snr_step": 1.0},
                    "average rate vs transmit SNR at fixed r0 (n = 0 rows are the Shannon rate)", "< 1 min"),
    "fig3a": Preset(_fig3a, ("r0", "sinr", "K", "pdf"),
                    {**_NET, "snr_db": 0.0, "r0": [150.0, 250.0], "sinr_min": 1e-2, "sinr_max": 1e3,
                     "points": 100},
                    "dispersion factor K(sinr) and the Gamma-approximate SINR density", "< 10 s"),
    "fig3b": Preset(_fig3b, ("alpha0_db", "M", "rate_theory", "rate_mc", "ci_low", "ci_high"),
                    {**_NET, "r0": 150.0, "n": 128, "eps": 1e-2, "M": [2, 4, 16],
                     "alpha0_min": -10.0, "alpha0_max": 40.0, "alpha0_step": 2.0, "realizations": 100_000},
                    "M-QAM average rate at fixed r0, analysis vs simulation", "< 5 min"),
    "fig4a": Preset(_fig4a, ("snr_db", "n", "eps", "rate"),
                    {**_NET, "n": [128, 2048], "eps": [1e-2, 1e-5], "snr_min": -20.0, "snr_max": 40.0,
                     "snr_step": 2.0},
                    "average rate over the serving distance vs transmit SNR", "< 5 min"),
    "fig4b": Preset(_fig4b, ("snr_db", "M", "rate"),
                    {**_NET, "n": 512, "eps": 1e-2, "M": [2, 4, 8, 16], "snr_min": -20.0, "snr_max": 40.0,
                     "snr_step": 2.0},
                    "M-QAM average rate over the serving distance (M = 0 is Gaussian input)", "< 10 min"),
    "fig5": Preset(_fig5, ("alpha0_db", "M", "rate_theory", "rate_mlpcm"),
                   {**_NET, "r0": 150.0, "n": 128, "fer": 1e-2, "M": [2, 4, 8, 16], "frames": 2000,
                    "realizations": 20_000, "alpha0_min": -10.0, "alpha0_max": 40.0, "alpha0_step": 1.0,
                    "awgn_min": -12.0, "awgn_max": 30.0, "awgn_step": 1.0},
                   "multilevel polar coded modulation vs the M-QAM analysis", "< 10 min at 2000 frames"),
    "fig6": Preset(_fig6, ("lambda_km2", "n", "eps", "r0", "pdf_r0", "lower", "upper", "simulated",
                           "ci_low", "ci_high"),
                   {"lambda_km2": [1.0, 9.0], "eta": 4.0, "snr_db": 0.0, "target_rate": 1.0,
                    "n": [128, 2048], "eps": [1e-2, 1e-6], "r0_min": 20.0, "r0_max": 600.0, "r0_step": 20.0,
                    "realizations": 20_000},
                   "rate outage vs r0: bounds and simulation", "< 5 min"),
    "fig7": Preset(_fig7, ("target_rate", "n", "eps", "lower", "upper", "upper_closed", "simulated"),
                   {**_NET, "snr_db": 0.0, "n": [128, 2048], "eps": [1e-2, 1e-6], "rate_min": 0.1,
                    "rate_max": 6.0, "rate_step": 0.1, "realizations": 100_000},
                   "rate outage over the serving distance vs target rate", "< 2 min"),
    "fig8": Preset(_fig8, ("r0", "target_rate", "lower", "upper", "M2", "M4", "M8", "M16"),
                   {**_NET, "snr_db": 0.0, "n": 128, "eps": 1e-2, "M": [2, 4, 8, 16],
                    "target_rates": [0.825, 1.85], "r0_min": 20.0, "r0_max": 600.0, "r0_step": 20.0,
                    "rate_min": 0.1, "rate_max": 4.5, "rate_step": 0.1, "realizations": 20_000},
                   "M-QAM rate outage by simulation (r0 = nan rows average over r0)", "< 5 min"),
    "fig9a": Preset(_fig9a, ("target_rate", "regime", "p_t", "gilpelaez", "beta", "simulated"),
                    {**_NET, **_META_SIM, "r0": 150.0, "n": 128, "eps_bar": 1e-5,
                     "target_rates": [0.1375, 0.3964, 1.0, 2.0574, 3.4594],
                     "p_min": 0.01, "p_max": 0.99, "points": 50},
                    "meta distribution of the rate, finite blocklength vs Shannon", "< 10 min"),
    "fig9b": Preset(_fig9b, ("r0", "p_t", "gilpelaez", "beta", "simulated"),
                    {**_NET, **_META_SIM, "realizations": 2000, "r0": [150.0, 250.0, 500.0],
                     "target_rate": 1.0, "n": 128, "eps_bar": 1e-2, "p_min": 0.01, "p_max": 0.99,
                     "points": 50},
                    "meta distribution: exact simulation vs inversion vs beta fit", "< 10 min"),
    "fig11": Preset(_fig11, ("case", "n", "target_rate", "eps_bar", "fbr", "ar"),
                    {"eta": 4.0, "n": [128, 2048], "target_rates": [0.1375, 1.0, 3.46],
                     "fixed_lambda_km2": 1.0, "fixed_snr_db": 0.0, "fixed_r0": 250.0,
                     "random_lambda_km2": 0.1, "random_snr_db": 10.0,
                     "eps_min": 1e-8, "eps_max": 0.45, "points": 60},
                    "reliability vs FER threshold at fixed and random r0", "< 1 min"),
    "custom": Preset(_custom, ("rate", "outage_lower", "outage_upper", "reliability", "rate_mc", "outage_mc"),
                     {**_NET, "snr_db": 0.0, "r0": 250.0, "n": 128, "eps": 1e-2, "M": 0,
                      "target_rate": 1.0, "realizations": 0},
                     "single operating point (r0 <= 0 averages over r0, M = 0 is Gaussian input)", "< 1 min"),
}
REGISTRY["fig9"] = REGISTRY["fig9a"]


def _preset(name: str) -> Preset:
    if name not in REGISTRY:
        raise ConfigError(f"experiment: unknown id {name!r}; registered ids are {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name]


# ---------------------------------------------------------------------------
#  Runner
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _header(res: ExperimentResult) -> list[str]:
    lines = [f"fbrnet {__version__}", f"experiment: {res.experiment}", f"seed: {res.seed}"]
    lines += [f"param {k} = {_fmt(v) if not isinstance(v, list) else ','.join(map(_fmt, v))}"
              for k, v in sorted(res.params.items())]
    return lines


def write_csv(res: ExperimentResult, stream) -> None:
    """Write the provenance header and the rows of ``res`` to ``stream``."""
    for line in _header(res):
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(res.columns)
    for row in res.rows:
        w.writerow([_fmt(row.get(c, math.nan)) for c in res.columns])


def run_experiment(config: ExperimentConfig, *, stream=None, log=None) -> ExperimentResult:
    """Run a preset, streaming CSV to ``config.out`` (or ``stream``).

    A ``<out>.run.json`` sidecar records the wall time.  On
    ``KeyboardInterrupt`` the rows produced so far are kept, a
    ``# interrupted`` trailer is written and the exception propagates.
    """
    preset = _preset(config.experiment)
    params = config.resolved()
    res = ExperimentResult(config.experiment, preset.columns, [], params, config.seed)
    own = None
    if stream is None and config.out:
        own = open(config.out, "w", newline="")
        stream = own
    stream = stream if stream is not None else io.StringIO()
    for line in _header(res):
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(res.columns)
    start = time.perf_counter()
    try:
        for row in preset.func(params, config):
            res.rows.append(row)
            w.writerow([_fmt(row.get(c, math.nan)) for c in res.columns])
            stream.flush()
            if log:
                log(row)
    except KeyboardInterrupt:
        res.interrupted = True
        stream.write("# interrupted\n")
        raise
    except DomainError as exc:
        raise ConfigError(f"{config.experiment}: {exc}") from exc
    finally:
        res.wall_time = time.perf_counter() - start
        if own is not None:
            own.close()
            side = {"experiment": config.experiment, "seed": config.seed, "threads": config.threads,
                    "wall_time_s": round(res.wall_time, 3), "rows": len(res.rows),
                    "interrupted": res.interrupted, "version": __version__}
            Path(str(config.out) + ".run.json").write_text(json.dumps(side, indent=2) + "\n")
    return res
