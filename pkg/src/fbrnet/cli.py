"""
Command-line interface
======================

``fbrnet <subcommand> [options]``.  Every subcommand writes CSV with a
``#`` provenance header to ``--out`` (default stdout).

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
130 interrupted.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import REGISTRY, ConfigError, ExperimentConfig, ExperimentResult, run_experiment, write_csv
from .meta import MetaQuery, meta_cdf_beta, meta_cdf_gilpelaez
from .mlpcm import rate_sweep
from .network import PER_KM2, NetworkConfig
from .numerics import ConvergenceError, DomainError
from .outage import OutageQuery, outage_bounds, outage_spatial_eta4, reliability
from .qam import avg_rate_qam_fixed_r0, avg_rate_qam_spatial, make_qam
from .rates import CodingConfig, avg_rate_fixed_r0, avg_rate_spatial
from .simulator import SimPlan, empirical_avg_rate, empirical_outage, sample_links

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("fbrnet")


# ---------------------------------------------------------------------------
#  Parser
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _network_args(p: argparse.ArgumentParser, r0_default=None):
    p.add_argument("--snr-db", type=float, default=0.0, help="transmit SNR at 1 km in dB (inf for no noise)")
    p.add_argument("--lambda", dest="lambda_km2", type=float, default=1.0, help="BS density per km^2")
    p.add_argument("--eta", type=float, default=4.0, help="path-loss exponent")
    p.add_argument("--r0", type=float, default=r0_default,
                   help="serving distance in m; omit to average over the nearest-BS law")


def _coding_args(p: argparse.ArgumentParser, eps_name="--eps"):
    p.add_argument("--n", type=int, default=128, help="blocklength")
    p.add_argument(eps_name, dest="eps", type=float, default=1e-2, help="frame error rate (threshold)")


def _common_args(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI file with [fbrnet] and [params] sections")
    p.add_argument("--out", type=Path, help="CSV output path (default stdout)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--threads", type=int, help="worker cap for simulations (default 1)")
    p.add_argument("-v", "--verbose", action="count", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(add_help=False)
    _common_args(top)
    top.set_defaults(verbose=0)
    # the subcommand copies must not reset options given before the subcommand
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    _common_args(common)

    parser = argparse.ArgumentParser(prog="fbrnet", parents=[top],
                                     description="Finite-blocklength analysis of Poisson cellular downlinks.")
    parser.add_argument("--version", action="version", version=f"fbrnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common], help="average rate with Gaussian input")
    _network_args(p)
    _coding_args(p)

    p = sub.add_parser("rate-qam", parents=[common], help="average rate of an M-QAM constellation")
    _network_args(p)
    _coding_args(p)
    p.add_argument("--M", type=int, default=16, choices=[2, 4, 8, 16])

    p = sub.add_parser("outage", parents=[common], help="outage bounds and reliability")
    _network_args(p)
    _coding_args(p, "--eps-bar")
    p.add_argument("--target-rate", type=float, default=1.0)

    p = sub.add_parser("meta", parents=[common], help="meta distribution of the rate")
    p.add_argument("--lambda", dest="lambda_km2", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=4.0)
    p.add_argument("--r0", type=float, default=150.0)
    _coding_args(p, "--eps-bar")
    p.add_argument("--target-rate", type=float, default=1.0)
    p.add_argument("--p-t", type=_floats, default=[0.5, 0.9], help="comma-separated reliability targets")
    p.add_argument("--ar", action="store_true", help="Shannon-rate baseline")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo rate and outage")
    _network_args(p)
    _coding_args(p)
    p.add_argument("--M", type=int, default=0, help="constellation order, 0 for Gaussian input")
    p.add_argument("--target-rate", type=float, default=1.0)
    p.add_argument("--realizations", type=int, default=100_000)

    p = sub.add_parser("mlpcm", parents=[common], help="MLPCM rate sweep over AWGN")
    p.add_argument("--M", type=int, default=4, choices=[2, 4, 8, 16])
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--snr-db", type=_floats, default=[0.0, 5.0, 10.0], help="comma-separated AWGN SNRs")
    p.add_argument("--fer", type=float, default=1e-2)
    p.add_argument("--frames", type=int, default=2000)

    p = sub.add_parser("experiment", parents=[common], help="run a figure preset")
    p.add_argument("id", nargs="?", help="preset id; omit with --list")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a preset parameter (repeatable)")
    p.add_argument("--list", action="store_true", help="list presets and their defaults")
    return parser


# ---------------------------------------------------------------------------
#  Config file
# ---------------------------------------------------------------------------

def _read_config(path: Path | None) -> tuple[dict, dict]:
    """``([fbrnet] section, [params] section)`` of an INI file."""
    if path is None:
        return {}, {}
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"config: {exc}") from None
    unknown = set(cp.sections()) - {"fbrnet", "params"}
    if unknown:
        raise ConfigError(f"config: unknown section(s) {sorted(unknown)}; expected [fbrnet] and [params]")
    top = dict(cp["fbrnet"]) if cp.has_section("fbrnet") else {}
    params = dict(cp["params"]) if cp.has_section("params") else {}
    bad = set(top) - {"experiment", "out", "seed", "threads"}
    if bad:
        raise ConfigError(f"config: unknown [fbrnet] key(s) {sorted(bad)}")
    return top, params


def _int_field(name, value, default):
    if value is None:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected an integer, got {value!r}") from None


def _apply_params(args, parser_dests: set, params: dict, explicit: set):
    """Fill subcommand options from ``[params]`` unless given on the command line."""
    for key, raw in params.items():
        dest = key.replace("-", "_")
        if dest not in parser_dests:
            raise ConfigError(f"params.{key}: not an option of '{args.command}'")
        if dest in explicit:
            continue
        cur = getattr(args, dest)
        try:
            if isinstance(cur, list):
                val = _floats(raw)
            elif isinstance(cur, bool):
                val = raw.strip().lower() in ("1", "true", "yes", "on")
            elif isinstance(cur, int):
                val = int(raw)
            elif cur is None or isinstance(cur, float):
                val = float(raw)
            else:
                val = raw
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"params.{key}: cannot interpret {raw!r}") from None
        setattr(args, dest, val)


# ---------------------------------------------------------------------------
#  Subcommands
# ---------------------------------------------------------------------------

def _network(args) -> NetworkConfig:
    if math.isinf(args.snr_db):
        return NetworkConfig(args.lambda_km2 * PER_KM2, eta=args.eta)
    return NetworkConfig.from_snr_db(args.snr_db, args.lambda_km2, eta=args.eta)


def _params(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def _cmd_rate(args, seed, threads):
    cfg, coding = _network(args), CodingConfig(args.n, args.eps)
    res = avg_rate_spatial(cfg, coding) if args.r0 is None else avg_rate_fixed_r0(cfg.link(args.r0), cfg, coding)
    row = {"rate": res.rate, "capacity_term": res.capacity_term, "dispersion_term": res.dispersion_term,
           "correction_term": res.correction_term}
    return ("rate",), row, _params(args, ["snr_db", "lambda_km2", "eta", "r0", "n", "eps"])


def _cmd_rate_qam(args, seed, threads):
    cfg, coding, const = _network(args), CodingConfig(args.n, args.eps), make_qam(args.M)
    res = (avg_rate_qam_spatial(const, cfg, coding) if args.r0 is None
           else avg_rate_qam_fixed_r0(const, cfg.link(args.r0), cfg, coding))
    row = {"rate": res.rate, "capacity_term": res.capacity_term, "dispersion_term": res.dispersion_term,
           "correction_term": res.correction_term}
    return ("rate-qam",), row, _params(args, ["snr_db", "lambda_km2", "eta", "r0", "n", "eps", "M"])


def _cmd_outage(args, seed, threads):
    cfg = _network(args)
    q = OutageQuery(args.target_rate, CodingConfig(args.n, args.eps), args.r0)
    b = outage_bounds(q, cfg)
    closed = outage_spatial_eta4(q, cfg) if q.spatial and cfg.eta == 4 else math.nan
    row = {"lower": b.lower, "upper": b.upper, "upper_closed": closed,
           "reliability_fbr": reliability(q, cfg), "reliability_ar": reliability(q, cfg, regime="ar")}
    return ("outage",), row, _params(args, ["snr_db", "lambda_km2", "eta", "r0", "n", "eps", "target_rate"])


def _cmd_meta(args, seed, threads):
    cfg = NetworkConfig(args.lambda_km2 * PER_KM2, eta=args.eta)
    q = MetaQuery(args.target_rate, args.n, args.eps, r0=args.r0, ar=args.ar)
    p = np.asarray(args.p_t, dtype=float)
    gp = np.atleast_1d(meta_cdf_gilpelaez(q, cfg, p))
    beta = np.atleast_1d(meta_cdf_beta(q, cfg, p))
    rows = [{"p_t": pt, "gilpelaez": g, "beta": b} for pt, g, b in zip(p, gp, beta)]
    return ("meta",), rows, _params(args, ["lambda_km2", "eta", "r0", "n", "eps", "target_rate", "p_t", "ar"])


def _cmd_simulate(args, seed, threads):
    cfg, coding = _network(args), CodingConfig(args.n, args.eps)
    const = make_qam(args.M) if args.M else None
    plan = SimPlan(args.realizations, seed=seed, r0=args.r0, workers=threads)
    links = sample_links(cfg, plan)
    rate = empirical_avg_rate(cfg, coding, plan, const, links=links)
    out = empirical_outage(cfg, args.target_rate, coding, plan, const, links=links)
    row = {"rate": rate.mean, "rate_ci_low": rate.ci_low, "rate_ci_high": rate.ci_high,
           "outage": out.mean, "outage_ci_low": out.ci_low, "outage_ci_high": out.ci_high}
    return ("simulate",), row, _params(args, ["snr_db", "lambda_km2", "eta", "r0", "n", "eps", "M",
                                              "target_rate", "realizations"])


def _cmd_mlpcm(args, seed, threads):
    pts = rate_sweep(args.M, args.snr_db, args.fer, args.frames, n=args.n, seed=seed)
    rows = [{"snr_db": p.snr_db, "k": p.k, "rate": p.rate, "fer": p.fer, "ci_low": p.ci_low,
             "ci_high": p.ci_high} for p in pts]
    return ("mlpcm",), rows, _params(args, ["M", "n", "snr_db", "fer", "frames"])


_COMMANDS = {"rate": _cmd_rate, "rate-qam": _cmd_rate_qam, "outage": _cmd_outage, "meta": _cmd_meta,
             "simulate": _cmd_simulate, "mlpcm": _cmd_mlpcm}


def _emit(name, rows, params, seed, out: Path | None, wall: float, threads: int):
    rows = rows if isinstance(rows, list) else [rows]
    res = ExperimentResult(name, tuple(rows[0]) if rows else (), rows, params, seed, wall)
    if out is None:
        write_csv(res, sys.stdout)
        return
    with open(out, "w", newline="") as fh:
        write_csv(res, fh)
    side = {"command": name, "seed": seed, "threads": threads, "wall_time_s": round(wall, 3),
            "version": __version__}
    Path(str(out) + ".run.json").write_text(json.dumps(side, indent=2) + "\n")


def _list_presets():
    for name in sorted(REGISTRY):
        pr = REGISTRY[name]
        print(f"{name:7s} {pr.summary} [{pr.budget}]")
        for k, v in pr.defaults.items():
            print(f"          {k} = {v}")


def _run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(message)s")
    top, params = _read_config(args.config)
    seed = _int_field("seed", args.seed if args.seed is not None else top.get("seed"), 0)
    threads = _int_field("threads", args.threads if args.threads is not None else top.get("threads"), 1)
    out = args.out if args.out is not None else (Path(top["out"]) if "out" in top else None)
    if seed < 0:
        raise ConfigError("seed: must be non-negative")
    if threads < 1:
        raise ConfigError("threads: must be positive")

    if args.command == "experiment":
        if args.list:
            _list_presets()
            return EXIT_OK
        exp_id = args.id or top.get("experiment")
        if not exp_id:
            raise ConfigError("experiment: no id given; registered ids are " + ", ".join(sorted(REGISTRY)))
        overrides = dict(params)
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v
        config = ExperimentConfig(exp_id, overrides, str(out) if out else None, seed, threads)
        config.resolved()
        log.info("running %s (seed %d, %d threads)", exp_id, seed, threads)
        res = run_experiment(config, stream=None if out else sys.stdout,
                             log=(lambda row: log.debug("%s", row)))
        log.info("%s: %d rows in %.1f s", exp_id, len(res.rows), res.wall_time)
        return EXIT_OK

    explicit = {a.lstrip("-").replace("-", "_") for a in (argv or []) if a.startswith("--")}
    explicit |= {"lambda_km2"} if "lambda" in explicit else set()
    dests = set(vars(args)) - {"command", "config", "out", "seed", "threads", "verbose"}
    _apply_params(args, dests, params, explicit)
    start = time.perf_counter()
    name, rows, used = _COMMANDS[args.command](args, seed, threads)
    _emit(name[0], rows, used, seed, out, time.perf_counter() - start, threads)
    return EXIT_OK


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _run(argv)
    except (ConfigError, DomainError) as exc:
        print(f"fbrnet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"fbrnet: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        print("fbrnet: interrupted; partial results kept", file=sys.stderr)
        return 130
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); silence the final flush
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
