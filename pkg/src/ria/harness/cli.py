"""Command line entry point: ria {run,sweep,gain-scan,gamma-check,dmin,khintchine}."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .. import __version__
from ..numerics import set_default_precision
from . import io as rio
from . import scenarios as sc
from .config import CONFIG_VERSION, SWEEP_SCENARIOS, ConfigError, ExperimentConfig, load_config, validate

log = logging.getLogger("ria")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _default_config(scenario: str, seed: int | None) -> ExperimentConfig:
    return validate({"version": CONFIG_VERSION, "scenario": scenario, "sigma2": 1.0, "seed": seed or 0})


def _config(args, scenario: str | None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config, args.seed, args.out)
        if scenario and cfg.scenario != scenario:
            raise ConfigError(f"subcommand expects scenario '{scenario}', config has '{cfg.scenario}'")
        return cfg
    if scenario is None or scenario in SWEEP_SCENARIOS:
        raise ConfigError("--config is required for this subcommand")
    cfg = _default_config(scenario, args.seed)
    if args.out:
        cfg.values["out"] = args.out
    return cfg


def execute(cfg: ExperimentConfig, command: str, workers: int = 1) -> tuple[int, Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    started = rio.now()
    s = cfg.scenario
    if command == "dmin":
        res = sc.run_dmin(cfg)
        files = [rio.write_csv(out / "dmin.csv", sc.DMIN_COLUMNS, res.rows)]
    elif s in SWEEP_SCENARIOS:
        res = sc.run_sweep_scenario(cfg, workers)
        files = [rio.write_csv(out / "sweep.csv", rio.SWEEP_COLUMNS, res.rows)]
    elif s == "gain-scan":
        res = sc.gain_scan(cfg.farey_order, cfg.irrationals, cfg.measure, cfg.epsilon,
                           cfg.get("P_max", 1e12), cfg.trials, cfg.seed, cfg.sigma2)
        files = [rio.write_csv(out / "gain_scan.csv", rio.GAIN_SCAN_COLUMNS, res.rows)]
    elif s == "gamma-check":
        res = sc.gamma_check(cfg.max_nm, cfg.L_max)
        files = [rio.write_csv(out / "gamma_check.csv", rio.GAMMA_COLUMNS, res.rows)]
    elif s == "khintchine":
        res = sc.khintchine_table(cfg.get("alpha"), cfg.epsilon, cfg.Qmax, cfg.random_alpha, cfg.dim, cfg.seed)
        files = [rio.write_csv(out / "khintchine.csv", sc.KHINTCHINE_COLUMNS, res.rows)]
    elif s == "gic3-standardize":
        from .config import parse_gain_matrix

        res = sc.standardize_table(parse_gain_matrix(cfg.gains, cfg.seed, cfg.get("K")))
        files = [rio.write_csv(out / "standardize.csv", sc.STANDARDIZE_COLUMNS, res.rows)]
    else:
        raise ConfigError(f"unknown scenario {s}")
    for w in res.warnings:
        log.warning(w)
    status = "ok" if res.failed is None else "failed"
    rio.write_manifest(out, digest=cfg.digest(), seed=cfg.seed, version=__version__, started=started,
                       files=files, warnings=res.warnings, status=status, extra={"scenario": s, **res.extra})
    if res.failed:
        rio.write_error(out, "runtime", res.failed, EXIT_RUNTIME)
        return EXIT_RUNTIME, out
    return EXIT_OK, out


_SUBCOMMANDS = {
    "run": None,
    "sweep": None,
    "gain-scan": "gain-scan",
    "gamma-check": "gamma-check",
    "dmin": None,
    "khintchine": "khintchine",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ria", description="Real interference alignment experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
        s.add_argument("--precision", type=int, help="working precision in bits")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out_guess = Path(args.out or "out")
    try:
        if args.precision is not None:
            set_default_precision(args.precision)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        cfg = _config(args, _SUBCOMMANDS[args.command])
        out_guess = Path(cfg.out)
        if args.command == "sweep" and cfg.scenario not in SWEEP_SCENARIOS:
            raise ConfigError(f"scenario {cfg.scenario} is not a sweep")
        if args.command == "dmin" and cfg.scenario not in SWEEP_SCENARIOS:
            raise ConfigError(f"dmin needs a channel scenario, got {cfg.scenario}")
        code, out = execute(cfg, args.command, args.workers)
        print(f"wrote {out}", file=sys.stderr)
        return code
    except ConfigError as e:
        log.error("config error: %s", e)
        rio.write_error(out_guess, "config", str(e), EXIT_CONFIG)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001 - every failure becomes an error record
        log.error("%s: %s", type(e).__name__, e)
        rio.write_error(out_guess, type(e).__name__, str(e), EXIT_RUNTIME)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
