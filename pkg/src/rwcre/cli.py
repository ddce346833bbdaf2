"""Command-line entry point: ``rwcre <subcommand> --config PATH ...``.

Exit codes: 0 when every selected suite passes, 1 on a statistical failure,
2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .runner import (CONFIG_HELP, ConfigError, RunIncomplete, load_config, persist,
                     run_experiment, write_manifest)
from .theory import ScalingConstants, chi_n, kesten_cdf, kesten_density, sigma_V_sq

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SUBCOMMAND_SUITES = {
    "simulate": [],
    "verify-marginal": ["marginal"],
    "verify-fdd": ["fdd"],
    "verify-flatness": ["flatness"],
    "oracle-check": ["oracle"],
}


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, type=Path,
                   help="experiment config (TOML) or a manifest.json to re-run")
    p.add_argument("--seed", type=int, help="override the master seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory (default: config 'out')")
    p.add_argument("--workers", type=int, default=1,
                   help="number of replica chunks run in parallel (outputs do not depend on it)")
    p.add_argument("--dump-paths", action="store_true", help="also write raw_paths.csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwcre", description="Random walks in cooling random environment: simulation and "
        "verification of the annealed functional limits.",
        epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_SUITES:
        p = sub.add_parser(name, epilog=CONFIG_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        _add_run_args(p)
    t = sub.add_parser("targets", help="print Kesten density/CDF, sigma_V^2 and chi_n as CSV")
    t.add_argument("--config", type=Path, help="take rule and schedule (and horizons) from here")
    t.add_argument("--x-min", type=float, default=-5.0)
    t.add_argument("--x-max", type=float, default=5.0)
    t.add_argument("--points", type=int, default=101)
    t.add_argument("--horizons", type=int, nargs="*", help="horizons for chi_n")
    t.add_argument("--out", type=Path, help="write targets.csv here instead of stdout")
    return parser


def targets_csv(x: np.ndarray, horizons, consts: ScalingConstants | None) -> str:
    lines = ["section,x,value1,value2", f"sigma_V_sq,,{sigma_V_sq():.17g},"]
    for v in x:
        lines.append(f"kesten,{v:.17g},{kesten_density(v):.17g},{kesten_cdf(v):.17g}")
    if consts is not None:
        for n in horizons:
            lines.append(f"chi_n,{n},{chi_n(consts, n):.17g},{consts.regime}")
    return "\n".join(lines) + "\n"


def _targets(args) -> int:
    consts = None
    horizons = args.horizons or []
    if args.config:
        cfg = load_config(args.config)
        horizons = horizons or cfg.horizons
        try:
            consts = ScalingConstants.from_model(cfg.rule, cfg.schedule)
        except ValueError as exc:
            logging.warning("%s", exc)
    elif horizons:
        from .cooling import CoolingSchedule
        from .env import ResamplingRule
        consts = ScalingConstants.from_model(ResamplingRule.two_point(), CoolingSchedule.polynomial())
    if args.points < 1:
        raise ConfigError("--points must be >= 1")
    x = np.linspace(args.x_min, args.x_max, args.points)
    text = targets_csv(x, horizons, consts)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "targets.csv").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        from .rng import check_seed
        cfg.seed = check_seed(args.seed)
    if args.dump_paths:
        cfg.dump_paths = True
    if args.workers < 1:
        raise ConfigError("--workers must be >= 1")
    out = args.out or Path(cfg.out)
    suites = SUBCOMMAND_SUITES[args.command]
    try:
        result = run_experiment(cfg, workers=args.workers, suites=suites)
    except RunIncomplete as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(exc.args[0], out)
        logging.error("run incomplete: %s", exc.args[0].get("error"))
        return EXIT_FAIL
    persist(result, cfg, out)
    for rep in result.reports:
        status = rep.get("pass")
        tag = "PASS" if status else ("FAIL" if status is False else "info")
        detail = ", ".join(f"{k}={rep[k]:.4g}" for k in ("statistic", "p_value", "max_corr_error",
                                                        "median") if isinstance(rep.get(k), float))
        for key in ("ks", "medians"):
            if key in rep:
                detail = f"{key}=" + " -> ".join(f"{v:.4g}" for v in rep[key])
        where = rep.get("horizon", "all")
        print(f"[{tag}] {rep['suite']} n={where} {detail}")
    print(f"outputs written to {out}")
    return EXIT_OK if result.passed else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "targets":
            return _targets(args)
        return _run(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"rwcre: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
