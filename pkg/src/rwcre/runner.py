"""Experiment orchestration: config parsing, replica execution, tables and reports."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .cooling import CoolingSchedule
from .env import DEFAULT_RECURRENCE_TOL, ResamplingRule, log_rho_moments, validate_recurrent
from .rng import check_seed
from .theory import ScalingConstants, chi_n, sigma_V_sq
from .verify import (CapExceeded, chi_square_gof, counts_from_samples, exact_walk_pmf,
                     strictly_decreasing, verify_fdd, verify_flatness, verify_marginal)
from .verify.oracle import DEFAULT_CAP
from .verify.suites import N_BOOTSTRAP
from .walker import center, grid_times, interpolate, simulate, simulate_samples

log = logging.getLogger(__name__)

SUITES = ("marginal", "fdd", "flatness", "oracle")

DEFAULT_TOLERANCES = {
    "ks_max": 0.15,          # KS distance of X^n_1 to N(0,1) at the largest horizon
    "fdd_corr": 0.1,         # entrywise |corr - limit corr|
    "increment_corr": 0.1,   # |corr(X_t, X_s - X_t)|
    "flatness_corr": 0.8,    # minimum pairwise corr on [a, 1] (R2)
    "oracle_p": 0.001,       # chi-square p-value floor against the exact pmf
}

DEFAULTS: dict[str, Any] = {
    "rule": {"kind": "two-point", "p": "1/3"},
    "replicas": 1000,
    "grid": [0.25, 0.5, 0.75, 1.0],
    "a": 0.5,
    "seed": 0,
    "out": "out",
    "dump_paths": False,
    "verify": ["marginal", "fdd"],
    "bootstrap": N_BOOTSTRAP,
    "oracle_cap": DEFAULT_CAP,
    "recurrence_tol": DEFAULT_RECURRENCE_TOL,
    "tolerances": DEFAULT_TOLERANCES,
}

CONFIG_HELP = """\
config file (TOML).  Required keys:
  schedule = { kind = "polynomial", B = 1.0, beta = 2.0 }
             | { kind = "exponential", C = 1.0 } | { kind = "unit" }
             | { kind = "explicit", file = "taus.txt" }   (or times = [...])
  horizons = [10000, 100000]
optional keys and defaults:
  rule = { kind = "two-point", p = "1/3" }
         | { kind = "finite-support", values = [...], weights = [...] }
         | { kind = "symmetric-beta", a = 2.0 }
  replicas = 1000        grid = [0.25, 0.5, 0.75, 1.0]      a = 0.5
  seed = 0               out = "out"                        dump_paths = false
  verify = ["marginal", "fdd"]   (any of marginal, fdd, flatness, oracle)
  bootstrap = 200        oracle_cap = 12                    recurrence_tol = 1e-9
  [tolerances] ks_max = 0.15, fdd_corr = 0.1, increment_corr = 0.1,
               flatness_corr = 0.8, oracle_p = 0.001
"""


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class RunIncomplete(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    rule: ResamplingRule
    schedule: CoolingSchedule
    horizons: list[int]
    replicas: int = 1000
    grid: list[float] = field(default_factory=lambda: list(DEFAULTS["grid"]))
    a: float = 0.5
    seed: int = 0
    out: str = "out"
    dump_paths: bool = False
    verify: list[str] = field(default_factory=lambda: list(DEFAULTS["verify"]))
    bootstrap: int = N_BOOTSTRAP
    oracle_cap: int = DEFAULT_CAP
    recurrence_tol: float = DEFAULT_RECURRENCE_TOL
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.to_dict(), "schedule": self.schedule.to_dict(),
            "horizons": list(self.horizons), "replicas": self.replicas,
            "grid": list(self.grid), "a": self.a, "seed": self.seed, "out": self.out,
            "dump_paths": self.dump_paths, "verify": list(self.verify),
            "bootstrap": self.bootstrap, "oracle_cap": self.oracle_cap,
            "recurrence_tol": self.recurrence_tol, "tolerances": dict(self.tolerances),
        }

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"(^|[\s{{,]){re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line.split("#", 1)[0]):
            return i
    return None


def _build_rule(params: dict) -> ResamplingRule:
    kind = params.get("kind")
    if kind == "two-point":
        return ResamplingRule.two_point(params.get("p", "1/3"))
    if kind == "finite-support":
        return ResamplingRule.finite_support(params["values"], params["weights"])
    if kind == "symmetric-beta":
        return ResamplingRule.symmetric_beta(params["a"])
    raise ValueError(f"unknown rule kind {kind!r}")


def _build_schedule(params: dict, base: Path | None) -> CoolingSchedule:
    kind = params.get("kind")
    if kind == "polynomial":
        beta = float(params["beta"])
        if not beta > 1:
            raise ValueError("β must exceed 1 (beta > 1)")
        B = float(params.get("B", 1.0))
        if not B > 0:
            raise ValueError("B must be positive")
        return CoolingSchedule.polynomial(B, beta)
    if kind == "exponential":
        C = float(params["C"])
        if not C > 0:
            raise ValueError("C must be positive")
        return CoolingSchedule.exponential(C)
    if kind == "unit":
        return CoolingSchedule.unit()
    if kind == "explicit":
        if "times" in params:
            return CoolingSchedule.explicit(params["times"])
        path = Path(params["file"])
        if base is not None and not path.is_absolute():
            path = base / path
        return CoolingSchedule.from_file(path)
    raise ValueError(f"unknown schedule kind {kind!r}")


def config_from_dict(data: dict, text: str = "", base: Path | None = None) -> ExperimentConfig:
    """Validate a parsed config mapping; errors carry the offending line when known."""

    def fail(key: str, msg: str):
        raise ConfigError(f"{key}: {msg}", _line_of(text, key) if text else None)

    known = set(DEFAULTS) | {"schedule", "horizons"}
    for key in data:
        if key not in known:
            fail(key, "unknown key")
    for key in ("schedule", "horizons"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")

    try:
        rule = _build_rule(dict(data.get("rule", DEFAULTS["rule"])))
    except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
        fail("rule", str(exc))
    try:
        schedule = _build_schedule(dict(data["schedule"]), base)
    except KeyError as exc:
        fail("schedule", f"missing parameter {exc.args[0]}")
    except (ValueError, TypeError, OSError) as exc:
        m = re.search(r"\b(beta|B|C)\b", str(exc))
        fail(m.group(1) if m else "schedule", str(exc))

    horizons = data["horizons"]
    if not isinstance(horizons, list) or not horizons or not all(
            isinstance(h, int) and h >= 2 for h in horizons):
        fail("horizons", "must be a non-empty list of integers >= 2")
    if horizons != sorted(set(horizons)):
        fail("horizons", "must be strictly ascending")

    cfg = {k: data.get(k, v) for k, v in DEFAULTS.items() if k not in ("rule",)}
    if not isinstance(cfg["replicas"], int) or cfg["replicas"] < 1:
        fail("replicas", "must be an integer >= 1")
    grid = [float(t) for t in cfg["grid"]]
    if not grid or any(not 0 <= t <= 1 for t in grid) or grid != sorted(set(grid)):
        fail("grid", "must be strictly increasing values inside [0, 1]")
    a = float(cfg["a"])
    if not 0 < a <= 1:
        fail("a", "must lie in (0, 1]")
    try:
        seed = check_seed(cfg["seed"])
    except (ValueError, TypeError) as exc:
        fail("seed", str(exc))
    verify = list(cfg["verify"])
    for s in verify:
        if s not in SUITES:
            fail("verify", f"unknown suite {s!r}; choose from {', '.join(SUITES)}")
    if "flatness" in verify and (a not in grid or grid[-1] != 1.0):
        fail("grid", "flatness needs a grid containing a and 1")
    tolerances = dict(DEFAULT_TOLERANCES)
    for k, v in dict(cfg["tolerances"]).items():
        if k not in DEFAULT_TOLERANCES:
            fail(k, "unknown tolerance")
        tolerances[k] = float(v)
    return ExperimentConfig(rule, schedule, list(horizons), cfg["replicas"], grid, a, seed,
                            str(cfg["out"]), bool(cfg["dump_paths"]), verify,
                            int(cfg["bootstrap"]), int(cfg["oracle_cap"]),
                            float(cfg["recurrence_tol"]), tolerances)


def parse_config(text: str, base: Path | None = None) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        if m:
            line = int(m.group(1))
        else:
            # "at end of document"
            line = max(1, len(text.rstrip("\n").splitlines()))
        raise ConfigError(str(exc), line) from None
    return config_from_dict(data, text, base)


def load_config(path) -> ExperimentConfig:
    """Read a TOML config, or the ``config`` block of a run manifest (JSON)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        manifest = json.loads(text)
        return config_from_dict(manifest["config"], base=path.parent)
    return parse_config(text, base=path.parent)


@dataclass
class ResultTable:
    name: str
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class RunResult:
    manifest: dict
    tables: list[ResultTable]
    reports: list[dict]
    plot_reports: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.get("pass", True) for r in self.reports)


def sample_times(config: ExperimentConfig) -> np.ndarray:
    times = {0}
    for n in config.horizons:
        lower, upper, _ = grid_times(config.grid, n)
        times.update(int(t) for t in lower)
        times.update(int(t) for t in upper)
        times.add(n)
    return np.array(sorted(times), dtype=np.int64)


def _chi(config: ExperimentConfig, n: int, endpoint: np.ndarray) -> tuple[float, str]:
    try:
        consts = ScalingConstants.from_model(config.rule, config.schedule)
    except ValueError:
        var = float(np.var(endpoint, ddof=1))
        return (var if var > 0 else 1.0), "empirical"
    return chi_n(consts, n), "theory"


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   suites: list[str] | None = None) -> RunResult:
    """Simulate every replica once up to the largest horizon, then analyse each horizon.

    Shorter horizons reuse the prefixes of the same replicas.  Outputs are a
    pure function of ``config``; ``workers`` only changes the partitioning.
    """
    suites = list(config.verify if suites is None else suites)
    started = datetime.now(timezone.utc).isoformat()
    needs_limit = [s for s in suites if s in ("marginal", "fdd", "flatness")]
    recurrence = validate_recurrent(config.rule, config.recurrence_tol)
    if needs_limit and not recurrence:
        raise ConfigError(f"rule rejected for limit-law suites: {recurrence.reason}")

    times = sample_times(config)
    col = {int(t): j for j, t in enumerate(times)}
    replicas = np.arange(config.replicas, dtype=np.int64)
    manifest = {
        "tool": "rwcre", "version": __version__, "config": config.to_dict(),
        "config_hash": config.digest(), "seed": config.seed, "started": started,
        "workers": workers, "suites": suites, "oracle_cap": config.oracle_cap,
        "sample_times": len(times), "complete": False,
    }
    try:
        samples = simulate_samples(config.rule, config.schedule, config.horizons[-1],
                                   config.seed, replicas, times, workers=workers)
    except MemoryError as exc:
        manifest["error"] = f"out of memory: {exc}"
        raise RunIncomplete(manifest) from exc

    paths = ResultTable("paths", ["horizon", "replica"] + [f"t={t:.17g}" for t in config.grid])
    summary = ResultTable("summary", ["horizon", "time", "mean", "stderr"])
    reports: list[dict] = []
    plot_reports: list = []
    chi_used: dict[str, dict] = {}
    flat_by_n = []
    ks_by_n = []
    tol = config.tolerances

    for n in config.horizons:
        cols = sorted({c for t, c in col.items() if t <= n})
        sub_times = times[cols]
        block = samples[:, cols]
        mean, se = center(block)
        for t, m, s in zip(sub_times, mean, se):
            summary.rows.append((n, int(t), float(m), float(s)))
        centered = block - mean
        endpoint = centered[:, list(sub_times).index(n)]
        chi, source = _chi(config, n, endpoint)
        chi_used[str(n)] = {"chi": chi, "source": source}
        scaled = interpolate(centered, sub_times, config.grid, n, chi)
        for r in range(config.replicas):
            paths.rows.append((n, int(replicas[r])) + tuple(float(v) for v in scaled[r]))
        x1 = endpoint / math.sqrt(chi)

        if "marginal" in suites:
            rep = verify_marginal(x1, min_replicas=min(1000, config.replicas))
            rep.extra["horizon"] = n
            ks_by_n.append(rep.statistic)
            reports.append({"suite": "marginal", "horizon": n, **rep.to_dict()})
            plot_reports.append(("marginal", n, rep))
        if "fdd" in suites:
            reports.append(_fdd_report(config, n, scaled, plot_reports))
        if "flatness" in suites:
            keep = np.asarray(config.grid) >= config.a
            g = np.asarray(config.grid)[keep]
            summ = verify_flatness(scaled[:, keep], g, config.a, n)
            flat_by_n.append(summ)
            corr = np.corrcoef(scaled[:, keep], rowvar=False)
            reports.append({"suite": "flatness", "horizon": n, **summ.to_dict(),
                            "min_pairwise_corr": float(np.min(corr))})
        if "oracle" in suites:
            reports.append(_oracle_report(config, n, samples[:, col[n]]))

    if "marginal" in suites and len(ks_by_n) > 1:
        ok = all(b <= a for a, b in zip(ks_by_n, ks_by_n[1:])) and ks_by_n[-1] < tol["ks_max"]
        reports.append({"suite": "marginal-trend", "horizons": config.horizons,
                        "ks": ks_by_n, "tolerance": tol["ks_max"], "pass": ok})
    elif "marginal" in suites:
        reports[-1]["pass"] = ks_by_n[-1] < tol["ks_max"]
    if "flatness" in suites:
        medians = [s.median for s in flat_by_n]
        last = [r for r in reports if r["suite"] == "flatness"][-1]
        ok = (len(medians) < 2 or strictly_decreasing(medians)) and \
            last["min_pairwise_corr"] >= tol["flatness_corr"]
        reports.append({"suite": "flatness-trend", "horizons": config.horizons,
                        "medians": medians, "min_pairwise_corr": last["min_pairwise_corr"],
                        "tolerance": tol["flatness_corr"], "pass": ok})
        plot_reports.append(("flatness", None, flat_by_n))

    manifest.update({"chi_n": chi_used, "recurrence": recurrence.accepted,
                     "finished": datetime.now(timezone.utc).isoformat(), "complete": True})
    log_mean, log_var = log_rho_moments(config.rule)
    manifest["log_rho"] = {"mean": log_mean, "variance": log_var, "sigma_V_sq": sigma_V_sq()}
    return RunResult(manifest, [paths, summary], reports, plot_reports)


def _fdd_report(config, n, scaled, plot_reports) -> dict:
    consts = None
    try:
        consts = ScalingConstants.from_model(config.rule, config.schedule)
    except ValueError:
        pass
    if consts is None:
        return {"suite": "fdd", "horizon": n, "skipped": "no limit regime for this schedule",
                "pass": True}
    tol = config.tolerances
    grid = np.asarray(config.grid)
    keep = grid > 0 if consts.regime == "R1" else grid >= config.a
    rep = verify_fdd(scaled[:, keep], grid[keep], consts.regime, consts.beta, config.a,
                     n_boot=config.bootstrap, seed=config.seed,
                     min_replicas=min(1000, config.replicas))
    plot_reports.append(("fdd", n, rep))
    out = {"suite": "fdd", "horizon": n, **rep.to_dict(), "tolerance": tol["fdd_corr"]}
    ok = rep.max_corr_error <= tol["fdd_corr"]
    if consts.regime == "R1":
        ok = ok and rep.max_increment_corr <= tol["increment_corr"]
    out["pass"] = bool(ok) if n == config.horizons[-1] else None
    return out


def _oracle_report(config, n, endpoint) -> dict:
    try:
        pmf = exact_walk_pmf(config.rule, config.schedule, n, cap=config.oracle_cap)
    except CapExceeded as exc:
        return {"suite": "oracle", "horizon": n, "skipped": str(exc), "pass": True}
    rep = chi_square_gof(counts_from_samples(endpoint), pmf, target=f"exact law of X_{n}")
    out = {"suite": "oracle", "horizon": n, **rep.to_dict(), "tolerance": config.tolerances["oracle_p"]}
    out["pass"] = rep.p_value > config.tolerances["oracle_p"]
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit(tables: list[ResultTable], out_dir, fmt: str = "csv") -> list[Path]:
    """Write each table as ``<name>.csv`` or ``<name>.jsonl``; stable column order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for table in tables:
        if fmt == "csv":
            path = out_dir / f"{table.name}.csv"
            lines = [",".join(table.columns)]
            lines += [",".join(_fmt(v) for v in row) for row in table.rows]
            path.write_text("\n".join(lines) + "\n")
        elif fmt == "jsonl":
            path = out_dir / f"{table.name}.jsonl"
            with path.open("w") as fh:
                for row in table.rows:
                    fh.write(json.dumps(dict(zip(table.columns, row)), default=_json_default) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    return str(o)


def write_reports(reports: list[dict], out_dir) -> Path:
    path = Path(out_dir) / "reports.jsonl"
    with path.open("w") as fh:
        for rep in reports:
            fh.write(json.dumps(rep, sort_keys=True, default=_json_default) + "\n")
    return path


def write_manifest(manifest: dict, out_dir) -> Path:
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def emit_plotdata(plot_reports, out_dir) -> list[Path]:
    """Whitespace-separated, gnuplot-ready files for KS, FDD and flatness reports."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for kind, n, rep in plot_reports:
        if kind == "marginal":
            x = np.sort(rep.samples)
            ecdf = np.arange(1, x.size + 1) / x.size
            target = np.asarray(rep_target_cdf(x))
            path = out_dir / f"ks_n{n}.dat"
            lines = ["# x ecdf target_cdf"]
            lines += [f"{_fmt(a)} {_fmt(b)} {_fmt(c)}" for a, b, c in zip(x, ecdf, target)]
        elif kind == "fdd":
            path = out_dir / f"fdd_n{n}.dat"
            labels = " ".join(_fmt(t) for t in rep.grid)
            lines = []
            for title, mat in (("cov", rep.cov), ("target_cov", rep.target_cov),
                               ("corr", rep.corr), ("target_corr", rep.target_corr)):
                lines.append(f"# {title}")
                lines.append(f"t {labels}")
                lines += [f"{_fmt(t)} " + " ".join(_fmt(v) for v in row)
                          for t, row in zip(rep.grid, mat)]
                lines += ["", ""]
        else:
            path = out_dir / "flatness.dat"
            lines = ["# n median p90"] + [f"{s.n} {_fmt(s.median)} {_fmt(s.p90)}" for s in rep]
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    return written


def rep_target_cdf(x):
    from .verify import normal_cdf
    return normal_cdf(x)


def dump_raw_paths(config: ExperimentConfig, out_dir) -> Path:
    """CSV (replica, i, X_i) for every replica up to the largest horizon."""
    path = Path(out_dir) / "raw_paths.csv"
    n = config.horizons[-1]
    with path.open("w") as fh:
        fh.write("replica,i,X_i\n")
        for r in range(config.replicas):
            traj = simulate(config.rule, config.schedule, n, config.seed, r)
            fh.writelines(f"{r},{i},{x}\n" for i, x in enumerate(traj.positions))
    return path


def persist(result: RunResult, config: ExperimentConfig, out_dir=None) -> Path:
    out_dir = Path(out_dir or config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = emit(result.tables, out_dir, "csv")
    files.append(write_reports(result.reports, out_dir))
    files += emit_plotdata(result.plot_reports, out_dir / "plotdata")
    if config.dump_paths:
        files.append(dump_raw_paths(config, out_dir))
    result.manifest["outputs"] = sorted(str(p.relative_to(out_dir)) for p in files)
    write_manifest(result.manifest, out_dir)
    return out_dir
