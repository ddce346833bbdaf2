import json
from pathlib import Path

import pytest

from rwcre.cli import main
from rwcre.runner import (ConfigError, ResultTable, emit, load_config, parse_config, persist,
                          run_experiment)

MINIMAL = """
schedule = { kind = "polynomial", B = 1.0, beta = 2.0 }
horizons = [100, 1000]
"""

SMALL = """
seed = 42
replicas = 60
horizons = [100, 400]
grid = [0.25, 0.5, 1.0]
verify = ["marginal", "fdd"]
bootstrap = 20
schedule = { kind = "polynomial", B = 1.0, beta = 2.0 }
"""


def _data_files(out: Path) -> dict:
    files = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            files[str(p.relative_to(out))] = p.read_bytes()
    return files


def _manifest_core(out: Path) -> dict:
    m = json.loads((out / "manifest.json").read_text())
    for key in ("started", "finished", "workers"):
        m.pop(key)
    return m


def test_defaults_are_filled():
    cfg = parse_config(MINIMAL)
    assert cfg.replicas == 1000
    assert cfg.grid == [0.25, 0.5, 0.75, 1.0]
    assert cfg.a == 0.5 and cfg.seed == 0
    assert cfg.rule.to_dict() == {"kind": "two-point", "p": "1/3"}
    assert cfg.verify == ["marginal", "fdd"]
    assert cfg.tolerances["ks_max"] == 0.15


def test_beta_one_rejected_with_line():
    text = 'horizons = [100]\nschedule = { kind = "polynomial", B = 1.0, beta = 1.0 }\n'
    with pytest.raises(ConfigError, match="β must exceed 1") as info:
        parse_config(text)
    assert info.value.line == 2


@pytest.mark.parametrize("line,needle", [
    ("a = 0", "a"),
    ("a = 1.5", "a"),
    ("replicas = 0", "replicas"),
    ('grid = [0.5, 0.25]', "grid"),
    ('verify = ["nonsense"]', "verify"),
    ("bogus = 1", "bogus"),
    ('rule = { kind = "cauchy" }', "rule"),
])
def test_invalid_values_rejected(line, needle):
    with pytest.raises(ConfigError, match=needle) as info:
        parse_config(MINIMAL + line + "\n")
    assert info.value.line == 4


def test_missing_and_malformed():
    with pytest.raises(ConfigError, match="horizons"):
        parse_config('schedule = { kind = "unit" }')
    with pytest.raises(ConfigError, match="ascending"):
        parse_config('schedule = { kind = "unit" }\nhorizons = [100, 10]')
    with pytest.raises(ConfigError) as info:
        parse_config('schedule = { kind = "unit" }\nhorizons = [10\n')
    assert info.value.line is not None


def test_explicit_schedule_file(tmp_path):
    (tmp_path / "taus.txt").write_text("3 7 20\n")
    cfg_path = tmp_path / "c.toml"
    cfg_path.write_text('schedule = { kind = "explicit", file = "taus.txt" }\nhorizons = [10]\n')
    cfg = load_config(cfg_path)
    assert cfg.schedule.tau(3) == 20


def test_row_count():
    cfg = parse_config(SMALL.replace("replicas = 60", "replicas = 10"))
    cfg.verify = []
    res = run_experiment(cfg)
    paths = res.tables[0]
    assert len(paths.rows) == 10 * len(cfg.horizons)
    for n in cfg.horizons:
        assert sum(1 for r in paths.rows if r[0] == n) == 10


def test_outputs_byte_identical(tmp_path):
    cfg = parse_config(SMALL)
    outs = []
    for i, workers in enumerate((1, 1, 8)):
        out = tmp_path / f"run{i}"
        persist(run_experiment(cfg, workers=workers), cfg, out)
        outs.append(out)
    ref = _data_files(outs[0])
    assert {"paths.csv", "summary.csv", "reports.jsonl", "plotdata/ks_n400.dat",
            "plotdata/fdd_n400.dat"} <= set(ref)
    for out in outs[1:]:
        assert _data_files(out) == ref
        assert _manifest_core(out) == _manifest_core(outs[0])


def test_manifest_round_trip(tmp_path):
    cfg = parse_config(SMALL)
    first = persist(run_experiment(cfg), cfg, tmp_path / "a")
    again = load_config(first / "manifest.json")
    assert again.digest() == cfg.digest()
    second = persist(run_experiment(again), again, tmp_path / "b")
    assert _data_files(first) == _data_files(second)


def test_empty_table_is_header_only(tmp_path):
    (path,) = emit([ResultTable("empty", ["a", "b"])], tmp_path)
    assert path.read_text() == "a,b\n"
    (path,) = emit([ResultTable("empty", ["a", "b"])], tmp_path, "jsonl")
    assert path.read_text() == ""


def test_plotdata_layout(tmp_path):
    cfg = parse_config(SMALL)
    out = persist(run_experiment(cfg), cfg, tmp_path)
    ks = (out / "plotdata" / "ks_n400.dat").read_text().splitlines()
    assert ks[0] == "# x ecdf target_cdf"
    assert len(ks) == 1 + cfg.replicas
    assert all(len(line.split()) == 3 for line in ks[1:])
    fdd = (out / "plotdata" / "fdd_n400.dat").read_text()
    assert "# target_corr" in fdd and "t 0.25 0.5 1" in fdd


def test_flatness_run_writes_trend(tmp_path):
    text = """
seed = 3
replicas = 50
horizons = [100, 1000]
grid = [0.5, 0.75, 1.0]
verify = ["flatness"]
schedule = { kind = "exponential", C = 1.0 }
"""
    cfg = parse_config(text)
    res = run_experiment(cfg)
    trend = [r for r in res.reports if r["suite"] == "flatness-trend"]
    assert len(trend) == 1 and len(trend[0]["medians"]) == 2
    persist(res, cfg, tmp_path)
    assert (tmp_path / "plotdata" / "flatness.dat").read_text().startswith("# n median p90")


def test_oracle_suite_runs():
    cfg = parse_config("""
seed = 5
replicas = 20000
horizons = [10]
verify = ["oracle"]
schedule = { kind = "explicit", times = [1, 4, 9, 16] }
""")
    res = run_experiment(cfg)
    (rep,) = res.reports
    assert rep["suite"] == "oracle" and rep["pass"]


def test_rejects_transient_rule_for_limit_suites():
    cfg = parse_config(MINIMAL + 'rule = { kind = "finite-support", values = ["1/4", "1/2"], weights = [0.5, 0.5] }\n')
    with pytest.raises(ConfigError, match="drift"):
        run_experiment(cfg)


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "paths.csv").exists()
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL.replace("beta = 2.0", "beta = 1.0"))
    assert main(["verify-marginal", "--config", str(bad)]) == 2
    assert "β must exceed 1" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 2


def test_cli_statistical_failure(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL + "[tolerances]\nks_max = 0.0\n")
    assert main(["verify-marginal", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--seed", "1", "--workers", "2", "--dump-paths"]) == 1
    assert (tmp_path / "o" / "raw_paths.csv").exists()
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["complete"]


def test_cli_targets(tmp_path, capsys):
    assert main(["targets", "--x-min", "-1", "--x-max", "1", "--points", "3",
                 "--horizons", "10000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "section,x,value1,value2"
    assert lines[1].startswith("sigma_V_sq,,1.3555")
    assert lines[3] == "kesten,0,0.5,0.5"
    assert lines[-1].startswith("chi_n,10000,")
    assert main(["targets", "--points", "5", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "targets.csv").read_text().splitlines()) == 7
