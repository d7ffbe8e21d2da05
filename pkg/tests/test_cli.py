import csv
import io
import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from demon_engine.cli import main
from demon_engine.report import csv_columns, from_json, to_json
from demon_engine.runner import run_file
from demon_engine.scenarios import builtin, builtin_config
from demon_engine.sweep import SWEEP_COLUMNS, run_sweep, sweep_csv
from oracles import LN2

ROOT = Path(__file__).resolve().parents[1]


def report_schema():
    text = resources.files("demon_engine").joinpath("schemas/report.schema.json").read_text("utf-8")
    return json.loads(text)


def run_cli(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", ["szilard", "do-nothing", "eur-bell", "carnot2"])
def test_builtin_reports_validate(name, capsys):
    code, out, _ = run_cli(["builtin", name], capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, report_schema())
    assert report["metadata"]["status"] == "ok"


def test_szilard_report_value(capsys):
    _, out, _ = run_cli(["builtin", "szilard"], capsys)
    assert json.loads(out)["results"]["rhs_18"] == pytest.approx(LN2, abs=1e-9)


def test_do_nothing_all_deltas_zero(capsys):
    code, out, _ = run_cli(["builtin", "do-nothing"], capsys)
    res = json.loads(out)["results"]
    assert code == 0
    for key in ("dU_S", "dF_S", "dS_A", "dS_B", "dS", "dI", "W_ext", "Q_total"):
        assert res[key] == pytest.approx(0.0, abs=1e-12), key


def test_eur_bell_report_saturates(capsys):
    _, out, _ = run_cli(["builtin", "eur-bell"], capsys)
    res = json.loads(out)["results"]
    assert res["eur_lhs"] == pytest.approx(0.0, abs=1e-8)
    assert res["eur_rhs"] == pytest.approx(0.0, abs=1e-8)


def test_json_round_trip_is_byte_identical():
    text = to_json(run_file(builtin("eur-bell")))
    assert to_json(from_json(text)) == text


def test_csv_layout(capsys):
    code, out, _ = run_cli(["builtin", "szilard", "--format", "csv"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == csv_columns("single")
    assert len(rows) == 2
    row = dict(zip(rows[0], rows[1]))
    assert row["rhs_18"] == format(LN2, ".17g")


def write(tmp_path, config, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return path


def test_run_file_writes_output(tmp_path, capsys):
    path = write(tmp_path, builtin_config("szilard"))
    out = tmp_path / "report.json"
    code, stdout, _ = run_cli(["run", str(path), "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["metadata"]["name"] == "szilard"


def test_output_block_in_file(tmp_path, capsys):
    config = builtin_config("do-nothing")
    config["output"] = {"path": str(tmp_path / "r.csv"), "format": "csv"}
    code, _, _ = run_cli(["run", str(write(tmp_path, config))], capsys)
    assert code == 0
    assert (tmp_path / "r.csv").read_text().startswith("name,mode,")


def test_malformed_matrix_exit_1(tmp_path, capsys):
    config = builtin_config("szilard")
    config["scenario"]["system"]["h_initial"] = [[0, 0, 0], [0, 0, 0]]
    config["output"] = {"path": str(tmp_path / "never.json")}
    code, out, err = run_cli(["run", str(write(tmp_path, config))], capsys)
    assert code == 1
    assert "scenario.system.h_initial" in err
    assert out == ""
    assert not (tmp_path / "never.json").exists()


def test_json_syntax_error_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": "1",\n  "mode": single\n}\n')
    code, _, err = run_cli(["run", str(path)], capsys)
    assert code == 1
    assert "line 3" in err


def test_unknown_field_rejected(tmp_path, capsys):
    config = builtin_config("szilard")
    config["scenario"]["extra"] = 1
    code, _, err = run_cli(["run", str(write(tmp_path, config))], capsys)
    assert code == 1 and "extra" in err


def test_missing_file(capsys):
    code, _, err = run_cli(["run", "/nonexistent/scenario.json"], capsys)
    assert code == 1 and "cannot read" in err


def test_list_builtins(capsys):
    code, out, _ = run_cli(["list-builtins"], capsys)
    assert code == 0
    assert out.split() == ["szilard", "carnot2", "eur-bell", "do-nothing"]


def test_builtin_dump_round_trips(tmp_path, capsys):
    out = tmp_path / "carnot.json"
    run_cli(["builtin", "carnot2", "--seed", "3", "--dump", "--out", str(out)], capsys)
    code, stdout, _ = run_cli(["run", str(out)], capsys)
    assert code == 0
    assert json.loads(stdout)["metadata"]["mode"] == "carnot"


def test_sweep_single_row(capsys):
    code, out, err = run_cli(["sweep", "--count", "1", "--seed", "3"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == SWEEP_COLUMNS
    assert len(rows) == 2
    assert "0 violations" in err


def test_sweep_deterministic_and_schedule_independent(capsys):
    _, first, _ = run_cli(["sweep", "--count", "12", "--seed", "99"], capsys)
    _, second, _ = run_cli(["sweep", "--count", "12", "--seed", "99"], capsys)
    _, parallel, _ = run_cli(["sweep", "--count", "12", "--seed", "99", "--jobs", "3"], capsys)
    assert first == second == parallel


def test_sweep_mixed_dimensions():
    rows, summary = run_sweep(20, 5, dims=(3, 2, 3, 2))
    assert summary.violations == 0
    assert {r["d_S"] for r in rows} <= {2, 3}


def test_sweep_zero_violations_100():
    rows, summary = run_sweep(100, 2024)
    assert summary.violations == 0
    assert summary.worst_margin > -1e-8
    assert len(sweep_csv(rows).splitlines()) == 101


def test_sweep_json_format(capsys):
    code, out, _ = run_cli(["sweep", "--count", "2", "--seed", "1", "--format", "json"], capsys)
    report = json.loads(out)
    jsonschema.validate(report, report_schema())
    assert report["results"]["count"] == 2


@pytest.mark.parametrize("argv", [
    ["sweep", "--count", "0", "--seed", "1"],
    ["sweep", "--count", "2", "--seed", "1", "--jobs", "0"],
    ["builtin", "unknown-engine"],
])
def test_cli_input_errors(argv, capsys):
    assert run_cli(argv, capsys)[0] == 1


def test_bad_dims_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--count", "1", "--seed", "1", "--dims", "2,2"])
    assert exc.value.code == 2  # argparse usage error


def test_two_engine_and_optimize_files(capsys):
    code, out, _ = run_cli(["run", str(ROOT / "docs/examples/eur_bell_custom.json")], capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, report_schema())
    assert report["results"]["c"] == pytest.approx(0.75)


def test_optimize_mode_small_budget(tmp_path, capsys):
    config = json.loads((ROOT / "docs/examples/szilard_optimize.json").read_text())
    config["optimize"] = {"budget": 100, "restarts": 2}
    code, out, _ = run_cli(["run", str(write(tmp_path, config)), "--format", "csv"], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == csv_columns("optimize")


def test_exit_code_2_when_theorem_check_fails(monkeypatch, tmp_path, capsys):
    from demon_engine import cli

    def broken(sf):
        report = run_file(sf)
        report["checks"][0].update(ok=False, margin=-1.0)
        return report

    monkeypatch.setattr(cli, "run_file", broken)
    code, _, err = run_cli(["builtin", "do-nothing"], capsys)
    assert code == 2
    assert "stage1_entropy_invariant" in err


def test_log_env_variable(monkeypatch, capsys):
    monkeypatch.setenv("DEMON_ENGINE_LOG", "loud")
    code, _, err = run_cli(["list-builtins"], capsys)
    assert code == 0 and "DEMON_ENGINE_LOG" in err


@pytest.mark.parametrize("name", ["scenario.schema.json", "report.schema.json"])
def test_docs_schema_matches_package(name):
    packaged = resources.files("demon_engine").joinpath(f"schemas/{name}").read_text("utf-8")
    assert (ROOT / "docs" / name).read_text("utf-8") == packaged


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "demon_engine", "list-builtins"],
                          capture_output=True, text=True, check=True)
    assert "szilard" in proc.stdout
