import json

import pytest

from app.controllers.cli_routes import main, parse_sizes, runs_csv_path
from app.core.config import get_settings
from app.core.exceptions import InvalidArgumentError
from app.services.report_history_service import ReportHistoryService


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


def test_run_parameterless_onemax(capsys):
    assert main(["run", "--problem", "onemax", "--n", "8", "--seed", "1"]) == 0
    result = json.loads(last_line(capsys))
    assert result["success"] is True
    assert result["mode"] == "pl"
    assert result["best_bits"] == "11111111"


def test_run_fixed_writes_trace(tmp_path, capsys):
    trace = tmp_path / "trace.csv"
    code = main(["run", "--problem", "dec3", "--n", "12", "--mode", "fixed", "--pop", "60",
                 "--seed", "4", "--trace", str(trace)])
    assert code == 0
    result = json.loads(last_line(capsys))
    assert result["population_size"] == 60
    assert trace.exists()


def test_fixed_mode_needs_population_size(capsys):
    assert main(["run", "--problem", "dec3", "--n", "12", "--mode", "fixed"]) == 2
    assert "--pop" in capsys.readouterr().err


def test_invalid_problem_size_exits_with_diagnostic(capsys):
    assert main(["run", "--problem", "dec3", "--n", "10"]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:")
    assert len(err.splitlines()) == 1


def test_budget_below_base_population_is_a_validation_error(capsys):
    assert main(["run", "--problem", "onemax", "--n", "8", "--budget", "3"]) == 2


def test_unknown_problem_is_rejected_by_the_parser():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--problem", "maxsat", "--n", "8"])
    assert exc.value.code == 2


def test_bisect(capsys):
    assert main(["bisect", "--problem", "onemax", "--n", "6", "--runs", "3", "--seed", "2"]) == 0
    result = json.loads(last_line(capsys))
    lower, upper = result["interval"]
    assert result["n_min"] == upper
    assert upper - lower <= 0.1 * lower


def test_experiment_then_fit(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main(["experiment", "--problem", "onemax", "--sizes", "6,9,12", "--runs", "2",
                 "--seed", "3", "--budget", "100000", "--out", str(out)])
    assert code == 0
    records = ReportHistoryService().load_records(out)
    assert [r.n for r in records] == [6, 9, 12]
    assert len(ReportHistoryService().load_runs(runs_csv_path(out))) == 6

    capsys.readouterr()
    assert main(["fit", "--csv", str(out)]) == 0
    assert last_line(capsys).startswith("onemax pl: exponent")


def test_gen_spinglass_then_oracle(tmp_path, capsys):
    assert main(["gen-spinglass", "--l", "3", "--count", "2", "--seed", "5", "--out-dir", str(tmp_path)]) == 0
    files = sorted(tmp_path.glob("spinglass_L3_*.txt"))
    assert len(files) == 2

    capsys.readouterr()
    assert main(["oracle", "--instance", str(files[0])]) == 0
    result = json.loads(last_line(capsys))
    assert len(result["bits"]) == 9
    assert result["energy"] <= 0


def test_run_on_instance_file_reaches_the_oracle_energy(tmp_path, capsys):
    main(["gen-spinglass", "--l", "3", "--count", "1", "--seed", "9", "--out-dir", str(tmp_path)])
    instance = next(tmp_path.glob("*.txt"))
    capsys.readouterr()
    main(["oracle", "--instance", str(instance)])
    energy = json.loads(last_line(capsys))["energy"]

    assert main(["run", "--problem", "spinglass", "--n", "9", "--instance", str(instance),
                 "--best-known", str(tmp_path / "best.json")]) == 0
    result = json.loads(last_line(capsys))
    assert result["success"] is True
    assert result["best_fitness"] == -energy


def test_oracle_missing_file(tmp_path):
    assert main(["oracle", "--instance", str(tmp_path / "nope.txt")]) == 2


def test_parse_sizes():
    assert parse_sizes("30,60, 90") == [30, 60, 90]
    with pytest.raises(InvalidArgumentError):
        parse_sizes("30,abc")


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("HBOA_DEFAULT_BUDGET", "5000")
    monkeypatch.setenv("LOG_LEVEL", "DEBUG")
    get_settings.cache_clear()
    settings = get_settings()
    assert settings.default_budget == 5000
    assert settings.log_level == "DEBUG"
