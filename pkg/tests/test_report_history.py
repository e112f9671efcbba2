import json

import pandas as pd
import pytest

from app.core.exceptions import ConfigurationError
from app.db.best_known import BestKnownStore
from app.models.schemas import ExperimentRecord, RunRecord, TraceRecord
from app.services.report_history_service import RECORD_COLUMNS, ReportHistoryService


@pytest.fixture
def history():
    return ReportHistoryService()


def sample_records():
    return [
        ExperimentRecord(
            problem="dec3", n=30, mode="pl", runs=100, successes=100,
            mean_evals=12345.678901, std_evals=321.5, nmin=None, master_seed=2**64 - 1,
        ),
        ExperimentRecord(
            problem="dec3", n=60, mode="fixed-bisected", runs=100, successes=97,
            mean_evals=45678.9, std_evals=0.0, nmin=244, master_seed=2**64 - 1,
        ),
        ExperimentRecord(problem="dec3", n=90, mode="pl", runs=3, successes=0, master_seed=7),
    ]


# ========== experiment records ==========

def test_records_survive_csv(history, tmp_path):
    path = history.save_records(sample_records(), tmp_path / "out" / "sweep.csv")
    loaded = history.load_records(path)

    assert len(loaded) == 3
    for original, reread in zip(sample_records(), loaded):
        assert reread.problem == original.problem
        assert reread.n == original.n
        assert reread.mode == original.mode
        assert (reread.runs, reread.successes, reread.nmin) == (original.runs, original.successes, original.nmin)
        assert reread.master_seed == original.master_seed
        if original.mean_evals is None:
            assert reread.mean_evals is None
        else:
            assert reread.mean_evals == pytest.approx(original.mean_evals, rel=1e-5)


def test_record_csv_layout(history, tmp_path):
    path = history.save_records(sample_records(), tmp_path / "sweep.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(RECORD_COLUMNS)
    assert lines[1] == "dec3,30,pl,100,100,12345.7,321.5,,18446744073709551615"
    assert lines[2].split(",")[7] == "244"


# ========== per-run rows and traces ==========

def test_run_rows_survive_csv(history, tmp_path):
    rows = [
        RunRecord(problem="spinglass", n=16, mode="pl", run=i, seed=2**63 + i, success=i % 2 == 0,
                  evaluations=100 + i, flips=1600, best_fitness=24.0, generations=5)
        for i in range(3)
    ]
    path = history.save_runs(rows, tmp_path / "sweep.runs.csv")
    assert history.load_runs(path) == rows


def test_trace_csv(history, tmp_path):
    trace = [
        TraceRecord(step=1, population=0, size=10, generation=1, best_fitness=3.0,
                    average_fitness=2.5, evaluations=20),
        TraceRecord(step=2, population=0, size=10, generation=2, best_fitness=3.5,
                    average_fitness=2.75, evaluations=30),
    ]
    frame = pd.read_csv(history.save_trace(trace, tmp_path / "trace.csv"))
    assert frame["evaluations"].tolist() == [20, 30]
    assert list(frame.columns)[:3] == ["step", "population", "size"]


# ========== best-known store ==========

def test_best_known_only_ever_decreases(tmp_path):
    path = tmp_path / "best.json"
    store = BestKnownStore(path).connect()
    assert len(store) == 0
    assert store.update("abc", -60, 6, 1)
    assert not store.update("abc", -58, 6, 1)
    assert store.update("abc", -64, 6, 1)

    reopened = BestKnownStore(path).connect()
    assert reopened.get_energy("abc") == -64
    assert json.loads(path.read_text())["abc"]["side"] == 6


def test_best_known_rejects_corrupt_file(tmp_path):
    path = tmp_path / "best.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        BestKnownStore(path).connect()
