"""
Report History Service - CSV emission and re-reading of experiment results
Sweep records, per-run rows (replayable from their seeds) and schedule traces
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Union

import pandas as pd

from app.models.schemas import ExperimentRecord, RunRecord, TraceRecord

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "problem",
    "n",
    "mode",
    "runs",
    "successes",
    "mean_evals",
    "std_evals",
    "nmin",
    "master_seed",
]

RUN_COLUMNS = [
    "problem",
    "n",
    "mode",
    "run",
    "seed",
    "population_size",
    "success",
    "evaluations",
    "flips",
    "best_fitness",
    "generations",
]

TRACE_COLUMNS = [
    "step",
    "population",
    "size",
    "generation",
    "best_fitness",
    "average_fitness",
    "evaluations",
    "best_ever_fitness",
]

FLOAT_FORMAT = "%.6g"


def _optional(value) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


class ReportHistoryService:
    """Persist experiment output as CSV"""

    # ========== SWEEP RECORDS ==========

    def save_records(self, records: Iterable[ExperimentRecord], path: Union[str, Path]) -> Path:
        """
        One row per (problem, size, mode)

        Columns: problem,n,mode,runs,successes,mean_evals,std_evals,nmin,master_seed
        """
        rows = []
        for record in records:
            row = record.model_dump(mode="json")
            # u64 seeds do not fit int64 columns
            row["master_seed"] = str(record.master_seed)
            rows.append(row)
        frame = pd.DataFrame(rows, columns=RECORD_COLUMNS)
        frame["nmin"] = frame["nmin"].astype("Int64")
        path = self._write(frame, path)
        logger.info(f"💾 {len(rows)} experiment record(s) saved: {path}")
        return path

    def load_records(self, path: Union[str, Path]) -> List[ExperimentRecord]:
        frame = pd.read_csv(path, dtype={"master_seed": str, "problem": str, "mode": str})
        records = []
        for row in frame.to_dict(orient="records"):
            nmin = _optional(row.get("nmin"))
            records.append(
                ExperimentRecord(
                    problem=row["problem"],
                    n=int(row["n"]),
                    mode=row["mode"],
                    runs=int(row["runs"]),
                    successes=int(row["successes"]),
                    mean_evals=_optional(row.get("mean_evals")),
                    std_evals=_optional(row.get("std_evals")),
                    nmin=None if nmin is None else int(nmin),
                    master_seed=int(row["master_seed"]),
                )
            )
        return records

    # ========== PER-RUN ROWS ==========

    def save_runs(self, runs: Iterable[RunRecord], path: Union[str, Path]) -> Path:
        rows = []
        for run in runs:
            row = run.model_dump(mode="json")
            row["seed"] = str(run.seed)
            rows.append(row)
        frame = pd.DataFrame(rows, columns=RUN_COLUMNS)
        frame["population_size"] = frame["population_size"].astype("Int64")
        path = self._write(frame, path)
        logger.info(f"💾 {len(rows)} run row(s) saved: {path}")
        return path

    def load_runs(self, path: Union[str, Path]) -> List[RunRecord]:
        frame = pd.read_csv(path, dtype={"seed": str, "problem": str, "mode": str})
        runs = []
        for row in frame.to_dict(orient="records"):
            size = _optional(row.get("population_size"))
            runs.append(
                RunRecord(
                    problem=row["problem"],
                    n=int(row["n"]),
                    mode=row["mode"],
                    run=int(row["run"]),
                    seed=int(row["seed"]),
                    population_size=None if size is None else int(size),
                    success=bool(row["success"]),
                    evaluations=int(row["evaluations"]),
                    flips=int(row["flips"]),
                    best_fitness=float(row["best_fitness"]),
                    generations=int(row["generations"]),
                )
            )
        return runs

    # ========== TRACES ==========

    def save_trace(self, trace: Iterable[TraceRecord], path: Union[str, Path]) -> Path:
        frame = pd.DataFrame([t.model_dump() for t in trace], columns=TRACE_COLUMNS)
        path = self._write(frame, path)
        logger.info(f"💾 Trace with {len(frame)} step(s) saved: {path}")
        return path

    # ========== Helpers ==========

    def _write(self, frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path
