"""
CLI Routes - argparse subcommands of the experiment harness
run / bisect / experiment / gen-spinglass / oracle / fit
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import get_settings
from app.core.exceptions import HboaError, InvalidArgumentError
from app.db.best_known import BestKnownStore
from app.models.schemas import (
    HboaConfig,
    ProblemKind,
    RunMode,
    ScheduleConfig,
    TraceRecord,
)
from app.services.benchmark_service import BenchmarkService
from app.services.experiment_service import ExperimentService
from app.services.hboa_service import HBOAService
from app.services.parameterless_service import ParameterlessService
from app.services.report_history_service import ReportHistoryService
from app.services.spinglass_service import SpinGlassService

logger = logging.getLogger(__name__)

PROBLEMS = [kind.value for kind in ProblemKind]


def parse_sizes(text: str) -> List[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidArgumentError(f"--sizes must be comma-separated integers, got '{text}'")
    if not sizes:
        raise InvalidArgumentError("--sizes is empty")
    return sizes


def runs_csv_path(out: Path) -> Path:
    """results.csv -> results.runs.csv"""
    return out.with_suffix(".runs.csv")


# =====================================================
# Parser
# =====================================================
def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="hboa",
        description="Parameter-less hierarchical BOA and its scalability harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_problem_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--problem", required=True, choices=PROBLEMS)
        p.add_argument("--seed", type=int, default=0, help="u64 master seed")
        p.add_argument(
            "--local-search",
            action=argparse.BooleanOptionalAction,
            default=None,
            help="attach the bit-flip hill climber (default: on for spin glasses only)",
        )
        p.add_argument(
            "--best-known",
            default=settings.best_known_path,
            help="best-known spin-glass energy file",
        )

    run = sub.add_parser("run", help="one parameter-less or fixed-size run")
    add_problem_args(run)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--instance", help="spin-glass instance file")
    run.add_argument("--mode", choices=[RunMode.parameterless.value, RunMode.fixed.value], default="pl")
    run.add_argument("--pop", type=int, help="population size for --mode fixed")
    run.add_argument("--budget", type=int, default=settings.default_budget)
    run.add_argument("--trace", help="CSV file receiving one row per step")
    run.set_defaults(handler=handle_run)

    bisect = sub.add_parser("bisect", help="minimal population size for fixed-size hBOA")
    add_problem_args(bisect)
    bisect.add_argument("--n", type=int, required=True)
    bisect.add_argument("--instance", help="spin-glass instance file")
    bisect.add_argument("--runs", type=int, default=settings.bisection_runs)
    bisect.set_defaults(handler=handle_bisect)

    experiment = sub.add_parser("experiment", help="sweep over problem sizes")
    add_problem_args(experiment)
    experiment.add_argument("--sizes", required=True, help="comma-separated sizes, e.g. 30,60,90")
    experiment.add_argument("--runs", type=int, default=settings.experiment_runs)
    experiment.add_argument(
        "--mode",
        choices=[RunMode.parameterless.value, RunMode.fixed_bisected.value],
        default="pl",
    )
    experiment.add_argument("--budget", type=int, default=settings.default_budget)
    experiment.add_argument("--instances", type=int, help="spin-glass instances per size (default: --runs)")
    experiment.add_argument("--out", required=True, help="CSV file for the sweep records")
    experiment.set_defaults(handler=handle_experiment)

    gen = sub.add_parser("gen-spinglass", help="write random +-J instances")
    gen.add_argument("--l", type=int, required=True, dest="side")
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out-dir", required=True)
    gen.set_defaults(handler=handle_gen_spinglass)

    oracle = sub.add_parser("oracle", help="exact ground state by enumeration")
    oracle.add_argument("--instance", required=True)
    oracle.set_defaults(handler=handle_oracle)

    fit = sub.add_parser("fit", help="power-law exponent of an experiment CSV")
    fit.add_argument("--csv", required=True)
    fit.set_defaults(handler=handle_fit)

    return parser


# =====================================================
# Handlers
# =====================================================
def _ground_energy(instance, store: BestKnownStore) -> Optional[int]:
    if instance.n <= get_settings().oracle_max_spins:
        energy, _ = ExperimentService().ground_state(instance)
        return energy
    return store.get_energy(instance.fingerprint())


def _problem_from_args(args, n: int):
    kind = ProblemKind(args.problem)
    benchmarks = BenchmarkService()
    if kind != ProblemKind.spinglass:
        if getattr(args, "instance", None):
            raise InvalidArgumentError("--instance is only valid with --problem spinglass")
        return benchmarks.build(kind, n, local_search=args.local_search), None

    store = BestKnownStore(args.best_known)
    if getattr(args, "instance", None):
        instance = SpinGlassService().load(args.instance)
        if instance.n != n:
            raise InvalidArgumentError(f"instance has {instance.n} spins but --n is {n}")
    else:
        instance = SpinGlassService().generate(benchmarks.side_for(n), args.seed)
    problem = benchmarks.build(
        kind,
        n,
        local_search=args.local_search,
        instance=instance,
        ground_energy=_ground_energy(instance, store),
    )
    return problem, store


def handle_run(args) -> int:
    problem, store = _problem_from_args(args, args.n)
    cfg = HboaConfig()
    trace: List[TraceRecord] = []

    if args.mode == RunMode.fixed.value:
        if args.pop is None:
            raise InvalidArgumentError("--mode fixed requires --pop")

        def on_generation(stats):
            trace.append(
                TraceRecord(
                    step=stats.generation,
                    population=0,
                    size=args.pop,
                    generation=stats.generation,
                    best_fitness=stats.best_fitness,
                    average_fitness=stats.average_fitness,
                    evaluations=stats.evaluations,
                )
            )

        result = HBOAService().run_fixed(problem, args.pop, cfg, args.seed, on_generation=on_generation)
    else:
        settings = get_settings()
        schedule = ScheduleConfig(
            k=settings.schedule_k,
            base_population=settings.base_population,
            budget=args.budget,
        )
        result = ParameterlessService().run_parameterless(
            problem, cfg, args.seed, config=schedule, on_step=trace.append
        )

    if store is not None and problem.n > get_settings().oracle_max_spins:
        store.update(
            problem.instance.fingerprint(),
            int(round(-result.best_fitness)),
            problem.instance.side,
            problem.instance.seed,
        )
    if args.trace:
        ReportHistoryService().save_trace(trace, args.trace)

    print(result.model_dump_json(exclude={"wall_time"}))
    return 0


def handle_bisect(args) -> int:
    problem, _ = _problem_from_args(args, args.n)
    settings = get_settings()
    result = ExperimentService().bisect_population_size(
        problem,
        HboaConfig(),
        runs=args.runs,
        master_seed=args.seed,
        base_population=settings.base_population,
    )
    print(json.dumps({"n_min": result.n_min, "interval": list(result.interval), "tried_sizes": result.tried_sizes}))
    return 0


def handle_experiment(args) -> int:
    settings = get_settings()
    sizes = parse_sizes(args.sizes)
    schedule = ScheduleConfig(
        k=settings.schedule_k,
        base_population=settings.base_population,
        budget=args.budget,
    )
    store = BestKnownStore(args.best_known)
    service = ExperimentService(best_known=store)
    output = service.run_experiment(
        args.problem,
        sizes,
        runs=args.runs,
        mode=args.mode,
        master_seed=args.seed,
        schedule=schedule,
        local_search=args.local_search,
        bisection_runs=settings.bisection_runs,
        instances=args.instances,
    )

    out = Path(args.out)
    history = ReportHistoryService()
    history.save_records(output.records, out)
    history.save_runs(output.runs, runs_csv_path(out))
    for record in output.records:
        print(f"{record.problem} n={record.n} {record.mode.value}: "
              f"{record.successes}/{record.runs} mean_evals={record.mean_evals}")
    return 0


def handle_gen_spinglass(args) -> int:
    if args.count < 1:
        raise InvalidArgumentError(f"--count must be positive, got {args.count}")
    out_dir = Path(args.out_dir)
    service = SpinGlassService()
    # same instances as an experiment sweep with this master seed
    for index, instance in enumerate(service.instance_set(args.side, args.count, args.seed)):
        print(service.save(instance, out_dir / f"spinglass_L{args.side}_{index:03d}.txt"))
    return 0


def handle_oracle(args) -> int:
    instance = SpinGlassService().load(args.instance)
    energy, witness = ExperimentService().ground_state(instance)
    print(json.dumps({"energy": energy, "bits": "".join(map(str, witness.tolist()))}))
    return 0


def handle_fit(args) -> int:
    records = ReportHistoryService().load_records(args.csv)
    fits = ExperimentService().fit_exponent(records)
    for (problem, mode), (exponent, points) in fits.items():
        print(f"{problem} {mode}: exponent {exponent:.4f} over {points} sizes")
    return 0


# =====================================================
# Entry
# =====================================================
def main(argv: Optional[List[str]] = None) -> int:
    """Parse, dispatch and map errors to exit codes (0 ok, 1 unexpected, 2 domain)"""
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as e:
        message = "; ".join(err["msg"] for err in e.errors())
        logger.error(f"❌ Invalid configuration: {message}")
        print(f"error: {message}", file=sys.stderr)
        return 2
    except HboaError as e:
        logger.error(f"❌ {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"❌ Unexpected failure: {e}")
        print(f"unexpected error: {e}", file=sys.stderr)
        return 1
