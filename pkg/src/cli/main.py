"""ntpt command line: train, extract, evaluate, self-test.

Usage:
    ntpt train --out runs/lifelong
    ntpt train --scenario add2x2:top --pool-cap 4000 --restarts 5 --out runs/top
    ntpt train --scenario math --restarts 100 --jobs 8 --out runs/math
    ntpt train --scenario math --library runs/lifelong/library.ntpt --out runs/pm
    ntpt extract runs/lifelong
    ntpt eval runs/math --lengths 1..16
    ntpt selftest
    ntpt library inspect runs/lifelong/library.ntpt
    ntpt config --output ntpt.json

Exit codes: 0 success, 2 usage or configuration error, 3 data or I/O error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from collections.abc import Sequence

from configs import (
    DEFAULT_CONFIG,
    ConfigError,
    NtptConfig,
    load_config,
    to_dict,
    write_config,
)
from src.models import build_grid_model, build_math_model
from src.neural import Library, LibraryError, Perception, bind_functions
from src.tasks import TaskDataError, TaskId, single_task_schedule
from src.terpret import TerpretError
from src.training import (
    MATH_NETS,
    EvalResult,
    NumericalError,
    RunConfig,
    RunKind,
    eval_set,
    evaluate_listing,
    evaluate_program,
    length_sweep,
    load_run,
    math_functions,
    open_sources,
    oracle_functions,
    restore_logits,
    run_restarts,
    schedule_from_config,
    write_run,
)

from .selftest import run_selftest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MAX_LENGTH = 64


def parse_lengths(text: str) -> tuple[int, ...]:
    """Digit counts from ``"a..b"`` or ``"a,b,c"``.

    Raises:
        argparse.ArgumentTypeError: If a length is not a positive integer.
    """
    try:
        if ".." in text:
            low, high = (int(part) for part in text.split("..", 1))
            lengths = tuple(range(low, high + 1))
        else:
            lengths = tuple(int(part) for part in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"invalid lengths {text!r}") from e
    if not lengths:
        raise argparse.ArgumentTypeError(f"no lengths in {text!r}")
    bad = [n for n in lengths if not 1 <= n <= MAX_LENGTH]
    if bad:
        raise argparse.ArgumentTypeError(
            f"lengths must be in 1..{MAX_LENGTH}, got {bad[0]}"
        )
    return lengths


def _format_interval(result: EvalResult) -> str:
    low, high = result.interval()
    return f"{result.accuracy:6.3f} [{low:.3f}, {high:.3f}]"


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _apply_overrides(config: NtptConfig, args: argparse.Namespace) -> NtptConfig:
    trainer = config.trainer
    if args.restarts is not None:
        trainer = dataclasses.replace(trainer, restarts=args.restarts)
    if args.jobs is not None:
        trainer = dataclasses.replace(trainer, jobs=args.jobs)
    data = config.data
    if args.pool_cap is not None:
        data = dataclasses.replace(data, pool_cap=args.pool_cap)
    math = config.math
    if args.steps is not None:
        if args.scenario == "math":
            math = dataclasses.replace(math, steps=args.steps)
        else:
            trainer = dataclasses.replace(trainer, single_task_steps=args.steps)
    seed = config.seed if args.seed is None else args.seed
    return dataclasses.replace(
        config, trainer=trainer, data=data, math=math, seed=seed
    )


def cmd_train(args: argparse.Namespace) -> int:
    """Train and write a run directory."""
    config = _apply_overrides(load_config(args.config), args)
    restarts, jobs = config.trainer.restarts, config.trainer.jobs
    library = Library.load(args.library) if args.library else None

    if args.scenario == "math":
        if library is None and config.math.perception == "neural":
            raise ConfigError(
                "neural math perception needs --library", key="math.perception"
            )
        run_config = RunConfig.from_config(config, out_dir=args.out)
        summary = run_restarts(
            run_config, restarts, jobs, math=config.math, library=library
        )
        kind, phases = RunKind.MATH, None
    else:
        if args.scenario == "lifelong":
            schedule = schedule_from_config(config)
            kind = RunKind.LIFELONG
        else:
            try:
                task = TaskId.parse(args.scenario)
            except TaskDataError as e:
                raise ConfigError(f"unknown scenario {args.scenario!r}") from e
            if not task.is_grid:
                raise ConfigError(f"unknown scenario {args.scenario!r}")
            schedule = single_task_schedule(task, config.trainer.single_task_steps)
            kind = RunKind.SINGLE
        run_config = RunConfig.from_config(config, schedule, out_dir=args.out)
        summary = run_restarts(run_config, restarts, jobs, library=library)
        phases = schedule.to_dict()

    write_run(args.out, config, summary, kind, phases)

    print(f"{'restart':>7}  {'converged':>9}  {'solved':>6}  {'score':>6}  error")
    for outcome in summary.outcomes:
        print(
            f"{outcome.restart:>7}  {str(outcome.converged):>9}  "
            f"{str(outcome.solved):>6}  "
            f"{outcome.score:6.3f}  {outcome.error or ''}"
        )
    print(f"\n{summary.convergence_count}/{restarts} restarts converged")
    if summary.best is not None:
        print(f"Best restart: {summary.best.restart}")
    print(f"Run written to: {args.out}")
    return EXIT_NUMERIC if summary.failures else EXIT_OK


# ---------------------------------------------------------------------------
# extract / eval
# ---------------------------------------------------------------------------


def cmd_extract(args: argparse.Namespace) -> int:
    """Print every extracted program of a run."""
    record = load_run(args.run_dir)
    if not record.listings:
        print("No programs: every restart failed", file=sys.stderr)
        return EXIT_NUMERIC
    for task, listing in record.listings.items():
        print(f"# {task}")
        print(listing.text)
        print()
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Print held-out accuracy of a run's programs."""
    record = load_run(args.run_dir)
    record.verify_snapshots()
    library = record.library()
    config = record.config
    _, test_source = open_sources(config.data, config.seed)
    tasks = [args.task] if args.task else list(record.listings)
    for task in tasks:
        if task not in record.listings:
            raise ConfigError(f"run has no program for task {task!r}")

    if record.kind is RunKind.MATH:
        perception = Perception.NEURAL if library is not None else Perception.ORACLE
        functions = math_functions(library, perception)
        listing = record.listings["math"]
        machine = build_math_model(
            config.math.num_blocks,
            nets=MATH_NETS,
            num_registers=config.math.num_registers,
        )
        restore_logits(machine, record.programs["math"])
        lengths = args.lengths or config.math.eval_lengths
        rows = length_sweep(
            listing,
            lengths,
            test_source,
            args.examples or config.math.eval_examples,
            config.seed,
            MATH_NETS,
            machine=machine,
            functions=functions,
            neural=perception is Perception.NEURAL,
        )
        print(f"{'digits':>6}  {'differentiable':>22}  {'discrete':>22}  halted")
        for row in rows:
            assert row.differentiable is not None
            print(
                f"{row.digits:>6}  {_format_interval(row.differentiable):>22}  "
                f"{_format_interval(row.discrete):>22}  {row.halted:6.3f}"
            )
        return EXIT_OK

    if library is not None and config.trainer.perception == "neural":
        functions = bind_functions(library, Perception.NEURAL)
    else:
        functions = oracle_functions([n for n, _ in MATH_NETS])
    print(f"{'task':<16}  {'differentiable':>22}  {'discrete':>22}")
    for task in tasks:
        task_id = TaskId.parse(task)
        state = record.programs[task]
        nets = [(str(n), int(k)) for n, k in state["nets"]]
        graph = build_grid_model(task_id, nets)
        restore_logits(graph, state)
        eval_batches = eval_set(
            task_id, test_source, args.examples or config.trainer.eval_size, config.seed
        )
        soft = evaluate_program(graph, eval_batches, functions)
        hard = evaluate_listing(graph, record.listings[task], eval_batches, functions)
        print(f"{task:<16}  {_format_interval(soft):>22}  {_format_interval(hard):>22}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selftest / library / config
# ---------------------------------------------------------------------------


def cmd_selftest(args: argparse.Namespace) -> int:
    """Run the offline self-checks."""
    results = run_selftest(seed=args.seed or 0, quick=args.quick)
    for r in results:
        print(f"{'ok' if r.passed else 'FAIL':>4}  {r.name:<14} {r.detail}")
    failed = [r for r in results if not r.passed]
    if not failed:
        return EXIT_OK
    return EXIT_NUMERIC if any(r.numeric for r in failed) else EXIT_DATA


def cmd_library(args: argparse.Namespace) -> int:
    """Describe the functions of a library file."""
    library = Library.load(args.path)
    for line in library.describe():
        print(line)
    return EXIT_OK


def cmd_config(args: argparse.Namespace) -> int:
    """Write or print the reference configuration."""
    if args.output:
        write_config(DEFAULT_CONFIG, args.output)
        print(f"Configuration written to: {args.output}")
    else:
        print(json.dumps(to_dict(DEFAULT_CONFIG), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with every subcommand."""
    parser = argparse.ArgumentParser(
        prog="ntpt",
        description="Differentiable programs over a shared neural library.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="Warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="Train and write a run directory")
    train.add_argument("--config", default=None, help="JSON configuration file")
    train.add_argument(
        "--scenario",
        default="lifelong",
        help="lifelong, math, or one 2x2 task such as add2x2:top",
    )
    train.add_argument("--restarts", type=int, default=None, help="Restart count")
    train.add_argument("--jobs", type=int, default=None, help="Worker processes")
    train.add_argument("--out", required=True, help="Output directory")
    train.add_argument("--library", default=None, help="Library to start from")
    train.add_argument(
        "--pool-cap", type=int, default=None, help="Distinct examples per task"
    )
    train.add_argument(
        "--steps", type=int, default=None, help="Steps of single-task or math runs"
    )
    train.add_argument("--seed", type=int, default=None, help="Seed override")
    train.set_defaults(handler=cmd_train)

    extract = commands.add_parser("extract", help="Print extracted programs")
    extract.add_argument("run_dir", help="Run directory")
    extract.set_defaults(handler=cmd_extract)

    evaluate = commands.add_parser("eval", help="Accuracy table of a run")
    evaluate.add_argument("run_dir", help="Run directory")
    evaluate.add_argument("--task", default=None, help="Only this task")
    evaluate.add_argument(
        "--lengths",
        type=parse_lengths,
        default=None,
        help="Math digit counts, e.g. 1..16 or 1,2,4",
    )
    evaluate.add_argument(
        "--examples", type=int, default=None, help="Examples per task or length"
    )
    evaluate.set_defaults(handler=cmd_eval)

    selftest = commands.add_parser("selftest", help="Run offline self-checks")
    selftest.add_argument("--quick", action="store_true", help="Fewer random models")
    selftest.add_argument("--seed", type=int, default=0, help="Seed")
    selftest.set_defaults(handler=cmd_selftest)

    library = commands.add_parser("library", help="Library files")
    library_commands = library.add_subparsers(dest="library_command", required=True)
    inspect = library_commands.add_parser("inspect", help="Describe a library")
    inspect.add_argument("path", help="Library file")
    inspect.set_defaults(handler=cmd_library)

    config = commands.add_parser("config", help="Reference configuration")
    config.add_argument("--output", default=None, help="Write to this file")
    config.set_defaults(handler=cmd_config)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Set the root log level from the verbosity flags."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point.

    Returns:
        Exit code (0 for success).
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    configure_logging(args.verbose, args.quiet)

    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (LibraryError, TaskDataError, TerpretError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
