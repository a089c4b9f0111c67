"""Command-line front end: run experiments, emit reports and sweep hyperparameters."""

import argparse
import itertools
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from fedac import __version__
from fedac.clustering.similarity import REPORT_BLOCKS, pairwise_report, update_map
from fedac.config import configure_logging, settings
from fedac.engine.artifacts import read_snapshot, resolved_config, write_run_artifacts
from fedac.engine.server import run_experiment
from fedac.errors import ConfigurationError, FedACError
from fedac.loader import apply_overrides, read_document, resolve_key, validate_document
from fedac.models.config import ExperimentConfig
from fedac.models.records import RunStatus, SweepPointResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

REPORT_KINDS = ("partition", "similarity", "clusters")
SUMMARY_FILE = "summary.csv"


def status(message: str) -> None:
    print(message, file=sys.stderr)


def _load(args: argparse.Namespace, extra: Sequence[str] = ()) -> ExperimentConfig:
    document, marks = read_document(args.config)
    overrides = list(args.set or []) + list(extra)
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={args.seed}")
    document, overridden = apply_overrides(document, overrides)
    return validate_document(document, marks, overridden, source=str(args.config))


def default_run_dir(config_path: str, config: ExperimentConfig) -> Path:
    if config.output.dir:
        return Path(config.output.dir)
    return Path(settings.output_dir) / f"{Path(config_path).stem}-seed{config.run.seed}"


def execute_run(config: ExperimentConfig, out_dir: Path) -> SweepPointResult:
    """Run one experiment and write its artifacts; failures are reported, not raised."""
    try:
        result = run_experiment(config)
        write_run_artifacts(result, out_dir)
    except Exception as e:  # noqa: BLE001 - any failure ends this run only
        logger.error("Run in %s failed: %s", out_dir, e)
        logger.debug("Failure details", exc_info=True)
        return SweepPointResult(point=0, status=RunStatus.FAILED, run_dir=str(out_dir), error=str(e))

    last = result.metrics[-1] if result.metrics else None
    return SweepPointResult(
        point=0,
        status=RunStatus.COMPLETED,
        run_dir=str(out_dir),
        final_mean_acc=last.mean_test_accuracy if last else None,
        final_std_acc=last.std_test_accuracy if last else None,
        final_K=last.K if last else result.state.K,
    )


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    out_dir = Path(args.out) if args.out else default_run_dir(args.config, config)
    status(f"🚀 Running {config.run.mode.value} for {config.run.rounds} rounds -> {out_dir}")
    outcome = execute_run(config, out_dir)
    if outcome.status == RunStatus.FAILED:
        status(f"❌ Run failed: {outcome.error}")
        return EXIT_FAILURE
    if outcome.final_mean_acc is not None:
        status(f"✅ Done: mean acc {outcome.final_mean_acc:.4f} ± {outcome.final_std_acc:.4f}, K={outcome.final_K}")
    else:
        status("✅ Done (no rounds run)")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = _load(args)
    yaml.safe_dump(resolved_config(config), sys.stdout, sort_keys=False)
    status("✅ Config is valid")
    return EXIT_OK


def _write_stdout(frame: pd.DataFrame) -> None:
    frame.to_csv(sys.stdout, index=False, float_format=settings.float_format, na_rep="nan", lineterminator="\n")


def cmd_report(args: argparse.Namespace) -> int:
    snapshot = read_snapshot(args.snapshot_dir)
    if args.kind == "partition":
        _write_stdout(snapshot.partitions)
    elif args.kind == "clusters":
        _write_stdout(snapshot.trace)
    else:
        reduction_map = snapshot.reduction_map
        if reduction_map is None:
            status("ℹ️  Snapshot has no reduction map, fitting one on the client models")
            reduction_map = update_map(snapshot.clients, int(snapshot.meta.get("D", 50)))
        blocks = pairwise_report(
            snapshot.clients,
            snapshot.histograms,
            reduction_map,
            centers=snapshot.centers,
            epsilon=float(snapshot.meta.get("kl_epsilon", 1e-6)),
        )
        if args.block != "all":
            _write_stdout(blocks[args.block])
        else:
            # One titled CSV section per block
            for name, frame in blocks.items():
                print(f"# {name}")
                _write_stdout(frame)
    return EXIT_OK


def parse_grid(items: Sequence[str]) -> Dict[str, List[object]]:
    """key=v1,v2 entries -> ordered {key: [values]}; values are YAML scalars."""
    grid: Dict[str, List[object]] = {}
    for item in items:
        if "=" not in item:
            raise ConfigurationError(f"grid entry '{item}' must look like key=v1,v2")
        key, raw = item.split("=", 1)
        key = key.strip()
        resolve_key(key)
        try:
            values = [yaml.safe_load(value) for value in raw.split(",") if value.strip()]
        except yaml.YAMLError as e:
            raise ConfigurationError(f"grid entry '{item}': {e}") from e
        if not values:
            raise ConfigurationError(f"grid entry '{item}' has no values")
        grid[key] = values
    if not grid:
        raise ConfigurationError("sweep needs at least one --grid entry")
    return grid


def _format_value(value: object) -> str:
    return yaml.safe_dump(value, default_flow_style=True).splitlines()[0]


def cmd_sweep(args: argparse.Namespace) -> int:
    grid = parse_grid(args.grid)
    keys = list(grid)
    out_root = Path(args.out) if args.out else Path(settings.output_dir) / f"{Path(args.config).stem}-sweep"

    # Every point is validated before any run starts
    points: List[Tuple[int, Dict[str, object], ExperimentConfig]] = []
    for index, values in enumerate(itertools.product(*grid.values())):
        params = dict(zip(keys, values))
        extra = [f"{key}={_format_value(value)}" for key, value in params.items()]
        points.append((index, params, _load(args, extra)))

    status(f"🧪 Sweep of {len(points)} points over {', '.join(keys)} -> {out_root}")

    def run_point(point: Tuple[int, Dict[str, object], ExperimentConfig]) -> SweepPointResult:
        index, params, config = point
        outcome = execute_run(config, out_root / f"point-{index:03d}")
        mark = "✅" if outcome.status == RunStatus.COMPLETED else "❌"
        status(f"{mark} point {index} {params}")
        return outcome.model_copy(update={"point": index, "params": params})

    with ThreadPoolExecutor(max_workers=max(1, settings.max_concurrent_runs)) as pool:
        results = list(pool.map(run_point, points))

    out_root.mkdir(parents=True, exist_ok=True)
    summary = pd.DataFrame([result.to_row(keys) for result in results])
    summary.to_csv(out_root / SUMMARY_FILE, index=False, float_format=settings.float_format, lineterminator="\n")

    failed = sum(result.status == RunStatus.FAILED for result in results)
    if failed:
        status(f"❌ {failed} of {len(results)} points failed, see {out_root / SUMMARY_FILE}")
        return EXIT_FAILURE
    status(f"✅ Sweep complete: {out_root / SUMMARY_FILE}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedac", description="Federated learning with adaptive clustering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override FEDAC_LOG_LEVEL")
    parser.add_argument("--debug", action="store_true", help="Show tracebacks on failure")
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="Experiment YAML document")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="Override a config value (repeatable)")
        sub.add_argument("--seed", type=int, help="Shorthand for --set run.seed=N")

    run = subparsers.add_parser("run", help="Run one experiment")
    add_config_flags(run)
    run.add_argument("--out", help="Run directory")
    run.set_defaults(handler=cmd_run)

    validate = subparsers.add_parser("validate", help="Check a config and print it resolved")
    add_config_flags(validate)
    validate.set_defaults(handler=cmd_validate)

    report = subparsers.add_parser("report", help="Print a CSV report from a snapshot")
    report.add_argument("snapshot_dir")
    report.add_argument("--kind", required=True, choices=REPORT_KINDS)
    report.add_argument("--block", default="all", choices=(*REPORT_BLOCKS, "all"),
                        help="Similarity matrix to print (default: every block as its own section)")
    report.set_defaults(handler=cmd_report)

    sweep = subparsers.add_parser("sweep", help="Run the Cartesian product of a parameter grid")
    add_config_flags(sweep)
    sweep.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                       help="Grid axis (repeatable)")
    sweep.add_argument("--out", help="Sweep root directory")
    sweep.set_defaults(handler=cmd_sweep)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(level="DEBUG" if args.debug else args.log_level)
    show_traceback = args.debug or settings.log_level.upper() == "DEBUG"

    try:
        return args.handler(args)
    except ConfigurationError as e:
        status(f"❌ Configuration error: {e}")
        if show_traceback:
            logger.exception("Configuration error")
        return EXIT_CONFIG
    except FedACError as e:
        status(f"❌ {type(e).__name__}: {e}")
        if show_traceback:
            logger.exception("Run failed")
        return EXIT_FAILURE
    except Exception as e:  # noqa: BLE001
        status(f"❌ Unexpected error: {e}")
        if show_traceback:
            logger.exception("Unexpected error")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
