#!/usr/bin/env python3
"""
Utility script for the FedAC simulator

This script writes sample experiment configs and summarizes finished run directories.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd
import yaml

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from fedac.engine.artifacts import METRICS_FILE, RESOLVED_CONFIG_FILE, SNAPSHOT_DIR, read_snapshot  # noqa: E402
from fedac.loader import validate_document  # noqa: E402


def generate_sample_configs() -> Dict[str, Dict[str, Any]]:
    """One document per training mode on the grouped synthetic task."""
    base_run = {"eta": 0.05, "rounds": 100, "sample_fraction": 0.25, "local_epochs": 5, "batch_size": 32}
    data = {"synthetic": {"group_count": 3, "clients_per_group": 10, "input_dim": 16, "class_count": 4}}
    return {
        "fedac": {"run": {**base_run, "mode": "fedac", "mu": 0.5, "lambda": 0.1, "K_init": 3}, "data": data},
        "fedavg": {"run": {**base_run, "mode": "fedavg"}, "data": data},
        "fesem_shared": {"run": {**base_run, "mode": "fesem_shared", "K_init": 3}, "data": data},
        "cluster_only": {"run": {**base_run, "mode": "cluster_only", "mu": 0.5, "K_init": 3}, "data": data},
        "global_only": {"run": {**base_run, "mode": "global_only", "lambda": 0.1, "K_init": 3}, "data": data},
    }


def save_sample_configs(output_dir: str = "configs/modes"):
    """Validate and save the sample configs as YAML files."""
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    for name, document in generate_sample_configs().items():
        validate_document(document, source=name)
        filename = output_path / f"{name}.yaml"
        with open(filename, "w") as f:
            yaml.safe_dump(document, f, sort_keys=False)
        print(f"✅ Saved: {filename}")


def summarize_run(run_dir: Path) -> Dict[str, Any]:
    """Last metrics row plus the headline settings of one run directory."""
    metrics = pd.read_csv(run_dir / METRICS_FILE)
    with open(run_dir / RESOLVED_CONFIG_FILE) as f:
        config = yaml.safe_load(f)
    row: Dict[str, Any] = {
        "run": run_dir.name,
        "mode": config["run"]["mode"],
        "seed": config["run"]["seed"],
        "rounds": len(metrics),
    }
    if not metrics.empty:
        last = metrics.iloc[-1]
        row.update({"mean_acc": last["mean_acc"], "std_acc": last["std_acc"], "K": int(last["K"]),
                    "ari": last["ari"]})
    return row


def inspect_run(run_dir: str):
    """Print a run's final metrics and cluster sizes."""
    path = Path(run_dir)
    if not (path / METRICS_FILE).is_file():
        print(f"❌ {path} has no {METRICS_FILE}")
        return False

    summary = summarize_run(path)
    print(f"✅ {summary['run']}: mode={summary['mode']} seed={summary['seed']} rounds={summary['rounds']}")
    if "mean_acc" in summary:
        print(f"   Accuracy: {summary['mean_acc']:.4f} ± {summary['std_acc']:.4f}")
        print(f"   Clusters: {summary['K']}   ARI: {summary['ari']}")

    if (path / SNAPSHOT_DIR).is_dir():
        snapshot = read_snapshot(path / SNAPSHOT_DIR)
        counts = snapshot.assignment.member_counts()
        print("   Members per cluster:")
        for k, count in enumerate(counts):
            print(f"     📦 cluster {k}: {count}")
    return True


def compare_runs(run_dirs: List[str]):
    """Side-by-side final metrics of several run directories."""
    rows = [summarize_run(Path(d)) for d in run_dirs if (Path(d) / METRICS_FILE).is_file()]
    if not rows:
        print("❌ No run directories with metrics found")
        return
    print(pd.DataFrame(rows).to_string(index=False))


def main():
    """Main utility function."""
    parser = argparse.ArgumentParser(description="FedAC simulator - Utilities")
    parser.add_argument("command", choices=["samples", "inspect", "compare"], help="Utility command to run")
    parser.add_argument("runs", nargs="*", help="Run directories for 'inspect' and 'compare'")
    parser.add_argument("--output", default="configs/modes", help="Output directory for 'samples'")

    args = parser.parse_args()

    print("🛠️  FedAC simulator - Utilities")
    print("=" * 50)

    if args.command == "samples":
        print("📝 Generating sample configs...")
        save_sample_configs(args.output)

    elif args.command == "inspect":
        for run_dir in args.runs:
            print(f"🔍 Inspecting {run_dir}...")
            inspect_run(run_dir)

    elif args.command == "compare":
        print("📋 Comparing runs...")
        compare_runs(args.runs)

    print("\n✅ Utility completed")


if __name__ == "__main__":
    main()
