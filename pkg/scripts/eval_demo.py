#!/usr/bin/env python3
"""Run the bundled 20-question corpus through the three evaluation modes and
the stage-1 scoping sweep, printing compact tables.

Usage: python scripts/eval_demo.py [dataset.jsonl]
"""

from __future__ import annotations

import sys
from pathlib import Path

from agentmem.evaluation import OracleReader, load_dataset, run_benchmark
from agentmem.retrieval import RetrievalConfig

DEFAULT_DATASET = Path(__file__).resolve().parent.parent / "tests" / "data" / "synthetic20.jsonl"


def main() -> None:
    dataset_path = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_DATASET
    dataset = load_dataset(dataset_path)
    reader = OracleReader()

    print(f"dataset: {dataset_path} ({len(dataset)} questions)\n")
    print("== mode comparison (oracle reader) ==")
    print(f"{'mode':<14} {'acc':>7} {'f1':>7}")
    for mode in ("no_retrieval", "retrieval", "oracle"):
        report = run_benchmark(dataset, RetrievalConfig(), reader, mode=mode)
        print(f"{mode:<14} {report.overall.accuracy:>7.3f} {report.overall.f1:>7.3f}")

    print("\n== stage-1 scoping sweep (retrieval mode) ==")
    print(f"{'k1':>6} {'acc':>7} {'mean sessions ratio':>21}")
    for k1 in (1, 3, 5, 10, None):
        cfg = RetrievalConfig(stage1_k1=k1)
        report = run_benchmark(dataset, cfg, reader, mode="retrieval")
        ratios = [r.trace["sessions_ratio"] for r in report.results]
        label = "inf" if k1 is None else str(k1)
        print(f"{label:>6} {report.overall.accuracy:>7.3f} {sum(ratios)/len(ratios):>21.3f}")

    print("\n== per-type breakdown (retrieval mode, defaults) ==")
    report = run_benchmark(dataset, RetrievalConfig(), reader, mode="retrieval")
    print(report.to_table())


if __name__ == "__main__":
    main()
