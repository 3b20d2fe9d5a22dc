"""Optional real-data check, not run in CI.

Given a directory of TREC run files and a qrels file (for example a Robust
track collection), runs the greedy oracle over every topic and reports the
smallest subset size reaching tau >= 0.90 against the all-topic MAP@100
ranking. The expectation is that 25% of the topics or fewer suffice.

Usage: python benchmarks/real_data_harness.py RUNS_DIR QRELS [--threshold 0.9]
"""

from __future__ import annotations

import argparse
import sys

from topicsel.collection import parse_qrels, parse_runs, run_paths, validate
from topicsel.selection import greedy_oracle_select


def main(argv=None) -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("runs")
    ap.add_argument("qrels")
    ap.add_argument("--threshold", type=float, default=0.90)
    ap.add_argument("--fraction", type=float, default=0.25)
    args = ap.parse_args(argv)
    runs = parse_runs(run_paths(args.runs))
    qrels = parse_qrels(args.qrels)
    rep = validate(runs, qrels).to_dict()
    print(f"{runs.n_systems} systems, {len(runs.topics)} topics, {rep['n_anomalies']} anomalies {rep['by_kind']}")
    trace = greedy_oracle_select(runs, qrels, len(runs.topics))
    hit = next((k for k, tau in enumerate(trace.tau_after_step, start=1) if tau >= args.threshold), None)
    limit = args.fraction * len(runs.topics)
    ok = hit is not None and hit <= limit
    print(f"oracle reaches tau >= {args.threshold} with {hit} topics (limit {limit:.0f}): {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
