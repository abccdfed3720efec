#!/usr/bin/env python3
"""Benchmark the adaptive engine against the extended-chain baseline.

Runs both algorithms over the order-2/4/6 full chains and the small
variable-length kernel, then prints per-kernel summaries (mean -tau, mean
node touches, total wall time) and writes one CSV block per kernel.

Usage:
    python scripts/bench_orders.py --runs 200 --seed 42 --out-dir bench_out
"""

import argparse
import csv
import statistics
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ciaftp import cli  # noqa: E402

KERNELS = ("order2", "order4", "order6", "desk_vlmc")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--length", type=int, default=1)
    ap.add_argument("--out-dir", default="bench_out")
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in KERNELS:
        out = out_dir / f"{name}.csv"
        rc = cli.main([
            "bench",
            "--kernel", str(REPO / "kernels" / f"{name}.json"),
            "--length", str(args.length),
            "--runs", str(args.runs),
            "--seed", str(args.seed),
            "--out", str(out),
        ])
        if rc != 0:
            print(f"{name}: bench failed with exit {rc}", file=sys.stderr)
            return rc
        by_algo = {}
        with open(out, newline="") as fh:
            for row in csv.DictReader(r for r in fh if not r.startswith("#")):
                by_algo.setdefault(row["algorithm"], []).append(row)
        print(f"== {name} (runs={args.runs}) ==")
        for algo, rows in by_algo.items():
            taus = [-int(r["tau"]) for r in rows if r["tau"]]
            touches = [int(r["node_touches"]) for r in rows]
            walls = [int(r["wall_ns"]) for r in rows]
            print(
                f"  {algo:12s} mean -tau {statistics.mean(taus):7.2f}   "
                f"mean nodes {statistics.mean(touches):10.1f}   "
                f"total wall {sum(walls) / 1e6:8.1f} ms"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
