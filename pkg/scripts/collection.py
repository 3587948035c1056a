#!/usr/bin/env python3
"""Shifted ILU(0) vs shifted A²ILU(0) over the curated Matrix Market suite.

Prints the per-alpha convergent / pseudo-convergent / not-convergent counts
of both methods and the increase-ratio histograms, and writes the JSON
report (plus the per-run CSV next to it).

Usage:  python scripts/collection.py [--dir data/suite] [--out collection.json]
"""
import argparse
from pathlib import Path

from a2ilu.bench import HIST_BUCKETS, CollectionConfig, emit_collection_report, run_collection

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dir", default=str(ROOT / "data" / "suite"))
    ap.add_argument("--out", default="collection.json")
    ap.add_argument("--epsilon", type=float, default=1e-8)
    args = ap.parse_args(argv)
    report = run_collection(args.dir, CollectionConfig(epsilon=args.epsilon))
    ilu, acc = report.tally(False), report.tally(True)
    print(f"{len(report.matrices)} matrices; skipped: "
          + (", ".join(f"{f} ({why})" for f, why in report.skipped) or "none"))
    print(f"{'alpha':>5} | {'ILU conv':>8} {'pseudo':>6} {'not':>4} | {'A2 conv':>7} {'pseudo':>6} {'not':>4}")
    for a in report.alphas:
        x, y = ilu[a], acc[a]
        print(f"{a:>5.1f} | {x['convergent']:>8} {x['pseudo_convergent']:>6} {x['not_convergent']:>4} | "
              f"{y['convergent']:>7} {y['pseudo_convergent']:>6} {y['not_convergent']:>4}")
    print("\nincrease ratio (N_A - N_I) / N_I per matrix")
    print(f"{'alpha':>5} | " + " ".join(f"{b:>11}" for b in HIST_BUCKETS))
    for a in report.alphas:
        h = report.histogram(a)
        print(f"{a:>5.1f} | " + " ".join(f"{h[b]:>11}" for b in HIST_BUCKETS))
    print("wrote " + ", ".join(map(str, emit_collection_report(report, Path(args.out)))))


if __name__ == "__main__":
    main()
