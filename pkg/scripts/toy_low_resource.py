"""CPG (with auto-encoding) versus CPG* (without) at reduced parallel data."""

import argparse
from pathlib import Path

import numpy as np

from cpgnmt.experiments import low_resource_corpus, run_toy, toy_experiment
from cpgnmt.reports import EvalReport, PairScore, emit_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--data", default="data/toy_low_resource")
    ap.add_argument("--out", default="runs/toy_low_resource")
    args = ap.parse_args()

    path = Path(args.data) / "manifest.yaml"
    if not path.exists():
        low_resource_corpus(args.data, seed=0)
    rows = []
    for frac in args.fractions:
        for label, ae in (("CPG", True), ("CPG*", False)):
            bleus = []
            for seed in args.seeds:
                cfg = toy_experiment(path, "cpg", seed, max_steps=args.steps, parallel_fraction=frac, autoencode=ae)
                bleus.append(run_toy(cfg).result.best_bleu)
            print(f"fraction={frac}\t{label}\tdev_bleu={' '.join(f'{b:.4f}' for b in bleus)}\tmedian={np.median(bleus):.4f}")
            rows.append(PairScore(label, f"{frac:g}", "median_dev_bleu", float(np.median(bleus)), len(bleus)))
    emit_report(EvalReport(rows, {"steps": args.steps}), Path(args.out) / "low_resource.tsv")


if __name__ == "__main__":
    main()
