"""Language-embedding distances after training on related and unrelated toy languages."""

import argparse
from pathlib import Path

from cpgnmt.experiments import relatedness_corpus, run_toy, toy_experiment
from cpgnmt.generator import cosine_distance_matrix
from cpgnmt.reports import emit_distance_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--data", default="data/toy_relatedness")
    ap.add_argument("--out", default="runs/toy_relatedness")
    args = ap.parse_args()

    path = Path(args.data) / "manifest.yaml"
    if not path.exists():
        relatedness_corpus(args.data, seed=0)
    for seed in args.seeds:
        run = run_toy(toy_experiment(path, "cpg", seed, max_steps=args.steps))
        table = run.model.generator.embeddings
        text = emit_distance_matrix(table.languages, cosine_distance_matrix(table), Path(args.out) / f"distances.seed{seed}.tsv")
        print(f"seed {seed}\n{text}", end="")


if __name__ == "__main__":
    main()
