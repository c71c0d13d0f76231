"""Train toy models for several generator variants and report test BLEU.

    python scripts/toy_supervised.py --variants cpg per-language universal
"""

import argparse
from dataclasses import replace
from pathlib import Path

from cpgnmt.cli import evaluate_model, run_training
from cpgnmt.data import parse_manifest
from cpgnmt.experiments import supervised_corpus, toy_experiment
from cpgnmt.inference import DecodeConfig
from cpgnmt.reports import emit_report
from cpgnmt.training import model_from_checkpoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variants", nargs="+", default=["cpg"])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--beam", type=int, default=10)
    ap.add_argument("--data", default="data/toy_supervised")
    ap.add_argument("--out", default="runs/toy_supervised")
    args = ap.parse_args()

    manifest_path = Path(args.data) / "manifest.yaml"
    if not manifest_path.exists():
        supervised_corpus(args.data, seed=0)
    manifest = parse_manifest(manifest_path)
    for variant in args.variants:
        cfg = toy_experiment(manifest_path, variant, args.seed, max_steps=args.steps)
        out = Path(args.out) / variant
        out.mkdir(parents=True, exist_ok=True)
        result, ckpt = run_training(replace(cfg, output_dir=str(out)), out)
        model = model_from_checkpoint(result.checkpoint)
        report = evaluate_model(model, manifest, "test", DecodeConfig(beam=args.beam))
        emit_report(report, out / "test_report.tsv")
        print(f"{variant}\tbest_step={result.best_step}\tmean_bleu={report.mean('bleu'):.4f}")


if __name__ == "__main__":
    main()
