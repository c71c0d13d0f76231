"""Zero-shot B<->C translation after training on A<->B and A<->C only.

Compares direct zero-shot decoding, pivoting through A, and an untrained model.
"""

import argparse
from pathlib import Path

from cpgnmt.bleu import corpus_bleu
from cpgnmt.data import load_tokenized, parse_manifest
from cpgnmt.experiments import run_toy, toy_experiment, untrained, zero_shot_corpus
from cpgnmt.inference import DecodeConfig, Translator, pivot_translate
from cpgnmt.reports import EvalReport, PairScore, emit_report
from cpgnmt.text import detokenize, tokenize


def score(translate, manifest, src, tgt):
    for r in manifest.parallel:
        if r.split == "test" and {r.src, r.tgt} == {src, tgt}:
            sf, tf = (r.src_file, r.tgt_file) if r.src == src else (r.tgt_file, r.src_file)
            srcs, refs = load_tokenized(sf), load_tokenized(tf)
            hyps = [tokenize(translate(detokenize(s))) for s in srcs]
            return corpus_bleu(hyps, refs)
    raise SystemExit(f"no test data for {src}-{tgt}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--beam", type=int, default=10)
    ap.add_argument("--data", default="data/toy_zero_shot")
    ap.add_argument("--out", default="runs/toy_zero_shot")
    args = ap.parse_args()

    path = Path(args.data) / "manifest.yaml"
    if not path.exists():
        zero_shot_corpus(args.data, seed=0)
    manifest = parse_manifest(path)
    cfg = toy_experiment(path, "cpg", args.seed, max_steps=args.steps)
    decode = DecodeConfig(beam=args.beam)
    trained = Translator(run_toy(cfg).model, decode)
    blank = Translator(untrained(cfg), decode)
    scores = []
    for s, t in (("B", "C"), ("C", "B")):
        scores.append(PairScore(s, t, "bleu_zero_shot", score(lambda x: trained.translate(s, t, x), manifest, s, t)))
        pivot = score(lambda x: pivot_translate(trained, trained, s, "A", t, x).text, manifest, s, t)
        scores.append(PairScore(s, t, "bleu_pivot_A", pivot))
        scores.append(PairScore(s, t, "bleu_untrained", score(lambda x: blank.translate(s, t, x), manifest, s, t)))
    out = Path(args.out)
    print(emit_report(EvalReport(scores, {"beam": args.beam, "seed": args.seed}), out / "zero_shot.tsv"), end="")


if __name__ == "__main__":
    main()
