"""Command-line front end: ``cpgnmt <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration, 2 data or paths,
3 runtime.  Failures print one tab-separated line ``error<TAB>kind<TAB>message``
to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .bleu import corpus_bleu, token_accuracy
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, apply_overrides, dump_config, load_config
from .counting import abstract_report, model_counts
from .data import load_tokenized, parse_manifest
from .errors import ConfigError, CpgError, RegistryError
from .generator import cosine_distance_matrix
from .inference import DecodeConfig, Translator, pivot_translate
from .model import TranslationModel
from .reports import EvalReport, PairScore, emit_distance_matrix, emit_report
from .training import (
    adapt_new_language,
    build_training_data,
    build_vocabularies,
    model_from_checkpoint,
    model_to_checkpoint,
    train,
    write_metrics,
)

log = logging.getLogger("cpgnmt")

EXIT_USAGE = 1


class UsageError(CpgError):
    kind = "usage"
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_model(path) -> TranslationModel:
    return model_from_checkpoint(load_checkpoint(path))


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    return apply_overrides(
        cfg,
        seed=getattr(args, "seed", None),
        variant=getattr(args, "variant", None),
        parallel_fraction=getattr(args, "parallel_fraction", None),
        autoencode=False if getattr(args, "no_autoencode", False) else None,
        manifest=getattr(args, "manifest", None),
    )


def _manifest(cfg: ExperimentConfig):
    if cfg.manifest is None:
        raise ConfigError("no manifest given (use --manifest or the config's manifest field)")
    return parse_manifest(cfg.manifest)


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    out = Path(getattr(args, "output_dir", None) or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands --------------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    cfg = _experiment(args)
    manifest = _manifest(cfg)
    vocabs, bpes = build_vocabularies(manifest, cfg.vocabulary)
    out = _out_dir(cfg, args)
    for code, vocab in vocabs.items():
        vocab.save(out / f"vocab.{code}.txt")
        if code in bpes:
            bpes[code].save(out / f"bpe.{code}.txt")
        print(f"{code}\t{len(vocab)}")
    return 0


def build_model(cfg: ExperimentConfig, manifest) -> TranslationModel:
    vocabs, bpes = build_vocabularies(manifest, cfg.vocabulary)
    model = TranslationModel.create(cfg.model, vocabs, np.random.default_rng([cfg.seed, 0]))
    model.bpe = bpes
    return model


def run_training(cfg: ExperimentConfig, out_dir: Path, checkpoint: Path | None = None):
    """Train per ``cfg``; writes the checkpoint, metrics log and echoed config."""
    manifest = _manifest(cfg)
    model = build_model(cfg, manifest)
    data = build_training_data(manifest, model, cfg.training)
    result = train(model, data, cfg.training, {"experiment": cfg.to_dict()})
    ckpt_path = checkpoint or out_dir / "model.cpgc"
    save_checkpoint(result.checkpoint, ckpt_path)
    write_metrics(result.metrics, out_dir / "metrics.tsv")
    (out_dir / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    return result, ckpt_path


def cmd_train(args) -> int:
    cfg = _experiment(args)
    out = _out_dir(cfg, args)
    result, path = run_training(cfg, out, Path(args.checkpoint) if args.checkpoint else None)
    best = "n/a" if result.best_bleu is None else f"{result.best_bleu:.6f}"
    print(f"checkpoint\t{path}\nsteps\t{result.steps}\nbest_step\t{result.best_step}\nbest_val_bleu\t{best}")
    return 0


def _decode_config(args, cfg: ExperimentConfig | None = None) -> DecodeConfig:
    base = cfg.decode if cfg is not None else DecodeConfig()
    return DecodeConfig(beam=args.beam if args.beam is not None else base.beam, alpha=args.alpha if args.alpha is not None else base.alpha)


def cmd_translate(args) -> int:
    model = _load_model(args.checkpoint)
    decode = _decode_config(args)
    first = Translator(model, decode)
    second = None
    if args.pivot:
        second = Translator(_load_model(args.pivot_checkpoint), decode) if args.pivot_checkpoint else first
        model.check_language(args.src)
        second.model.check_language(args.tgt)
    else:
        model.check_language(args.src)
        model.check_language(args.tgt)
    src = open(args.input, encoding="utf-8") if args.input else sys.stdin
    dst = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for line in src:
            text = line.rstrip("\n")
            if second is not None:
                out = pivot_translate(first, second, args.src, args.pivot, args.tgt, text).text
            else:
                out = first.translate(args.src, args.tgt, text)
            dst.write(out + "\n")
    finally:
        if args.input:
            src.close()
        if args.output:
            dst.close()
    return 0


def evaluate_model(model: TranslationModel, manifest, split: str, decode: DecodeConfig, pairs=None) -> EvalReport:
    translator = Translator(model, decode)
    wanted = set(pairs) if pairs else None
    scores = []
    seen = set()
    for r in manifest.parallel:
        if r.split != split:
            continue
        directions = [(r.src, r.tgt, r.src_file, r.tgt_file)]
        if manifest.bidirectional:
            directions.append((r.tgt, r.src, r.tgt_file, r.src_file))
        for s, t, sf, tf in directions:
            if (s, t) in seen or (wanted is not None and (s, t) not in wanted):
                continue
            if s not in model.vocabs or t not in model.vocabs:
                continue
            seen.add((s, t))
            srcs, refs = load_tokenized(sf), load_tokenized(tf)
            hyps = [translator.translate_tokens(s, t, x) for x in srcs]
            scores.append(PairScore(s, t, "bleu", corpus_bleu(hyps, refs), len(srcs)))
            scores.append(PairScore(s, t, "accuracy", token_accuracy(hyps, refs), len(srcs)))
    return EvalReport(scores, {"split": split, "beam": decode.beam, "alpha": decode.alpha})


def cmd_evaluate(args) -> int:
    model = _load_model(args.checkpoint)
    manifest = parse_manifest(args.manifest)
    pairs = [tuple(p.split("-", 1)) for p in args.pairs] if args.pairs else None
    report = evaluate_model(model, manifest, args.split, _decode_config(args), pairs)
    sys.stdout.write(emit_report(report, args.output))
    return 0


def cmd_analyze(args) -> int:
    model = _load_model(args.checkpoint)
    gen = model.generator
    if not hasattr(gen, "embeddings"):
        raise ConfigError(f"variant {model.config.variant} has no language embeddings")
    codes = gen.embeddings.languages
    sys.stdout.write(emit_distance_matrix(codes, cosine_distance_matrix(gen.embeddings), args.output))
    return 0


def cmd_adapt(args) -> int:
    model = _load_model(args.checkpoint)
    cfg = _experiment(args)
    manifest = _manifest(cfg)
    vocabs, bpes = build_vocabularies(manifest, cfg.vocabulary)
    if args.lang not in vocabs:
        raise RegistryError(f"language {args.lang!r} is not in the manifest")
    result = adapt_new_language(model, args.lang, vocabs[args.lang], manifest, cfg.training, bpes.get(args.lang))
    ckpt = result.train.checkpoint if result.train else model_to_checkpoint(result.model, {"adapted_language": args.lang})
    save_checkpoint(ckpt, args.output)
    print(f"checkpoint\t{args.output}\nnew_tensors\t{','.join(result.new_tensors)}\ntrainable\t{result.trainable_count}")
    return 0


def cmd_count(args) -> int:
    cfg = _experiment(args)
    if cfg.count is not None:
        full, rows = abstract_report(cfg.count)
        print(f"pairwise={full}")
        cpg = next(r for r in rows if r.variant == "cpg")
        print(f"cpg={cpg.closed_form}")
        print(f"audited={cpg.audited}")
        for r in rows:
            print(f"variant={r.variant}\tclosed_form={r.closed_form}\taudited={r.audited}")
        return 0 if all(r.ok for r in rows) else 3
    manifest = _manifest(cfg)
    row = model_counts(build_model(cfg, manifest))
    print(f"variant={row.variant}\tclosed_form={row.closed_form}\taudited={row.audited}")
    return 0 if row.ok else 3


# -- parser ---------------------------------------------------------------------------------------


def _common(p, train_flags: bool = False):
    p.add_argument("--config", help="experiment config (YAML)")
    p.add_argument("--manifest", help="dataset manifest (YAML)")
    p.add_argument("--seed", type=int)
    if train_flags:
        p.add_argument("--variant", choices=("pairwise", "per-language", "universal", "cpg", "cpg-coupled", "cpg-grouped"))
        p.add_argument("--parallel-fraction", type=float, dest="parallel_fraction")
        p.add_argument("--no-autoencode", action="store_true", dest="no_autoencode")


def _decode_flags(p):
    p.add_argument("--beam", type=int)
    p.add_argument("--alpha", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpgnmt", description="Multilingual NMT with contextual parameter generation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="build vocabularies (and BPE models)")
    _common(p)
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model")
    _common(p, train_flags=True)
    p.add_argument("--checkpoint", help="where to write the best checkpoint")
    p.add_argument("--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate lines from stdin or a file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--pivot", help="translate through this language")
    p.add_argument("--pivot-checkpoint", dest="pivot_checkpoint", help="model for the second pivot leg")
    p.add_argument("--input")
    p.add_argument("--output")
    _decode_flags(p)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="BLEU report over a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "dev", "test"))
    p.add_argument("--pairs", nargs="*", help="restrict to pairs written as SRC-TGT")
    p.add_argument("--output")
    _decode_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze-embeddings", help="cosine distances between language embeddings")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("adapt", help="add a language to a trained model, keeping the rest frozen")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("count-params", help="closed-form vs audited parameter counts")
    _common(p, train_flags=True)
    p.set_defaults(func=cmd_count)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except CpgError as exc:
        message = " ".join(str(exc).split())
        print(f"error\t{exc.kind}\t{message}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error\tio\t{' '.join(str(exc).split())}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
