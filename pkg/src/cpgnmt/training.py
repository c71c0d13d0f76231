"""Multilingual training loop, checkpoint conversion and new-language adaptation."""

from __future__ import annotations

import copy
import logging
from collections import Counter, OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .bleu import corpus_bleu, token_accuracy
from .checkpoint import Checkpoint
from .data import DatasetManifest, load_tokenized
from .errors import CheckpointError, ConfigError, ContractError
from .generator import CPG_VARIANTS
from .inference import greedy_decode
from .model import Batch, ModelConfig, TranslationModel, make_batch
from .optim import AmsGrad, AmsGradConfig
from .text import (
    MAX_TRAIN_LENGTH,
    BpeModel,
    Vocabulary,
    apply_bpe,
    build_vocabulary,
    decode_sentence,
    encode_sentence,
    join_bpe,
    learn_bpe,
)

log = logging.getLogger(__name__)

Pair = tuple[str, str]


@dataclass
class TrainingSchedule:
    batch_size: int = 128
    max_steps: int = 100000
    validation_interval: int = 500
    patience: int = 5
    seed: int = 0
    autoencode: bool = True
    parallel_fraction: float = 1.0
    learning_rate: float = 0.001

    def __post_init__(self):
        if self.batch_size < 1 or self.max_steps < 0 or self.validation_interval < 1:
            raise ConfigError("training.batch_size and validation_interval must be positive, max_steps non-negative")
        if self.patience < 1:
            raise ConfigError("training.patience must be at least 1")
        if not 0.0 < self.parallel_fraction <= 1.0:
            raise ConfigError("training.parallel_fraction must lie in (0, 1]")


@dataclass
class VocabConfig:
    mode: str = "word"
    min_count: int = 5
    cap: int = 20000
    bpe_merges: int = 8000

    def __post_init__(self):
        if self.mode not in ("word", "bpe"):
            raise ConfigError("vocabulary.mode must be 'word' or 'bpe'")


# -- data assembly -------------------------------------------------------------------------


@dataclass
class TrainingData:
    """Id-encoded examples: supervised pairs, monolingual pools and dev sets."""

    parallel: dict[Pair, list[tuple[list[int], list[int]]]] = field(default_factory=dict)
    mono: dict[str, list[list[int]]] = field(default_factory=dict)
    dev: dict[Pair, tuple[list[list[int]], list[list[str]]]] = field(default_factory=dict)

    def pair_list(self, autoencode: bool, variant: str) -> list[Pair]:
        pairs = [p for p, ex in self.parallel.items() if ex]
        if autoencode:
            if variant == "pairwise":
                log.warning("pairwise models have no self-pairs; auto-encoding disabled")
            else:
                pairs += [(l, l) for l, pool in self.mono.items() if pool and (l, l) not in pairs]
        return pairs


def subset_indices(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Deterministic subset of floor(fraction * n) indices, in corpus order."""
    k = int(np.floor(fraction * n + 1e-9))
    return np.sort(rng.permutation(n)[:k])


def build_vocabularies(
    manifest: DatasetManifest, vocab: VocabConfig
) -> tuple[dict[str, Vocabulary], dict[str, BpeModel]]:
    """Per-language vocabularies (and BPE models) from the training split."""
    words: dict[str, Counter] = {c: Counter() for c in manifest.languages}
    for r in manifest.parallel:
        if r.split != "train":
            continue
        for lang, f in ((r.src, r.src_file), (r.tgt, r.tgt_file)):
            for toks in load_tokenized(f):
                words[lang].update(toks)
    for m in manifest.monolingual:
        for toks in load_tokenized(m.file):
            words[m.lang].update(toks)
    vocabs, bpes = {}, {}
    for lang in manifest.languages:
        counts = words[lang]
        if vocab.mode == "bpe":
            bpe = learn_bpe(counts, vocab.bpe_merges)
            units: Counter = Counter()
            for w, c in counts.items():
                for u in apply_bpe(bpe, w):
                    units[u] += c
            bpes[lang] = bpe
            counts = units
        vocabs[lang] = build_vocabulary(counts, lang, vocab.min_count, vocab.cap)
    return vocabs, bpes


def _ids(model: TranslationModel, lang: str, tokens: Sequence[str]) -> list[int]:
    bpe = model.bpe.get(lang)
    if bpe is not None:
        tokens = [u for w in tokens for u in apply_bpe(bpe, w)]
    return encode_sentence(model.vocabs[lang], tokens)


def build_training_data(
    manifest: DatasetManifest,
    model: TranslationModel,
    schedule: TrainingSchedule,
    languages: Sequence[str] | None = None,
) -> TrainingData:
    """Encode the manifest's corpora for ``model``.

    A ``parallel_fraction`` below one keeps a seeded subset of each training
    corpus as parallel data; every training sentence still joins its
    language's monolingual pool.  Sentences longer than the length limit (in
    word tokens) are dropped from training.
    """
    keep = set(languages or model.languages)
    rng = np.random.default_rng([schedule.seed, 1])
    data = TrainingData()
    limit = min(model.config.max_length, MAX_TRAIN_LENGTH)
    mono_seen: dict[str, list[list[int]]] = {c: [] for c in model.languages if c in keep}

    def add_mono(lang, toks):
        if lang in mono_seen and 0 < len(toks) <= limit:
            mono_seen[lang].append(_ids(model, lang, toks))

    for r in manifest.parallel:
        if r.split == "train":
            src, tgt = load_tokenized(r.src_file), load_tokenized(r.tgt_file)
            chosen = set(subset_indices(len(src), schedule.parallel_fraction, rng).tolist())
            directions = [(r.src, r.tgt, False)] + ([(r.tgt, r.src, True)] if manifest.bidirectional else [])
            for i, (a, b) in enumerate(zip(src, tgt)):
                add_mono(r.src, a)
                add_mono(r.tgt, b)
                if i not in chosen or not (0 < len(a) <= limit and 0 < len(b) <= limit):
                    continue
                for s, t, flip in directions:
                    if s in keep and t in keep and s in model.vocabs and t in model.vocabs:
                        x, y = (b, a) if flip else (a, b)
                        data.parallel.setdefault((s, t), []).append((_ids(model, s, x), _ids(model, t, y)))
        elif r.split == "dev":
            src, tgt = load_tokenized(r.src_file), load_tokenized(r.tgt_file)
            directions = [(r.src, r.tgt, src, tgt)] + ([(r.tgt, r.src, tgt, src)] if manifest.bidirectional else [])
            for s, t, xs, ys in directions:
                if s in keep and t in keep and s in model.vocabs and t in model.vocabs:
                    ids = [_ids(model, s, x) for x in xs]
                    data.dev[(s, t)] = (ids, ys)
    for m in manifest.monolingual:
        for toks in load_tokenized(m.file):
            add_mono(m.lang, toks)
    data.mono = {k: v for k, v in mono_seen.items() if v}
    return data


# -- sampling ---------------------------------------------------------------------------------


def sample_language_pair(pairs: Sequence[Pair], rng: np.random.Generator) -> Pair:
    if not pairs:
        raise ContractError("no language pairs to sample from")
    return pairs[int(rng.integers(len(pairs)))]


def make_autoencode_batch(model: TranslationModel, sentences: Sequence[Sequence[int]], lang: str) -> Batch:
    """Source and target are the same sentence in the same language."""
    model.check_language(lang)
    return make_batch(model, lang, lang, [(s, s) for s in sentences])


def bucket_batches(examples: Sequence, batch_size: int, rng: np.random.Generator, key) -> list[list[int]]:
    """Shuffle, sort by length within windows of 50 batches, then chunk."""
    order = rng.permutation(len(examples))
    window = 50 * batch_size
    batches = []
    for start in range(0, len(order), window):
        chunk = sorted(order[start : start + window].tolist(), key=lambda i: key(examples[i]))
        batches += [chunk[i : i + batch_size] for i in range(0, len(chunk), batch_size)]
    return batches


# -- checkpoint conversion ------------------------------------------------------------------


def model_to_checkpoint(model: TranslationModel, extra: dict | None = None, optimizer: AmsGrad | None = None) -> Checkpoint:
    meta = {
        "format": "cpgnmt",
        "model": model.config.to_dict(),
        "languages": model.languages,
        "vocabularies": {c: list(v.tokens) for c, v in model.vocabs.items()},
        "bpe": {c: {"marker": b.marker, "merges": [list(p) for p in b.merges]} for c, b in model.bpe.items()},
        "frozen": sorted(model.frozen),
        "has_optimizer": optimizer is not None,
    }
    if extra:
        meta.update(extra)
    tensors = OrderedDict((n, t.data.copy()) for n, t in model.named_tensors().items())
    if optimizer is not None:
        meta["optimizer_step"] = optimizer.step_count
        tensors.update((n, a.copy()) for n, a in optimizer.state_tensors().items())
    return Checkpoint(meta, tensors)


def model_from_checkpoint(ckpt: Checkpoint) -> TranslationModel:
    meta = ckpt.metadata
    try:
        config = ModelConfig(**meta["model"])
        vocabs = {c: Vocabulary(c, meta["vocabularies"][c]) for c in meta["languages"]}
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"checkpoint metadata is incomplete: {exc}") from None
    model = TranslationModel.create(config, vocabs, np.random.default_rng(0))
    model.bpe = {c: BpeModel([tuple(p) for p in b["merges"]], b["marker"]) for c, b in meta.get("bpe", {}).items()}
    for name, t in model.named_tensors().items():
        if name not in ckpt.tensors:
            raise CheckpointError(f"checkpoint is missing tensor {name!r}")
        arr = ckpt.tensors[name]
        if arr.shape != t.shape:
            raise CheckpointError(f"tensor {name!r} has shape {arr.shape}, model expects {t.shape}")
        t.data = np.array(arr, dtype=config.np_dtype)
    model.frozen = set(meta.get("frozen", []))
    return model


# -- training loop -----------------------------------------------------------------------------


@dataclass
class MetricRow:
    step: int
    pair: str
    loss: float | None
    val_bleu: float | None

    def tsv(self) -> str:
        loss = "" if self.loss is None else f"{self.loss:.6f}"
        bleu = "" if self.val_bleu is None else f"{self.val_bleu:.6f}"
        return f"{self.step}\t{self.pair}\t{loss}\t{bleu}"


METRICS_HEADER = "step\tpair\tloss\tval_bleu"


def write_metrics(rows: Sequence[MetricRow], path: str | Path) -> None:
    Path(path).write_text("\n".join([METRICS_HEADER] + [r.tsv() for r in rows]) + "\n", encoding="utf-8")


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    metrics: list[MetricRow]
    best_bleu: float | None
    best_step: int
    steps: int
    skipped_steps: int = 0


def evaluate_dev(model: TranslationModel, dev: dict[Pair, tuple[list[list[int]], list[list[str]]]], batch_size: int = 64) -> dict[Pair, dict[str, float]]:
    """Greedy-decode each dev set; returns BLEU and token accuracy per pair."""
    out = {}
    for (s, t), (srcs, refs) in dev.items():
        hyps = []
        for i in range(0, len(srcs), batch_size):
            for ids in greedy_decode(model, s, t, srcs[i : i + batch_size]):
                toks = decode_sentence(model.vocabs[t], ids)
                bpe = model.bpe.get(t)
                hyps.append(join_bpe(toks, bpe.marker) if bpe else toks)
        out[(s, t)] = {"bleu": corpus_bleu(hyps, refs), "accuracy": token_accuracy(hyps, refs)}
    return out


class Trainer:
    """Runs the sample-pair / sample-batch / AMSGrad loop with early stopping."""

    def __init__(self, model: TranslationModel, data: TrainingData, schedule: TrainingSchedule, extra_meta: dict | None = None):
        self.model = model
        self.data = data
        self.schedule = schedule
        self.extra_meta = extra_meta or {}
        self.rng = np.random.default_rng([schedule.seed, 2])
        self.pairs = data.pair_list(schedule.autoencode, model.config.variant)
        if not self.pairs:
            raise ContractError("no training data")
        self.examples: dict[Pair, list] = {}
        self.batches: dict[Pair, list[list[int]]] = {}
        for p in self.pairs:
            if p[0] == p[1] and p not in data.parallel:
                ex = [(s, s) for s in data.mono[p[0]]]
            else:
                ex = data.parallel[p]
            self.examples[p] = ex
            self.batches[p] = bucket_batches(ex, schedule.batch_size, self.rng, key=lambda e: len(e[0]))
        params = model.trainable_tensors()
        self.optimizer = AmsGrad(params, AmsGradConfig(learning_rate=schedule.learning_rate))
        train_dirs = set(self.data.parallel)
        self.dev = {p: v for p, v in data.dev.items() if p in train_dirs}

    def step(self) -> tuple[Pair, float]:
        pair = sample_language_pair(self.pairs, self.rng)
        batches = self.batches[pair]
        idx = batches[int(self.rng.integers(len(batches)))]
        ex = self.examples[pair]
        batch = make_batch(self.model, pair[0], pair[1], [ex[i] for i in idx])
        with ad.Tape() as tape:
            loss = self.model.batch_loss(batch)
        grads = ad.backward(loss, tape)
        self.optimizer.step(grads)
        return pair, float(loss.data)

    def validate(self) -> float | None:
        if not self.dev:
            return None
        scores = evaluate_dev(self.model, self.dev)
        return float(np.mean([v["bleu"] for v in scores.values()]))

    def run(self) -> TrainResult:
        sched = self.schedule
        metrics: list[MetricRow] = []
        best_bleu: float | None = None
        best_state = None
        best_step = 0
        stale = 0
        step = 0
        for step in range(1, sched.max_steps + 1):
            pair, loss = self.step()
            metrics.append(MetricRow(step, f"{pair[0]}-{pair[1]}", loss, None))
            if step % sched.validation_interval == 0 and self.dev:
                bleu = self.validate()
                metrics.append(MetricRow(step, "dev", None, bleu))
                log.info("step %d dev BLEU %.4f", step, bleu)
                if best_bleu is None or bleu > best_bleu:
                    best_bleu, best_step, stale = bleu, step, 0
                    best_state = self._snapshot()
                else:
                    stale += 1
                    if stale >= sched.patience:
                        break
        if self.dev and (best_bleu is None or step % sched.validation_interval != 0):
            bleu = self.validate()
            metrics.append(MetricRow(step, "dev", None, bleu))
            if best_bleu is None or bleu > best_bleu:
                best_bleu, best_step, best_state = bleu, step, self._snapshot()
        if best_state is not None:
            self._restore(best_state)
        else:
            best_step = step
        extra = dict(self.extra_meta, step=best_step, best_val_bleu=best_bleu)
        ckpt = model_to_checkpoint(self.model, extra)
        return TrainResult(ckpt, metrics, best_bleu, best_step, step, self.optimizer.skipped)

    def _snapshot(self):
        return {n: t.data.copy() for n, t in self.model.named_tensors().items()}

    def _restore(self, state) -> None:
        for n, t in self.model.named_tensors().items():
            t.data = state[n]


def train(model: TranslationModel, data: TrainingData, schedule: TrainingSchedule, extra_meta: dict | None = None) -> TrainResult:
    return Trainer(model, data, schedule, extra_meta).run()


# -- adaptation ---------------------------------------------------------------------------------


@dataclass
class AdaptResult:
    model: TranslationModel
    new_tensors: list[str]
    trainable_count: int
    train: TrainResult | None


def adapt_new_language(
    model: TranslationModel,
    code: str,
    vocab: Vocabulary,
    manifest: DatasetManifest,
    schedule: TrainingSchedule,
    bpe: BpeModel | None = None,
) -> AdaptResult:
    """Learn only the new language's embedding row, word table and projection.

    Everything that existed before the call is frozen; the returned model's
    ``frozen`` set lists those tensors.  ``schedule.max_steps == 0`` registers
    the language without training.
    """
    if model.config.variant not in CPG_VARIANTS:
        raise ContractError("adaptation requires a contextual parameter generator variant")
    if code in model.vocabs:
        raise ContractError(f"language {code!r} is already registered")
    existing = set(model.named_tensors())
    rng = np.random.default_rng([schedule.seed, 3])
    new = model.add_language(code, vocab, rng)
    if bpe is not None:
        model.bpe[code] = bpe
    model.frozen = existing
    trainable = model.trainable_tensors()
    count = ad.parameters_size(trainable.values())
    result = None
    if schedule.max_steps > 0:
        data = build_training_data(manifest, model, schedule)
        data.parallel = {p: v for p, v in data.parallel.items() if code in p}
        data.mono = {l: v for l, v in data.mono.items() if l == code}
        data.dev = {p: v for p, v in data.dev.items() if code in p}
        result = Trainer(model, data, schedule, {"adapted_language": code}).run()
    return AdaptResult(model, new, count, result)
