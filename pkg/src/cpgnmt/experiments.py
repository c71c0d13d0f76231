"""Desk-scale toy experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .data import ToyLanguage, generate_toy_corpus, parse_manifest, toy_language, variant_of
from .inference import DecodeConfig
from .model import ModelConfig, TranslationModel
from .training import TrainingSchedule, TrainResult, VocabConfig, build_training_data, build_vocabularies, evaluate_dev, train

log = logging.getLogger(__name__)

NUM_CONCEPTS = 26


def toy_model_config(variant: str = "cpg", **overrides) -> ModelConfig:
    base = dict(word_size=32, hidden_size=32, attention_size=32, variant=variant, embedding_size=8)
    if variant == "cpg-grouped":
        base["group_rank"] = 4
    base.update(overrides)
    return ModelConfig(**base)


def toy_schedule(**overrides) -> TrainingSchedule:
    base = dict(
        batch_size=128,
        max_steps=3000,
        validation_interval=250,
        patience=10,
        learning_rate=0.003,
        autoencode=True,
        parallel_fraction=1.0,
        seed=0,
    )
    base.update(overrides)
    return TrainingSchedule(**base)


def toy_experiment(manifest: str | Path, variant: str = "cpg", seed: int = 0, **schedule) -> ExperimentConfig:
    return ExperimentConfig(
        model=toy_model_config(variant),
        training=toy_schedule(seed=seed, **schedule),
        decode=DecodeConfig(beam=1),
        vocabulary=VocabConfig(mode="word", min_count=5, cap=20000),
        manifest=str(manifest),
        output_dir="runs/toy",
        seed=seed,
    )


# -- corpora -----------------------------------------------------------------------------------------


def mapping_languages(codes: Sequence[str] = ("A", "B", "C")) -> list[ToyLanguage]:
    """Same word order, disjoint surface vocabularies."""
    return [toy_language(c, NUM_CONCEPTS) for c in codes]


def supervised_corpus(out_dir: str | Path, seed: int = 0) -> Path:
    langs = mapping_languages()
    pairs = [("A", "B"), ("A", "C"), ("B", "C")]
    return generate_toy_corpus(out_dir, langs, pairs, {"train": 500, "dev": 50, "test": 50}, seed=seed)


def low_resource_corpus(out_dir: str | Path, seed: int = 0) -> Path:
    """Like the supervised corpus but with 2000 training sentences per pair.

    At a parallel fraction of 0.1 this leaves 200 parallel sentences per
    corpus and 4000 sentences per language for auto-encoding.
    """
    langs = mapping_languages()
    pairs = [("A", "B"), ("A", "C"), ("B", "C")]
    return generate_toy_corpus(out_dir, langs, pairs, {"train": 2000, "dev": 50, "test": 50}, seed=seed)


def zero_shot_corpus(out_dir: str | Path, seed: int = 0) -> Path:
    """A-B and A-C parallel data; B-C only as dev/test for zero-shot evaluation."""
    langs = mapping_languages()
    return generate_toy_corpus(
        out_dir, langs, [("A", "B"), ("A", "C")], {"train": 500, "dev": 50, "test": 50}, seed=seed, eval_pairs=[("B", "C")]
    )


def relatedness_corpus(out_dir: str | Path, seed: int = 0) -> Path:
    """A and B differ in a few surface forms only; C reverses the word order."""
    a = toy_language("A", NUM_CONCEPTS)
    b = variant_of(a, "B", changed=3, seed=seed)
    c = toy_language("C", NUM_CONCEPTS, reverse=True)
    pairs = [("A", "B"), ("A", "C"), ("B", "C")]
    return generate_toy_corpus(out_dir, [a, b, c], pairs, {"train": 500, "dev": 50, "test": 50}, seed=seed)


CORPORA = {
    "toy_supervised": supervised_corpus,
    "toy_zero_shot": zero_shot_corpus,
    "toy_low_resource": low_resource_corpus,
    "toy_relatedness": relatedness_corpus,
}


# -- runs -----------------------------------------------------------------------------------------------


@dataclass
class ToyRun:
    model: TranslationModel
    result: TrainResult
    dev_scores: dict


def run_toy(cfg: ExperimentConfig) -> ToyRun:
    manifest = parse_manifest(cfg.manifest)
    vocabs, bpes = build_vocabularies(manifest, cfg.vocabulary)
    model = TranslationModel.create(cfg.model, vocabs, np.random.default_rng([cfg.seed, 0]))
    model.bpe = bpes
    data = build_training_data(manifest, model, cfg.training)
    result = train(model, data, cfg.training, {"experiment": cfg.to_dict()})
    scores = evaluate_dev(model, {p: v for p, v in data.dev.items() if p in data.parallel})
    return ToyRun(model, result, scores)


def untrained(cfg: ExperimentConfig) -> TranslationModel:
    return run_toy(replace(cfg, training=replace(cfg.training, max_steps=0))).model
