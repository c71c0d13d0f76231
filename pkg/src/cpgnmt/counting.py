"""Closed-form parameter counts checked against an optimizer-side audit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .config import CountConfig
from .generator import (
    VARIANTS,
    ParameterLayout,
    ParamGroup,
    TensorSpec,
    count_trainable_parameters,
    initialize_generator,
    pairwise_full_count,
    reference_uniform_std,
)
from .model import TranslationModel
from .optim import AmsGrad

COUNTED_VARIANTS = VARIANTS


@dataclass
class CountRow:
    variant: str
    closed_form: int
    audited: int

    @property
    def ok(self) -> bool:
        return self.closed_form == self.audited


def abstract_layouts(cfg: CountConfig) -> tuple[ParameterLayout, ParameterLayout]:
    def layout(groups: dict[str, int]) -> ParameterLayout:
        return ParameterLayout(
            [ParamGroup(name, (TensorSpec("w", (int(n),), reference_uniform_std(max(int(n), 1))),)) for name, n in groups.items()]
        )

    return layout(cfg.encoder_groups), layout(cfg.decoder_groups)


def _language_codes(n: int) -> list[str]:
    return [f"l{i}" for i in range(n)]


def audit_abstract(variant: str, cfg: CountConfig, seed: int = 0) -> int:
    """Instantiate the variant on the abstract layout and count what AMSGrad updates."""
    enc, dec = abstract_layouts(cfg)
    rng = np.random.default_rng(seed)
    codes = _language_codes(cfg.languages)
    rank = cfg.group_rank if cfg.group_rank is not None else max(1, cfg.embedding_size // 2)
    gen = initialize_generator(variant, enc, dec, codes, rng, cfg.embedding_size, rank, np.float64)
    tensors = dict(gen.named_tensors())
    for c in codes:
        tensors[f"words.{c}.emb"] = Tensor(np.zeros((cfg.vocab_size, cfg.word_size)), requires_grad=True)
        tensors[f"words.{c}.proj"] = Tensor(np.zeros((cfg.hidden_size, cfg.vocab_size)), requires_grad=True)
    return AmsGrad(tensors).visible_size()


def closed_form_abstract(variant: str, cfg: CountConfig) -> int:
    enc, dec = abstract_layouts(cfg)
    rank = cfg.group_rank if cfg.group_rank is not None else max(1, cfg.embedding_size // 2)
    block = cfg.vocab_size * cfg.word_size + cfg.hidden_size * cfg.vocab_size
    return count_trainable_parameters(variant, cfg.languages, enc, dec, block, cfg.embedding_size, rank)


def abstract_report(cfg: CountConfig) -> tuple[int, list[CountRow]]:
    """Pairwise count with per-pair word tables plus closed-form/audit rows for every variant."""
    enc, dec = abstract_layouts(cfg)
    full = pairwise_full_count(cfg.languages, enc.size + dec.size, cfg.word_size, cfg.vocab_size)
    rows = [CountRow(v, closed_form_abstract(v, cfg), audit_abstract(v, cfg)) for v in COUNTED_VARIANTS]
    return full, rows


def model_counts(model: TranslationModel) -> CountRow:
    cfg = model.config
    closed = count_trainable_parameters(
        cfg.variant,
        len(model.languages),
        model.enc_layout,
        model.dec_layout,
        model.language_sizes(),
        cfg.embedding_size,
        cfg.group_rank,
    )
    audited = AmsGrad(model.trainable_tensors()).visible_size()
    return CountRow(cfg.variant, closed, audited)

