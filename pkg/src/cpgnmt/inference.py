"""Decoding: greedy and beam search, direct and pivot translation."""

from __future__ import annotations

import copy
import logging
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .autodiff import Tensor
from .errors import ContractError
from .generator import GeneratedParams
from .model import DecoderMemory, DecoderState, TranslationModel, pad_batch
from .text import BOS, EOS, PAD, apply_bpe, decode_sentence, detokenize, encode_sentence, join_bpe, tokenize

log = logging.getLogger(__name__)


def length_penalty(length: int, alpha: float) -> float:
    return ((5.0 + length) / 6.0) ** alpha


def default_max_len(src_len: int) -> int:
    return 2 * src_len + 5


@dataclass
class Hypothesis:
    tokens: list[int]  # generated ids, EOS-terminated when finished
    logprob: float
    score: float
    finished: bool


def _wrap(arr: np.ndarray) -> Tensor:
    return Tensor._wrap(arr, False)


def _rows(state: DecoderState, idx: np.ndarray) -> DecoderState:
    return DecoderState([_wrap(h.data[idx]) for h in state.h], [_wrap(c.data[idx]) for c in state.c])


def _tile(memory: DecoderMemory, k: int) -> DecoderMemory:
    if memory.annotations.shape[0] == k:
        return memory
    idx = np.zeros(k, dtype=np.int64)
    return DecoderMemory(_wrap(memory.annotations.data[idx]), _wrap(memory.keys.data[idx]), memory.mask[idx])


def _step_logprobs(model, theta_dec, prev, state, memory, tgt_lang, force_eos: bool):
    logits, new_state = model.decode_step(theta_dec, prev, state, memory, tgt_lang)
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp[:, PAD] = -np.inf
    logp[:, BOS] = -np.inf
    if force_eos:
        eos = logp[:, EOS].copy()
        logp[:] = -np.inf
        logp[:, EOS] = eos
    return logp, new_state


def _float64(params: GeneratedParams) -> GeneratedParams:
    return GeneratedParams(_wrap(params.flat.data.astype(np.float64)), params.layout)


def _decoding_view(model: TranslationModel, src_lang: str, tgt_lang: str) -> TranslationModel:
    """Shallow float64 copy holding only the two word tables a direction reads."""
    view = copy.copy(model)
    view.config = replace(model.config, dtype="float64")
    view.word_tensors = OrderedDict(
        (name, _wrap(t.data.astype(np.float64)))
        for name, t in model.word_tensors.items()
        if name.split(".")[1] in (src_lang, tgt_lang)
    )
    return view


def _start(model: TranslationModel, src_lang: str, tgt_lang: str, sources: Sequence[Sequence[int]]):
    # Decoding runs in float64 so scores do not depend on how many rows share a matmul.
    theta_enc, theta_dec = map(_float64, model.parameters_for(src_lang, tgt_lang))
    model = _decoding_view(model, src_lang, tgt_lang)
    prepared = [model.prepare_source(s, tgt_lang, src_lang) for s in sources]
    enc = model.encode(theta_enc, pad_batch(prepared), src_lang)
    state, memory = model.init_decoder(theta_dec, enc)
    return model, theta_dec, state, memory


def greedy_decode(
    model: TranslationModel,
    src_lang: str,
    tgt_lang: str,
    sources: Sequence[Sequence[int]],
    max_len: int | None = None,
) -> list[list[int]]:
    """Batched argmax decoding; each output is EOS-terminated."""
    if not sources:
        return []
    model, theta_dec, state, memory = _start(model, src_lang, tgt_lang, sources)
    limits = [max_len or default_max_len(len(s)) for s in sources]
    bsz = len(sources)
    outputs: list[list[int]] = [[] for _ in range(bsz)]
    done = np.zeros(bsz, dtype=bool)
    prev = np.full(bsz, BOS, dtype=np.int64)
    for step in range(max(limits)):
        logp, state = _step_logprobs(model, theta_dec, prev, state, memory, tgt_lang, False)
        for i in range(bsz):
            if step == limits[i] - 1:
                logp[i, :] = -np.inf
                logp[i, EOS] = 0.0
        prev = logp.argmax(axis=1)
        for i in range(bsz):
            if not done[i]:
                outputs[i].append(int(prev[i]))
                done[i] = prev[i] == EOS
        if done.all():
            break
    return outputs


def beam_search(
    model: TranslationModel,
    src_lang: str,
    tgt_lang: str,
    src_ids: Sequence[int],
    beam: int = 10,
    alpha: float = 0.6,
    max_len: int | None = None,
) -> Hypothesis:
    """Shrinking-beam search with GNMT length normalization.

    Each step keeps the ``beam`` best expansions of the live hypotheses;
    expansions that emit EOS leave the beam and are scored by
    logprob / ((5 + len) / 6) ** alpha.  At ``max_len`` EOS is forced.  The
    best finished hypothesis wins; ties go to the shorter, then to the
    lexicographically smaller id sequence.
    """
    if beam < 1:
        raise ContractError("beam must be at least 1")
    max_len = max_len or default_max_len(len(src_ids))
    if max_len < 1:
        raise ContractError("max_len must be at least 1")
    model, theta_dec, state, memory = _start(model, src_lang, tgt_lang, [src_ids])
    alive: list[list[int]] = [[]]
    alive_lp = np.zeros(1)
    finished: list[Hypothesis] = []
    width = beam
    for step in range(max_len):
        k = len(alive)
        prev = np.array([h[-1] if h else BOS for h in alive], dtype=np.int64)
        logp, new_state = _step_logprobs(model, theta_dec, prev, state, _tile(memory, k), tgt_lang, step == max_len - 1)
        cand = alive_lp[:, None] + logp
        vsize = cand.shape[1]
        order = np.argsort(-cand.reshape(-1), kind="stable")[:width]
        keep_rows, next_alive, next_lp = [], [], []
        for flat in order:
            b, tok = divmod(int(flat), vsize)
            lp = float(cand[b, tok])
            if not np.isfinite(lp):
                continue
            seq = alive[b] + [tok]
            if tok == EOS:
                finished.append(Hypothesis(seq, lp, lp / length_penalty(len(seq), alpha), True))
            else:
                keep_rows.append(b)
                next_alive.append(seq)
                next_lp.append(lp)
        if not next_alive:
            break
        width = len(next_alive)
        alive, alive_lp = next_alive, np.array(next_lp)
        state = _rows(new_state, np.array(keep_rows, dtype=np.int64))
    if not finished:
        raise ContractError("beam search finished without a hypothesis")
    return min(finished, key=lambda h: (-h.score, len(h.tokens), h.tokens))


# -- text-level translation ------------------------------------------------------------------


@dataclass
class DecodeConfig:
    beam: int = 10
    alpha: float = 0.6

    def to_dict(self) -> dict:
        return {"beam": self.beam, "alpha": self.alpha}


class Translator:
    """Text-in, text-out wrapper around a model and decode settings."""

    def __init__(self, model: TranslationModel, decode: DecodeConfig | None = None):
        self.model = model
        self.decode = decode or DecodeConfig()

    def source_ids(self, lang: str, tokens: Sequence[str]) -> list[int]:
        bpe = self.model.bpe.get(lang)
        if bpe is not None:
            tokens = [u for w in tokens for u in apply_bpe(bpe, w)]
        return encode_sentence(self.model.vocabs[lang], tokens)

    def output_tokens(self, lang: str, ids: Sequence[int]) -> list[str]:
        tokens = decode_sentence(self.model.vocabs[lang], ids)
        bpe = self.model.bpe.get(lang)
        return join_bpe(tokens, bpe.marker) if bpe is not None else tokens

    def translate_tokens(self, src_lang: str, tgt_lang: str, tokens: Sequence[str]) -> list[str]:
        self.model.check_language(src_lang)
        self.model.check_language(tgt_lang)
        if not tokens:
            return []
        ids = self.source_ids(src_lang, tokens)
        if self.decode.beam == 1:
            out = greedy_decode(self.model, src_lang, tgt_lang, [ids])[0]
        else:
            out = beam_search(self.model, src_lang, tgt_lang, ids, self.decode.beam, self.decode.alpha).tokens
        return self.output_tokens(tgt_lang, out)

    def translate(self, src_lang: str, tgt_lang: str, text: str) -> str:
        return detokenize(self.translate_tokens(src_lang, tgt_lang, tokenize(text)))


def translate(model: TranslationModel, src_lang: str, tgt_lang: str, text: str, decode: DecodeConfig | None = None) -> str:
    return Translator(model, decode).translate(src_lang, tgt_lang, text)


class SupportsTranslate(Protocol):
    def translate(self, src_lang: str, tgt_lang: str, text: str) -> str: ...


@dataclass
class PivotResult:
    text: str
    intermediate: str
    legs: list[tuple[str, str]] = field(default_factory=list)


def pivot_translate(
    first: SupportsTranslate,
    second: SupportsTranslate,
    src: str,
    pivot: str,
    tgt: str,
    text: str,
) -> PivotResult:
    """Translate src -> pivot with ``first``, then pivot -> tgt with ``second``."""
    middle = first.translate(src, pivot, text)
    log.info("pivot %s->%s->%s intermediate: %s", src, pivot, tgt, middle)
    final = second.translate(pivot, tgt, middle)
    return PivotResult(final, middle, [(src, pivot), (pivot, tgt)])
