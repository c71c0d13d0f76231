"""Shared recurrent translation model driven by generated parameters.

The encoder is a single bidirectional LSTM layer, the decoder a stack of LSTM
layers with additive attention whose context vector is concatenated to the
first layer's input.  Word embeddings and output projections belong to each
language and are never generated.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, RegistryError
from .generator import (
    CPG_VARIANTS,
    VARIANTS,
    GeneratedParams,
    ParameterGenerator,
    ParameterLayout,
    ParamGroup,
    TensorSpec,
    check_language_code,
    initialize_generator,
    reference_uniform_std,
)
from .text import BOS, EOS, PAD, Vocabulary

_NEG_INF = -1e9


@dataclass
class ModelConfig:
    word_size: int = 512
    hidden_size: int = 512
    attention_size: int = 512
    decoder_layers: int = 2
    variant: str = "cpg"
    embedding_size: int = 8
    group_rank: int | None = None
    label_smoothing: float = 0.1
    max_length: int = 50
    output_bias: bool = True
    # constant added to the forget-gate pre-activation, as in common LSTM cells
    forget_bias: float = 1.0
    dtype: str = "float32"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("word_size", "hidden_size", "attention_size", "decoder_layers", "embedding_size", "max_length"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"model.{name} must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"model.variant must be one of {', '.join(VARIANTS)}; got {self.variant!r}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("model.label_smoothing must lie in [0, 1)")
        if self.variant == "cpg-grouped":
            if self.group_rank is None:
                raise ConfigError("model.group_rank is required for cpg-grouped")
            if not 1 <= self.group_rank <= self.embedding_size:
                raise ConfigError("model.group_rank must satisfy 1 <= group_rank <= embedding_size")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("model.dtype must be float32 or float64")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def to_dict(self) -> dict:
        return asdict(self)


# -- layouts ----------------------------------------------------------------------------


def _lstm_group(name: str, input_size: int, hidden: int) -> ParamGroup:
    std = reference_uniform_std(hidden)
    return ParamGroup(
        name,
        (
            TensorSpec("w_x", (input_size, 4 * hidden), std),
            TensorSpec("w_h", (hidden, 4 * hidden), std),
            TensorSpec("b", (4 * hidden,), std),
        ),
    )


def encoder_layout(cfg: ModelConfig) -> ParameterLayout:
    return ParameterLayout(
        [_lstm_group("fwd", cfg.word_size, cfg.hidden_size), _lstm_group("bwd", cfg.word_size, cfg.hidden_size)]
    )


def decoder_layout(cfg: ModelConfig) -> ParameterLayout:
    # attention lives with the decoder: it consumes decoder state
    h, a, n = cfg.hidden_size, cfg.attention_size, cfg.decoder_layers
    init_std = reference_uniform_std(2 * h)
    groups = [
        ParamGroup("init", (TensorSpec("w", (2 * h, 2 * n * h), init_std), TensorSpec("b", (2 * n * h,), init_std))),
        ParamGroup(
            "attention",
            (
                TensorSpec("w_query", (h, a), reference_uniform_std(h)),
                TensorSpec("w_key", (2 * h, a), reference_uniform_std(2 * h)),
                TensorSpec("v", (a,), reference_uniform_std(a)),
            ),
        ),
    ]
    for i in range(n):
        groups.append(_lstm_group(f"layer{i}", cfg.word_size + 2 * h if i == 0 else h, h))
    return ParameterLayout(groups)


def language_block_size(vocab_size: int, word_size: int, hidden_size: int, output_bias: bool = True) -> int:
    """Word-embedding plus output-projection scalars for one language."""
    return vocab_size * word_size + hidden_size * vocab_size + (vocab_size if output_bias else 0)


# -- building blocks ------------------------------------------------------------------------


def _const(x: np.ndarray, dtype) -> Tensor:
    return Tensor._wrap(np.asarray(x, dtype=dtype), False)


def lstm_cell(
    x,
    h: Tensor,
    c: Tensor,
    w_x: Tensor | None,
    w_h: Tensor,
    b: Tensor,
    x_proj: Tensor | None = None,
    forget_bias: float = 0.0,
):
    """One LSTM step with gate order (input, forget, candidate, output).

    ``x_proj`` may carry a precomputed ``x @ w_x`` for the step.
    """
    hidden = h.shape[-1]
    z = x_proj if x_proj is not None else ad.matmul(x, w_x)
    z = ad.add_bias(z + ad.matmul(h, w_h), b)
    i = ad.sigmoid(z[:, :hidden])
    zf = z[:, hidden : 2 * hidden]
    f = ad.sigmoid(zf + forget_bias if forget_bias else zf)
    g = ad.tanh(z[:, 2 * hidden : 3 * hidden])
    o = ad.sigmoid(z[:, 3 * hidden :])
    c_new = f * c + i * g
    h_new = o * ad.tanh(c_new)
    return h_new, c_new


def attend(query: Tensor, annotations: Tensor, keys: Tensor, w_query: Tensor, v: Tensor, mask: np.ndarray | None = None):
    """Additive attention: score_i = v . tanh(W_q s + U h_i).

    ``keys`` holds the precomputed ``U h_i`` rows with shape (B, T, A).
    Returns the (B, 2H) context and the (B, T) weights.
    """
    bsz, steps, att = keys.shape
    q = ad.matmul(query, w_query).reshape(bsz, 1, att)
    e = ad.tanh(keys + ad.broadcast_to(q, (bsz, steps, att)))
    scores = ad.matmul(e.reshape(bsz * steps, att), v.reshape(att, 1)).reshape(bsz, steps)
    if mask is not None:
        scores = scores + _const(np.where(mask > 0, 0.0, _NEG_INF), scores.dtype)
    weights = ad.softmax(scores, axis=-1)
    context = ad.matmul(weights.reshape(bsz, 1, steps), annotations).reshape(bsz, annotations.shape[-1])
    return context, weights


def smoothed_targets(targets: np.ndarray, vocab_size: int, eps: float, dtype=np.float64) -> np.ndarray:
    q = np.full((len(targets), vocab_size), eps / vocab_size, dtype=dtype)
    q[np.arange(len(targets)), targets] += 1.0 - eps
    return q


def sequence_loss(logits: Tensor, targets: Sequence[int], eps: float, mask: Sequence[float] | None = None) -> Tensor:
    """Mean label-smoothed cross-entropy over unmasked positions.

    The smoothed target puts ``eps / V`` on every class and the remaining
    ``1 - eps`` on the true one.
    """
    targets = np.asarray(targets, dtype=np.int64)
    n, vsize = logits.shape
    if len(targets) != n:
        raise ContractError(f"{n} logit rows but {len(targets)} targets")
    mask = np.ones(n) if mask is None else np.asarray(mask, dtype=np.float64)
    count = float(mask.sum())
    if count <= 0:
        raise ContractError("every position is masked")
    q = smoothed_targets(targets, vsize, eps, logits.dtype) * mask[:, None].astype(logits.dtype)
    logp = ad.log_softmax(logits, axis=-1)
    return ad.sum(logp * _const(q, logits.dtype)) * (-1.0 / count)


@dataclass
class EncoderOutput:
    annotations: Tensor  # (B, T, 2H)
    mask: np.ndarray  # (B, T), 1 for real tokens
    final_fwd: Tensor
    final_bwd: Tensor


@dataclass
class DecoderState:
    h: list[Tensor]
    c: list[Tensor]
    context: Tensor | None = None


@dataclass
class DecoderMemory:
    """Per-sentence decoder-side tensors computed once from the encoder output."""

    annotations: Tensor
    keys: Tensor
    mask: np.ndarray


@dataclass
class Batch:
    src_lang: str
    tgt_lang: str
    src: np.ndarray  # (B, Ts) padded ids, EOS-terminated
    tgt: np.ndarray  # (B, Tt) padded ids, EOS-terminated

    @property
    def size(self) -> int:
        return self.src.shape[0]


def pad_batch(seqs: Sequence[Sequence[int]]) -> np.ndarray:
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def language_token(code: str) -> str:
    return f"<2{code}>"


class TranslationModel:
    """Generator plus per-language word tables and the shared architecture."""

    def __init__(self, config: ModelConfig, vocabs: dict[str, Vocabulary], generator: ParameterGenerator):
        self.config = config
        self.vocabs = OrderedDict(vocabs)
        self.generator = generator
        self.enc_layout = generator.enc_layout
        self.dec_layout = generator.dec_layout
        self.word_tensors: OrderedDict[str, Tensor] = OrderedDict()
        self.frozen: set[str] = set()
        self.bpe: dict = {}

    # construction --------------------------------------------------------------------

    @classmethod
    def create(cls, config: ModelConfig, vocabs: dict[str, Vocabulary], rng: np.random.Generator) -> "TranslationModel":
        languages = [check_language_code(c) for c in vocabs]
        if config.variant == "universal":
            tags = [language_token(c) for c in languages]
            vocabs = {c: v.extended(tags) for c, v in vocabs.items()}
        gen = initialize_generator(
            config.variant,
            encoder_layout(config),
            decoder_layout(config),
            languages,
            rng,
            config.embedding_size,
            config.group_rank,
            config.np_dtype,
        )
        model = cls(config, vocabs, gen)
        for code in languages:
            model._init_word_tensors(code, rng)
        return model

    def _init_word_tensors(self, code: str, rng: np.random.Generator) -> list[str]:
        cfg, dt = self.config, self.config.np_dtype
        v = len(self.vocabs[code])
        w, h = cfg.word_size, cfg.hidden_size
        made = [
            (f"words.{code}.emb", rng.standard_normal((v, w)) / np.sqrt(w)),
            (f"words.{code}.proj", rng.uniform(-1.0, 1.0, (h, v)) / np.sqrt(h)),
        ]
        if cfg.output_bias:
            made.append((f"words.{code}.bias", np.zeros(v)))
        for name, data in made:
            self.word_tensors[name] = Tensor(data.astype(dt), requires_grad=True, name=name)
        return [n for n, _ in made]

    def add_language(self, code: str, vocab: Vocabulary, rng: np.random.Generator) -> list[str]:
        """Register a new language; returns the names of its new tensors."""
        if code in self.vocabs:
            raise ContractError(f"language {code!r} already registered")
        if self.config.variant not in CPG_VARIANTS:
            raise ContractError("only contextual variants can add languages without retraining")
        new = self.generator.add_language(code, rng)
        self.vocabs[code] = vocab
        new += self._init_word_tensors(code, rng)
        return new

    # parameter bookkeeping ------------------------------------------------------------------

    @property
    def languages(self) -> list[str]:
        return list(self.vocabs)

    def named_tensors(self) -> OrderedDict[str, Tensor]:
        out = self.generator.named_tensors()
        out.update(self.word_tensors)
        return out

    def trainable_tensors(self) -> OrderedDict[str, Tensor]:
        return OrderedDict((n, t) for n, t in self.named_tensors().items() if n not in self.frozen)

    def language_sizes(self) -> list[int]:
        cfg = self.config
        return [language_block_size(len(self.vocabs[c]), cfg.word_size, cfg.hidden_size, cfg.output_bias) for c in self.languages]

    def _word(self, code: str, part: str) -> Tensor:
        try:
            return self.word_tensors[f"words.{code}.{part}"]
        except KeyError:
            raise RegistryError(f"unknown language {code!r}") from None

    def check_language(self, code: str) -> None:
        if code not in self.vocabs:
            raise RegistryError(f"unknown language {code!r}")

    # forward pieces ---------------------------------------------------------------------------

    def prepare_source(self, src_ids: Sequence[int], tgt_lang: str, src_lang: str) -> list[int]:
        """Universal models see the target language as a leading source token."""
        if self.config.variant == "universal":
            return [self.vocabs[src_lang].index(language_token(tgt_lang))] + list(src_ids)
        return list(src_ids)

    def encode(self, theta: GeneratedParams, src: np.ndarray, src_lang: str) -> EncoderOutput:
        src = np.asarray(src, dtype=np.int64)
        if src.ndim == 1:
            src = src[None, :]
        if src.shape[1] == 0:
            raise ContractError("cannot encode an empty sentence")
        bsz, steps = src.shape
        hidden = self.config.hidden_size
        dt = self.config.np_dtype
        fb = self.config.forget_bias
        mask = (src != PAD).astype(dt)
        mask[:, 0] = 1.0
        emb = ad.take(self._word(src_lang, "emb"), src)  # (B, T, W)
        flat = emb.reshape(bsz * steps, emb.shape[-1])
        outputs = {}
        finals = {}
        for side, order in (("fwd", range(steps)), ("bwd", range(steps - 1, -1, -1))):
            proj = ad.matmul(flat, theta[f"{side}.w_x"]).reshape(bsz, steps, 4 * hidden)
            w_h, b = theta[f"{side}.w_h"], theta[f"{side}.b"]
            h = _const(np.zeros((bsz, hidden)), dt)
            c = h
            per_step = [None] * steps
            for t in order:
                h_new, c_new = lstm_cell(None, h, c, None, w_h, b, x_proj=proj[:, t, :], forget_bias=fb)
                m = mask[:, t : t + 1]
                if m.min() < 1.0:
                    keep = _const(np.broadcast_to(m, (bsz, hidden)), dt)
                    drop = _const(np.broadcast_to(1.0 - m, (bsz, hidden)), dt)
                    h_new = h_new * keep + h * drop
                    c_new = c_new * keep + c * drop
                h, c = h_new, c_new
                per_step[t] = h
            outputs[side] = ad.stack(per_step, axis=1)
            finals[side] = h
        annotations = ad.concat([outputs["fwd"], outputs["bwd"]], axis=2)
        return EncoderOutput(annotations, mask, finals["fwd"], finals["bwd"])

    def init_decoder(self, theta: GeneratedParams, enc: EncoderOutput) -> tuple[DecoderState, DecoderMemory]:
        hidden, layers = self.config.hidden_size, self.config.decoder_layers
        summary = ad.concat([enc.final_fwd, enc.final_bwd], axis=1)
        s0 = ad.tanh(ad.add_bias(ad.matmul(summary, theta["init.w"]), theta["init.b"]))
        hs = [s0[:, 2 * i * hidden : (2 * i + 1) * hidden] for i in range(layers)]
        cs = [s0[:, (2 * i + 1) * hidden : (2 * i + 2) * hidden] for i in range(layers)]
        bsz, steps, width = enc.annotations.shape
        keys = ad.matmul(enc.annotations.reshape(bsz * steps, width), theta["attention.w_key"])
        keys = keys.reshape(bsz, steps, keys.shape[-1])
        return DecoderState(hs, cs), DecoderMemory(enc.annotations, keys, enc.mask)

    def decode_step(
        self,
        theta: GeneratedParams,
        prev_ids: np.ndarray,
        state: DecoderState,
        memory: DecoderMemory,
        tgt_lang: str,
    ) -> tuple[Tensor, DecoderState]:
        """Advance the decoder one token; returns logits over the target vocabulary."""
        if len(state.h) != self.config.decoder_layers:
            raise ContractError("decoder state layer count does not match the config")
        emb = ad.take(self._word(tgt_lang, "emb"), np.asarray(prev_ids, dtype=np.int64))
        context, _ = attend(
            state.h[-1], memory.annotations, memory.keys, theta["attention.w_query"], theta["attention.v"], memory.mask
        )
        x = ad.concat([emb, context], axis=1)
        hs, cs = [], []
        for i in range(self.config.decoder_layers):
            h, c = lstm_cell(
                x,
                state.h[i],
                state.c[i],
                theta[f"layer{i}.w_x"],
                theta[f"layer{i}.w_h"],
                theta[f"layer{i}.b"],
                forget_bias=self.config.forget_bias,
            )
            hs.append(h)
            cs.append(c)
            x = h
        logits = ad.matmul(x, self._word(tgt_lang, "proj"))
        if self.config.output_bias:
            logits = ad.add_bias(logits, self._word(tgt_lang, "bias"))
        return logits, DecoderState(hs, cs, context)

    def parameters_for(self, src_lang: str, tgt_lang: str) -> tuple[GeneratedParams, GeneratedParams]:
        self.check_language(src_lang)
        self.check_language(tgt_lang)
        gen = self.generator
        return gen.encoder_params(src_lang, tgt_lang), gen.decoder_params(tgt_lang, src_lang)

    def batch_loss(self, batch: Batch, smoothing: float | None = None) -> Tensor:
        """Teacher-forced smoothed cross-entropy for one batch."""
        eps = self.config.label_smoothing if smoothing is None else smoothing
        theta_enc, theta_dec = self.parameters_for(batch.src_lang, batch.tgt_lang)
        enc = self.encode(theta_enc, batch.src, batch.src_lang)
        state, memory = self.init_decoder(theta_dec, enc)
        bsz, steps = batch.tgt.shape
        prev = np.full(bsz, BOS, dtype=np.int64)
        logits = []
        for t in range(steps):
            step_logits, state = self.decode_step(theta_dec, prev, state, memory, batch.tgt_lang)
            logits.append(step_logits)
            prev = batch.tgt[:, t]
        stacked = ad.concat(logits, axis=0)  # time-major rows
        targets = batch.tgt.T.reshape(-1)
        mask = (targets != PAD).astype(np.float64)
        return sequence_loss(stacked, targets, eps, mask)


def make_batch(model: TranslationModel, src_lang: str, tgt_lang: str, pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> Batch:
    srcs = [model.prepare_source(s, tgt_lang, src_lang) for s, _ in pairs]
    tgts = [list(t) for _, t in pairs]
    for s in srcs + tgts:
        if not s or s[-1] != EOS:
            raise ContractError("batch sequences must be EOS-terminated")
    return Batch(src_lang, tgt_lang, pad_batch(srcs), pad_batch(tgts))
