"""Parameter generators: from language identity to encoder/decoder weights.

All generators share one interface: ``encoder_params(src, tgt)`` and
``decoder_params(tgt, src)`` return :class:`GeneratedParams` whose flat vector
is laid out by a :class:`ParameterLayout`.  The contextual variants compute
that vector from learned language embeddings, so gradients reach both the
generator matrices and the embedding rows.
"""

from __future__ import annotations

import math
import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, RegistryError

VARIANTS = ("pairwise", "per-language", "universal", "cpg", "cpg-coupled", "cpg-grouped")
CPG_VARIANTS = ("cpg", "cpg-coupled", "cpg-grouped")
DECOUPLED_VARIANTS = ("per-language", "cpg", "cpg-grouped")

_LANG_CODE = re.compile(r"^[A-Za-z0-9_-]+$")


class DegenerateEmbeddingError(ContractError):
    kind = "degenerate-embedding"


@dataclass(frozen=True)
class TensorSpec:
    name: str
    shape: tuple[int, ...]
    # std of the fan-based initializer a directly-parameterized network would use
    ref_std: float

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


@dataclass(frozen=True)
class ParamGroup:
    name: str
    tensors: tuple[TensorSpec, ...]

    @property
    def size(self) -> int:
        return sum(t.size for t in self.tensors)


class ParameterLayout:
    """Ordered parameter groups of one network (encoder or decoder)."""

    def __init__(self, groups: Sequence[ParamGroup]):
        self.groups = tuple(groups)
        names = [f"{g.name}.{t.name}" for g in self.groups for t in g.tensors]
        if len(set(names)) != len(names) or len({g.name for g in self.groups}) != len(self.groups):
            raise ContractError("parameter layout names must be unique")
        self.offsets: dict[str, tuple[int, int, tuple[int, ...]]] = {}
        pos = 0
        for g in self.groups:
            for t in g.tensors:
                self.offsets[f"{g.name}.{t.name}"] = (pos, pos + t.size, t.shape)
                pos += t.size
        self.size = pos

    @property
    def group_sizes(self) -> list[int]:
        return [g.size for g in self.groups]

    def ref_std_vector(self) -> np.ndarray:
        """Per-coordinate reference std, in flat layout order."""
        return np.concatenate(
            [np.full(t.size, t.ref_std) for g in self.groups for t in g.tensors]
        ) if self.size else np.zeros(0)

    def __repr__(self) -> str:
        return f"ParameterLayout({[(g.name, g.size) for g in self.groups]})"

    def to_dict(self) -> list:
        return [
            {"name": g.name, "tensors": [[t.name, list(t.shape), t.ref_std] for t in g.tensors]}
            for g in self.groups
        ]

    @classmethod
    def from_dict(cls, data) -> "ParameterLayout":
        return cls(
            [
                ParamGroup(g["name"], tuple(TensorSpec(n, tuple(s), float(r)) for n, s, r in g["tensors"]))
                for g in data
            ]
        )


class GeneratedParams:
    """Flat generated vector with named, shaped views into it."""

    def __init__(self, flat: Tensor, layout: ParameterLayout):
        if flat.shape != (layout.size,):
            raise ContractError(f"generated vector has shape {flat.shape}, layout needs ({layout.size},)")
        self.flat = flat
        self.layout = layout
        self._views: dict[str, Tensor] = {}

    def __getitem__(self, name: str) -> Tensor:
        view = self._views.get(name)
        if view is None:
            start, stop, shape = self.layout.offsets[name]
            view = self.flat[start:stop].reshape(shape)
            self._views[name] = view
        return view

    def names(self) -> list[str]:
        return list(self.layout.offsets)


class LanguageEmbeddingTable:
    """One trainable M-dimensional row per registered language."""

    def __init__(self, size: int):
        self.size = size
        self.rows: OrderedDict[str, Tensor] = OrderedDict()

    @property
    def languages(self) -> list[str]:
        return list(self.rows)

    def add(self, code: str, row: Tensor) -> None:
        if code in self.rows:
            raise ContractError(f"language {code!r} already registered")
        if row.shape != (self.size,):
            raise ContractError(f"embedding row for {code!r} must have shape ({self.size},)")
        row.requires_grad = True
        row.name = f"lang_emb.{code}"
        self.rows[code] = row

    def row(self, code: str) -> Tensor:
        try:
            return self.rows[code]
        except KeyError:
            raise RegistryError(f"unknown language {code!r}") from None

    def matrix(self) -> np.ndarray:
        return np.stack([r.data for r in self.rows.values()]) if self.rows else np.zeros((0, self.size))


def check_language_code(code: str) -> str:
    if not _LANG_CODE.match(code):
        raise ContractError(f"invalid language code {code!r}")
    return code


# -- initialization helpers ---------------------------------------------------------


def _direct_init(layout: ParameterLayout, rng: np.random.Generator, dtype) -> np.ndarray:
    # uniform(-a, a) has std a / sqrt(3)
    bound = np.sqrt(3.0) * layout.ref_std_vector()
    return (rng.uniform(-1.0, 1.0, layout.size) * bound).astype(dtype)


def _generator_init(stds: np.ndarray, cols: int, rng: np.random.Generator, dtype, scale: float = 1.0) -> np.ndarray:
    return (rng.standard_normal((stds.size, cols)) * (stds * scale)[:, None]).astype(dtype)


# -- generators -----------------------------------------------------------------------


class ParameterGenerator:
    kind = ""
    decoupled = False

    def __init__(self, enc_layout: ParameterLayout, dec_layout: ParameterLayout, languages: Sequence[str]):
        self.enc_layout = enc_layout
        self.dec_layout = dec_layout
        self.languages = [check_language_code(c) for c in languages]
        if len(set(self.languages)) != len(self.languages):
            raise ContractError("duplicate language codes")
        self.tensors: OrderedDict[str, Tensor] = OrderedDict()
        self.embeddings: LanguageEmbeddingTable | None = None

    def _check(self, *codes: str | None) -> None:
        for c in codes:
            if c is not None and c not in self.languages:
                raise RegistryError(f"unknown language {c!r}")

    def _own(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = t
        return t

    def named_tensors(self) -> OrderedDict[str, Tensor]:
        out = OrderedDict(self.tensors)
        if self.embeddings is not None:
            for code, row in self.embeddings.rows.items():
                out[row.name] = row
        return out

    def encoder_params(self, src: str, tgt: str | None = None) -> GeneratedParams:
        raise NotImplementedError

    def decoder_params(self, tgt: str, src: str | None = None) -> GeneratedParams:
        raise NotImplementedError

    def closed_form_count(self) -> int:
        raise NotImplementedError

    def add_language(self, code: str, rng: np.random.Generator) -> list[str]:
        raise ContractError(f"variant {self.kind!r} cannot register languages after training")


class PairwiseGenerator(ParameterGenerator):
    """Independent encoder and decoder vectors for every ordered language pair."""

    kind = "pairwise"

    def __init__(self, enc_layout, dec_layout, languages, rng, dtype=np.float32):
        super().__init__(enc_layout, dec_layout, languages)
        for s in self.languages:
            for t in self.languages:
                if s != t:
                    self._own(f"pair.{s}.{t}.enc", _direct_init(enc_layout, rng, dtype))
                    self._own(f"pair.{s}.{t}.dec", _direct_init(dec_layout, rng, dtype))

    def _pair(self, s, t, side):
        if s is None or t is None:
            raise ContractError("pairwise generation needs both languages")
        self._check(s, t)
        if s == t:
            raise RegistryError(f"pairwise model has no parameters for {s}->{t}")
        return self.tensors[f"pair.{s}.{t}.{side}"]

    def encoder_params(self, src, tgt=None):
        return GeneratedParams(self._pair(src, tgt, "enc"), self.enc_layout)

    def decoder_params(self, tgt, src=None):
        return GeneratedParams(self._pair(src, tgt, "dec"), self.dec_layout)

    def closed_form_count(self):
        n = len(self.languages)
        return n * (n - 1) * (self.enc_layout.size + self.dec_layout.size)


class PerLanguageGenerator(ParameterGenerator):
    """One encoder vector per source language, one decoder vector per target."""

    kind = "per-language"
    decoupled = True

    def __init__(self, enc_layout, dec_layout, languages, rng, dtype=np.float32):
        super().__init__(enc_layout, dec_layout, languages)
        for c in self.languages:
            self._own(f"lang.{c}.enc", _direct_init(enc_layout, rng, dtype))
            self._own(f"lang.{c}.dec", _direct_init(dec_layout, rng, dtype))

    def encoder_params(self, src, tgt=None):
        self._check(src, tgt)
        return GeneratedParams(self.tensors[f"lang.{src}.enc"], self.enc_layout)

    def decoder_params(self, tgt, src=None):
        self._check(tgt, src)
        return GeneratedParams(self.tensors[f"lang.{tgt}.dec"], self.dec_layout)

    def closed_form_count(self):
        return len(self.languages) * (self.enc_layout.size + self.dec_layout.size)


class UniversalGenerator(ParameterGenerator):
    """A single shared parameter set; the target language travels as a source token."""

    kind = "universal"

    def __init__(self, enc_layout, dec_layout, languages, rng, dtype=np.float32):
        super().__init__(enc_layout, dec_layout, languages)
        self._own("shared.enc", _direct_init(enc_layout, rng, dtype))
        self._own("shared.dec", _direct_init(dec_layout, rng, dtype))

    def encoder_params(self, src, tgt=None):
        self._check(src, tgt)
        return GeneratedParams(self.tensors["shared.enc"], self.enc_layout)

    def decoder_params(self, tgt, src=None):
        self._check(tgt, src)
        return GeneratedParams(self.tensors["shared.dec"], self.dec_layout)

    def closed_form_count(self):
        return self.enc_layout.size + self.dec_layout.size


class _ContextualGenerator(ParameterGenerator):
    def __init__(self, enc_layout, dec_layout, languages, embedding_size, rng, dtype):
        super().__init__(enc_layout, dec_layout, languages)
        if embedding_size < 1:
            raise ContractError("language embedding size must be positive")
        self.embedding_size = embedding_size
        self.dtype = dtype
        self.embeddings = LanguageEmbeddingTable(embedding_size)

    def _init_rows(self, rng):
        for c in self.languages:
            self.embeddings.add(c, self._new_row(rng))

    def _new_row(self, rng) -> Tensor:
        m = self.embedding_size
        return Tensor((rng.standard_normal(m) / np.sqrt(m)).astype(self.dtype))

    def _embedding(self, code: str) -> Tensor:
        self._check(code)
        return self.embeddings.row(code)

    def add_language(self, code, rng):
        check_language_code(code)
        if code in self.languages:
            raise ContractError(f"language {code!r} already registered")
        self.languages.append(code)
        row = self._new_row(rng)
        self.embeddings.add(code, row)
        return [row.name]


class CpgGenerator(_ContextualGenerator):
    """theta_enc = W_enc l_src and theta_dec = W_dec l_tgt."""

    kind = "cpg"
    decoupled = True

    def __init__(self, enc_layout, dec_layout, languages, rng, embedding_size=8, dtype=np.float32):
        super().__init__(enc_layout, dec_layout, languages, embedding_size, rng, dtype)
        self._own("gen.enc", _generator_init(enc_layout.ref_std_vector(), embedding_size, rng, dtype))
        self._own("gen.dec", _generator_init(dec_layout.ref_std_vector(), embedding_size, rng, dtype))
        self._init_rows(rng)

    @staticmethod
    def _linear(w: Tensor, l: Tensor) -> Tensor:
        return ad.matmul(w, l.reshape(-1, 1)).reshape(-1)

    def encoder_params(self, src, tgt=None):
        self._check(tgt)
        return GeneratedParams(self._linear(self.tensors["gen.enc"], self._embedding(src)), self.enc_layout)

    def decoder_params(self, tgt, src=None):
        self._check(src)
        return GeneratedParams(self._linear(self.tensors["gen.dec"], self._embedding(tgt)), self.dec_layout)

    def closed_form_count(self):
        n = len(self.languages)
        return (self.enc_layout.size + self.dec_layout.size) * self.embedding_size + n * self.embedding_size


class CoupledCpgGenerator(CpgGenerator):
    """Both generators read the concatenated pair embedding [l_src; l_tgt]."""

    kind = "cpg-coupled"
    decoupled = False

    def __init__(self, enc_layout, dec_layout, languages, rng, embedding_size=8, dtype=np.float32):
        _ContextualGenerator.__init__(self, enc_layout, dec_layout, languages, embedding_size, rng, dtype)
        m2 = 2 * embedding_size
        # two embeddings feed each coordinate, so halve the variance per column
        scale = 1.0 / np.sqrt(2.0)
        self._own("gen.enc", _generator_init(enc_layout.ref_std_vector(), m2, rng, dtype, scale))
        self._own("gen.dec", _generator_init(dec_layout.ref_std_vector(), m2, rng, dtype, scale))
        self._init_rows(rng)

    def _pair_embedding(self, s, t):
        if s is None or t is None:
            raise ContractError("coupled generation needs both languages")
        return ad.concat([self._embedding(s), self._embedding(t)])

    def encoder_params(self, src, tgt=None):
        return GeneratedParams(self._linear(self.tensors["gen.enc"], self._pair_embedding(src, tgt)), self.enc_layout)

    def decoder_params(self, tgt, src=None):
        return GeneratedParams(self._linear(self.tensors["gen.dec"], self._pair_embedding(src, tgt)), self.dec_layout)

    def closed_form_count(self):
        n = len(self.languages)
        return 2 * (self.enc_layout.size + self.dec_layout.size) * self.embedding_size + n * self.embedding_size


class GroupedCpgGenerator(_ContextualGenerator):
    """Low-rank generation per parameter group: theta_j = W_j (P_j l)."""

    kind = "cpg-grouped"
    decoupled = True

    def __init__(self, enc_layout, dec_layout, languages, rng, embedding_size=8, rank=4, dtype=np.float32):
        if not 1 <= rank <= embedding_size:
            raise ContractError(f"group rank must satisfy 1 <= M' <= M, got M'={rank}, M={embedding_size}")
        super().__init__(enc_layout, dec_layout, languages, embedding_size, rng, dtype)
        self.rank = rank
        for side, layout in (("enc", enc_layout), ("dec", dec_layout)):
            for g in layout.groups:
                stds = ParameterLayout([g]).ref_std_vector()
                self._own(f"gen.{side}.{g.name}.w", _generator_init(stds, rank, rng, dtype))
                proj = rng.standard_normal((rank, embedding_size)) / np.sqrt(rank)
                self._own(f"gen.{side}.{g.name}.proj", proj.astype(dtype))
        self._init_rows(rng)

    def _generate(self, side: str, layout: ParameterLayout, l: Tensor) -> Tensor:
        col = l.reshape(-1, 1)
        parts = []
        for g in layout.groups:
            w = self.tensors[f"gen.{side}.{g.name}.w"]
            proj = self.tensors[f"gen.{side}.{g.name}.proj"]
            parts.append(ad.matmul(w, ad.matmul(proj, col)).reshape(-1))
        return ad.concat(parts)

    def encoder_params(self, src, tgt=None):
        self._check(tgt)
        return GeneratedParams(self._generate("enc", self.enc_layout, self._embedding(src)), self.enc_layout)

    def decoder_params(self, tgt, src=None):
        self._check(src)
        return GeneratedParams(self._generate("dec", self.dec_layout, self._embedding(tgt)), self.dec_layout)

    def closed_form_count(self):
        n = len(self.languages)
        m, r = self.embedding_size, self.rank
        groups = len(self.enc_layout.groups) + len(self.dec_layout.groups)
        return (self.enc_layout.size + self.dec_layout.size) * r + groups * r * m + n * m


def initialize_generator(
    variant: str,
    enc_layout: ParameterLayout,
    dec_layout: ParameterLayout,
    languages: Sequence[str],
    rng: np.random.Generator,
    embedding_size: int = 8,
    rank: int | None = None,
    dtype=np.float32,
) -> ParameterGenerator:
    """Build and randomly initialize a generator of the requested variant.

    Direct variants draw each coordinate uniformly with the layout's reference
    std.  Contextual variants draw language rows from N(0, 1/M) and generator
    rows with the reference std, so generated coordinates have that std in
    expectation.  The embedding size is ignored by the direct variants.
    """
    if variant == "pairwise":
        return PairwiseGenerator(enc_layout, dec_layout, languages, rng, dtype)
    if variant == "per-language":
        return PerLanguageGenerator(enc_layout, dec_layout, languages, rng, dtype)
    if variant == "universal":
        return UniversalGenerator(enc_layout, dec_layout, languages, rng, dtype)
    if variant == "cpg":
        return CpgGenerator(enc_layout, dec_layout, languages, rng, embedding_size, dtype)
    if variant == "cpg-coupled":
        return CoupledCpgGenerator(enc_layout, dec_layout, languages, rng, embedding_size, dtype)
    if variant == "cpg-grouped":
        if rank is None:
            raise ContractError("cpg-grouped needs a group rank M'")
        return GroupedCpgGenerator(enc_layout, dec_layout, languages, rng, embedding_size, rank, dtype)
    raise ContractError(f"unknown generator variant {variant!r}")


# -- counting -------------------------------------------------------------------------


def count_trainable_parameters(
    variant: str,
    num_languages: int,
    enc_layout: ParameterLayout,
    dec_layout: ParameterLayout,
    language_sizes: int | Sequence[int],
    embedding_size: int = 8,
    rank: int | None = None,
) -> int:
    """Closed-form number of trainable scalars for a variant.

    ``language_sizes`` is the per-language word-embedding plus output
    projection size (one value shared by all languages, or one per language).
    Those tensors are plain per-language parameters in every variant.
    """
    if num_languages < 1:
        raise ContractError("need at least one language")
    if isinstance(language_sizes, int):
        per_lang = num_languages * language_sizes
    else:
        if len(language_sizes) != num_languages:
            raise ContractError("one language size per language")
        per_lang = int(np.sum(language_sizes, dtype=np.int64))
    p = enc_layout.size + dec_layout.size
    n, m = num_languages, embedding_size
    if variant == "pairwise":
        core = n * (n - 1) * p
    elif variant == "per-language":
        core = n * p
    elif variant == "universal":
        core = p
    elif variant == "cpg":
        core = p * m + n * m
    elif variant == "cpg-coupled":
        core = 2 * p * m + n * m
    elif variant == "cpg-grouped":
        if rank is None or not 1 <= rank <= m:
            raise ContractError(f"cpg-grouped needs 1 <= M' <= M, got M'={rank}, M={m}")
        groups = len(enc_layout.groups) + len(dec_layout.groups)
        core = p * rank + groups * rank * m + n * m
    else:
        raise ContractError(f"unknown generator variant {variant!r}")
    return core + per_lang


def pairwise_full_count(num_languages: int, p: int, word_size: int, vocab_size: int) -> int:
    """L(L-1)(P + 2WV): every pair model owns its own embeddings and projection."""
    n = num_languages
    return n * (n - 1) * (p + 2 * word_size * vocab_size)


def cosine_distance_matrix(table: LanguageEmbeddingTable | np.ndarray) -> np.ndarray:
    """1 - cos(l_i, l_j) for every pair of language embeddings."""
    mat = table.matrix() if isinstance(table, LanguageEmbeddingTable) else np.asarray(table)
    mat = mat.astype(np.float64)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0):
        raise DegenerateEmbeddingError("zero-norm language embedding")
    n = mat.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            cos = float(mat[i] @ mat[j]) / (norms[i] * norms[j])
            out[i, j] = out[j, i] = 1.0 - cos
    return out


def audit_size(tensors: Iterable[Tensor]) -> int:
    return ad.parameters_size(tensors)


def reference_uniform_std(fan_in: int) -> float:
    return 1.0 / math.sqrt(3.0 * fan_in)
