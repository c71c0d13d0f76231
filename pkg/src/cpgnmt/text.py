"""Tokenization, per-language vocabularies and byte-pair encoding."""

from __future__ import annotations

import heapq
import html
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CorruptCheckpointError

PAD, UNK, BOS, EOS = 0, 1, 2, 3
SPECIALS = ("<pad>", "<unk>", "<s>", "</s>")
EOW = "</w>"
MAX_TRAIN_LENGTH = 50

_WS = re.compile(r"\s+")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Split ``text`` into word and punctuation tokens.

    NFC-normalizes, unescapes HTML entities, collapses whitespace and peels
    leading/trailing punctuation off each whitespace-delimited chunk.
    Word-internal punctuation ("don't", "3.14") is kept.
    """
    text = unicodedata.normalize("NFC", html.unescape(text))
    tokens: list[str] = []
    for chunk in _WS.split(text.strip()):
        if not chunk:
            continue
        start, end = 0, len(chunk)
        head: list[str] = []
        tail: list[str] = []
        while start < end and _is_punct(chunk[start]):
            head.append(chunk[start])
            start += 1
        while end > start and _is_punct(chunk[end - 1]):
            tail.append(chunk[end - 1])
            end -= 1
        tokens.extend(head)
        if start < end:
            tokens.append(chunk[start:end])
        tokens.extend(reversed(tail))
    return tokens


_NO_SPACE_BEFORE = set(".,!?;:)]}%")
_NO_SPACE_AFTER = set("([{")


def detokenize(tokens: Sequence[str]) -> str:
    out: list[str] = []
    for tok in tokens:
        if out and not (tok in _NO_SPACE_BEFORE or out[-1] in _NO_SPACE_AFTER):
            out.append(" ")
        out.append(tok)
    return "".join(out)


@dataclass
class Vocabulary:
    """Token <-> index map for one language; indices 0..3 are the specials."""

    language: str
    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.itos = list(SPECIALS) + list(self.tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError(f"duplicate tokens in vocabulary for {self.language!r}")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def token(self, index: int) -> str:
        if not 0 <= index < len(self.itos):
            raise IndexError(f"token id {index} out of range for vocabulary of size {len(self)}")
        return self.itos[index]

    def extended(self, extra: Iterable[str]) -> "Vocabulary":
        new = [t for t in extra if t not in self.stoi]
        return Vocabulary(self.language, list(self.tokens) + new)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(t + "\n" for t in self.tokens), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, language: str) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(language, lines)


def build_vocabulary(
    corpus: Iterable[str] | Mapping[str, int],
    language: str = "",
    min_count: int = 5,
    cap: int = 20000,
) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times, most frequent first.

    ``corpus`` is a token stream or a precomputed count mapping.  Ties are
    broken by token string so the result is independent of input order.  The
    cap counts content tokens only; specials are always present.
    """
    counts = Counter(corpus) if not isinstance(corpus, Mapping) else corpus
    kept = [(t, c) for t, c in counts.items() if c >= min_count and t not in SPECIALS]
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary(language, [t for t, _ in kept[:cap]])


def encode_sentence(vocab: Vocabulary, tokens: Sequence[str]) -> list[int]:
    return [vocab.index(t) for t in tokens] + [EOS]


def decode_sentence(vocab: Vocabulary, ids: Iterable[int]) -> list[str]:
    out = []
    for i in ids:
        i = int(i)
        if i == EOS:
            break
        tok = vocab.token(i)
        if i != PAD:
            out.append(tok)
    return out


# -- byte-pair encoding ----------------------------------------------------------

BPE_HEADER = "#cpgnmt-bpe v1"


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    marker: str = EOW

    def __post_init__(self):
        self.ranks = {pair: i for i, pair in enumerate(self.merges)}
        if len(self.ranks) != len(self.merges):
            raise ValueError("duplicate merge pair in BPE model")
        self._cache: dict[str, list[str]] = {}

    def save(self, path: str | Path) -> None:
        lines = [f"{BPE_HEADER} {self.marker}"] + [f"{a} {b}" for a, b in self.merges]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BpeModel":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith(BPE_HEADER):
            raise CorruptCheckpointError(f"{path}: missing BPE header")
        parts = lines[0].split()
        marker = parts[2] if len(parts) > 2 else EOW
        merges = []
        for n, line in enumerate(lines[1:], start=2):
            pair = line.split(" ")
            if len(pair) != 2:
                raise CorruptCheckpointError(f"{path}:{n}: expected 'left right'")
            merges.append((pair[0], pair[1]))
        return cls(merges, marker)


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    a, b = pair
    out = []
    i, n = 0, len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == a and symbols[i + 1] == b:
            out.append(a + b)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def _pairs(symbols: Sequence[str]) -> Counter:
    return Counter(zip(symbols, symbols[1:]))


def learn_bpe(word_counts: Mapping[str, int], num_merges: int, marker: str = EOW) -> BpeModel:
    """Learn ``num_merges`` merges by repeatedly joining the most frequent pair.

    Pair statistics are updated incrementally: only words containing the
    merged pair are re-scanned, and a lazily-invalidated heap yields the best
    pair (highest count, then lexicographically smallest).  A pair that was
    already merged and reappears is never merged again.  Learning stops early
    once no pair occurs at least twice.
    """
    if num_merges < 0:
        raise ValueError("num_merges must be non-negative")
    words = [tuple(w) + (marker,) for w in word_counts]
    freqs = [int(c) for c in word_counts.values()]
    stats: dict[tuple[str, str], int] = defaultdict(int)
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for i, (w, f) in enumerate(zip(words, freqs)):
        for p, k in _pairs(w).items():
            stats[p] += k * f
            where[p].add(i)
    heap = [(-c, p) for p, c in stats.items()]
    heapq.heapify(heap)

    merges: list[tuple[str, str]] = []
    done: set[tuple[str, str]] = set()
    while len(merges) < num_merges and heap:
        negc, pair = heapq.heappop(heap)
        count = stats.get(pair, 0)
        if -negc != count:
            if count > 0:
                heapq.heappush(heap, (-count, pair))
            continue
        if count < 2:
            break
        if pair in done:
            continue
        merges.append(pair)
        done.add(pair)
        touched: set[tuple[str, str]] = set()
        for i in sorted(where.pop(pair, ())):
            old = words[i]
            new = _merge_word(old, pair)
            if new == old:
                continue
            f = freqs[i]
            for p, k in _pairs(old).items():
                stats[p] -= k * f
                touched.add(p)
                where[p].discard(i)
            for p, k in _pairs(new).items():
                stats[p] += k * f
                touched.add(p)
                where[p].add(i)
            words[i] = new
        stats.pop(pair, None)
        for p in touched:
            c = stats.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, p))
            else:
                stats.pop(p, None)
    return BpeModel(merges, marker)


def apply_bpe(model: BpeModel, word: str) -> list[str]:
    """Segment ``word`` by applying the merges in learned order.

    The end-of-word marker is glued to the final unit, so joining the units
    and dropping the single trailing marker gives back ``word``.
    """
    cached = model._cache.get(word)
    if cached is not None:
        return list(cached)
    symbols = tuple(word) + (model.marker,)
    ranks = model.ranks
    last = -1
    while len(symbols) > 1:
        best = None
        for p in zip(symbols, symbols[1:]):
            r = ranks.get(p)
            if r is not None and r > last and (best is None or r < best):
                best = r
        if best is None:
            break
        symbols = _merge_word(symbols, model.merges[best])
        last = best
    units = list(symbols)
    if len(units) > 1 and units[-1] == model.marker:
        units[-2:] = [units[-2] + model.marker]
    model._cache[word] = units
    return list(units)


def join_bpe(units: Sequence[str], marker: str = EOW) -> list[str]:
    """Reassemble words from a stream of subword units."""
    words, buf = [], []
    for u in units:
        if u.endswith(marker):
            buf.append(u[: -len(marker)])
            words.append("".join(buf))
            buf = []
        else:
            buf.append(u)
    if buf:
        words.append("".join(buf))
    return words


def reconstruct(units: Sequence[str], marker: str = EOW) -> str:
    joined = "".join(units)
    return joined[: -len(marker)] if joined.endswith(marker) else joined
