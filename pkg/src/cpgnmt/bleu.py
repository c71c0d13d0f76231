"""Unsmoothed corpus BLEU over token lists."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from .errors import ContractError


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Corpus-level BLEU in [0, 1] with a single reference per sentence.

    Clipped n-gram matches and totals are summed over the corpus before the
    geometric mean; any zero precision gives 0.
    """
    if len(hypotheses) != len(references):
        raise ContractError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not hypotheses:
        raise ContractError("BLEU of an empty corpus")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h, r = ngram_counts(hyp, n), ngram_counts(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    return bp * math.exp(log_p)


def token_accuracy(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]]) -> float:
    """Position-wise match rate; length mismatches count as errors."""
    right = total = 0
    for hyp, ref in zip(hypotheses, references):
        span = max(len(hyp), len(ref))
        total += span
        right += sum(1 for a, b in zip(hyp, ref) if a == b)
    return right / total if total else 1.0
