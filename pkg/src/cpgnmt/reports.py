"""TSV reports: per-pair scores with a Mean row, and language distance matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError, PathError


@dataclass
class PairScore:
    src: str
    tgt: str
    metric: str
    value: float
    sentences: int = 0


@dataclass
class EvalReport:
    scores: list[PairScore]
    settings: dict = field(default_factory=dict)

    def mean(self, metric: str) -> float:
        vals = [s.value for s in self.scores if s.metric == metric]
        if not vals:
            raise ContractError(f"no scores for metric {metric!r}")
        return float(np.mean(vals))

    def render(self) -> str:
        if not self.scores:
            raise ContractError("cannot report empty results")
        lines = ["pair\tmetric\tvalue"]
        for s in self.scores:
            lines.append(f"{s.src}-{s.tgt}\t{s.metric}\t{s.value:.6f}")
        for metric in dict.fromkeys(s.metric for s in self.scores):
            lines.append(f"Mean\t{metric}\t{self.mean(metric):.6f}")
        for key in sorted(self.settings):
            lines.append(f"# {key}={self.settings[key]}")
        return "\n".join(lines) + "\n"


def _write(text: str, path: str | Path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise PathError(f"cannot write {path}: {exc.strerror}") from None


def emit_report(report: EvalReport, path: str | Path | None = None) -> str:
    text = report.render()
    if path is not None:
        _write(text, path)
    return text


def render_distance_matrix(codes: Sequence[str], dist: np.ndarray) -> str:
    dist = np.asarray(dist)
    if dist.shape != (len(codes), len(codes)):
        raise ContractError("distance matrix shape does not match the language list")
    lines = ["\t" + "\t".join(codes)]
    for code, row in zip(codes, dist):
        # +0.0 turns -0.0 into 0.0 so the output never shows "-0.00000"
        lines.append(code + "\t" + "\t".join(f"{v + 0.0:.5f}" for v in row))
    return "\n".join(lines) + "\n"


def emit_distance_matrix(codes: Sequence[str], dist: np.ndarray, path: str | Path | None = None) -> str:
    text = render_distance_matrix(codes, dist)
    if path is not None:
        _write(text, path)
    return text


def parse_distance_matrix(text: str) -> tuple[list[str], np.ndarray]:
    rows = [line.split("\t") for line in text.strip("\n").split("\n")]
    codes = rows[0][1:]
    mat = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return codes, mat
