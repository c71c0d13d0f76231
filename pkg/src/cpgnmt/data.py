"""Dataset manifests, corpus loading and synthetic toy languages."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import ConfigError, DataIntegrityError, PathError
from .generator import check_language_code
from .text import tokenize

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class ParallelResource:
    src: str
    tgt: str
    src_file: Path
    tgt_file: Path
    split: str = "train"


@dataclass(frozen=True)
class MonolingualResource:
    lang: str
    file: Path


@dataclass
class DatasetManifest:
    languages: list[str]
    parallel: list[ParallelResource] = field(default_factory=list)
    monolingual: list[MonolingualResource] = field(default_factory=list)
    # parallel resources are usable in both directions unless disabled
    bidirectional: bool = True
    path: Path | None = None

    @property
    def sources(self) -> set[str]:
        out = {r.src for r in self.parallel}
        if self.bidirectional:
            out |= {r.tgt for r in self.parallel}
        return out

    @property
    def targets(self) -> set[str]:
        out = {r.tgt for r in self.parallel}
        if self.bidirectional:
            out |= {r.src for r in self.parallel}
        return out

    @property
    def num_corpora(self) -> int:
        return len({(r.src, r.tgt) for r in self.parallel if r.split == "train"})

    def directions(self, split: str) -> list[tuple[str, str]]:
        seen: list[tuple[str, str]] = []
        for r in self.parallel:
            if r.split != split:
                continue
            for pair in [(r.src, r.tgt)] + ([(r.tgt, r.src)] if self.bidirectional else []):
                if pair not in seen:
                    seen.append(pair)
        return seen


def read_lines(path: Path) -> list[str]:
    if not path.exists():
        raise PathError(f"missing corpus file: {path}")
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _count_lines(path: Path) -> int:
    with open(path, "rb") as fh:
        return sum(1 for _ in fh)


def parse_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a YAML manifest; file paths are relative to it."""
    path = Path(path)
    if not path.exists():
        raise PathError(f"manifest not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({str(exc).splitlines()[0]})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: manifest must be a mapping")
    unknown = set(raw) - {"languages", "parallel", "monolingual", "bidirectional"}
    if unknown:
        raise ConfigError(f"{path}: unknown manifest field(s) {', '.join(sorted(unknown))}")
    base = path.parent

    def resolve(p) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    parallel = []
    for i, r in enumerate(raw.get("parallel") or []):
        try:
            res = ParallelResource(r["src"], r["tgt"], resolve(r["src_file"]), resolve(r["tgt_file"]), r.get("split", "train"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: parallel[{i}] is missing field {exc}") from None
        if res.split not in SPLITS:
            raise ConfigError(f"{path}: parallel[{i}].split must be one of {', '.join(SPLITS)}")
        parallel.append(res)
    mono = []
    for i, r in enumerate(raw.get("monolingual") or []):
        try:
            mono.append(MonolingualResource(r["lang"], resolve(r["file"])))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: monolingual[{i}] is missing field {exc}") from None

    referenced = []
    for r in parallel:
        referenced += [r.src, r.tgt]
    referenced += [m.lang for m in mono]
    declared = raw.get("languages")
    if declared is None:
        languages = list(dict.fromkeys(referenced))
    else:
        languages = [str(c) for c in declared]
        missing = sorted(set(referenced) - set(languages))
        if missing:
            raise ConfigError(f"{path}: languages {', '.join(missing)} are used but not declared")
    for code in languages:
        check_language_code(code)

    for r in parallel:
        for f in (r.src_file, r.tgt_file):
            if not f.exists():
                raise PathError(f"missing corpus file: {f}")
        a, b = _count_lines(r.src_file), _count_lines(r.tgt_file)
        if a != b:
            raise DataIntegrityError(f"line count mismatch: {r.src_file} has {a} lines, {r.tgt_file} has {b}")
    for m in mono:
        if not m.file.exists():
            raise PathError(f"missing corpus file: {m.file}")
    return DatasetManifest(languages, parallel, mono, bool(raw.get("bidirectional", True)), path)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)

    def rel(p: Path) -> str:
        try:
            return str(p.relative_to(path.parent))
        except ValueError:
            return str(p)

    data = {
        "languages": manifest.languages,
        "bidirectional": manifest.bidirectional,
        "parallel": [
            {"src": r.src, "tgt": r.tgt, "src_file": rel(r.src_file), "tgt_file": rel(r.tgt_file), "split": r.split}
            for r in manifest.parallel
        ],
        "monolingual": [{"lang": m.lang, "file": rel(m.file)} for m in manifest.monolingual],
    }
    path.write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")


def load_tokenized(path: Path) -> list[list[str]]:
    return [tokenize(line) for line in read_lines(path)]


# -- synthetic languages -------------------------------------------------------------------


@dataclass(frozen=True)
class ToyLanguage:
    """A deterministic rendering of concept sequences into surface tokens.

    ``words[k]`` is the surface form of concept ``k``; ``reverse`` flips the
    word order.
    """

    code: str
    words: tuple[str, ...]
    reverse: bool = False

    def render(self, concepts: Sequence[int]) -> list[str]:
        toks = [self.words[k] for k in concepts]
        return toks[::-1] if self.reverse else toks


def toy_language(code: str, num_concepts: int, reverse: bool = False, prefix: str | None = None) -> ToyLanguage:
    stem = (prefix or code).lower()
    return ToyLanguage(code, tuple(f"{stem}{k}" for k in range(num_concepts)), reverse)


def variant_of(base: ToyLanguage, code: str, changed: int, seed: int = 0) -> ToyLanguage:
    """Copy ``base`` with the surface forms of ``changed`` concepts replaced."""
    rng = np.random.default_rng(seed)
    words = list(base.words)
    for k in sorted(rng.choice(len(words), size=changed, replace=False)):
        words[k] = f"{code.lower()}{k}"
    return ToyLanguage(code, tuple(words), base.reverse)


def sample_concepts(rng: np.random.Generator, n: int, num_concepts: int, min_len: int, max_len: int) -> list[list[int]]:
    lengths = rng.integers(min_len, max_len + 1, size=n)
    return [list(rng.integers(0, num_concepts, size=int(k))) for k in lengths]


def generate_toy_corpus(
    out_dir: str | Path,
    languages: Sequence[ToyLanguage],
    pairs: Sequence[tuple[str, str]],
    sizes: dict[str, int] | None = None,
    seed: int = 0,
    min_len: int = 4,
    max_len: int = 8,
    monolingual: int = 0,
    eval_pairs: Sequence[tuple[str, str]] = (),
) -> Path:
    """Write a synthetic multilingual corpus and its manifest.

    Each pair in ``pairs`` gets train/dev/test files; ``eval_pairs`` get
    dev/test files only (for zero-shot evaluation).  ``monolingual`` extra
    sentences per language go to separate files.  Returns the manifest path.
    """
    sizes = {"train": 500, "dev": 50, "test": 50, **(sizes or {})}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_code = {l.code: l for l in languages}
    num_concepts = len(languages[0].words)
    rng = np.random.default_rng(seed)
    parallel = []
    jobs = [(p, s) for p in pairs for s in SPLITS] + [(p, s) for p in eval_pairs for s in ("dev", "test")]
    for (s, t), split in jobs:
        concepts = sample_concepts(rng, sizes[split], num_concepts, min_len, max_len)
        sf, tf = out / f"{split}.{s}-{t}.{s}", out / f"{split}.{s}-{t}.{t}"
        sf.write_text("".join(" ".join(by_code[s].render(c)) + "\n" for c in concepts), encoding="utf-8")
        tf.write_text("".join(" ".join(by_code[t].render(c)) + "\n" for c in concepts), encoding="utf-8")
        parallel.append(ParallelResource(s, t, sf, tf, split))
    mono = []
    if monolingual:
        for lang in languages:
            concepts = sample_concepts(rng, monolingual, num_concepts, min_len, max_len)
            f = out / f"mono.{lang.code}"
            f.write_text("".join(" ".join(lang.render(c)) + "\n" for c in concepts), encoding="utf-8")
            mono.append(MonolingualResource(lang.code, f))
    manifest = DatasetManifest([l.code for l in languages], parallel, mono, bidirectional=True)
    path = out / "manifest.yaml"
    write_manifest(manifest, path)
    return path
