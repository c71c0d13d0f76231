import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cpgnmt.model import ModelConfig, TranslationModel  # noqa: E402
from cpgnmt.text import Vocabulary  # noqa: E402


def tiny_vocabs(codes=("A", "B"), size=6):
    return {c: Vocabulary(c, [f"{c.lower()}{i}" for i in range(size)]) for c in codes}


def tiny_model(variant="cpg", codes=("A", "B"), seed=0, dtype="float64", **kw):
    cfg = dict(word_size=3, hidden_size=2, attention_size=2, embedding_size=2, variant=variant, dtype=dtype)
    if variant == "cpg-grouped":
        cfg["group_rank"] = 1
    cfg.update(kw)
    return TranslationModel.create(ModelConfig(**cfg), tiny_vocabs(codes), np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def model_factory():
    return tiny_model


# -- acceptance criteria summary ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


@pytest.fixture
def detail(request):
    """Attach a short measurement string to the criterion line."""

    def note(text):
        request.node.user_properties.append(("detail", text))

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        notes = "; ".join(v for k, v in item.user_properties if k == "detail")
        status = {"passed": "PASS", "failed": "FAIL"}.get(rep.outcome, rep.outcome.upper())
        prev = _CRITERIA.get(number)
        if prev is not None:
            # several tests may share a criterion; any failure fails it
            status = prev[0] if prev[0] != "PASS" else status
            notes = "; ".join(n for n in (prev[2], notes) if n)
        _CRITERIA[number] = (status, title, notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, notes = _CRITERIA[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  [{notes}]" if notes else ""))
