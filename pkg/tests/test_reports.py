import numpy as np
import pytest

from cpgnmt.errors import ContractError, PathError
from cpgnmt.reports import EvalReport, PairScore, emit_distance_matrix, emit_report, parse_distance_matrix


def report():
    return EvalReport([PairScore("De", "En", "bleu", 0.2), PairScore("En", "De", "bleu", 0.4)], {"beam": 10})


def test_mean_row():
    text = report().render()
    assert report().mean("bleu") == pytest.approx(0.3)
    assert "Mean\tbleu\t0.300000" in text.splitlines()
    assert text.splitlines()[0] == "pair\tmetric\tvalue"
    assert "# beam=10" in text


def test_empty_results_rejected():
    with pytest.raises(ContractError):
        EvalReport([]).render()
    with pytest.raises(ContractError):
        report().mean("chrf")


def test_byte_identical_output(tmp_path):
    emit_report(report(), tmp_path / "a.tsv")
    emit_report(report(), tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(PathError):
        emit_report(report(), blocker / "out.tsv")


def test_distance_matrix_roundtrip():
    d = np.array([[0.0, 0.25], [0.25, -0.0]])
    text = emit_distance_matrix(["A", "B"], d)
    assert text == "\tA\tB\nA\t0.00000\t0.25000\nB\t0.25000\t0.00000\n"
    codes, back = parse_distance_matrix(text)
    assert codes == ["A", "B"] and np.allclose(back, d)
    with pytest.raises(ContractError):
        emit_distance_matrix(["A"], d)
