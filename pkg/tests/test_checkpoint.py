import struct

import numpy as np
import pytest

from cpgnmt.checkpoint import Checkpoint, dumps, load_checkpoint, loads, save_checkpoint
from cpgnmt.errors import CheckpointError, CheckpointVersionError, CorruptCheckpointError, PathError
from cpgnmt.training import model_from_checkpoint, model_to_checkpoint

from conftest import tiny_model


@pytest.mark.parametrize("variant", ["cpg-grouped", "universal", "pairwise"])
def test_model_roundtrip_bit_exact(tmp_path, variant):
    model = tiny_model(variant, codes=("A", "B", "C"), dtype="float32")
    save_checkpoint(model_to_checkpoint(model), tmp_path / "m.cpgc")
    back = model_from_checkpoint(load_checkpoint(tmp_path / "m.cpgc"))
    assert back.languages == model.languages
    assert back.config == model.config
    for (na, ta), (nb, tb) in zip(model.named_tensors().items(), back.named_tensors().items()):
        assert na == nb
        assert ta.data.dtype == tb.data.dtype and ta.data.tobytes() == tb.data.tobytes()


def test_container_roundtrip_dtypes():
    ck = Checkpoint({"k": [1, "x"]})
    ck.tensors["a"] = np.arange(6, dtype=np.int64).reshape(2, 3)
    ck.tensors["b"] = np.float32(2.5) * np.ones((), dtype=np.float32)
    ck.tensors["c"] = np.zeros((0, 4))
    back = loads(dumps(ck))
    assert back.metadata == ck.metadata
    for name in ck.tensors:
        assert back.tensors[name].dtype == ck.tensors[name].dtype
        np.testing.assert_array_equal(back.tensors[name], ck.tensors[name])


@pytest.mark.parametrize("cut", [3, 10, 40, -1])
def test_truncated_file_is_corrupt(cut):
    data = dumps(model_to_checkpoint(tiny_model()))
    with pytest.raises(CorruptCheckpointError):
        loads(data[:cut])


def test_bad_magic_and_trailing_bytes():
    data = dumps(Checkpoint({}))
    with pytest.raises(CorruptCheckpointError):
        loads(b"XXXX" + data[4:])
    with pytest.raises(CorruptCheckpointError):
        loads(data + b"\0")


def test_unknown_version_names_both():
    data = bytearray(dumps(Checkpoint({})))
    data[4:8] = struct.pack("<I", 99)
    with pytest.raises(CheckpointVersionError) as info:
        loads(bytes(data))
    assert "99" in str(info.value) and "1" in str(info.value).replace("99", "")


def test_shape_mismatch_rejected():
    ck = model_to_checkpoint(tiny_model())
    name = next(iter(ck.tensors))
    ck.tensors[name] = np.zeros((1, 1))
    with pytest.raises(CheckpointError):
        model_from_checkpoint(ck)


def test_missing_file(tmp_path):
    with pytest.raises(PathError):
        load_checkpoint(tmp_path / "none.cpgc")
