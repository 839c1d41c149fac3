import struct
from pathlib import Path

import numpy as np
import pytest

from sentibench.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from sentibench.exceptions import CheckpointFormatException


# pylint: disable=missing-class-docstring,missing-function-docstring
class TestCheckpoint:
    @pytest.fixture
    def arrays(self):
        rng = np.random.default_rng(0)
        return {"weights": rng.normal(size=(3, 4)), "bias": rng.normal(size=3), "scalar": np.array(2.5), "lstm.input_weights": rng.normal(size=(2, 2, 2))}

    def test_round_trip_is_exact(self, tmp_path: Path, arrays):
        save_checkpoint(tmp_path / "model.ckpt", arrays, {"kind": "lstm", "hidden": 4, "words": ["a", "ü"]})
        loaded, metadata = load_checkpoint(tmp_path / "model.ckpt")
        assert metadata == {"kind": "lstm", "hidden": 4, "words": ["a", "ü"]}
        assert set(loaded) == set(arrays)
        for name, array in arrays.items():
            assert loaded[name].shape == array.shape
            assert np.array_equal(loaded[name], array)

    def test_file_does_not_depend_on_insertion_order(self, tmp_path: Path, arrays):
        save_checkpoint(tmp_path / "first.ckpt", arrays, {})
        save_checkpoint(tmp_path / "second.ckpt", dict(reversed(list(arrays.items()))), {})
        assert (tmp_path / "first.ckpt").read_bytes() == (tmp_path / "second.ckpt").read_bytes()

    def test_wrong_magic(self, tmp_path: Path):
        (tmp_path / "model.ckpt").write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(CheckpointFormatException):
            load_checkpoint(tmp_path / "model.ckpt")

    def test_unknown_version(self, tmp_path: Path):
        (tmp_path / "model.ckpt").write_bytes(MAGIC + struct.pack("<IQ", 99, 0) + struct.pack("<I", 0))
        with pytest.raises(CheckpointFormatException, match="version"):
            load_checkpoint(tmp_path / "model.ckpt")

    def test_truncated(self, tmp_path: Path, arrays):
        save_checkpoint(tmp_path / "model.ckpt", arrays, {})
        data = (tmp_path / "model.ckpt").read_bytes()
        (tmp_path / "model.ckpt").write_bytes(data[:-5])
        with pytest.raises(CheckpointFormatException, match="truncated"):
            load_checkpoint(tmp_path / "model.ckpt")

    def test_trailing_bytes(self, tmp_path: Path, arrays):
        save_checkpoint(tmp_path / "model.ckpt", arrays, {})
        with (tmp_path / "model.ckpt").open("ab") as handle:
            handle.write(b"\x00")
        with pytest.raises(CheckpointFormatException, match="trailing"):
            load_checkpoint(tmp_path / "model.ckpt")
