"""Binary tensor container round trips and failure modes."""

import numpy as np
import pytest

from fddlab.autodiff import CheckpointError, load_tensors, save_tensors


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {
        "weights/w0": rng.standard_normal((3, 4)),
        "bias": rng.standard_normal(7),
        "scalar": np.array(3.25),
        "deep/nested/name": rng.standard_normal((2, 2, 2)),
    }
    path = tmp_path / "model.fddw"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        assert loaded[name].shape == np.asarray(arr).shape
        assert np.array_equal(loaded[name], arr)


def test_unicode_names(tmp_path):
    path = tmp_path / "u.fddw"
    save_tensors(path, {"较жζ": np.arange(3.0)})
    assert np.array_equal(load_tensors(path)["较жζ"], np.arange(3.0))


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.fddw"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(CheckpointError, match="magic"):
        load_tensors(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "model.fddw"
    save_tensors(path, {"w": np.ones((4, 4))})
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_tensors(path)
