"""SGT1 tensor format and weight-manifest round trips."""

import numpy as np
import pytest

from segstream import init_weights, load_weight_manifest, read_tensor, save_weight_manifest, write_tensor
from segstream.tensor_io import MAGIC, TensorFormatError

from conftest import toy_config


def test_tensor_roundtrip(tmp_path, rng):
    arr = rng.uniform(-3, 3, (5, 7)).astype(np.float32)
    path = tmp_path / "t.sgt1"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.dtype == np.float32
    assert np.array_equal(back, arr)


def test_tensor_file_layout(tmp_path):
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    path = tmp_path / "t.sgt1"
    write_tensor(path, arr)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    assert raw[4:8] == (2).to_bytes(4, "little")
    assert raw[8:12] == (3).to_bytes(4, "little")
    assert np.array_equal(np.frombuffer(raw[12:], dtype="<f4"), np.arange(6, dtype=np.float32))


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.sgt1"
    path.write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(TensorFormatError, match="magic"):
        read_tensor(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "short.sgt1"
    write_tensor(path, np.ones((2, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(TensorFormatError):
        read_tensor(path)


def test_weight_manifest_roundtrip(tmp_path):
    cfg = toy_config("augmem")
    weights = init_weights(cfg, seed=3)
    manifest = save_weight_manifest(tmp_path / "w", weights)
    loaded = load_weight_manifest(manifest)
    assert len(loaded.layers) == len(weights.layers)
    assert np.array_equal(loaded.subsample.conv1_w, weights.subsample.conv1_w)
    assert loaded.subsample.conv1_w.shape == weights.subsample.conv1_w.shape
    for a, b in zip(loaded.layers, weights.layers):
        assert np.array_equal(a.attn.w_q, b.attn.w_q)
        assert np.array_equal(a.attn.rel_table, b.attn.rel_table)
        assert a.attn.heads == b.attn.heads and a.attn.clip == b.attn.clip
        assert np.array_equal(a.ffn_w1, b.ffn_w1)
        assert np.array_equal(a.ln1_gamma, b.ln1_gamma)
