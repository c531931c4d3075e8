"""Raw tensor file format ("SGT1") plus the per-layer weight manifest.

An SGT1 file is: the magic bytes ``SGT1``, two little-endian uint32 counts
(rows, cols), then rows*cols little-endian float32 values in row-major order.
Weight fixtures are one SGT1 file per matrix plus a JSON manifest listing the
files for the subsampler and for each encoder layer.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SGT1"
_HEADER = struct.Struct("<4sII")

__all__ = ["MAGIC", "read_tensor", "write_tensor", "load_weight_manifest", "save_weight_manifest"]


class TensorFormatError(ValueError):
    """File is not a valid SGT1 tensor."""


def write_tensor(path, array) -> None:
    """Write a 2-D float32 array as an SGT1 file."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"SGT1 stores 2-D tensors, got shape {arr.shape}")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(arr.astype("<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    """Read an SGT1 file back into a (rows, cols) float32 array."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise TensorFormatError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise TensorFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        payload = fh.read(4 * rows * cols)
    if len(payload) != 4 * rows * cols:
        raise TensorFormatError(f"{path}: expected {rows * cols} float32 values")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float32, copy=True)
    return data.reshape(rows, cols)


def save_weight_manifest(directory, weights) -> Path:
    """Write every matrix of an EncoderWeights to SGT1 files plus a manifest.

    Conv kernels are 3-D (width, in, out) and are flattened to
    (width * in, out) on disk; the loader restores the shape from the
    recorded width. Vectors are stored as single-row tensors.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    def dump(name, arr):
        arr = np.asarray(arr, dtype=np.float32)
        meta = {"file": f"{name}.sgt1"}
        if arr.ndim == 3:
            meta["conv_width"] = int(arr.shape[0])
            arr2 = arr.reshape(arr.shape[0] * arr.shape[1], arr.shape[2])
        elif arr.ndim == 1:
            arr2 = arr.reshape(1, -1)
            meta["vector"] = True
        else:
            arr2 = arr
        write_tensor(directory / meta["file"], arr2)
        return meta

    sub = weights.subsample
    manifest = {
        "subsample": {
            "conv1_w": dump("sub_conv1_w", sub.conv1_w),
            "conv1_b": dump("sub_conv1_b", sub.conv1_b),
            "conv2_w": dump("sub_conv2_w", sub.conv2_w),
            "conv2_b": dump("sub_conv2_b", sub.conv2_b),
            "proj": dump("sub_proj", sub.proj),
        },
        "layers": [],
    }
    for i, lw in enumerate(weights.layers):
        entry = {
            "w_q": dump(f"l{i}_w_q", lw.attn.w_q),
            "w_k": dump(f"l{i}_w_k", lw.attn.w_k),
            "w_v": dump(f"l{i}_w_v", lw.attn.w_v),
            "w_o": dump(f"l{i}_w_o", lw.attn.w_o),
            "rel_table": dump(f"l{i}_rel_table", lw.attn.rel_table),
            "ffn_w1": dump(f"l{i}_ffn_w1", lw.ffn_w1),
            "ffn_w2": dump(f"l{i}_ffn_w2", lw.ffn_w2),
            "ln1_gamma": dump(f"l{i}_ln1_gamma", lw.ln1_gamma),
            "ln1_beta": dump(f"l{i}_ln1_beta", lw.ln1_beta),
            "ln2_gamma": dump(f"l{i}_ln2_gamma", lw.ln2_gamma),
            "ln2_beta": dump(f"l{i}_ln2_beta", lw.ln2_beta),
        }
        manifest["layers"].append(entry)
    path = directory / "weights.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def load_weight_manifest(manifest_path):
    """Load an EncoderWeights from a manifest written by save_weight_manifest."""
    from .encoder import EncoderWeights, LayerWeights, SubsampleWeights
    from .attention import AttentionWeights

    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    spec = json.loads(manifest_path.read_text(encoding="utf-8"))

    def load(meta):
        arr = read_tensor(root / meta["file"])
        if "conv_width" in meta:
            width = meta["conv_width"]
            arr = arr.reshape(width, arr.shape[0] // width, arr.shape[1])
        elif meta.get("vector"):
            arr = arr.reshape(-1)
        return arr

    sub = spec["subsample"]
    subsample = SubsampleWeights(
        conv1_w=load(sub["conv1_w"]),
        conv1_b=load(sub["conv1_b"]),
        conv2_w=load(sub["conv2_w"]),
        conv2_b=load(sub["conv2_b"]),
        proj=load(sub["proj"]),
    )
    layers = []
    for entry in spec["layers"]:
        rel_table = load(entry["rel_table"])
        w_q = load(entry["w_q"])
        d = w_q.shape[0]
        head_dim = rel_table.shape[1]
        attn = AttentionWeights(
            w_q=w_q,
            w_k=load(entry["w_k"]),
            w_v=load(entry["w_v"]),
            w_o=load(entry["w_o"]),
            rel_table=rel_table,
            heads=d // head_dim,
            clip=(rel_table.shape[0] - 1) // 2,
        )
        layers.append(
            LayerWeights(
                attn=attn,
                ffn_w1=load(entry["ffn_w1"]),
                ffn_w2=load(entry["ffn_w2"]),
                ln1_gamma=load(entry["ln1_gamma"]),
                ln1_beta=load(entry["ln1_beta"]),
                ln2_gamma=load(entry["ln2_gamma"]),
                ln2_beta=load(entry["ln2_beta"]),
            )
        )
    return EncoderWeights(subsample=subsample, layers=layers)
