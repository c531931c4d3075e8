"""Minimal dense float32 kernels: matrix product, row softmax, layer norm, strided 1-D convolution.

Everything here is a pure function on 2-D single-precision arrays with
deterministic results for identical inputs. Higher modules build attention,
subsampling and the encoder stack exclusively on these primitives.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "InsufficientFrames",
    "matmul",
    "softmax_rows",
    "layer_norm",
    "conv1d",
    "conv_output_length",
    "relu",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible; the message names both shapes."""


class InsufficientFrames(ValueError):
    """Fewer input frames than one convolution window; buffer more frames and retry."""


def _f32(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float32)


def matmul(a, b) -> np.ndarray:
    """Standard matrix product of two 2-D arrays, computed in single precision."""
    a = _f32(a)
    b = _f32(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    return a @ b


def softmax_rows(x) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting each row's maximum.

    Rows of all equal values map to the uniform distribution. Fully masked
    rows (uniform -inf) are a caller error and are never produced by this
    package.
    """
    x = _f32(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> np.ndarray:
    """Normalize each row to zero mean / unit variance, then scale by gamma and shift by beta."""
    x = _f32(x)
    gamma = _f32(gamma).reshape(-1)
    beta = _f32(beta).reshape(-1)
    if gamma.shape[0] != x.shape[-1] or beta.shape[0] != x.shape[-1]:
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match row width {x.shape}"
        )
    mean = x.mean(axis=-1, keepdims=True, dtype=np.float32)
    centered = x - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True, dtype=np.float32)
    return centered / np.sqrt(var + np.float32(eps)) * gamma + beta


def conv_output_length(frames: int, width: int, stride: int) -> int:
    """Valid-convolution output length: floor((frames - width) / stride) + 1."""
    if frames < width:
        return 0
    return (frames - width) // stride + 1


def conv1d(x, kernel, stride: int, bias=None) -> np.ndarray:
    """Valid (unpadded) strided 1-D convolution over the frame axis.

    Args:
        x: (frames, in_dim) input.
        kernel: (width, in_dim, out_dim) weights.
        stride: hop between consecutive windows.
        bias: optional (out_dim,) vector added to every output row.

    Returns:
        (floor((frames - width) / stride) + 1, out_dim) array.
    """
    x = _f32(x)
    kernel = _f32(kernel)
    if kernel.ndim != 3:
        raise ShapeError(f"conv1d kernel must be (width, in_dim, out_dim), got {kernel.shape}")
    width, in_dim, out_dim = kernel.shape
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ShapeError(f"conv1d: input {x.shape} does not match kernel {kernel.shape}")
    frames = x.shape[0]
    if frames < width:
        raise InsufficientFrames(
            f"conv1d needs at least {width} frames, got {frames}; buffer more frames"
        )
    out_len = conv_output_length(frames, width, stride)
    out = np.zeros((out_len, out_dim), dtype=np.float32)
    for k in range(width):
        # rows k, k+stride, ... aligned with each output position's k-th tap
        out += x[k : k + (out_len - 1) * stride + 1 : stride] @ kernel[k]
    if bias is not None:
        out += _f32(bias).reshape(1, -1)
    return out


def relu(x) -> np.ndarray:
    return np.maximum(_f32(x), np.float32(0.0))
