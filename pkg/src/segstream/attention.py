"""Scaled multi-head attention with clipped relative positions and the three
segment-attention memory variants.

A segment is laid out as left context L, center context C and right
(lookahead) context R. Cross-segment memory is carried per layer in one of
three forms:

* ``augmem``   - a bounded queue of memory-bank rows (each the attention
  output of a summarization query that averages the segment) is prepended to
  keys/values, and the cached left-context rows are also part of the queries.
* ``implicit`` - the tail of the previous segments' center attention output
  (Z) is prepended to keys/values only; queries cover just [C, R].
* ``xl``       - like ``implicit`` but the carried rows are the raw
  center-context layer inputs of previous segments rather than attention
  output.

All step functions are pure: they consume rows that the caller has already
layer-normalized (the carried context rows are normalized with the same
pre-attention parameters as [C, R]) and return new state components without
mutating anything. LayerState owns the queue/trim semantics; the encoder
decides when to push.

Position convention: the first center token of the current segment sits at
position 0, carried context rows occupy -z .. -1, and memory-bank rows sit at
BANK_POSITION, far enough left that their clipped offset is always -clip.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .kernels import ShapeError, matmul, softmax_rows

__all__ = [
    "BANK_POSITION",
    "SegmentLayout",
    "AttentionWeights",
    "LayerState",
    "StepOutput",
    "rel_table_indices",
    "RelIndices",
    "relative_position_bias",
    "split_heads",
    "merge_heads",
    "multi_head_attention",
    "summarization_query",
    "augmem_step",
    "implicit_step",
    "xl_step",
]

# Sentinel key position for memory banks: maximally distant left, so the
# clipped relative offset is -clip for every in-segment query.
BANK_POSITION = -(1 << 30)

VARIANTS = ("augmem", "implicit", "xl")


@dataclass(frozen=True)
class SegmentLayout:
    """Per-segment context sizes in post-subsampling tokens."""

    l: int
    c: int
    r: int

    def __post_init__(self):
        if self.l < 0 or self.r < 0:
            raise ValueError(f"left/right context must be >= 0, got l={self.l}, r={self.r}")
        if self.c < 1:
            raise ValueError(f"center context must be >= 1, got c={self.c}")

    @property
    def s(self) -> int:
        return self.l + self.c + self.r


@dataclass(frozen=True)
class AttentionWeights:
    """Per-layer projection matrices and the shared relative-position table.

    rel_table has 2*clip+1 rows of width d/heads; row clip is the zero-offset
    embedding. Heads split the projected features into contiguous blocks.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    rel_table: np.ndarray
    heads: int
    clip: int

    def __post_init__(self):
        d = self.w_q.shape[0]
        for name in ("w_q", "w_k", "w_v", "w_o"):
            w = getattr(self, name)
            if w.shape != (d, d):
                raise ShapeError(f"{name} must be ({d}, {d}), got {w.shape}")
        if d % self.heads != 0:
            raise ValueError(f"hidden size {d} not divisible by {self.heads} heads")
        expected = (2 * self.clip + 1, d // self.heads)
        if self.rel_table.shape != expected:
            raise ShapeError(f"rel_table must be {expected}, got {self.rel_table.shape}")

    @property
    def d(self) -> int:
        return self.w_q.shape[0]

    @property
    def head_dim(self) -> int:
        return self.w_q.shape[0] // self.heads


@dataclass
class StepOutput:
    """Attention-sublayer outputs of one variant step (post output-projection,
    pre-residual)."""

    center_out: np.ndarray
    right_out: np.ndarray
    new_bank: np.ndarray | None = None
    new_z: np.ndarray | None = None
    attn: np.ndarray | None = None  # (heads, queries, keys) softmax weights


@dataclass
class LayerState:
    """Cross-segment carry for one encoder layer.

    ``banks`` is a bounded queue (oldest evicted first). ``z_cache`` and
    ``raw_cache`` accumulate the newest rows across segments and are trimmed
    to the last ``left_limit`` rows, so after k segments they hold
    min(left_limit, tokens seen so far) rows. The memory-bank variant uses
    ``banks`` together with ``raw_cache`` (its recomputed left context);
    ``implicit`` uses only ``z_cache``; ``xl`` only ``raw_cache``.
    """

    variant: str
    bank_capacity: int = 0
    left_limit: int = 0
    banks: deque = field(default_factory=deque)
    z_cache: np.ndarray | None = None
    raw_cache: np.ndarray | None = None
    segment_index: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")

    def push_bank(self, row: np.ndarray) -> None:
        if self.bank_capacity <= 0:
            raise ValueError("push_bank called with bank_capacity 0")
        self.banks.append(np.asarray(row, dtype=np.float32).reshape(-1))
        while len(self.banks) > self.bank_capacity:
            self.banks.popleft()

    def bank_matrix(self) -> np.ndarray | None:
        if not self.banks:
            return None
        return np.stack(list(self.banks))

    def append_z(self, rows: np.ndarray | None) -> None:
        self.z_cache = self._appended(self.z_cache, rows)

    def append_raw(self, rows: np.ndarray | None) -> None:
        self.raw_cache = self._appended(self.raw_cache, rows)

    def _appended(self, cache, rows):
        if self.left_limit <= 0 or rows is None or rows.shape[0] == 0:
            return cache
        merged = rows if cache is None else np.concatenate([cache, rows], axis=0)
        return merged[-self.left_limit :]


def rel_table_indices(query_positions, key_positions, clip: int) -> np.ndarray:
    """Clipped relative offsets mapped to rel_table row indices.

    index[q, k] = clamp(key_pos - query_pos, -clip, clip) + clip, so index
    clip is the zero-offset row.
    """
    q = np.asarray(query_positions, dtype=np.int64).reshape(-1, 1)
    k = np.asarray(key_positions, dtype=np.int64).reshape(1, -1)
    return (np.clip(k - q, -clip, clip) + clip).astype(np.intp)


class RelIndices:
    """A rel_table index matrix plus the memoized flat gather index.

    The flat index into the (heads * queries, table_rows) score block is the
    same for every layer of a segment, so callers that reuse one RelIndices
    across layers pay the index construction once.
    """

    __slots__ = ("table_idx", "_flat", "_flat_shape")

    def __init__(self, table_idx: np.ndarray):
        self.table_idx = table_idx
        self._flat = None
        self._flat_shape = None

    def flat(self, heads: int, table_rows: int) -> np.ndarray:
        nq, nk = self.table_idx.shape
        shape = (heads, nq, table_rows)
        if self._flat_shape != shape:
            base = (np.arange(heads * nq, dtype=np.intp) * table_rows).reshape(heads, nq, 1)
            self._flat = base + self.table_idx[None, :, :]
            self._flat_shape = shape
        return self._flat


def relative_position_bias(
    q_heads: np.ndarray,
    query_positions,
    key_positions,
    rel_table: np.ndarray,
    clip: int,
    indices: np.ndarray | RelIndices | None = None,
) -> np.ndarray:
    """Per-head additive logit bias: bias[h, q, k] = q_heads[h, q] . rel_table[index[q, k]].

    ``indices`` may be precomputed (rel_table_indices output or a RelIndices
    wrapper); positions are then ignored. The bias is added to the scaled
    content logits as-is.
    """
    if indices is None:
        indices = rel_table_indices(query_positions, key_positions, clip)
    if not isinstance(indices, RelIndices):
        indices = RelIndices(indices)
    scores = q_heads @ np.asarray(rel_table, dtype=np.float32).T  # (heads, nq, 2*clip+1)
    heads, nq, table_rows = scores.shape
    flat = np.ascontiguousarray(scores).reshape(-1)
    return np.take(flat, indices.flat(heads, table_rows))


def split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    """(n, d) -> (heads, n, d / heads), contiguous feature blocks per head."""
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(1, 0, 2)


def merge_heads(x: np.ndarray) -> np.ndarray:
    heads, n, head_dim = x.shape
    return x.transpose(1, 0, 2).reshape(n, heads * head_dim)


def _attend(q_heads, k_heads, v_heads, w_o, bias=None, scale=None):
    """softmax(Q Kᵀ / sqrt(head_dim) + bias) V per head, merged and projected by w_o."""
    head_dim = q_heads.shape[2]
    nk = k_heads.shape[1]
    if scale is None:
        scale = np.float32(1.0 / np.sqrt(head_dim))
    scores = (q_heads @ k_heads.transpose(0, 2, 1)) * scale
    if bias is not None:
        scores = scores + bias
    attn = softmax_rows(scores.reshape(-1, nk)).reshape(scores.shape)
    context = attn @ v_heads
    out = matmul(merge_heads(context), w_o)
    return out, attn


def multi_head_attention(
    queries: np.ndarray,
    keys: np.ndarray,
    values: np.ndarray,
    weights: AttentionWeights,
    bias: np.ndarray | None = None,
    return_attn: bool = False,
):
    """Dense multi-head attention over explicit query/key/value input rows.

    All inputs have d columns and are projected by the layer's W_q / W_k /
    W_v; ``bias`` is an optional (heads, queries, keys) matrix added to the
    scaled logits. Returns the (queries, d) output, plus the softmax weights
    when ``return_attn`` is set.
    """
    d = weights.d
    for name, x in (("queries", queries), ("keys", keys), ("values", values)):
        if x.ndim != 2 or x.shape[1] != d:
            raise ShapeError(f"{name} must be (n, {d}), got {x.shape}")
    if keys.shape[0] != values.shape[0]:
        raise ShapeError(f"keys {keys.shape} and values {values.shape} disagree on row count")
    q_heads = split_heads(matmul(queries, weights.w_q), weights.heads)
    k_heads = split_heads(matmul(keys, weights.w_k), weights.heads)
    v_heads = split_heads(matmul(values, weights.w_v), weights.heads)
    out, attn = _attend(q_heads, k_heads, v_heads, weights.w_o, bias)
    return (out, attn) if return_attn else out


def summarization_query(segment_rows: np.ndarray) -> np.ndarray:
    """Mean over all rows of the (already normalized) segment input, as a 1 x d row."""
    segment_rows = np.asarray(segment_rows, dtype=np.float32)
    if segment_rows.ndim != 2 or segment_rows.shape[0] == 0:
        raise ValueError(f"summarization_query needs a non-empty 2-D segment, got {segment_rows.shape}")
    return segment_rows.mean(axis=0, keepdims=True, dtype=np.float32)


def _context_positions(n: int) -> np.ndarray:
    return np.arange(-n, 0, dtype=np.int64)


def _segment_positions(c_eff: int, r_eff: int) -> np.ndarray:
    return np.arange(c_eff + r_eff, dtype=np.int64)


def _variant_attend(x_q, x_kv, qpos, kpos, weights, rel_idx=None):
    q_heads = split_heads(matmul(x_q, weights.w_q), weights.heads)
    k_heads = split_heads(matmul(x_kv, weights.w_k), weights.heads)
    v_heads = split_heads(matmul(x_kv, weights.w_v), weights.heads)
    bias = relative_position_bias(q_heads, qpos, kpos, weights.rel_table, weights.clip, indices=rel_idx)
    return _attend(q_heads, k_heads, v_heads, weights.w_o, bias)


def augmem_step(
    layer_input: np.ndarray,
    banks: np.ndarray | None,
    layout: SegmentLayout,
    weights: AttentionWeights,
    *,
    c_eff: int | None = None,
    r_eff: int | None = None,
    summarize: bool = True,
    rel_idx: np.ndarray | None = None,
) -> StepOutput:
    """Memory-bank attention step.

    ``layer_input`` holds the normalized [L, C, R] rows; the left row count is
    inferred as ``len(layer_input) - c_eff - r_eff``. Queries cover
    [L, C, R, sigma] (sigma only when ``summarize``); keys/values cover
    [banks, L, C, R]. The left rows' outputs are discarded; sigma's output row
    is returned as ``new_bank`` for the caller to push into the bank queue.
    """
    c_eff = layout.c if c_eff is None else c_eff
    r_eff = layout.r if r_eff is None else r_eff
    l_eff = layer_input.shape[0] - c_eff - r_eff
    if l_eff < 0:
        raise ShapeError(
            f"layer_input has {layer_input.shape[0]} rows, fewer than c_eff+r_eff={c_eff + r_eff}"
        )
    seg_pos = _segment_positions(c_eff, r_eff)
    left_pos = _context_positions(l_eff)
    qpos = np.concatenate([left_pos, seg_pos])
    kpos = qpos
    x_q = layer_input
    if summarize:
        sigma = summarization_query(layer_input)
        x_q = np.concatenate([layer_input, sigma], axis=0)
        qpos = np.concatenate([qpos, [0]])
    n_banks = 0
    x_kv = layer_input
    if banks is not None and banks.shape[0] > 0:
        n_banks = banks.shape[0]
        x_kv = np.concatenate([banks, layer_input], axis=0)
        kpos = np.concatenate([np.full(n_banks, BANK_POSITION, dtype=np.int64), kpos])
    out, attn = _variant_attend(x_q, x_kv, qpos, kpos, weights, rel_idx)
    center_out = out[l_eff : l_eff + c_eff]
    right_out = out[l_eff + c_eff : l_eff + c_eff + r_eff]
    new_bank = out[-1:] if summarize else None
    return StepOutput(center_out=center_out, right_out=right_out, new_bank=new_bank, attn=attn)


def implicit_step(
    layer_input: np.ndarray,
    context: np.ndarray | None,
    layout: SegmentLayout,
    weights: AttentionWeights,
    *,
    c_eff: int | None = None,
    r_eff: int | None = None,
    rel_idx: np.ndarray | None = None,
) -> StepOutput:
    """Implicit-memory attention step.

    ``layer_input`` holds only the normalized [C, R] rows; ``context`` holds
    the normalized carried Z rows (previous segments' center attention
    output). Queries cover [C, R], keys/values cover [Z, C, R]. ``new_z`` is
    the last min(l, c_eff) rows of the center attention output, taken after
    the output projection and before the residual.
    """
    out, attn, c_eff, r_eff = _left_context_attend(
        layer_input, context, weights, c_eff, r_eff, layout, rel_idx
    )
    center_out = out[:c_eff]
    new_z = None
    if layout.l > 0:
        new_z = center_out[-min(layout.l, c_eff) :]
    return StepOutput(
        center_out=center_out,
        right_out=out[c_eff : c_eff + r_eff],
        new_z=new_z,
        attn=attn,
    )


def xl_step(
    layer_input: np.ndarray,
    context: np.ndarray | None,
    layout: SegmentLayout,
    weights: AttentionWeights,
    *,
    c_eff: int | None = None,
    r_eff: int | None = None,
    rel_idx: np.ndarray | None = None,
) -> StepOutput:
    """Raw left-context attention step (Transformer-XL style).

    Identical attention structure to implicit_step, but ``context`` holds the
    normalized raw center-context inputs of previous segments at this layer;
    the caller caches the current segment's center input tail itself.
    """
    out, attn, c_eff, r_eff = _left_context_attend(
        layer_input, context, weights, c_eff, r_eff, layout, rel_idx
    )
    return StepOutput(
        center_out=out[:c_eff],
        right_out=out[c_eff : c_eff + r_eff],
        attn=attn,
    )


def _left_context_attend(layer_input, context, weights, c_eff, r_eff, layout, rel_idx):
    c_eff = layout.c if c_eff is None else c_eff
    r_eff = layout.r if r_eff is None else r_eff
    if layer_input.shape[0] != c_eff + r_eff:
        raise ShapeError(
            f"layer_input must hold the [C, R] rows only: expected {c_eff + r_eff}, got {layer_input.shape[0]}"
        )
    qpos = _segment_positions(c_eff, r_eff)
    if context is not None and context.shape[0] > 0:
        x_kv = np.concatenate([context, layer_input], axis=0)
        kpos = np.concatenate([_context_positions(context.shape[0]), qpos])
    else:
        x_kv = layer_input
        kpos = qpos
    out, attn = _variant_attend(layer_input, x_kv, qpos, kpos, weights, rel_idx)
    return out, attn, c_eff, r_eff
