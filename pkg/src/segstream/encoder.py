"""Streaming block-processing encoder.

The frame stream is cut into segments denominated in post-subsampling tokens:
segment k owns center tokens [k*c, (k+1)*c) plus up to r lookahead tokens.
Each segment window is subsampled by two strided conv layers (combined factor
4 by default), then runs through a stack of pre-LN attention + feed-forward
layers whose cross-segment memory follows the configured variant. Per-segment
center outputs are concatenated; right-context outputs are lookahead only and
are never emitted.

Context sizes (l, c, r) count tokens after subsampling; the segmenter
converts to raw frames via the subsampling grid, and windows are aligned to
that grid so that incremental feeding reproduces offline results bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import attention as _attention
from .attention import (
    AttentionWeights,
    LayerState,
    RelIndices,
    SegmentLayout,
    augmem_step,
    implicit_step,
    rel_table_indices,
    xl_step,
)
from .kernels import InsufficientFrames, conv1d, conv_output_length, layer_norm, matmul, relu

__all__ = [
    "ConfigError",
    "SubsampleSpec",
    "EncoderConfig",
    "SubsampleWeights",
    "LayerWeights",
    "EncoderWeights",
    "SegmentWindow",
    "init_weights",
    "parse_config_file",
    "token_count",
    "segment_stream",
    "subsample_segment",
    "encoder_layer_forward",
    "StreamingEncoder",
    "encode_utterance",
    "FlopsEstimate",
    "flops_estimate",
]

LN_EPS = 1e-5

Z_TAPS = ("attn_out", "post_residual")


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""


@dataclass(frozen=True)
class SubsampleSpec:
    """Two valid-convolution layers with ReLU, combined subsampling factor = product of strides."""

    widths: tuple[int, int] = (3, 3)
    strides: tuple[int, int] = (2, 2)

    @property
    def factor(self) -> int:
        return self.strides[0] * self.strides[1]

    @property
    def receptive(self) -> int:
        """Frames consumed by one output token."""
        return self.strides[0] * (self.widths[1] - 1) + self.widths[0]


def token_count(frames: int, spec: SubsampleSpec) -> int:
    """Tokens produced from a frame count: floor((n - width) / stride) + 1 per conv layer."""
    n = frames
    for width, stride in zip(spec.widths, spec.strides):
        n = conv_output_length(n, width, stride)
    return n


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 12
    d: int = 256
    heads: int = 4
    layout: SegmentLayout = field(default_factory=lambda: SegmentLayout(32, 64, 32))
    bank_capacity: int = 3
    clip: int = 16
    variant: str = "augmem"
    subsample: SubsampleSpec = field(default_factory=SubsampleSpec)
    ffn_dim: int = 4096
    input_dim: int = 80
    z_tap: str = "attn_out"

    def __post_init__(self):
        if self.variant not in ("augmem", "implicit", "xl"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.d % self.heads != 0:
            raise ConfigError(f"d={self.d} not divisible by heads={self.heads}")
        if self.clip < 0 or self.bank_capacity < 0:
            raise ConfigError("clip and bank_capacity must be >= 0")
        if self.z_tap not in Z_TAPS:
            raise ConfigError(f"z_tap must be one of {Z_TAPS}, got {self.z_tap!r}")
        if self.variant in ("implicit", "xl") and self.bank_capacity != 0:
            # only the memory-bank variant carries banks
            object.__setattr__(self, "bank_capacity", 0)


_CONFIG_KEYS = {
    "num_layers": int,
    "d": int,
    "heads": int,
    "l": int,
    "c": int,
    "r": int,
    "bank_capacity": int,
    "clip": int,
    "variant": str,
    "conv_width": int,
    "conv_stride": int,
    "ffn_dim": int,
    "input_dim": int,
    "z_tap": str,
}


def parse_config_file(path) -> EncoderConfig:
    """Parse a flat key=value config file; every key has a default, unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return config_from_mapping(values)


def config_from_mapping(values: dict) -> EncoderConfig:
    base = EncoderConfig()
    layout = SegmentLayout(
        values.pop("l", base.layout.l),
        values.pop("c", base.layout.c),
        values.pop("r", base.layout.r),
    )
    width = values.pop("conv_width", base.subsample.widths[0])
    stride = values.pop("conv_stride", base.subsample.strides[0])
    sub = SubsampleSpec(widths=(width, width), strides=(stride, stride))
    try:
        return replace(base, layout=layout, subsample=sub, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class SubsampleWeights:
    conv1_w: np.ndarray  # (width, input_dim, d)
    conv1_b: np.ndarray
    conv2_w: np.ndarray  # (width, d, d)
    conv2_b: np.ndarray
    proj: np.ndarray  # (d, d)


@dataclass(frozen=True)
class LayerWeights:
    attn: AttentionWeights
    ffn_w1: np.ndarray  # (d, ffn_dim)
    ffn_w2: np.ndarray  # (ffn_dim, d)
    ln1_gamma: np.ndarray
    ln1_beta: np.ndarray
    ln2_gamma: np.ndarray
    ln2_beta: np.ndarray


@dataclass(frozen=True)
class EncoderWeights:
    subsample: SubsampleWeights
    layers: list[LayerWeights]


def init_weights(config: EncoderConfig, seed: int = 0) -> EncoderWeights:
    """Deterministic seeded initialization: uniform in [-0.1, 0.1] for every
    projection / conv / feed-forward / relative-position weight, identity
    layer norms. Shapes do not depend on the variant, so one seed yields
    bit-identical weights for all variants."""
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape).astype(np.float32)

    d = config.d
    w1, w2 = config.subsample.widths
    sub = SubsampleWeights(
        conv1_w=u(w1, config.input_dim, d),
        conv1_b=u(d),
        conv2_w=u(w2, d, d),
        conv2_b=u(d),
        proj=u(d, d),
    )
    ones = np.ones(d, dtype=np.float32)
    zeros = np.zeros(d, dtype=np.float32)
    layers = []
    for _ in range(config.num_layers):
        attn = AttentionWeights(
            w_q=u(d, d),
            w_k=u(d, d),
            w_v=u(d, d),
            w_o=u(d, d),
            rel_table=u(2 * config.clip + 1, d // config.heads),
            heads=config.heads,
            clip=config.clip,
        )
        layers.append(
            LayerWeights(
                attn=attn,
                ffn_w1=u(d, config.ffn_dim),
                ffn_w2=u(config.ffn_dim, d),
                ln1_gamma=ones.copy(),
                ln1_beta=zeros.copy(),
                ln2_gamma=ones.copy(),
                ln2_beta=zeros.copy(),
            )
        )
    return EncoderWeights(subsample=sub, layers=layers)


@dataclass(frozen=True)
class SegmentWindow:
    """Frame window [start, stop) of one segment plus its effective token counts."""

    index: int
    start: int
    stop: int
    c_eff: int
    r_eff: int
    token_start: int


def _window_stop(token_start: int, tokens: int, spec: SubsampleSpec) -> int:
    return spec.factor * (token_start + tokens - 1) + spec.receptive


def segment_stream(frames, layout: SegmentLayout, spec: SubsampleSpec) -> list[SegmentWindow]:
    """Cut a frame matrix (or frame count) into grid-aligned segment windows.

    Segment k's window starts at frame factor*k*c and is sized so that
    subsampling it yields exactly c_eff center + r_eff lookahead tokens,
    where the final segment may have a short center and an empty right
    context. An input shorter than one token yields no segments.
    """
    total_frames = frames if isinstance(frames, int) else int(np.asarray(frames).shape[0])
    total_tokens = token_count(total_frames, spec)
    windows = []
    k = 0
    while k * layout.c < total_tokens:
        token_start = k * layout.c
        c_eff = min(layout.c, total_tokens - token_start)
        r_eff = min(layout.r, total_tokens - token_start - c_eff)
        start = spec.factor * token_start
        stop = _window_stop(token_start, c_eff + r_eff, spec)
        windows.append(SegmentWindow(k, start, stop, c_eff, r_eff, token_start))
        k += 1
    return windows


def subsample_segment(frames: np.ndarray, weights: SubsampleWeights, spec: SubsampleSpec) -> np.ndarray:
    """Two conv1d+ReLU layers then a linear projection to d columns."""
    if frames.shape[0] < spec.receptive:
        raise InsufficientFrames(
            f"subsampling needs at least {spec.receptive} frames, got {frames.shape[0]}"
        )
    h = relu(conv1d(frames, weights.conv1_w, spec.strides[0], weights.conv1_b))
    h = relu(conv1d(h, weights.conv2_w, spec.strides[1], weights.conv2_b))
    return matmul(h, weights.proj)


def _ffn(x: np.ndarray, lw: LayerWeights) -> np.ndarray:
    return matmul(relu(matmul(x, lw.ffn_w1)), lw.ffn_w2)


def encoder_layer_forward(
    x: np.ndarray,
    state: LayerState,
    lw: LayerWeights,
    config: EncoderConfig,
    c_eff: int,
    r_eff: int,
    rel_idx: np.ndarray | None = None,
    tap=None,
    tap_args: tuple = (),
) -> np.ndarray:
    """One pre-LN layer: x + attention(LN(x)) followed by x + FFN(LN(x)).

    ``x`` holds the [C, R] rows at this layer. Carried context rows are
    normalized with the same pre-attention parameters before projection, and
    the per-variant state update happens here: the memory-bank and xl
    variants cache the current center input tail (taken before this layer
    transforms it), the implicit variant stores the step's new Z rows.
    """
    layout = config.layout
    variant = config.variant
    input_tail = None
    if variant in ("augmem", "xl") and layout.l > 0:
        input_tail = x[max(0, c_eff - layout.l) : c_eff]

    normed = layer_norm(x, lw.ln1_gamma, lw.ln1_beta, LN_EPS)

    def normed_context(cache):
        if cache is None or cache.shape[0] == 0:
            return None
        return layer_norm(cache, lw.ln1_gamma, lw.ln1_beta, LN_EPS)

    if variant == "augmem":
        left = normed_context(state.raw_cache)
        banks = normed_context(state.bank_matrix())
        full = normed if left is None else np.concatenate([left, normed], axis=0)
        out = augmem_step(
            full,
            banks,
            layout,
            lw.attn,
            c_eff=c_eff,
            r_eff=r_eff,
            summarize=config.bank_capacity > 0,
            rel_idx=rel_idx,
        )
        if out.new_bank is not None:
            state.push_bank(out.new_bank[0])
        state.append_raw(input_tail)
    elif variant == "implicit":
        out = implicit_step(
            normed,
            normed_context(state.z_cache),
            layout,
            lw.attn,
            c_eff=c_eff,
            r_eff=r_eff,
            rel_idx=rel_idx,
        )
    else:
        out = xl_step(
            normed,
            normed_context(state.raw_cache),
            layout,
            lw.attn,
            c_eff=c_eff,
            r_eff=r_eff,
            rel_idx=rel_idx,
        )
        state.append_raw(input_tail)

    if tap is not None:
        tap(*tap_args, out)

    x1 = x + np.concatenate([out.center_out, out.right_out], axis=0)
    if variant == "implicit" and layout.l > 0:
        if config.z_tap == "attn_out":
            state.append_z(out.new_z)
        else:
            state.append_z(x1[:c_eff][-min(layout.l, c_eff) :])
    state.segment_index += 1

    x2 = x1 + _ffn(layer_norm(x1, lw.ln2_gamma, lw.ln2_beta, LN_EPS), lw)
    return x2


class StreamingEncoder:
    """Stateful encoder over one stream.

    ``feed`` accepts raw frames incrementally and returns whatever new center
    outputs became available; ``finish`` flushes the short tail. Offline and
    incremental use produce bit-identical outputs because segment windows are
    aligned to the subsampling grid in absolute frame coordinates.

    ``tap``, when given, is called as tap(segment_index, layer_index,
    StepOutput) after every attention sublayer, for inspection and testing.
    """

    def __init__(self, config: EncoderConfig, weights: EncoderWeights | None = None, *, tap=None):
        if weights is None:
            weights = init_weights(config, seed=0)
        if len(weights.layers) != config.num_layers:
            raise ConfigError(
                f"weights carry {len(weights.layers)} layers, config wants {config.num_layers}"
            )
        self.config = config
        self.weights = weights
        self.tap = tap
        self.layer_states = [
            LayerState(config.variant, config.bank_capacity, config.layout.l)
            for _ in range(config.num_layers)
        ]
        self.emitted_tokens = 0
        self._segments_done = 0
        self._buffer = np.zeros((0, config.input_dim), dtype=np.float32)
        self._buffer_start = 0  # absolute index of buffer[0]
        self._finished = False
        self._rel_idx_cache: dict = {}
        self._poison_right: float | None = None  # test hook: sentinel for right-context rows

    # -- streaming interface ------------------------------------------------

    def feed(self, frames: np.ndarray) -> np.ndarray:
        """Append frames; encode and return every segment whose full window is now buffered."""
        if self._finished:
            raise RuntimeError("stream already finished")
        frames = np.asarray(frames, dtype=np.float32)
        if frames.ndim != 2 or frames.shape[1] != self.config.input_dim:
            raise ConfigError(
                f"frames must be (n, {self.config.input_dim}), got {frames.shape}"
            )
        if frames.shape[0]:
            self._buffer = np.concatenate([self._buffer, frames], axis=0)
        layout, spec = self.config.layout, self.config.subsample
        outputs = []
        while True:
            k = self._segments_done
            token_start = k * layout.c
            full_stop = _window_stop(token_start, layout.c + layout.r, spec)
            if self._buffer_start + self._buffer.shape[0] < full_stop:
                break
            window = SegmentWindow(
                k, spec.factor * token_start, full_stop, layout.c, layout.r, token_start
            )
            outputs.append(self._encode_window(window))
        return self._stack_outputs(outputs)

    def finish(self) -> np.ndarray:
        """Flush remaining (possibly short) segments; the stream is closed afterwards."""
        if self._finished:
            raise RuntimeError("stream already finished")
        self._finished = True
        layout, spec = self.config.layout, self.config.subsample
        total_frames = self._buffer_start + self._buffer.shape[0]
        total_tokens = token_count(total_frames, spec)
        outputs = []
        while self._segments_done * layout.c < total_tokens:
            k = self._segments_done
            token_start = k * layout.c
            c_eff = min(layout.c, total_tokens - token_start)
            r_eff = min(layout.r, total_tokens - token_start - c_eff)
            stop = _window_stop(token_start, c_eff + r_eff, spec)
            window = SegmentWindow(k, spec.factor * token_start, stop, c_eff, r_eff, token_start)
            outputs.append(self._encode_window(window))
        return self._stack_outputs(outputs)

    def _encode_window(self, window: SegmentWindow) -> np.ndarray:
        lo = window.start - self._buffer_start
        hi = window.stop - self._buffer_start
        frames = self._buffer[lo:hi]
        out = self.encode_segment(frames, window.c_eff, window.r_eff)
        # buffer shrinks by exactly one center's worth of frames per segment
        drop = self.config.subsample.factor * self.config.layout.c * (window.index + 1)
        keep_from = max(0, drop - self._buffer_start)
        if keep_from:
            self._buffer = self._buffer[keep_from:]
            self._buffer_start += keep_from
        return out

    def _stack_outputs(self, outputs: list[np.ndarray]) -> np.ndarray:
        if not outputs:
            return np.zeros((0, self.config.d), dtype=np.float32)
        return outputs[0] if len(outputs) == 1 else np.concatenate(outputs, axis=0)

    # -- segment pipeline ---------------------------------------------------

    def encode_segment(self, frames: np.ndarray, c_eff: int, r_eff: int) -> np.ndarray:
        """Run one segment window through subsampling and the full layer stack;
        returns the c_eff center output rows."""
        x = subsample_segment(frames, self.weights.subsample, self.config.subsample)
        if x.shape[0] != c_eff + r_eff:
            raise ConfigError(
                f"window produced {x.shape[0]} tokens, expected c_eff+r_eff={c_eff + r_eff}"
            )
        rel_idx = self._rel_indices(c_eff, r_eff)
        seg = self._segments_done
        for i, (lw, state) in enumerate(zip(self.weights.layers, self.layer_states)):
            x = encoder_layer_forward(
                x, state, lw, self.config, c_eff, r_eff,
                rel_idx=rel_idx, tap=self.tap, tap_args=(seg, i),
            )
        if self._poison_right is not None and r_eff:
            x[c_eff:] = np.float32(self._poison_right)
        centers = x[:c_eff]
        self.emitted_tokens += c_eff
        self._segments_done = seg + 1
        return centers

    def _rel_indices(self, c_eff: int, r_eff: int) -> np.ndarray:
        """Rel-table index matrix shared by every layer of the current segment.

        All layers carry the same context/bank row counts, so the matrix only
        depends on the segment signature; cache it per signature.
        """
        cfg = self.config
        state = self.layer_states[0]
        if cfg.variant == "implicit":
            ctx = 0 if state.z_cache is None else state.z_cache.shape[0]
        else:
            ctx = 0 if state.raw_cache is None else state.raw_cache.shape[0]
        n_banks = len(state.banks)
        sigma = cfg.variant == "augmem" and cfg.bank_capacity > 0
        key = (ctx, n_banks, c_eff, r_eff, sigma)
        cached = self._rel_idx_cache.get(key)
        if cached is not None:
            return cached
        seg_pos = np.arange(c_eff + r_eff, dtype=np.int64)
        ctx_pos = np.arange(-ctx, 0, dtype=np.int64)
        if cfg.variant == "augmem":
            qpos = np.concatenate([ctx_pos, seg_pos])
            kpos = np.concatenate(
                [np.full(n_banks, _attention.BANK_POSITION, dtype=np.int64), qpos]
            )
            if sigma:
                qpos = np.concatenate([qpos, [0]])
        else:
            qpos = seg_pos
            kpos = np.concatenate([ctx_pos, seg_pos])
        idx = RelIndices(rel_table_indices(qpos, kpos, cfg.clip))
        self._rel_idx_cache[key] = idx
        return idx


def encode_utterance(
    frames: np.ndarray,
    config: EncoderConfig,
    weights: EncoderWeights | None = None,
    *,
    tap=None,
) -> np.ndarray:
    """Offline encode: segment the whole utterance, run segments in order and
    concatenate the per-segment center outputs. Input shorter than one token
    yields an empty (0, d) output."""
    frames = np.asarray(frames, dtype=np.float32)
    enc = StreamingEncoder(config, weights, tap=tap)
    windows = segment_stream(frames, config.layout, config.subsample)
    outputs = [enc.encode_segment(frames[w.start : w.stop], w.c_eff, w.r_eff) for w in windows]
    return enc._stack_outputs(outputs)


# -- analytical cost model ---------------------------------------------------


@dataclass(frozen=True)
class FlopsEstimate:
    """Per-layer and total multiply-accumulate counts for one configuration.

    The model follows the block-attention cost analysis: the memory-bank
    variant recomputes left-context tokens through its conv and feed-forward
    sublayers (n = l+c+r), while the left-context-free-query variants only
    process n = c+r there. ``qk`` and ``av`` count score and context MACs
    as queries x keys x d with the one-row summarization query left out of
    the query count; the bank rows do appear in the key count.
    """

    variant: str
    qk: int
    av: int
    projections: int
    ffn: int
    conv: int
    num_layers: int

    @property
    def attention_qk_av(self) -> int:
        return self.qk + self.av

    def per_layer(self) -> dict[str, int]:
        return {
            "qk": self.qk,
            "av": self.av,
            "attention_qk_av": self.attention_qk_av,
            "projections": self.projections,
            "ffn": self.ffn,
        }

    def totals(self) -> dict[str, int]:
        t = {k: v * self.num_layers for k, v in self.per_layer().items()}
        t["conv"] = self.conv
        t["total"] = t["attention_qk_av"] + t["projections"] + t["ffn"] + self.conv
        return t


def flops_estimate(config: EncoderConfig) -> FlopsEstimate:
    """Analytical MAC counts per encoder layer plus the conv frontend."""
    l, c, r = config.layout.l, config.layout.c, config.layout.r
    d = config.d
    n_banks = config.bank_capacity if config.variant == "augmem" else 0
    if config.variant == "augmem":
        queries = l + c + r
        keys = n_banks + l + c + r
        sublayer_tokens = l + c + r
        q_rows = queries + (1 if n_banks > 0 else 0)  # sigma row goes through the projections
    else:
        queries = c + r
        keys = l + c + r
        sublayer_tokens = c + r
        q_rows = queries
    qk = queries * keys * d
    av = queries * keys * d
    projections = (2 * q_rows + 2 * keys) * d * d
    ffn = 2 * sublayer_tokens * d * config.ffn_dim
    width = config.subsample.widths[0]
    conv = 2 * width * sublayer_tokens * d * d
    return FlopsEstimate(
        variant=config.variant,
        qk=qk,
        av=av,
        projections=projections,
        ffn=ffn,
        conv=conv,
        num_layers=config.num_layers,
    )
