"""Wait-k read/write scheduling, Average Lagging and synthetic sources.

Average Lagging follows the speech SimulEval convention: delays are measured
in source milliseconds, the ideal per-token delay is src_duration / target
length, and the sum stops at the first target token emitted after the whole
source has been read. This is an external convention, restated here because
the package evaluates latency without a real decoder: WRITE timestamps are
taken at schedule points from a stub writer.

A read "chunk" groups pre_decision_ratio encoder tokens, so one chunk lasts
pre_decision_ratio * subsample_factor * frame_period milliseconds. Right
context is lookahead: a center token only becomes encodable once the READ
supplying its lookahead frames has happened, and that cost is charged to the
supplying READ rather than tracked separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WaitKPolicy",
    "StreamTrace",
    "TraceError",
    "wait_k_schedule",
    "average_lagging",
    "synthetic_source",
    "chunk_duration_ms",
    "write_trace_csv",
    "simulate_wait_k",
    "SimulationResult",
]

WAIT_K_PRESETS = (1, 3, 5, 7)


class TraceError(ValueError):
    """Stream trace violates its invariants or the metric is undefined."""


@dataclass(frozen=True)
class WaitKPolicy:
    """Read k chunks before the first write, then alternate read/write."""

    k: int
    pre_decision_ratio: int = 8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.pre_decision_ratio < 1:
            raise ValueError(f"pre_decision_ratio must be >= 1, got {self.pre_decision_ratio}")

    def reads_before(self, t: int, src_chunks: int) -> int:
        """Chunks read before target token t (1-based) is written."""
        return min(self.k + t - 1, src_chunks)


@dataclass
class StreamTrace:
    """Ordered READ/WRITE actions plus the per-target-token source delays."""

    actions: list[str]
    delays: list[float]
    src_duration_ms: float
    src_token_count: int
    tgt_token_count: int

    def validate(self) -> None:
        if self.tgt_token_count < 1 or not self.delays:
            raise TraceError("empty trace: Average Lagging is undefined")
        if len(self.delays) != self.tgt_token_count:
            raise TraceError(
                f"{len(self.delays)} delays for {self.tgt_token_count} target tokens"
            )
        if self.actions.count("READ") != self.src_token_count:
            raise TraceError("READ count must equal the source chunk count")
        if self.actions.count("WRITE") != self.tgt_token_count:
            raise TraceError("WRITE count must equal the target token count")
        prev = 0.0
        for d in self.delays:
            if d < prev:
                raise TraceError("delays must be non-decreasing")
            if d > self.src_duration_ms + 1e-9:
                raise TraceError(
                    f"delay {d} ms exceeds the source duration {self.src_duration_ms} ms"
                )
            prev = d


def wait_k_schedule(
    policy: WaitKPolicy, src_chunks: int, tgt_tokens: int, chunk_duration_ms: float
) -> StreamTrace:
    """Interleave READ/WRITE actions for a wait-k run over uniform chunks.

    Target token t is written once min(k + t - 1, src_chunks) chunks have been
    read; any source chunks not needed by the last write are read afterwards.
    """
    if src_chunks < 1 or tgt_tokens < 1:
        raise ValueError("need at least one source chunk and one target token")
    actions: list[str] = []
    delays: list[float] = []
    reads = 0
    for t in range(1, tgt_tokens + 1):
        goal = policy.reads_before(t, src_chunks)
        while reads < goal:
            actions.append("READ")
            reads += 1
        actions.append("WRITE")
        delays.append(reads * chunk_duration_ms)
    while reads < src_chunks:
        actions.append("READ")
        reads += 1
    return StreamTrace(
        actions=actions,
        delays=delays,
        src_duration_ms=src_chunks * chunk_duration_ms,
        src_token_count=src_chunks,
        tgt_token_count=tgt_tokens,
    )


def average_lagging(trace: StreamTrace) -> float:
    """Mean excess delay in ms over an ideally synchronized writer.

    AL = (1/tau) * sum_{i<=tau} (d_i - (i-1) * T / |y|), where tau is the
    index of the first target token emitted after the full source was read,
    or |y| if none was.
    """
    trace.validate()
    T = float(trace.src_duration_ms)
    y = trace.tgt_token_count
    per_token = T / y
    tau = y
    for i, d in enumerate(trace.delays, start=1):
        if d >= T - 1e-9:
            tau = i
            break
    total = 0.0
    for i in range(1, tau + 1):
        total += trace.delays[i - 1] - (i - 1) * per_token
    return total / tau


def chunk_duration_ms(policy: WaitKPolicy, frame_period_ms: float, subsample_factor: int) -> float:
    """Wall-clock length of one read chunk: ratio tokens of factor frames each."""
    return policy.pre_decision_ratio * subsample_factor * frame_period_ms


def synthetic_source(
    seed: int, duration_ms: float, frame_period_ms: float = 10.0, input_dim: int = 80
) -> np.ndarray:
    """Deterministic pseudo-random feature frames in [-1, 1], floor(duration/period) rows."""
    if duration_ms <= 0:
        raise ValueError(f"duration must be positive, got {duration_ms}")
    frames = int(duration_ms // frame_period_ms)
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(frames, input_dim)).astype(np.float32)


def write_trace_csv(trace: StreamTrace, path) -> None:
    """Trace export: action_index, action, elapsed_src_ms per action row."""
    chunk_ms = trace.src_duration_ms / trace.src_token_count
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["action_index", "action", "elapsed_src_ms"])
        reads = writes = 0
        for i, action in enumerate(trace.actions):
            if action == "READ":
                reads += 1
                elapsed = reads * chunk_ms
            else:
                writes += 1
                elapsed = trace.delays[writes - 1]
            writer.writerow([i, action, repr(float(elapsed))])


@dataclass
class SimulationResult:
    trace: StreamTrace
    al_ms: float
    encoded_tokens: int
    src_chunks: int
    chunk_ms: float
    details: dict = field(default_factory=dict)


def simulate_wait_k(
    config,
    policy: WaitKPolicy,
    duration_ms: float,
    seed: int = 0,
    frame_period_ms: float = 10.0,
    tgt_tokens: int | None = None,
    weights=None,
) -> SimulationResult:
    """Drive the streaming encoder under a wait-k policy with a stub writer.

    The synthetic source is cut into chunks of pre_decision_ratio tokens; each
    READ feeds one chunk's frames to the encoder. The stub writer emits one
    target token per schedule point (|y| = |x| unless tgt_tokens is given),
    and Average Lagging is computed from the schedule delays.
    """
    from .encoder import StreamingEncoder

    frames = synthetic_source(seed, duration_ms, frame_period_ms, config.input_dim)
    factor = config.subsample.factor
    chunk_frames = policy.pre_decision_ratio * factor
    src_chunks = max(1, frames.shape[0] // chunk_frames)
    chunk_ms = chunk_duration_ms(policy, frame_period_ms, factor)
    if tgt_tokens is None:
        tgt_tokens = src_chunks
    trace = wait_k_schedule(policy, src_chunks, tgt_tokens, chunk_ms)

    encoder = StreamingEncoder(config, weights)
    encoded = 0
    fed = 0
    for action in trace.actions:
        if action == "READ":
            chunk = frames[fed * chunk_frames : (fed + 1) * chunk_frames]
            encoded += encoder.feed(chunk).shape[0]
            fed += 1
    encoded += encoder.finish().shape[0]
    return SimulationResult(
        trace=trace,
        al_ms=average_lagging(trace),
        encoded_tokens=encoded,
        src_chunks=src_chunks,
        chunk_ms=chunk_ms,
        details={"frames": frames.shape[0], "frame_period_ms": frame_period_ms},
    )
