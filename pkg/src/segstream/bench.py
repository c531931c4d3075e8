"""Forward-pass timing benchmark and the analytical complexity table.

The timed quantity is one full segment pipeline step (subsampling plus the
whole layer stack) with warm cross-segment state: warmup segments populate
the caches and bank queue, then each timed run processes the next segment of
the same seeded synthetic stream. All variants at a given seed process
bit-identical frame windows with bit-identical weights, so rows differ only
in the attention variant and left-context size.

Timing hygiene: monotonic nanosecond clock, BLAS pinned to one thread for
the duration of the run, garbage collector paused around the timed loop.
"""

from __future__ import annotations

import csv
import gc
import os
import statistics
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .encoder import (
    EncoderConfig,
    SegmentLayout,
    StreamingEncoder,
    flops_estimate,
    init_weights,
    segment_stream,
)
from .harness import synthetic_source

__all__ = [
    "BenchSpec",
    "BenchRow",
    "BENCH_VARIANTS",
    "run_bench",
    "bench_workload",
    "rows_to_csv",
    "rows_from_csv",
    "flops_table",
    "flops_table_to_csv",
]

BENCH_VARIANTS = ("augmem", "augmem_no_banks", "implicit")

_DEFAULT_LEFT_SIZES = (0, 16, 32, 64, 96, 128)


@dataclass(frozen=True)
class BenchSpec:
    variants: tuple[str, ...] = BENCH_VARIANTS
    left_sizes: tuple[int, ...] = _DEFAULT_LEFT_SIZES
    c: int = 64
    r: int = 32
    repeats: int = 10
    warmup: int = 3
    d: int = 256
    heads: int = 4
    layers: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 3:
            raise ValueError(f"repeats must be >= 3, got {self.repeats}")
        if not self.left_sizes:
            raise ValueError("left_sizes must be non-empty")
        if list(self.left_sizes) != sorted(self.left_sizes):
            raise ValueError(f"left_sizes must be sorted ascending, got {self.left_sizes}")
        for v in self.variants:
            if v not in BENCH_VARIANTS:
                raise ValueError(f"unknown bench variant {v!r}, expected one of {BENCH_VARIANTS}")


@dataclass
class BenchRow:
    variant: str
    l: int
    mean_ms: float
    stddev_ms: float
    runs: list[float]
    timer_warning: bool = False

    def validate(self) -> None:
        if not (min(self.runs) <= self.mean_ms <= max(self.runs)):
            raise ValueError("mean outside the run range")
        if self.stddev_ms < 0:
            raise ValueError("negative stddev")


def _bank_capacity_for_rows(base: EncoderConfig) -> int:
    """Bank capacity of the with-banks rows: the base config's own value when
    it describes the memory-bank variant, the stock default otherwise (the
    contextual variants force their capacity to zero)."""
    if base.variant == "augmem":
        return base.bank_capacity
    return EncoderConfig().bank_capacity


def bench_config(spec: BenchSpec, variant: str, l: int, base: EncoderConfig | None = None) -> EncoderConfig:
    """Concrete encoder config for one bench row."""
    base = base or EncoderConfig()
    layout = SegmentLayout(l, spec.c, spec.r)
    if variant == "augmem":
        return replace(base, variant="augmem", layout=layout, d=spec.d,
                       heads=spec.heads, num_layers=spec.layers,
                       bank_capacity=_bank_capacity_for_rows(base))
    if variant == "augmem_no_banks":
        return replace(base, variant="augmem", layout=layout, d=spec.d,
                       heads=spec.heads, num_layers=spec.layers, bank_capacity=0)
    return replace(base, variant="implicit", layout=layout, d=spec.d,
                   heads=spec.heads, num_layers=spec.layers, bank_capacity=0)


def bench_workload(spec: BenchSpec, base: EncoderConfig | None = None):
    """Seeded frames, segment windows and weights shared by every bench row."""
    base = base or EncoderConfig()
    cfg = bench_config(spec, spec.variants[0], spec.left_sizes[0], base)
    segments_needed = spec.warmup + spec.repeats
    frames_needed = cfg.subsample.factor * (segments_needed * spec.c + spec.r) + cfg.subsample.receptive
    frames = synthetic_source(
        spec.seed, duration_ms=frames_needed * 10.0, frame_period_ms=10.0, input_dim=cfg.input_dim
    )
    windows = segment_stream(frames, cfg.layout, cfg.subsample)
    if len(windows) < segments_needed:
        raise RuntimeError("synthetic source too short for the requested warmup + repeats")
    weights = init_weights(cfg, spec.seed)
    return frames, windows[:segments_needed], weights


@contextmanager
def _pinned_cpu():
    """Pin the process to one CPU while timing, where the platform allows."""
    try:
        before = os.sched_getaffinity(0)
    except AttributeError:  # platform without affinity control
        yield
        return
    try:
        os.sched_setaffinity(0, {min(before)})
    except OSError:
        yield
        return
    try:
        yield
    finally:
        os.sched_setaffinity(0, before)


def run_bench(spec: BenchSpec, base: EncoderConfig | None = None, progress=None) -> list[BenchRow]:
    """Time every (variant, left size) pair in the sweep; returns one row each.

    Every row keeps its own encoder whose cross-segment state stays warm for
    the whole sweep. Warmup passes (discarded) and the ``repeats`` timed
    passes are interleaved round-robin across rows: machine-load drift then
    shifts all rows by the same amount instead of corrupting whichever row
    happened to run during a busy stretch, which is what the between-row
    comparisons care about. Each row's mean is still the average of its own
    ``repeats`` single-segment forward passes.
    """
    base = base or EncoderConfig()
    frames, windows, weights = bench_workload(spec, base)
    resolution_ms = time.get_clock_info("perf_counter").resolution * 1e3
    keys = [(variant, l) for l in spec.left_sizes for variant in spec.variants]
    rows: list[BenchRow] = []
    with threadpool_limits(limits=1), _pinned_cpu():
        encoders = {
            key: StreamingEncoder(bench_config(spec, key[0], key[1], base), weights)
            for key in keys
        }
        # warmup (also serves as the process ramp: CPU frequency, allocator, BLAS)
        for w in windows[: spec.warmup]:
            seg = frames[w.start : w.stop]
            for key in keys:
                encoders[key].encode_segment(seg, w.c_eff, w.r_eff)
        runs: dict[tuple, list[float]] = {key: [] for key in keys}
        order_rng = np.random.default_rng(spec.seed + 0x5EED)
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            for w in windows[spec.warmup : spec.warmup + spec.repeats]:
                seg = frames[w.start : w.stop]
                # shuffle the row order per repeat so a load burst cannot
                # systematically land on the same rows every time
                for j in order_rng.permutation(len(keys)):
                    key = keys[j]
                    enc = encoders[key]
                    t0 = time.perf_counter_ns()
                    enc.encode_segment(seg, w.c_eff, w.r_eff)
                    runs[key].append((time.perf_counter_ns() - t0) / 1e6)
        finally:
            if gc_was_enabled:
                gc.enable()
    for variant, l in keys:
        data = runs[(variant, l)]
        mean = statistics.fmean(data)
        row = BenchRow(
            variant=variant,
            l=l,
            mean_ms=mean,
            stddev_ms=statistics.stdev(data) if len(data) > 1 else 0.0,
            runs=data,
            timer_warning=resolution_ms > 0.01 * mean,
        )
        row.validate()
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


# -- CSV ----------------------------------------------------------------------


def rows_to_csv(rows: list[BenchRow], path) -> None:
    """Write bench rows; floats use repr so parsing the file reproduces them exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "l", "mean_ms", "stddev_ms", "timer_warning", "runs_ms"])
        for row in rows:
            writer.writerow([
                row.variant,
                row.l,
                repr(row.mean_ms),
                repr(row.stddev_ms),
                int(row.timer_warning),
                ";".join(repr(x) for x in row.runs),
            ])


def rows_from_csv(path) -> list[BenchRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                BenchRow(
                    variant=rec["variant"],
                    l=int(rec["l"]),
                    mean_ms=float(rec["mean_ms"]),
                    stddev_ms=float(rec["stddev_ms"]),
                    runs=[float(x) for x in rec["runs_ms"].split(";")],
                    timer_warning=bool(int(rec["timer_warning"])),
                )
            )
    return rows


# -- complexity table ----------------------------------------------------------


_FLOPS_TERMS = ("qk", "av", "attention_qk_av", "projections", "ffn", "conv", "total")


def flops_table(
    left_sizes=_DEFAULT_LEFT_SIZES, base: EncoderConfig | None = None
) -> list[dict]:
    """Per-variant MAC counts and memory-bank/implicit ratios for each left size.

    Layer terms (qk, av, attention_qk_av, projections, ffn) are per layer;
    conv is the frontend total; total sums all layers plus the frontend.
    """
    base = base or EncoderConfig()
    table: list[dict] = []
    for l in left_sizes:
        layout = SegmentLayout(l, base.layout.c, base.layout.r)
        per_variant = {}
        for variant, capacity in (
            ("augmem", _bank_capacity_for_rows(base)),
            ("augmem_no_banks", 0),
            ("implicit", 0),
        ):
            cfg = replace(
                base,
                variant="augmem" if variant.startswith("augmem") else "implicit",
                layout=layout,
                bank_capacity=capacity,
            )
            est = flops_estimate(cfg)
            values = est.per_layer()
            values["conv"] = est.conv
            values["total"] = est.totals()["total"]
            per_variant[variant] = values
            table.append({"variant": variant, "l": l, **{t: values[t] for t in _FLOPS_TERMS}})
        ratios = {
            t: per_variant["augmem"][t] / per_variant["implicit"][t] for t in _FLOPS_TERMS
        }
        table.append({"variant": "augmem/implicit", "l": l, **ratios})
    return table


def flops_table_to_csv(table: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "l", *_FLOPS_TERMS])
        for row in table:
            rec = [row["variant"], row["l"]]
            for term in _FLOPS_TERMS:
                value = row[term]
                rec.append(repr(float(value)) if isinstance(value, float) else value)
            writer.writerow(rec)
