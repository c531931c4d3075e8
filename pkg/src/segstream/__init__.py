"""segstream: streaming block-processing encoder with three cross-validated
segment-attention memory variants, a wait-k latency harness and a
forward-pass microbenchmark."""

from .attention import (
    BANK_POSITION,
    AttentionWeights,
    LayerState,
    SegmentLayout,
    StepOutput,
    augmem_step,
    implicit_step,
    multi_head_attention,
    rel_table_indices,
    relative_position_bias,
    summarization_query,
    xl_step,
)
from .bench import BenchRow, BenchSpec, flops_table, rows_from_csv, rows_to_csv, run_bench
from .encoder import (
    ConfigError,
    EncoderConfig,
    EncoderWeights,
    FlopsEstimate,
    LayerWeights,
    StreamingEncoder,
    SubsampleSpec,
    SubsampleWeights,
    encode_utterance,
    flops_estimate,
    init_weights,
    parse_config_file,
    segment_stream,
    subsample_segment,
    token_count,
)
from .harness import (
    StreamTrace,
    WaitKPolicy,
    average_lagging,
    chunk_duration_ms,
    simulate_wait_k,
    synthetic_source,
    wait_k_schedule,
    write_trace_csv,
)
from .kernels import InsufficientFrames, ShapeError, conv1d, layer_norm, matmul, softmax_rows
from .tensor_io import load_weight_manifest, read_tensor, save_weight_manifest, write_tensor

__version__ = "0.1.0"
