"""Wait-k scheduling and Average Lagging over a synthetic source.

One read chunk groups pre_decision_ratio encoder tokens, so with the default
factor-4 subsampling and 10 ms frames a chunk lasts 8 * 4 * 10 = 320 ms.
With uniform chunks and as many target tokens as chunks, AL collapses to the
closed form k * chunk duration; the demo also drives the real encoder under
the schedule and exports one trace as CSV.
"""

from segstream import (
    EncoderConfig,
    SegmentLayout,
    WaitKPolicy,
    average_lagging,
    simulate_wait_k,
    wait_k_schedule,
    write_trace_csv,
)


def main():
    chunk_ms = 320.0
    chunks = 12
    print("schedule for wait-1 over 3 chunks / 3 tokens:",
          " ".join(a[0] for a in wait_k_schedule(WaitKPolicy(1), 3, 3, chunk_ms).actions))
    print()
    print(f"{'policy':>8} {'AL (ms)':>10} {'closed form k*u':>16}")
    for k in (1, 3, 5, 7):
        trace = wait_k_schedule(WaitKPolicy(k), chunks, chunks, chunk_ms)
        print(f"{'wait-' + str(k):>8} {average_lagging(trace):>10.0f} {k * chunk_ms:>16.0f}")

    cfg = EncoderConfig(
        num_layers=2, d=16, heads=2, layout=SegmentLayout(4, 8, 4),
        bank_capacity=0, clip=4, variant="implicit", ffn_dim=32, input_dim=6,
    )
    print()
    print("driving the streaming encoder under wait-3 (stub writer):")
    result = simulate_wait_k(cfg, WaitKPolicy(3), duration_ms=8000.0, seed=3,
                             frame_period_ms=10.0)
    print(f"  {result.src_chunks} chunks of {result.chunk_ms:.0f} ms,"
          f" {result.encoded_tokens} encoder tokens, AL = {result.al_ms:.0f} ms")
    write_trace_csv(result.trace, "wait3_trace.csv")
    print("  wrote wait3_trace.csv (action_index, action, elapsed_src_ms)")


if __name__ == "__main__":
    main()
