"""Command-line entry point.

Subcommands: ``verify`` (property suites), ``bench`` (forward-pass time vs
left-context size), ``flops`` (analytical complexity table), ``simulate``
(wait-k run with Average Lagging) and ``encode`` (SGT1 tensor in, SGT1 tensor
out). Exit codes: 0 success, 1 verification failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import sys

from .encoder import ConfigError, EncoderConfig, parse_config_file

USAGE_ERROR = 2


def _load_config(args) -> EncoderConfig:
    if getattr(args, "config", None):
        return parse_config_file(args.config)
    return EncoderConfig()


def _add_common(p, out_help="output CSV path"):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help=out_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segstream")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run invariant/property suites")
    p.add_argument("suite", nargs="?", default="all",
                   choices=["kernels", "attention", "encoder", "harness", "all"])
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bench", help="forward-pass timing vs left-context size")
    _add_common(p)
    p.add_argument("--variants", default="augmem,augmem_no_banks,implicit",
                   help="comma-separated subset of augmem,augmem_no_banks,implicit")
    p.add_argument("--left-sizes", default="0,16,32,64,96,128",
                   help="comma-separated left-context sizes, ascending")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--warmup", type=int, default=3)

    p = sub.add_parser("flops", help="analytical multiply-accumulate table")
    _add_common(p)
    p.add_argument("--left-sizes", default="0,16,32,64,96,128")

    p = sub.add_parser("simulate", help="wait-k streaming run with Average Lagging")
    _add_common(p, out_help="trace CSV path")
    p.add_argument("--k", type=int, default=3, help="wait-k value (presets: 1, 3, 5, 7)")
    p.add_argument("--pre-decision-ratio", type=int, default=8)
    p.add_argument("--duration-ms", type=float, default=20000.0)
    p.add_argument("--frame-period-ms", type=float, default=10.0)

    p = sub.add_parser("encode", help="encode an SGT1 frame tensor to an SGT1 output tensor")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=0, help="seed for generated weights")
    p.add_argument("--weights", help="weight manifest JSON (overrides --seed)")
    p.add_argument("--input", required=True, help="input SGT1 file (frames x input_dim)")
    p.add_argument("--out", required=True, help="output SGT1 file")
    return parser


def _cmd_verify(args) -> int:
    from .verify import format_report, run_suite

    results = run_suite(args.suite, seed=args.seed)
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _cmd_bench(args) -> int:
    from .bench import BenchSpec, rows_to_csv, run_bench

    base = _load_config(args)
    try:
        spec = BenchSpec(
            variants=tuple(v.strip() for v in args.variants.split(",") if v.strip()),
            left_sizes=_parse_int_list(args.left_sizes),
            c=base.layout.c,
            r=base.layout.r,
            repeats=args.repeats,
            warmup=args.warmup,
            d=base.d,
            heads=base.heads,
            layers=base.num_layers,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    header = f"{'variant':<18} {'l':>4} {'mean_ms':>10} {'stddev_ms':>10}"
    print(header)
    print("-" * len(header))

    def progress(row):
        flag = "  (timer warning)" if row.timer_warning else ""
        print(f"{row.variant:<18} {row.l:>4} {row.mean_ms:>10.3f} {row.stddev_ms:>10.3f}{flag}")

    rows = run_bench(spec, base, progress=progress)
    if args.out:
        rows_to_csv(rows, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_flops(args) -> int:
    from .bench import flops_table, flops_table_to_csv

    base = _load_config(args)
    table = flops_table(_parse_int_list(args.left_sizes), base)
    cols = ["variant", "l", "qk", "av", "projections", "ffn", "conv", "total"]
    print(" | ".join(f"{c:>14}" for c in cols))
    for row in table:
        cells = []
        for c in cols:
            v = row[c]
            cells.append(f"{v:>14.4f}" if isinstance(v, float) else f"{v:>14}")
        print(" | ".join(cells))
    if args.out:
        flops_table_to_csv(table, args.out)
        print(f"wrote {len(table)} rows to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    from .harness import WaitKPolicy, simulate_wait_k, write_trace_csv

    config = _load_config(args)
    policy = WaitKPolicy(k=args.k, pre_decision_ratio=args.pre_decision_ratio)
    result = simulate_wait_k(
        config, policy, duration_ms=args.duration_ms,
        seed=args.seed, frame_period_ms=args.frame_period_ms,
    )
    print(
        f"wait-{args.k}: {result.src_chunks} chunks of {result.chunk_ms:.0f} ms, "
        f"{result.encoded_tokens} encoder tokens"
    )
    print(f"AL = {result.al_ms:.0f} ms")
    if args.out:
        write_trace_csv(result.trace, args.out)
        print(f"wrote trace to {args.out}")
    return 0


def _cmd_encode(args) -> int:
    from .encoder import encode_utterance, init_weights
    from .tensor_io import load_weight_manifest, read_tensor, write_tensor

    config = _load_config(args)
    frames = read_tensor(args.input)
    if frames.shape[1] != config.input_dim:
        raise ConfigError(
            f"input has {frames.shape[1]} columns, config expects input_dim={config.input_dim}"
        )
    if args.weights:
        weights = load_weight_manifest(args.weights)
    else:
        weights = init_weights(config, args.seed)
    out = encode_utterance(frames, config, weights)
    write_tensor(args.out, out)
    print(f"encoded {frames.shape[0]} frames -> {out.shape[0]} tokens of width {out.shape[1]}")
    return 0


_COMMANDS = {
    "verify": _cmd_verify,
    "bench": _cmd_bench,
    "flops": _cmd_flops,
    "simulate": _cmd_simulate,
    "encode": _cmd_encode,
}


def main(argv=None) -> int:
    from .tensor_io import TensorFormatError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, TensorFormatError, FileNotFoundError) as exc:
        print(f"segstream: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
