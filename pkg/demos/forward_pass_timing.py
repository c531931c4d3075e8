"""Reproduce the forward-pass-time-vs-left-context experiment at desk scale.

Times one segment through the full default 12-layer encoder for each variant
and left-context size, with warm cross-segment state. The implicit variant's
curve stays nearly flat as the left context grows because its queries cover
only the center and lookahead tokens; the memory-bank variants pay for the
left context in their queries and rise with it.

Runs in roughly half a minute; pass --quick for a reduced sweep.
"""

import sys

from segstream.bench import BenchSpec, rows_to_csv, run_bench


def main():
    quick = "--quick" in sys.argv
    spec = BenchSpec(left_sizes=(0, 32, 128) if quick else (0, 16, 32, 64, 96, 128))
    print(f"timing {len(spec.variants)} variants x {len(spec.left_sizes)} left sizes, "
          f"{spec.repeats} repeats each (warmup {spec.warmup})...")
    rows = run_bench(spec)

    print(f"\n{'l':>4}", end="")
    for v in spec.variants:
        print(f" {v:>18}", end="")
    print()
    for l in spec.left_sizes:
        print(f"{l:>4}", end="")
        for v in spec.variants:
            row = next(r for r in rows if r.variant == v and r.l == l)
            print(f" {row.mean_ms:>13.1f} ms", end="")
        print()

    imp = {r.l: r.mean_ms for r in rows if r.variant == "implicit"}
    hi, lo = max(spec.left_sizes), min(spec.left_sizes)
    print(f"\nimplicit time ratio t({hi})/t({lo}) = {imp[hi] / imp[lo]:.3f} (flat curve)")
    rows_to_csv(rows, "forward_pass_timing.csv")
    print("wrote forward_pass_timing.csv")


if __name__ == "__main__":
    main()
