"""Analytical multiply-accumulate model for the attention variants.

Per encoder layer the attention score term costs queries * keys * d MACs.
At the default layout (left 32, center 64, right 32, three banks, d = 256)
the memory-bank variant pays (3 + 128) * 128 * 256 = 4,292,608 MACs while
the implicit variant pays 96 * 128 * 256 = 3,145,728: the same numbers the
flops CLI emits. The model also charges the memory-bank variant for pushing
left-context tokens through the conv frontend and the feed-forward network,
which the implicit variant avoids.
"""

from dataclasses import replace

from segstream import EncoderConfig, flops_estimate
from segstream.bench import flops_table


def main():
    base = EncoderConfig()
    aug = flops_estimate(base)
    imp = flops_estimate(replace(base, variant="implicit", bank_capacity=0))
    print("default layout (l=32, c=64, r=32, N=3, d=256), per layer:")
    print(f"{'term':>12} {'memory-bank':>14} {'implicit':>14} {'ratio':>7}")
    for term in ("qk", "av", "projections", "ffn"):
        a, i = getattr(aug, term), getattr(imp, term)
        print(f"{term:>12} {a:>14,} {i:>14,} {a / i:>7.3f}")
    print(f"{'conv':>12} {aug.conv:>14,} {imp.conv:>14,} {aug.conv / imp.conv:>7.3f} (frontend)")
    print(f"{'total':>12} {aug.totals()['total']:>14,} {imp.totals()['total']:>14,} "
          f"{aug.totals()['total'] / imp.totals()['total']:>7.3f} (12 layers + frontend)")

    print("\ntotal-cost ratio (memory-bank / implicit) as the left context grows:")
    for row in flops_table(left_sizes=(0, 16, 32, 64, 96, 128), base=base):
        if row["variant"] == "augmem/implicit":
            print(f"  l={row['l']:>3}: {row['total']:.3f}")
    print("\nthe advantage widens with l: implicit keeps left context out of its")
    print("queries, conv frontend, and feed-forward sublayers entirely.")


if __name__ == "__main__":
    main()
