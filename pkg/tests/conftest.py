import numpy as np
import pytest

from segstream import EncoderConfig, SegmentLayout, SubsampleSpec


def toy_config(variant, *, l=4, c=8, r=4, z_tap="attn_out"):
    """Small 2-layer configuration used across the equivalence tests."""
    return EncoderConfig(
        num_layers=2,
        d=16,
        heads=2,
        layout=SegmentLayout(l, c, r),
        bank_capacity=3 if variant == "augmem" else 0,
        clip=4,
        variant=variant,
        subsample=SubsampleSpec(),
        ffn_dim=32,
        input_dim=6,
        z_tap=z_tap,
    )


def toy_frames(seed, tokens, input_dim=6):
    """Frames that subsample to exactly `tokens` tokens under the default grid."""
    rng = np.random.default_rng(seed)
    n = 4 * (tokens - 1) + 7
    return rng.uniform(-1.0, 1.0, size=(n, input_dim)).astype(np.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
