import numpy as np
import pytest

from rac.nn import ArchSpec, init_params, forward
from rac.nn.layers import (
    conv2d_forward,
    conv_transpose2d_forward,
    masked_l1_loss,
)


def conv2d_loops(x, w, b, stride, pad):
    """Straight nested-loop convolution, independent of the im2col path."""
    bs, c, h, wd = x.shape
    f, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((bs, f, ho, wo))
    for bi in range(bs):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for u in range(k):
                            for v in range(k):
                                acc += xp[bi, ci, i * stride + u, j * stride + v] * w[fi, ci, u, v]
                    y[bi, fi, i, j] = acc + b[fi]
    return y


def test_conv_matches_loop_oracle_seed7():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 3, 4, 4))
    w = rng.normal(size=(5, 3, 3, 3))
    b = rng.normal(size=5)
    for stride in (1, 2):
        y, _ = conv2d_forward(x, w, b, stride, 1)
        np.testing.assert_allclose(y, conv2d_loops(x, w, b, stride, 1), rtol=1e-12, atol=1e-12)


def test_tconv_matches_adjoint_identity():
    # <conv(x), y> == <x, tconv(y)> for zero bias: transposed conv is the conv adjoint
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 4, 6, 6))
    w = rng.normal(size=(3, 4, 4, 4))  # conv weight (F=3, C=4)
    y = rng.normal(size=(1, 3, 3, 3))
    zero3, zero4 = np.zeros(3), np.zeros(4)
    cx, _ = conv2d_forward(x, w, zero3, 2, 1)
    # tconv weight layout is (C_in=F, C_out=C, k, k)
    ty, _ = conv_transpose2d_forward(y, w, zero4, 2, 1)
    np.testing.assert_allclose((cx * y).sum(), (x * ty).sum(), rtol=1e-12)


def test_zero_weight_network_outputs_bias():
    arch = ArchSpec(in_ch=3, in_h=6, in_w=6, out_ch=2, head="linear", act="linear")
    params = init_params(arch, seed=0)
    params.values["head.w"][:] = 0.0
    params.values["head.b"][:] = [0.25, -1.5]
    x = np.random.default_rng(1).uniform(0, 1, (2, 3, 6, 6))
    y = forward(params, x, arch)
    np.testing.assert_array_equal(y[:, 0], np.full((2, 6, 6), 0.25))
    np.testing.assert_array_equal(y[:, 1], np.full((2, 6, 6), -1.5))


def test_identity_1x1_conv_passthrough():
    arch = ArchSpec(in_ch=3, in_h=4, in_w=4, out_ch=3, head="linear", act="linear", head_kernel=1)
    params = init_params(arch, seed=0)
    params.values["head.w"][:] = np.eye(3).reshape(3, 3, 1, 1)
    params.values["head.b"][:] = 0.0
    x = np.random.default_rng(2).uniform(0, 1, (1, 3, 4, 4))
    np.testing.assert_array_equal(forward(params, x, arch), x)


def test_forward_is_deterministic_bitwise():
    arch = ArchSpec(
        in_ch=4, in_h=8, in_w=8, out_ch=3, enc_widths=(6, 8), bottleneck_width=8,
        tile_dim=3, dec_widths=(6, 4),
    )
    params = init_params(arch, seed=11)
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, (2, 4, 8, 8))
    tiles = rng.uniform(0, 1, (2, 3))
    a = forward(params, x, arch, tiles)
    b = forward(params, x, arch, tiles)
    assert a.tobytes() == b.tobytes()


def test_batch_chunking_is_bit_identical():
    # evaluating samples in any batch grouping gives identical numbers
    arch = ArchSpec(
        in_ch=3, in_h=8, in_w=8, out_ch=3, enc_widths=(4,), bottleneck_width=4,
        tile_dim=2, dec_widths=(4,),
    )
    params = init_params(arch, seed=2)
    rng = np.random.default_rng(9)
    x = rng.uniform(0, 1, (5, 3, 8, 8))
    tiles = rng.uniform(0, 1, (5, 2))
    full = forward(params, x, arch, tiles)
    singles = np.concatenate([forward(params, x[i : i + 1], arch, tiles[i : i + 1]) for i in range(5)])
    assert full.tobytes() == singles.tobytes()
    pairs = np.concatenate([forward(params, x[:2], arch, tiles[:2]), forward(params, x[2:], arch, tiles[2:])])
    assert full.tobytes() == pairs.tobytes()


def test_shape_mismatch_names_layer():
    arch = ArchSpec(in_ch=3, in_h=8, in_w=8, out_ch=2, enc_widths=(4,), dec_widths=(4,))
    params = init_params(arch, seed=0)
    with pytest.raises(ValueError, match="input shape"):
        forward(params, np.zeros((1, 2, 8, 8)), arch)
    other = ArchSpec(in_ch=2, in_h=8, in_w=8, out_ch=2, enc_widths=(4,), dec_widths=(4,))
    with pytest.raises(ValueError, match="enc1"):
        forward(params, np.zeros((1, 2, 8, 8)), other)


def test_masked_l1_degenerate_empty_world():
    pred = np.random.default_rng(0).uniform(0, 1, (1, 3, 4, 4))
    target = np.zeros_like(pred)
    loss, grad = masked_l1_loss(pred, target, np.zeros((1, 1, 4, 4), dtype=bool))
    assert loss == 0.0
    assert not grad.any()


def test_arch_text_round_trip():
    arch = ArchSpec(
        in_ch=5, in_h=48, in_w=64, out_ch=3, enc_widths=(8, 16, 32), bottleneck_width=32,
        tile_dim=6, dec_widths=(16, 8, 8), head="sigmoid", act="lrelu", skips=True,
    )
    assert ArchSpec.from_text(arch.to_text()) == arch
