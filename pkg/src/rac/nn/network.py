"""Encoder/decoder conv stack with bottleneck tiling of state vectors.

The architecture family: N stride-2 conv blocks, optional tiling of a
conditioning vector onto the bottleneck feature map, a mixing conv, N
stride-2 transposed-conv blocks with encoder skip connections, and a
conv head (sigmoid or linear). Degenerate descriptors (no encoder, no
activation) yield plain linear conv nets, which the gradient checks use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers
from .params import ParamSet, glorot_uniform

CONV_K = 3
TCONV_K = 4


@dataclass(frozen=True)
class ArchSpec:
    in_ch: int
    in_h: int
    in_w: int
    out_ch: int
    enc_widths: tuple = ()
    bottleneck_width: int = 0
    tile_dim: int = 0
    dec_widths: tuple = ()
    head: str = "sigmoid"
    head_kernel: int = CONV_K
    act: str = "lrelu"
    skips: bool = True

    def __post_init__(self):
        object.__setattr__(self, "enc_widths", tuple(self.enc_widths))
        object.__setattr__(self, "dec_widths", tuple(self.dec_widths))
        if len(self.dec_widths) != len(self.enc_widths):
            raise ValueError("encoder and decoder must have the same depth")
        if self.head not in ("sigmoid", "linear"):
            raise ValueError(f"unknown head {self.head!r}")
        if self.act not in ("lrelu", "linear"):
            raise ValueError(f"unknown activation {self.act!r}")
        scale = 2 ** len(self.enc_widths)
        if self.in_h % scale or self.in_w % scale:
            raise ValueError("input size must be divisible by 2^depth")

    @property
    def depth(self) -> int:
        return len(self.enc_widths)

    def output_shape(self):
        return (self.out_ch, self.in_h, self.in_w)

    def to_text(self) -> str:
        pairs = [
            ("in_ch", self.in_ch),
            ("in_h", self.in_h),
            ("in_w", self.in_w),
            ("out_ch", self.out_ch),
            ("enc_widths", ",".join(map(str, self.enc_widths))),
            ("bottleneck_width", self.bottleneck_width),
            ("tile_dim", self.tile_dim),
            ("dec_widths", ",".join(map(str, self.dec_widths))),
            ("head", self.head),
            ("head_kernel", self.head_kernel),
            ("act", self.act),
            ("skips", int(self.skips)),
        ]
        return "".join(f"{k}={v}\n" for k, v in pairs)

    @classmethod
    def from_text(cls, text: str) -> "ArchSpec":
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()

        def ints(s):
            return tuple(int(t) for t in s.split(",") if t)

        return cls(
            in_ch=int(kv["in_ch"]),
            in_h=int(kv["in_h"]),
            in_w=int(kv["in_w"]),
            out_ch=int(kv["out_ch"]),
            enc_widths=ints(kv["enc_widths"]),
            bottleneck_width=int(kv["bottleneck_width"]),
            tile_dim=int(kv["tile_dim"]),
            dec_widths=ints(kv["dec_widths"]),
            head=kv["head"],
            head_kernel=int(kv["head_kernel"]),
            act=kv["act"],
            skips=bool(int(kv["skips"])),
        )


def _conv_shapes(arch: ArchSpec):
    """Yield (name, kind, w_shape) for every learnable layer, in graph order."""
    out = []
    cur = arch.in_ch
    for i, width in enumerate(arch.enc_widths, 1):
        out.append((f"enc{i}", "conv", (width, cur, CONV_K, CONV_K)))
        cur = width
    cur += arch.tile_dim
    if arch.bottleneck_width:
        out.append(("bott", "conv", (arch.bottleneck_width, cur, CONV_K, CONV_K)))
        cur = arch.bottleneck_width
    depth = arch.depth
    for i, width in enumerate(arch.dec_widths, 1):
        out.append((f"dec{i}", "tconv", (cur, width, TCONV_K, TCONV_K)))
        cur = width
        if arch.skips and i < depth:
            cur += arch.enc_widths[depth - 1 - i]
    k = arch.head_kernel
    out.append(("head", "conv", (arch.out_ch, cur, k, k)))
    return out


def init_params(arch: ArchSpec, seed: int) -> ParamSet:
    """Glorot-uniform weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    params = ParamSet()
    for name, kind, shape in _conv_shapes(arch):
        if kind == "conv":
            f, c, k, _ = shape
        else:
            c, f, k, _ = shape
        fan_in, fan_out = c * k * k, f * k * k
        params.add(f"{name}.w", glorot_uniform(rng, shape, fan_in, fan_out))
        params.add(f"{name}.b", np.zeros(f))
    return params


def _conv(params, name, x, stride, pad):
    try:
        return layers.conv2d_forward(
            x, params.values[f"{name}.w"], params.values[f"{name}.b"], stride, pad
        )
    except ValueError as e:
        raise ValueError(f"layer {name!r}: {e}") from None


def _act_fwd(arch, x):
    if arch.act == "linear":
        return x, None
    return layers.leaky_relu_forward(x)


def _act_bwd(arch, dy, cache):
    if arch.act == "linear":
        return dy
    return layers.leaky_relu_backward(dy, cache)


def forward_cached(params: ParamSet, arch: ArchSpec, x: np.ndarray, tiles=None):
    """Run the stack, returning (output, cache-for-backward)."""
    if x.ndim != 4 or x.shape[1:] != (arch.in_ch, arch.in_h, arch.in_w):
        raise ValueError(
            f"input shape {x.shape} does not match declared "
            f"(B, {arch.in_ch}, {arch.in_h}, {arch.in_w})"
        )
    if arch.tile_dim:
        tiles = np.asarray(tiles, dtype=np.float64)
        if tiles.shape != (x.shape[0], arch.tile_dim):
            raise ValueError(
                f"tile vector shape {tiles.shape} != (B, {arch.tile_dim})"
            )
    caches = {}
    cur = x
    enc_post = []
    for i in range(1, arch.depth + 1):
        cur, caches[f"enc{i}"] = _conv(params, f"enc{i}", cur, 2, 1)
        cur, caches[f"enc{i}.act"] = _act_fwd(arch, cur)
        enc_post.append(cur)
    if arch.tile_dim:
        planes = layers.tile_vector(tiles, cur.shape[2], cur.shape[3])
        cur, caches["tile.widths"] = layers.concat_channels([cur, planes])
    if arch.bottleneck_width:
        cur, caches["bott"] = _conv(params, "bott", cur, 1, 1)
        cur, caches["bott.act"] = _act_fwd(arch, cur)
    for i in range(1, arch.depth + 1):
        cur, caches[f"dec{i}"] = layers.conv_transpose2d_forward(
            cur, params.values[f"dec{i}.w"], params.values[f"dec{i}.b"], 2, 1
        )
        cur, caches[f"dec{i}.act"] = _act_fwd(arch, cur)
        if arch.skips and i < arch.depth:
            skip = enc_post[arch.depth - 1 - i]
            cur, caches[f"dec{i}.concat"] = layers.concat_channels([cur, skip])
    pad = arch.head_kernel // 2
    cur, caches["head"] = _conv(params, "head", cur, 1, pad)
    if arch.head == "sigmoid":
        cur, caches["head.act"] = layers.sigmoid_forward(cur)
    return cur, caches


def forward(params: ParamSet, x: np.ndarray, arch: ArchSpec, tiles=None) -> np.ndarray:
    """Pure forward pass (no cache kept)."""
    y, _ = forward_cached(params, arch, x, tiles)
    return y


def backward_cached(params: ParamSet, arch: ArchSpec, dy: np.ndarray, caches) -> np.ndarray:
    """Accumulate parameter gradients for a cached forward; returns d(loss)/d(input)."""

    def acc(name, dw, db):
        params.accumulate_grad(f"{name}.w", dw)
        params.accumulate_grad(f"{name}.b", db)

    if arch.head == "sigmoid":
        dy = layers.sigmoid_backward(dy, caches["head.act"])
    dy, dw, db = layers.conv2d_backward(dy, caches["head"])
    acc("head", dw, db)

    skip_grads = [None] * arch.depth
    for i in range(arch.depth, 0, -1):
        if arch.skips and i < arch.depth:
            widths = caches[f"dec{i}.concat"]
            dy, dskip = layers.split_channels(dy, widths)
            skip_grads[arch.depth - 1 - i] = dskip
        dy = _act_bwd(arch, dy, caches[f"dec{i}.act"])
        dy, dw, db = layers.conv_transpose2d_backward(dy, caches[f"dec{i}"])
        acc(f"dec{i}", dw, db)

    if arch.bottleneck_width:
        dy = _act_bwd(arch, dy, caches["bott.act"])
        dy, dw, db = layers.conv2d_backward(dy, caches["bott"])
        acc("bott", dw, db)
    if arch.tile_dim:
        dy, _dtiles = layers.split_channels(dy, caches["tile.widths"])

    for i in range(arch.depth, 0, -1):
        if skip_grads[i - 1] is not None:
            dy = dy + skip_grads[i - 1]
        dy = _act_bwd(arch, dy, caches[f"enc{i}.act"])
        dy, dw, db = layers.conv2d_backward(dy, caches[f"enc{i}"])
        acc(f"enc{i}", dw, db)
    return dy


LOSS_KINDS = {
    "l1": layers.l1_loss,
    "l2": layers.l2_loss,
    "sum": layers.sum_loss,
}


def make_loss_fn(arch: ArchSpec, target=None, tiles=None, kind="l2", world=None):
    """Build a loss callable over (params, input) from supported primitives.

    The returned function computes the scalar loss; with want_grads=True it
    also populates analytic parameter gradients.
    """

    def loss_fn(params: ParamSet, x: np.ndarray, want_grads: bool = False) -> float:
        if want_grads:
            y, caches = forward_cached(params, arch, x, tiles)
        else:
            y = forward(params, x, arch, tiles)
        if kind == "masked_l1":
            loss, dy = layers.masked_l1_loss(y, target, world)
        else:
            loss, dy = LOSS_KINDS[kind](y, target)
        if want_grads:
            backward_cached(params, arch, dy, caches)
        return float(loss)

    return loss_fn


def backward(params: ParamSet, loss_fn, x: np.ndarray) -> ParamSet:
    """Populate analytic gradients of loss_fn at the current parameters."""
    params.clear_grads()
    loss_fn(params, x, want_grads=True)
    return params
