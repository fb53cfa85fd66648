import numpy as np

from rac.nn import (
    ArchSpec,
    backward,
    finite_difference_check,
    forward,
    init_params,
    make_loss_fn,
)


def small_arch(seed):
    rng = np.random.default_rng(seed)
    return ArchSpec(
        in_ch=3,
        in_h=8,
        in_w=8,
        out_ch=2,
        enc_widths=(int(rng.integers(3, 6)),),
        bottleneck_width=int(rng.integers(3, 6)),
        tile_dim=2,
        dec_widths=(int(rng.integers(3, 6)),),
    )


def test_sum_of_params_loss_gives_unit_gradients():
    arch = ArchSpec(in_ch=2, in_h=4, in_w=4, out_ch=2, head="linear", act="linear")
    params = init_params(arch, seed=0)

    def loss_fn(p, x, want_grads=False):
        total = sum(p.values[n].sum() for n in p.names())
        if want_grads:
            for n in p.names():
                p.accumulate_grad(n, np.ones_like(p.values[n]))
        return float(total)

    backward(params, loss_fn, np.zeros((1, 2, 4, 4)))
    for n in params.names():
        np.testing.assert_array_equal(params.grads[n], np.ones_like(params.values[n]))


def test_linear_map_quadratic_loss_closed_form():
    # 1x1 conv on a single pixel is a plain 2x2 linear map W @ x
    arch = ArchSpec(in_ch=2, in_h=1, in_w=1, out_ch=2, head="linear", act="linear", head_kernel=1)
    params = init_params(arch, seed=4)
    params.values["head.b"][:] = 0.0
    rng = np.random.default_rng(8)
    x = rng.normal(size=(1, 2, 1, 1))
    y = rng.normal(size=(1, 2, 1, 1))
    loss_fn = make_loss_fn(arch, target=y, kind="l2")
    backward(params, loss_fn, x)
    w = params.values["head.w"].reshape(2, 2)
    resid = (w @ x.reshape(2, 1)) - y.reshape(2, 1)
    expected = 2.0 * resid @ x.reshape(2, 1).T / y.size  # l2 loss is mean squared error
    np.testing.assert_allclose(params.grads["head.w"].reshape(2, 2), expected, rtol=1e-12)


def test_gradcheck_linear_net_near_exact():
    arch = ArchSpec(in_ch=2, in_h=6, in_w=6, out_ch=2, head="linear", act="linear")
    params = init_params(arch, seed=5)
    rng = np.random.default_rng(6)
    x = rng.uniform(0, 1, (1, 2, 6, 6))
    target = rng.uniform(0, 1, (1, 2, 6, 6))
    err = finite_difference_check(params, make_loss_fn(arch, target=target, kind="l2"), x)
    assert err < 1e-8


def test_gradcheck_conv_nets_across_seeds():
    worst = 0.0
    for seed in range(8):
        arch = small_arch(seed)
        params = init_params(arch, seed=seed)
        rng = np.random.default_rng(seed + 50)
        x = rng.uniform(0, 1, (1, 3, 8, 8))
        tiles = rng.uniform(0, 1, (1, 2))
        target = rng.uniform(0, 1, (1, 2, 8, 8))
        world = rng.uniform(0, 1, (1, 1, 8, 8)) > 0.3
        loss_fn = make_loss_fn(arch, target=target, tiles=tiles, kind="masked_l1", world=world)
        worst = max(worst, finite_difference_check(params, loss_fn, x))
    assert worst < 1e-3


def test_gradcheck_flags_corrupted_gradient():
    arch = ArchSpec(in_ch=2, in_h=4, in_w=4, out_ch=1, head="linear", act="linear")
    params = init_params(arch, seed=1)
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, (1, 2, 4, 4))
    target = rng.uniform(0, 1, (1, 1, 4, 4))
    honest = make_loss_fn(arch, target=target, kind="l2")

    def corrupted(p, xx, want_grads=False):
        loss = honest(p, xx, want_grads=want_grads)
        if want_grads:
            p.grads["head.w"] *= 1.5
        return loss

    assert finite_difference_check(params, corrupted, x) > 0.1


def test_backward_matches_fd_on_image_input_gradient():
    # the input gradient used for multi-step unrolls is checked by FD on pixels
    arch = ArchSpec(
        in_ch=2, in_h=8, in_w=8, out_ch=2, enc_widths=(4,), bottleneck_width=4,
        tile_dim=0, dec_widths=(3,),
    )
    params = init_params(arch, seed=9)
    rng = np.random.default_rng(10)
    x = rng.uniform(0, 1, (1, 2, 8, 8))
    target = rng.uniform(0, 1, (1, 2, 8, 8))

    from rac.nn.network import backward_cached, forward_cached
    from rac.nn.layers import l2_loss

    y, caches = forward_cached(params, arch, x)
    _, dy = l2_loss(y, target)
    params.clear_grads()
    dx = backward_cached(params, arch, dy, caches)

    h = 1e-6
    for idx in [(0, 0, 2, 3), (0, 1, 7, 0), (0, 0, 5, 5)]:
        xp = x.copy()
        xp[idx] += h
        up = l2_loss(forward(params, xp, arch), target)[0]
        xp[idx] -= 2 * h
        dn = l2_loss(forward(params, xp, arch), target)[0]
        num = (up - dn) / (2 * h)
        assert abs(num - dx[idx]) / max(abs(num), abs(dx[idx]), 1e-8) < 1e-4
