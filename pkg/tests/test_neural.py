import numpy as np
import pytest

from sbsteg.neural import (
    ArchSpec,
    adam_step,
    decoder_forward,
    encoder_forward,
    forward_loss,
    init_params,
    loss,
    loss_grads,
    read_checkpoint,
    scheduled_lr,
    write_checkpoint,
)
from sbsteg.neural import checkpoint as ckpt
from sbsteg.neural import ops
from sbsteg.neural.networks import decoder_backward, encoder_backward

TINY = ArchSpec(group1=(3,), group2=(4,), group3=(5,), decoder=(4, 3))


def _inputs(rng, n=2, h=6, w=5):
    return rng.normal(size=(n, 4, h, w)), rng.normal(size=(n, 1, h, w))


def test_conv_matches_direct_loop(rng):
    x = rng.normal(size=(3, 2, 5, 4))  # (C, N, H, W)
    w = rng.normal(size=(2, 3, 3, 3))
    b = rng.normal(size=2)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((2, 2, 5, 4))
    for o in range(2):
        for n in range(2):
            for i in range(5):
                for j in range(4):
                    ref[o, n, i, j] = np.sum(w[o] * xp[:, n, i:i + 3, j:j + 3]) + b[o]
    np.testing.assert_allclose(ops.conv2d(x, w, b), ref, atol=1e-12)


def test_conv_input_gradient_is_adjoint(rng):
    x = rng.normal(size=(3, 2, 6, 7))
    w = rng.normal(size=(4, 3, 3, 3))
    g = rng.normal(size=(4, 2, 6, 7))
    _, _, dx = ops.conv2d_backward(x, w, g)
    # <conv(x), g> == <x, conv^T(g)>
    lhs = np.sum(ops.conv2d(x, w, np.zeros(4)) * g)
    assert lhs == pytest.approx(np.sum(x * dx), rel=1e-12)


def test_single_scalar_conv_gradient():
    # 1x1 image, 1 channel: only the kernel centre touches the pixel
    arch = ArchSpec(secret_channels=1, cover_channels=1, encoder_out=1, decoder_out=1)
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.5
    x = np.array([[[[2.0]]]])
    y = ops.conv2d(x, w, np.array([0.5]))
    assert y.item() == pytest.approx(3.5)
    dw, db, dx = ops.conv2d_backward(x, w, np.ones_like(y))
    assert dw[0, 0, 1, 1] == pytest.approx(2.0) and db.item() == 1.0 and dx.item() == 1.5
    assert np.count_nonzero(dw) == 1
    arch.validate()


def test_shapes_preserved(rng):
    p = init_params(0, ArchSpec(group1=(4, 4), group2=(6,), group3=(5,), decoder=(5,)))
    s, c = _inputs(rng, n=3, h=9, w=7)
    out = encoder_forward(s, c, p)
    assert out.shape == (3, 1, 9, 7)
    assert decoder_forward(out, p).shape == (3, 4, 9, 7)


def test_spec_default_architecture_shapes(rng):
    p = init_params(0)
    s, c = _inputs(rng, n=1, h=8, w=8)
    assert encoder_forward(s, c, p).shape == (1, 1, 8, 8)
    names = [n for n, *_ in p.arch.layer_shapes()]
    assert names == ["enc.g1.0", "enc.g1.1", "enc.g2.0", "enc.g2.1",
                     "enc.g3.0", "enc.g3.1", "enc.g3.2", "dec.0", "dec.1", "dec.2", "dec.3"]
    assert p.encoder[2][0].in_channels == 65
    assert p.encoder[2][-1].out_channels == 1 and p.decoder[-1].out_channels == 4


def test_zero_params_give_zero_output(rng):
    p = init_params(0, ArchSpec(group1=(3,), group2=(3,), group3=(3,), decoder=(3,), residual=False))
    for layer in p.layers():
        layer.weight[:] = 0
        layer.bias[:] = 0
    s, c = _inputs(rng)
    assert not encoder_forward(s, c, p).any()
    assert not decoder_forward(c, p).any()


def test_determinism(rng):
    a, b = init_params(11, TINY), init_params(11, TINY)
    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)
    s, c = _inputs(rng)
    assert encoder_forward(s, c, a).tobytes() == encoder_forward(s, c, b).tobytes()
    assert not np.array_equal(init_params(12, TINY).arrays()[0], a.arrays()[0])


def test_invalid_architectures():
    with pytest.raises(ValueError):
        init_params(0, ArchSpec(encoder_out=2))
    with pytest.raises(ValueError):
        init_params(0, ArchSpec(decoder_out=1))
    with pytest.raises(ValueError):
        init_params(0, ArchSpec(group1=()))


def test_dimension_mismatch(rng):
    p = init_params(0, TINY)
    with pytest.raises(ValueError):
        encoder_forward(rng.normal(size=(2, 4, 6, 6)), rng.normal(size=(2, 1, 6, 5)), p)
    with pytest.raises(ValueError):
        encoder_forward(rng.normal(size=(2, 3, 6, 6)), rng.normal(size=(2, 1, 6, 6)), p)
    with pytest.raises(ValueError):
        decoder_forward(rng.normal(size=(2, 4, 6, 6)), p)


def test_loss_examples():
    c = np.zeros((2, 1, 3, 3))
    s = np.zeros((2, 4, 3, 3))
    assert loss(c, c, s, s) == 0.0
    assert loss(c, c + 1, s, s + 2, beta=1.0) == pytest.approx(5.0)
    assert loss(c, c + 1, s, s + 7, beta=0.0) == loss(c, c + 1, s, s - 3, beta=0.0)
    with pytest.raises(ValueError):
        loss(c, s, s, s)


def test_loss_gradients_finite_difference(rng):
    c, cp = rng.normal(size=(2, 1, 2, 3, 3))
    s, sp = rng.normal(size=(2, 1, 4, 3, 3))
    gc, gs = loss_grads(c, cp, s, sp, 0.7)
    h = 1e-6
    for idx in [(0, 0, 1, 1), (0, 0, 2, 0)]:
        e = np.zeros_like(cp)
        e[idx] = h
        fd = (loss(c, cp + e, s, sp, 0.7) - loss(c, cp - e, s, sp, 0.7)) / (2 * h)
        assert gc[idx] == pytest.approx(fd, rel=1e-6)
    e = np.zeros_like(sp)
    e[0, 3, 1, 2] = h
    fd = (loss(c, cp, s, sp + e, 0.7) - loss(c, cp, s, sp - e, 0.7)) / (2 * h)
    assert gs[0, 3, 1, 2] == pytest.approx(fd, rel=1e-6)


def _fd_check(params, s, c, channel=None, samples_per_layer=3, seed=0):
    graph = forward_loss(params, s, c, 1.0, channel)
    grads = graph.backward()
    r = np.random.default_rng(seed)
    h = 1e-5
    worst = 0.0
    for (dw, db), layer in zip(grads, params.layers()):
        for arr, g in ((layer.weight, dw), (layer.bias, db)):
            for _ in range(samples_per_layer):
                idx = tuple(int(r.integers(0, d)) for d in arr.shape)
                old = arr[idx]
                arr[idx] = old + h
                up = forward_loss(params, s, c, 1.0, channel).value
                arr[idx] = old - h
                down = forward_loss(params, s, c, 1.0, channel).value
                arr[idx] = old
                fd = (up - down) / (2 * h)
                rel = abs(g[idx] - fd) / max(abs(g[idx]), abs(fd), 1e-8)
                worst = max(worst, rel)
    return worst


@pytest.mark.parametrize("residual", [True, False])
def test_gradients_match_finite_differences(rng, residual):
    arch = ArchSpec(group1=(3, 3), group2=(4,), group3=(4,), decoder=(4, 3), residual=residual)
    p = init_params(3, arch)
    for layer in p.layers():
        layer.bias[:] = rng.normal(scale=0.1, size=layer.bias.shape)
    s, c = _inputs(rng, n=2, h=5, w=6)
    assert _fd_check(p, s, c) < 1e-3


def test_gradient_through_linear_channel(rng):
    p = init_params(4, TINY)
    s, c = _inputs(rng, n=2, h=5, w=5)
    mix = rng.normal(size=(5, 5))

    def channel(x):
        return mix @ x @ mix.T, lambda g: mix.T @ g @ mix

    assert _fd_check(p, s, c, channel) < 1e-3


def test_backward_does_not_mutate_and_needs_forward(rng):
    p = init_params(5, TINY)
    before = [a.copy() for a in p.arrays()]
    s, c = _inputs(rng)
    graph = forward_loss(p, s, c)
    graph.backward()
    for a, b in zip(before, p.arrays()):
        assert np.array_equal(a, b)
    with pytest.raises(RuntimeError):
        graph.backward()
    with pytest.raises(RuntimeError):
        encoder_backward(None, np.zeros((2, 1, 6, 5)), p)
    with pytest.raises(RuntimeError):
        decoder_backward(None, np.zeros((2, 4, 6, 5)), p)


def test_zero_loss_zero_gradients(rng):
    p = init_params(6, TINY)
    s, c = _inputs(rng)
    out = encoder_forward(s, c, p)
    rec = decoder_forward(out, p)
    # make targets equal the outputs so both loss terms vanish
    graph = forward_loss(p, rec, out, 1.0)
    graph.cover, graph.secret = graph.cover_prime, graph.secret_prime
    for dw, db in graph.backward():
        assert not dw.any() and not db.any()


def test_adam_first_step_is_lr(rng):
    p = init_params(7, TINY)
    before = [a.copy() for a in p.arrays()]
    grads = [(np.ones_like(l.weight), np.ones_like(l.bias)) for l in p.layers()]
    adam_step(p, grads, 1e-3)
    assert p.adam.step == 1
    for a, b in zip(before, p.arrays()):
        np.testing.assert_allclose(b - a, -1e-3, rtol=1e-6)


def test_adam_zero_gradient_keeps_params():
    p = init_params(8, TINY)
    before = [a.copy() for a in p.arrays()]
    zeros = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in p.layers()]
    for _ in range(5):
        adam_step(p, zeros, 1e-3)
    for a, b in zip(before, p.arrays()):
        assert np.array_equal(a, b)


def test_adam_shape_mismatch():
    p = init_params(9, TINY)
    grads = [(np.ones_like(l.weight), np.ones_like(l.bias)) for l in p.layers()]
    with pytest.raises(ValueError):
        adam_step(p, grads[:-1], 1e-3)
    grads[0] = (np.ones((1, 1, 3, 3)), grads[0][1])
    with pytest.raises(ValueError):
        adam_step(p, grads, 1e-3)


def test_schedule():
    assert scheduled_lr(1) == 1e-3
    assert scheduled_lr(150) == 1e-3
    assert scheduled_lr(151) == 3e-4
    assert scheduled_lr(300) == 3e-4
    assert scheduled_lr(301) == 1e-4
    assert scheduled_lr(400) == 1e-4


def test_training_reduces_loss(rng):
    p = init_params(10, TINY)
    s, c = _inputs(rng, n=4, h=6, w=6)
    first = forward_loss(p, s, c).value
    for _ in range(150):
        g = forward_loss(p, s, c)
        adam_step(p, g.backward(), 1e-2)
    assert forward_loss(p, s, c).value < 0.5 * first


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    p = init_params(12, TINY, wavelet="dmey", channel="B", region="cD", norm=255.0, size=64)
    s, c = _inputs(rng)
    adam_step(p, forward_loss(p, s, c).backward(), 1e-3)
    path = write_checkpoint(tmp_path / "a.ckpt", p)
    q = read_checkpoint(path)
    assert ckpt.dumps(q) == path.read_bytes()
    assert q.meta == p.meta and q.arch == p.arch and q.adam.step == 1
    for a, b in zip(p.arrays() + p.adam.m, q.arrays() + q.adam.m):
        assert a.tobytes() == b.tobytes()
    assert encoder_forward(s, c, q).tobytes() == encoder_forward(s, c, p).tobytes()


def test_checkpoint_without_moments_and_corruption(tmp_path):
    p = init_params(13, TINY)
    blob = ckpt.dumps(p)
    assert ckpt.dumps(ckpt.loads(blob)) == blob
    with pytest.raises(ckpt.CheckpointError):
        ckpt.loads(b"NOTACKPT" + blob[8:])
    with pytest.raises(ckpt.CheckpointError):
        ckpt.loads(blob[:-8])
    with pytest.raises(ckpt.CheckpointError):
        ckpt.loads(blob + b"\0" * 8)
