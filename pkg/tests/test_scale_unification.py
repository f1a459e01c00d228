import numpy as np
import pytest

from grouptransnet import tensor as T
from grouptransnet.gradcheck import grad_check
from grouptransnet.scale_unification import Transition, make_sum_h, make_sum_m, sum_h, sum_m, transition
from grouptransnet.tensor import ShapeError, Tensor

TOY = (8, 16, 32, 48, 64)
SIDES = (32, 16, 8, 4, 2)


def leaf(a):
    return Tensor(np.asarray(a, dtype=float), requires_grad=True)


def pyramid(rng, channels=TOY, sides=SIDES, n=1):
    return [Tensor(rng.normal(size=(n, c, s, s))) for c, s in zip(channels, sides)]


def test_transition_channels_and_sides(rng):
    params = Transition(rng, TOY, 8)
    out = transition(pyramid(rng), params)
    assert [f.shape for f in out] == [(1, 8, s, s) for s in SIDES]


def test_transition_rejects_wrong_channels(rng):
    params = Transition(rng, TOY, 8)
    bad = pyramid(rng)
    bad[2] = Tensor(np.zeros((1, 31, 8, 8)))
    with pytest.raises(ShapeError):
        transition(bad, params)


def test_group_arities(rng):
    assert [f.weight.shape[1] for f in make_sum_h(rng, 8).fuse] == [16, 16, 24]
    assert [f.weight.shape[1] for f in make_sum_m(rng, 8).fuse] == [24, 16, 16]


def test_toy_output_sides(rng):
    ft = [Tensor(rng.normal(size=(2, 8, s, s))) for s in SIDES]
    assert all(o.shape == (2, 8, 4, 4) for o in sum_h(ft[2], ft[3], ft[4], make_sum_h(rng, 8)))
    assert all(o.shape == (2, 8, 8, 8) for o in sum_m(ft[1], ft[2], ft[3], make_sum_m(rng, 8)))


def test_zero_inputs_depend_only_on_biases(rng):
    params = make_sum_h(rng, 8)
    bias = rng.uniform(0.1, 0.5, size=8)
    for conv in params.fuse:
        conv.bias.data = bias.copy()
    zeros = [Tensor(np.zeros((1, 8, s, s))) for s in (8, 4, 2)]
    outs = [o.data for o in sum_h(*zeros, params)]
    assert np.all(np.isfinite(outs[0]))
    assert np.array_equal(outs[0], outs[1]) and np.array_equal(outs[1], outs[2])
    np.testing.assert_array_equal(outs[0], np.broadcast_to(bias[None, :, None, None], outs[0].shape))


def test_branch_wiring_matches_manual_composition(rng):
    """high branch sees [up(f5), f4]; low branch sees [down(f3), f4, up(f5)]."""
    params = make_sum_h(rng, 8)
    f3, f4, f5 = (Tensor(rng.normal(size=(1, 8, s, s))) for s in (8, 4, 2))
    hf3, hf4, hf5 = sum_h(f3, f4, f5, params)
    up = T.resize(f5, (4, 4), "bilinear_up")
    down = T.resize(f3, (4, 4), "avg_down")
    assert np.array_equal(hf5.data, params.fuse[0](T.concat([up, f4])).data)
    assert np.array_equal(hf4.data, params.fuse[1](T.concat([f4, up])).data)
    assert np.array_equal(hf3.data, params.fuse[2](T.concat([down, f4, up])).data)


def test_resolution_chain_enforced(rng):
    params = make_sum_h(rng, 8)
    with pytest.raises(ShapeError):
        sum_h(*(Tensor(np.zeros((1, 8, s, s))) for s in (8, 4, 4)), params)


def test_sum_m_grads_wrt_all_inputs(rng):
    params = make_sum_m(rng, 8)
    xs = [leaf(rng.normal(size=(1, 8, s, s))) for s in (8, 4, 2)]
    w = [Tensor(rng.normal(size=(1, 8, 4, 4))) for _ in range(3)]

    def fn(a, b, c):
        outs = sum_m(a, b, c, params)
        total = T.reduce("sum", outs[0] * w[0], (0, 1, 2, 3))
        for o, wi in zip(outs[1:], w[1:]):
            total = total + T.reduce("sum", o * wi, (0, 1, 2, 3))
        return total

    rep = grad_check(fn, xs, tol=1e-5)
    assert rep.passed and rep.checked > 0, rep
