import numpy as np
import pytest

from grouptransnet import tensor as T
from grouptransnet.config import Config
from grouptransnet.loss import total_loss
from grouptransnet.model import GroupTransNet
from grouptransnet.mte import encoder_param_count
from grouptransnet.tensor import Tensor, no_grad


@pytest.fixture(scope="module")
def model():
    return GroupTransNet(Config.for_profile("toy", seed=2))


@pytest.fixture(scope="module")
def inputs():
    r = np.random.default_rng(0)
    return Tensor(r.random((2, 3, 64, 64))), Tensor(r.random((2, 1, 64, 64)))


def run(model, inputs):
    with no_grad():
        return model(*inputs)


def test_toy_shapes(model, inputs):
    out = run(model, inputs)
    assert [f.shape for f in out.transitioned] == [(2, 8, s, s) for s in (32, 16, 8, 4, 2)]
    assert all(f.shape == (2, 8, 4, 4) for f in out.high + out.high_encoded)
    assert all(f.shape == (2, 8, 8, 8) for f in out.mid + out.mid_encoded)
    assert all(f.shape == (2, 8, 32, 32) for f in out.integrated)
    assert all(m.shape == (2, 1, 64, 64) and np.all((m.data > 0) & (m.data < 1)) for m in out.maps)


def test_group_counts_are_single_encoders(model):
    assert model.mte_h.num_parameters() == encoder_param_count(8, 4, 32, 2)
    assert model.mte_m.num_parameters() == encoder_param_count(8, 8, 32, 2)
    names = [n for n, _ in model.named_parameters()]
    assert len(names) == len(set(names))
    assert sum(n.startswith("mte_h.") for n in names) == len(list(model.mte_h.named_parameters()))


def test_perturbing_high_encoder_leaves_mid_group_bit_identical(model, inputs):
    before = run(model, inputs)
    w = model.mte_h.layers[1].fc1.weight
    saved = w.data
    w.data = saved + 1e-2
    after = run(model, inputs)
    w.data = saved
    for a, b in zip(before.mid_encoded, after.mid_encoded):
        assert np.array_equal(a.data, b.data)
    assert all(not np.array_equal(a.data, b.data) for a, b in zip(before.high_encoded, after.high_encoded))


def test_cluster_dependency_by_perturbation(model, inputs):
    """h'f4 feeds f'2 only."""
    from grouptransnet import ciu
    out = run(model, inputs)
    h3, h4, h5 = out.high_encoded
    bumped = Tensor(h4.data + 0.1)
    ft1 = out.transitioned[0]
    with no_grad():
        pairs = ciu.cluster([h3, bumped, h5], out.mid_encoded)
        again = [ciu.integrate(pair, ft1, p) for pair, p in zip(pairs, model.ciu)]
    assert np.array_equal(again[0].data, out.integrated[0].data)
    assert not np.array_equal(again[1].data, out.integrated[1].data)
    assert np.array_equal(again[2].data, out.integrated[2].data)


def test_every_parameter_receives_gradient(model, inputs):
    from grouptransnet.data import synth_sample
    r = np.random.default_rng(5)
    pairs = [synth_sample(r, 64) for _ in range(2)]
    rgb = Tensor(np.stack([p.rgb for p in pairs]))
    depth = Tensor(np.stack([p.depth for p in pairs]))
    gt = np.stack([p.gt for p in pairs])
    params = model.parameters()
    T.zero_grad(params)
    T.backward(total_loss(model(rgb, depth).maps, gt, 7))
    dead = [n for n, p in model.named_parameters() if p.grad is None or not np.any(p.grad)]
    assert dead == []


def test_same_seed_same_weights_different_seed_differs():
    a = GroupTransNet(Config.for_profile("toy", seed=8))
    b = GroupTransNet(Config.for_profile("toy", seed=8))
    c = GroupTransNet(Config.for_profile("toy", seed=9))
    assert all(np.array_equal(p.data, q.data) for p, q in zip(a.parameters(), b.parameters()))
    assert not np.array_equal(a.parameters()[0].data, c.parameters()[0].data)


def test_final_map_choice(inputs):
    cfg = Config.for_profile("toy", seed=1)
    m1 = GroupTransNet(cfg)
    out = run(m1, inputs)
    assert np.array_equal(m1.final_map(out), out.maps[0].data)
    m2 = GroupTransNet(cfg.replace(final_head="mean"))
    np.testing.assert_allclose(m2.final_map(out), np.mean([m.data for m in out.maps], axis=0))
