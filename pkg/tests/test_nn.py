import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridattack.agents import Adam, DuelingQNet, GaussianPolicy, Mlp, QPolicy, ReplayBuffer
from gridattack.agents.nn import clip_by_global_norm


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)))


def fd_param_grads(loss, params, h=1e-5):
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss()
            p[idx] = old - h
            down = loss()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out.append(g)
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.booleans(), st.integers(1, 4))
def test_mlp_backprop_matches_finite_differences(seed, final_tanh, batch):
    rng = np.random.default_rng(seed)
    net = Mlp((4, 6, 5, 3), rng, final_tanh=final_tanh)
    x = rng.random((batch, 4))
    w = rng.standard_normal((batch, 3))
    loss = lambda: float(np.sum(w * net(x)))
    out, acts = net.forward(x)
    grads, dx = net.backward(acts, w)
    for a, n in zip(grads, fd_param_grads(loss, net.params)):
        assert rel_err(a, n) < 1e-4
    fd_x = fd_param_grads(lambda: float(np.sum(w * net(x))), [x])[0]
    assert rel_err(dx, fd_x) < 1e-4


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_dueling_backprop_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = DuelingQNet(5, 4, (6, 6), rng)
    x = rng.random((3, 5))
    w = rng.standard_normal((3, 4))
    q, cache = net.forward(x)
    grads, dx = net.backward(cache, w)
    fd = fd_param_grads(lambda: float(np.sum(w * net(x))), net.params)
    for a, n in zip(grads, fd):
        assert rel_err(a, n) < 1e-4
    assert rel_err(dx, fd_param_grads(lambda: float(np.sum(w * net(x))), [x])[0]) < 1e-4


def test_single_vector_backprop_matches_batch():
    rng = np.random.default_rng(0)
    net = Mlp((3, 4, 2), rng)
    x = rng.random(3)
    d = np.array([0.3, -1.2])
    g1, dx1 = net.backward(net.forward(x)[1], d)
    g2, dx2 = net.backward(net.forward(x[None])[1], d[None])
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, atol=1e-15)
    np.testing.assert_allclose(dx1, dx2[0], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_dueling_identity(seed):
    rng = np.random.default_rng(seed)
    net = DuelingQNet(6, 5, (8, 8), rng)
    for p in net.params:
        p += rng.standard_normal(p.shape)
    x = rng.random((20, 6))
    q = net(x)
    v = net.state_value(x)
    assert np.max(np.abs(np.mean(q - v[:, None], axis=1))) < 1e-13


def test_forward_finite_on_unit_box():
    rng = np.random.default_rng(1)
    net = Mlp((10, 64, 64, 4), rng)
    assert np.all(np.isfinite(net(rng.random((1000, 10)))))


def test_zero_weights_continuous_gives_box_center():
    net = Mlp((3, 8, 2), 0)
    net.set_params([np.zeros_like(p) for p in net.params])
    pol = GaussianPolicy(net, [-1.0, 0.0], [3.0, 0.5])
    np.testing.assert_allclose(pol.query(np.array([0.2, 0.9, 0.4])), [1.0, 0.25])


def test_zero_weights_discrete_gives_first_action():
    net = DuelingQNet(3, 4, (8,), 0)
    net.set_params([np.zeros_like(p) for p in net.params])
    assert QPolicy(net).query(np.array([0.2, 0.9, 0.4])) == 0


def test_greedy_ties_go_to_lowest_index():
    net = DuelingQNet(2, 4, (4,), 0)
    params = [np.zeros_like(p) for p in net.params]
    params[-1] = np.array([0.0, 1.0, 1.0, 0.5])  # advantage bias: actions 1 and 2 tie
    net.set_params(params)
    pol = QPolicy(net)
    assert pol.query(np.array([0.5, 0.5])) == 1
    rng = np.random.default_rng(0)
    net = DuelingQNet(2, 4, (4,), rng)
    pol = QPolicy(net)
    S = rng.random((500, 2))
    q = pol.q_values_batch(S)
    expected = [int(np.flatnonzero(row == row.max())[0]) for row in q]
    assert pol.query_batch(S).tolist() == expected


def test_query_deterministic():
    rng = np.random.default_rng(3)
    pol = GaussianPolicy(Mlp((4, 16, 2), rng), [0, 0], [1, 1])
    s = rng.random(4)
    first = pol.query(s)
    assert all(np.array_equal(pol.query(s), first) for _ in range(100))


def test_adam_minimizes_quadratic():
    x = np.array([3.0, -2.0])
    opt = Adam([x], lr=0.05)
    for _ in range(2000):
        opt.step([2 * (x - np.array([1.0, 0.5]))])
    np.testing.assert_allclose(x, [1.0, 0.5], atol=1e-3)


def test_clip_by_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    clipped = clip_by_global_norm(g, 1.0)
    assert np.sqrt(sum(float(c @ c) for c in clipped)) == pytest.approx(1.0)
    assert clip_by_global_norm(g, 10.0) is g


def test_replay_capacity_and_reproducible_sampling():
    buf = ReplayBuffer(5, 2)
    for k in range(12):
        buf.add(np.full(2, k), k % 3, float(k), np.full(2, k + 1), k % 2 == 0)
        assert len(buf) <= 5
    assert len(buf) == 5
    assert sorted(buf.r.tolist()) == [7.0, 8.0, 9.0, 10.0, 11.0]
    a = buf.sample(16, np.random.default_rng(4))
    b = buf.sample(16, np.random.default_rng(4))
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    assert np.array_equal(a[0][:, 0] + 1, a[3][:, 0])
