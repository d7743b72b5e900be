import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shallowreg import shallow_net as sn
from shallowreg.discretization import Grid


def brute_force_eval(net, points):
    """Term-by-term exact rational sum, rounded once."""
    out = []
    for x in np.atleast_2d(points).reshape(-1, net.input_dim):
        total = Fraction(0)
        for a, b, c in zip(net.outer, net.inner_weights, net.inner_bias):
            z = sum(Fraction(float(bk)) * Fraction(float(xk)) for bk, xk in zip(b, x))
            z += Fraction(float(c))
            if z > 0:
                total += Fraction(float(a)) * z
        out.append(float(total / net.width))
    return np.array(out)


def random_net(seed, width=7, d=1, radius=None):
    return sn.random_net(width, d, np.random.default_rng(seed), radius=radius)


# ------------------------------------------------------------------ evaluate

def test_evaluate_zero_outer():
    net = random_net(0).replace(outer=np.zeros(7))
    assert np.all(sn.evaluate(net, np.linspace(0, 1, 9)) == 0.0)


def test_evaluate_single_neuron():
    net = sn.TwoLayerNet([2.0], [[1.0]], [0.0])
    assert sn.evaluate(net, [0.5])[0] == 1.0


@pytest.mark.parametrize("d", [1, 2])
def test_evaluate_matches_exact_sum(d):
    rng = np.random.default_rng(5)
    for seed in range(5):
        net = random_net(seed, width=13, d=d)
        X = rng.uniform(0, 1, size=(6, d))
        np.testing.assert_allclose(sn.evaluate(net, X), brute_force_eval(net, X),
                                   rtol=1e-14, atol=1e-15)


def test_evaluate_dimension_mismatch():
    net = random_net(1, d=2)
    with pytest.raises(ValueError):
        sn.evaluate(net, np.zeros((3, 1)))


def test_evaluate_permutation_invariant_exactly():
    rng = np.random.default_rng(3)
    net = random_net(2, width=40, d=2)
    X = rng.uniform(0, 1, size=(25, 2))
    perm = rng.permutation(40)
    shuffled = sn.TwoLayerNet(net.outer[perm], net.inner_weights[perm], net.inner_bias[perm])
    assert np.array_equal(sn.evaluate(net, X), sn.evaluate(shuffled, X))


def test_positive_homogeneity():
    net = random_net(4, width=10)
    X = np.linspace(0, 1, 11)
    lam = 4.0   # power of two keeps the scaling exact
    scaled = net.replace(outer=lam * net.outer)
    assert np.array_equal(sn.evaluate(scaled, X), lam * sn.evaluate(net, X))
    assert sn.path_norm(scaled) == lam * sn.path_norm(net)


# ------------------------------------------------------------------ gradients

def test_param_gradient_zero_seed():
    net = random_net(0)
    g = sn.param_gradient(net, np.linspace(0, 1, 5), np.zeros(5))
    assert all(np.all(x == 0) for x in g)


def test_param_gradient_length_mismatch():
    with pytest.raises(ValueError):
        sn.param_gradient(random_net(0), np.linspace(0, 1, 5), np.zeros(4))


def test_param_gradient_zero_outer_freezes_inner():
    net = random_net(0).replace(outer=np.zeros(7))
    g = sn.param_gradient(net, np.linspace(0, 1, 5), np.ones(5))
    assert np.all(g.inner_weights == 0) and np.all(g.inner_bias == 0)


def _fd_check(net, X, u, step=1e-6, kink=1e-5):
    g = sn.param_gradient(net, X, u)
    Z = sn.preactivation(net.outer, net.inner_weights, net.inner_bias, X)
    near = np.any(np.abs(Z) < kink, axis=0)
    worst = 0.0
    for name in ("outer", "inner_weights", "inner_bias"):
        arr = getattr(net, name)
        G = getattr(g, name)
        for idx in np.ndindex(arr.shape):
            if name != "outer" and near[idx[0]]:
                continue

            def val(e):
                A = np.array(arr)
                A[idx] += e
                return float(u @ sn.evaluate(net.replace(**{name: A}), X))

            fd = (val(step) - val(-step)) / (2 * step)
            scale = max(abs(fd), abs(G[idx]), 1e-6)
            worst = max(worst, abs(fd - G[idx]) / scale)
    return worst


def test_param_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    for trial in range(50):
        d = 1 + trial % 2
        net = random_net(100 + trial, width=5, d=d)
        X = rng.uniform(0, 1, size=(8, d))
        u = rng.normal(size=8)
        assert _fd_check(net, X, u) <= 1e-4


# ------------------------------------------------------------------ projection

def test_project_hand_example():
    net = sn.TwoLayerNet([10.0], [[3.0]], [1.0])
    p = sn.project_constraints(net, 2.0)
    assert p.inner_weights[0, 0] == 0.75 and p.inner_bias[0] == 0.25 and p.outer[0] == 2.0


def test_project_leaves_member_unchanged():
    net = sn.TwoLayerNet([0.5, -1.0], [[0.5], [-0.25]], [0.5, 0.75])
    p = sn.project_constraints(net, 2.0)
    for x, y in ((net.outer, p.outer), (net.inner_weights, p.inner_weights),
                 (net.inner_bias, p.inner_bias)):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-15)


def test_project_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        sn.project_constraints(random_net(0), 0.0)


def test_project_redraws_degenerate_neuron(caplog):
    net = sn.TwoLayerNet([1.0, 1.0], [[0.0], [2.0]], [0.0, 2.0])
    p = sn.project_constraints(net, 1.0, np.random.default_rng(0))
    assert p.in_constraint_set()
    assert "degenerate" in caplog.text


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), r=st.floats(0.1, 10.0), d=st.sampled_from([1, 2]),
       spread=st.floats(0.01, 100.0))
def test_project_idempotent_and_feasible(seed, r, d, spread):
    rng = np.random.default_rng(seed)
    net = sn.TwoLayerNet(rng.normal(scale=spread, size=9), rng.normal(scale=spread, size=(9, d)),
                         rng.normal(scale=spread, size=9))
    once = sn.project_constraints(net, r)
    twice = sn.project_constraints(once, r)
    assert once.in_constraint_set(r, tol=1e-12)
    np.testing.assert_allclose(twice.inner_weights, once.inner_weights, rtol=0, atol=1e-15)
    np.testing.assert_allclose(twice.inner_bias, once.inner_bias, rtol=0, atol=1e-15)
    assert np.array_equal(twice.outer, once.outer)


# ------------------------------------------------------------------ norms

def test_path_norm_zero_and_constrained():
    net = random_net(0, radius=3.0)
    assert sn.path_norm(net.replace(outer=np.zeros(7))) == 0.0
    assert sn.path_norm(net) == pytest.approx(np.mean(np.abs(net.outer)), rel=1e-14)


def test_path_norm_barron_representation():
    # f(t) = u.t + v as d+1 atoms (n u_k, e_k, 0) and (n v, 0, 1)
    u, v = np.array([0.7, -1.3]), -0.4
    n = 3
    net = sn.TwoLayerNet([n * u[0], n * u[1], n * v], [[1, 0], [0, 1], [0, 0]], [0, 0, 1])
    assert sn.path_norm(net) == pytest.approx(np.abs(u).sum() + abs(v), rel=1e-15)
    X = np.random.default_rng(0).uniform(0, 1, size=(10, 2))
    np.testing.assert_allclose(sn.evaluate(net, X), X @ u + v, atol=1e-14)


def test_sobolev_norms_identity_function():
    net = sn.TwoLayerNet([1.0], [[1.0]], [0.0])
    l2, h1 = sn.sobolev_norms(net, Grid.uniform(1, 101))
    assert abs(l2 - 1 / math.sqrt(3)) <= 1e-3
    assert abs(h1 - math.sqrt(4 / 3)) <= 1e-3


def test_sobolev_norms_zero_net():
    net = random_net(0).replace(outer=np.zeros(7))
    assert sn.sobolev_norms(net, Grid.uniform(2, 11)) == (0.0, 0.0)


def test_h1_dominates_l2():
    grid1, grid2 = Grid.uniform(1, 51), Grid.uniform(2, 11)
    for seed in range(100):
        d = 1 + seed % 2
        net = random_net(seed, width=6, d=d)
        l2, h1 = sn.sobolev_norms(net, grid1 if d == 1 else grid2)
        assert h1 >= l2 >= 0


def test_input_gradient_matches_finite_differences():
    net = random_net(9, width=6, d=2)
    X = np.random.default_rng(1).uniform(0.1, 0.9, size=(20, 2))
    G = sn.input_gradient(net.outer, net.inner_weights, net.inner_bias, X)
    h = 1e-7
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (sn.evaluate(net, X + e) - sn.evaluate(net, X - e)) / (2 * h)
        np.testing.assert_allclose(G[:, k], fd, atol=1e-6)


# ------------------------------------------------------------------ expansion

def test_expand_keeps_existing_neurons():
    net = random_net(0, width=50, radius=2.0)
    big = sn.expand_width(net, 70, np.random.default_rng(1))
    assert big.width == 70
    assert np.array_equal(big.outer[:50], net.outer)
    assert np.array_equal(big.inner_weights[:50], net.inner_weights)
    assert np.array_equal(big.inner_bias[:50], net.inner_bias)
    assert big.in_constraint_set(2.0)


def test_expand_prefactor():
    net = random_net(0, width=50)
    big = sn.expand_width(net, 70, np.random.default_rng(1))
    big = big.replace(outer=np.concatenate([big.outer[:50], np.zeros(20)]))
    X = np.linspace(0, 1, 17)
    np.testing.assert_allclose(sn.evaluate(big, X), 50 / 70 * sn.evaluate(net, X),
                               rtol=1e-13, atol=1e-15)


def test_expand_deterministic_and_validates():
    net = random_net(0, width=5)
    a = sn.expand_width(net, 8, np.random.default_rng(42))
    b = sn.expand_width(net, 8, np.random.default_rng(42))
    assert np.array_equal(a.outer, b.outer) and np.array_equal(a.inner_weights, b.inner_weights)
    with pytest.raises(ValueError):
        sn.expand_width(net, 5, np.random.default_rng(0))


def test_net_is_immutable():
    net = random_net(0)
    with pytest.raises(ValueError):
        net.outer[0] = 1.0
    with pytest.raises(ValueError):
        sn.TwoLayerNet([1.0, 2.0], [[1.0]], [0.0])
