import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsehfs.graph import EdgeList, build_graph
from sparsehfs.hfs import (
    LabelAssignment,
    LabelError,
    center_labels,
    hfs_dense_oracle,
    predict_classes,
    pseudoinverse,
    sparse_hfs,
    stable_hfs,
)
from sparsehfs.linalg import DisconnectedGraphError
from sparsehfs.sparsifier import SparsifierParams

from conftest import random_connected_graph


def kkt_solution(g, labels, gamma):
    """Constrained minimiser from the dense optimality system with a multiplier for sum(f) = 0."""
    centered, _ = center_labels(labels)
    y, mask = centered.dense()
    n = g.n
    system = np.zeros((n + 1, n + 1))
    system[:n, :n] = gamma * labels.l * g.dense_laplacian() + np.diag(mask)
    system[:n, n] = 1.0
    system[n, :n] = 1.0
    return np.linalg.solve(system, np.r_[y, 0.0])[:n]


def objective(g, centered, gamma, f):
    nodes, values = centered.arrays()
    return np.mean((f[nodes] - values) ** 2) + gamma * g.quadratic_form(f)


def random_labels(rng, n, l):
    nodes = rng.choice(n, l, replace=False)
    return LabelAssignment({int(i): float(rng.choice([-1.0, 1.0])) for i in nodes}, n)


@pytest.mark.parametrize(
    "labeled, mean, centered",
    [
        ({0: 1.0, 5: -1.0}, 0.0, {0: 1.0, 5: -1.0}),
        ({0: 1.0, 1: 1.0}, 1.0, {0: 0.0, 1: 0.0}),
        ({0: 1.0, 1: 1.0, 2: -1.0}, 1 / 3, {0: 2 / 3, 1: 2 / 3, 2: -4 / 3}),
    ],
)
def test_center_labels(labeled, mean, centered):
    out, m = center_labels(LabelAssignment(labeled, 6))
    assert m == pytest.approx(mean)
    assert out.labeled == pytest.approx(centered)


def test_label_validation():
    with pytest.raises(LabelError):
        LabelAssignment({}, 3)
    with pytest.raises(LabelError):
        LabelAssignment({3: 1.0}, 3)
    with pytest.raises(LabelError):
        LabelAssignment({0: 2.0}, 3, M=1.0)
    with pytest.raises(LabelError):
        LabelAssignment.from_arrays(3, [0, 0], [1, -1])
    assert LabelAssignment({0: -2.0, 1: 1.0}, 3).M == 2.0


def test_two_node_solution_is_antisymmetric():
    g = build_graph(2, [(0, 1, 1.0)])
    sol = stable_hfs(g, LabelAssignment({0: 1.0, 1: -1.0}, 2), 1.0)
    c = sol.f[0]
    assert 0 < c < 1
    np.testing.assert_allclose(sol.f, [c, -c], atol=1e-12)
    np.testing.assert_array_equal(predict_classes(sol), [1, -1])


def test_equal_labels_give_zero_function(rng):
    g = random_connected_graph(rng, 12, 0.3)
    sol = stable_hfs(g, LabelAssignment({0: 1.0, 4: 1.0, 7: 1.0}, 12), 0.5)
    np.testing.assert_allclose(sol.f, 0.0, atol=1e-12)
    assert sol.centered_mean == 1.0


def test_small_graph_matches_dense_oracle(rng):
    g = random_connected_graph(rng, 10, 0.3)
    labels = random_labels(rng, 10, 3)
    sol = stable_hfs(g, labels, 0.7)
    ref = hfs_dense_oracle(g, labels, 0.7)
    np.testing.assert_allclose(sol.f, ref.f, atol=1e-6)
    assert sol.mu == pytest.approx(ref.mu, abs=1e-6)
    assert abs(sol.f.sum()) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 10.0]))
def test_solution_is_the_constrained_minimiser(n, seed, gamma):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(rng, n, 0.2)
    labels = random_labels(rng, n, int(rng.integers(1, max(2, n // 2) + 1)))
    sol = stable_hfs(g, labels, gamma)
    np.testing.assert_allclose(sol.f, kkt_solution(g, labels, gamma), atol=1e-6)
    np.testing.assert_allclose(hfs_dense_oracle(g, labels, gamma).f, sol.f, atol=1e-6)


def test_gradient_descent_reaches_the_same_point(rng):
    g = random_connected_graph(rng, 15, 0.3)
    labels = random_labels(rng, 15, 5)
    gamma = 0.3
    centered, _ = center_labels(labels)
    y, mask = centered.dense()
    L = g.dense_laplacian()
    step = 1.0 / (2 / labels.l + 2 * gamma * np.linalg.eigvalsh(L)[-1])
    f = np.zeros(15)
    for _ in range(20000):
        grad = 2 / labels.l * mask * (f - y) + 2 * gamma * L @ f
        f -= step * (grad - grad.mean())  # projected onto sum(f) = 0
    sol = stable_hfs(g, labels, gamma)
    np.testing.assert_allclose(sol.f, f, atol=1e-6)
    perturb = rng.standard_normal(15)
    perturb -= perturb.mean()
    assert objective(g, centered, gamma, sol.f) <= objective(g, centered, gamma, sol.f + 1e-3 * perturb)


def test_projected_pseudoinverse_form_is_the_minimum_norm_variant(rng):
    # (P M)^+ y solves P M f = y with f orthogonal to z2 = M^-1 1, not with f orthogonal to 1
    g = random_connected_graph(rng, 12, 0.3)
    labels = random_labels(rng, 12, 4)
    centered, _ = center_labels(labels)
    y, mask = centered.dense()
    M = labels.l * g.dense_laplacian() + np.diag(mask)
    P = np.eye(12) - np.ones((12, 12)) / 12
    literal = np.linalg.pinv(P @ M) @ y
    z2 = np.linalg.solve(M, np.ones(12))
    sol = stable_hfs(g, labels, 1.0)
    assert abs(literal @ z2) < 1e-8
    diff = literal - sol.f
    t = diff @ z2 / (z2 @ z2)
    np.testing.assert_allclose(diff, t * z2, atol=1e-8)
    np.testing.assert_allclose(P @ M @ literal, P @ M @ sol.f, atol=1e-8)


def test_oracle_guards_size():
    g = build_graph(2001, [(i, i + 1, 1.0) for i in range(2000)])
    with pytest.raises(ValueError):
        hfs_dense_oracle(g, LabelAssignment({0: 1.0}, 2001), 1.0)


def test_pseudoinverse_of_laplacian(rng):
    g = random_connected_graph(rng, 9, 0.4)
    L = g.dense_laplacian()
    Lp = pseudoinverse(L)
    np.testing.assert_allclose(L @ Lp @ L, L, atol=1e-10)
    np.testing.assert_allclose(Lp @ np.ones(9), 0.0, atol=1e-10)


def test_predict_classes_tie_rule():
    np.testing.assert_array_equal(predict_classes(np.array([0.3, -0.2])), [1, -1])
    np.testing.assert_array_equal(predict_classes(np.array([0.0, 0.0])), [1, 1])


def test_disconnected_graphs(rng):
    g = build_graph(6, [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)])
    labels = LabelAssignment({0: 1.0, 2: -1.0}, 6)
    with pytest.raises(DisconnectedGraphError):
        stable_hfs(g, labels, 1.0)
    sol = stable_hfs(g, labels, 1.0, allow_disconnected=True)
    np.testing.assert_array_equal(sol.f[3:], 0.0)
    sub = stable_hfs(g.subgraph([0, 1, 2]), LabelAssignment({0: 1.0, 2: -1.0}, 3), 1.0)
    np.testing.assert_allclose(sol.f[:3], sub.f, atol=1e-12)


def test_sidecar_fields(rng):
    g = random_connected_graph(rng, 8, 0.3)
    side = stable_hfs(g, LabelAssignment({0: 1.0, 1: -1.0}, 8), 1.0).sidecar()
    assert set(side) == {"mu", "gamma", "residual", "iterations", "centered_mean"}


def test_sparse_hfs_passthrough_equals_stable(rng):
    g = random_connected_graph(rng, 50, 0.2)
    labels = random_labels(rng, 50, 6)
    params = SparsifierParams(0.5, 50, budget_N=g.m)
    stream = EdgeList(50, g.u, g.v, g.weight)
    sol, state = sparse_hfs(stream, 50, labels, 1.0, params, seed=4)
    assert state.graph_H == g
    np.testing.assert_array_equal(sol.f, stable_hfs(g, labels, 1.0).f)


def test_sparse_hfs_is_deterministic(rng):
    g = random_connected_graph(rng, 60, 0.5)
    labels = random_labels(rng, 60, 4)
    params = SparsifierParams(0.5, 60, budget_N=300)
    stream = EdgeList(60, g.u, g.v, g.weight)
    a, _ = sparse_hfs(stream, 60, labels, 1.0, params, seed=11, allow_disconnected=True)
    b, _ = sparse_hfs(stream, 60, labels, 1.0, params, seed=11, allow_disconnected=True)
    np.testing.assert_array_equal(a.f, b.f)
