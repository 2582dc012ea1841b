import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparsehfs.graph import build_graph
from sparsehfs.knn import (
    Dataset,
    FeatureFileError,
    build_knn_graph,
    knn_indices,
    load_feature_csv,
    shuffled,
    write_feature_csv,
)


def brute_force_knn_edges(points, k, mutual=False):
    n = points.shape[0]
    d = ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    neighbours = []
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (d[i, j], j))
        neighbours.append(set(order[:k]))
    edges = set()
    for i in range(n):
        for j in neighbours[i]:
            if not mutual or i in neighbours[j]:
                edges.add((min(i, j), max(i, j)))
    return edges


@settings(max_examples=50, deadline=None)
@given(st.integers(4, 30), st.integers(1, 5), st.integers(0, 2**32 - 1), st.booleans())
def test_matches_brute_force(n, k, seed, mutual):
    k = min(k, n - 1)
    rng = np.random.default_rng(seed)
    points = rng.integers(0, 4, size=(n, 2)).astype(float)  # many exact ties
    e = build_knn_graph(points, k, symmetrize="mutual" if mutual else "union")
    assert set(zip(e.u.tolist(), e.v.tolist())) == brute_force_knn_edges(points, k, mutual)
    assert np.all(e.u < e.v)
    keys = e.u * n + e.v
    assert np.all(np.diff(keys) > 0)


def test_knn_indices_tie_order():
    points = np.array([[0.0], [1.0], [-1.0], [2.0]])
    idx, dist2 = knn_indices(points, 2)
    np.testing.assert_array_equal(idx[0], [1, 2])
    np.testing.assert_array_equal(dist2[0], [1.0, 1.0])


def test_exponential_weights():
    points = np.array([[0.0, 0.0], [3.0, 4.0]])
    e = build_knn_graph(points, 1, sigma2=2.0)
    assert e.weight[0] == pytest.approx(np.exp(-5.0 / 4.0))
    e = build_knn_graph(points, 1, sigma2=2.0, weight_form="sigma2")
    assert e.weight[0] == pytest.approx(np.exp(-5.0 / 2.0))
    assert build_knn_graph(points, 1).weight[0] == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [dict(k=0), dict(k=3), dict(k=1, mode="exponential"), dict(k=1, sigma2=-1.0),
     dict(k=1, weight_form="squared"), dict(k=1, symmetrize="both"), dict(k=1, mode="cosine")],
)
def test_invalid_arguments(kwargs):
    with pytest.raises(ValueError):
        build_knn_graph(np.zeros((3, 2)) + np.arange(3)[:, None], **kwargs)


def test_union_degree_at_least_k(rng):
    points = rng.standard_normal((60, 3))
    g = build_graph(60, build_knn_graph(points, 5))
    assert np.all(g.degree >= 5)


def test_shuffled_keeps_the_edge_set(rng):
    e = build_knn_graph(rng.standard_normal((30, 2)), 4)
    s = shuffled(e, 3)
    assert build_graph(30, s) == build_graph(30, e)
    assert not np.array_equal(s.u, e.u) or not np.array_equal(s.v, e.v)


def test_feature_csv_round_trip(tmp_path, rng):
    data = Dataset(rng.standard_normal((5, 2)), np.array([1, -1, 1, -1, 1]))
    p = tmp_path / "d.csv"
    write_feature_csv(p, data)
    back = load_feature_csv(p)
    np.testing.assert_array_equal(back.points, data.points)
    np.testing.assert_array_equal(back.truth_labels, data.truth_labels)
    p.write_text("1,2\n3,4\n")
    plain = load_feature_csv(p)
    assert plain.truth_labels is None and plain.d == 2


@pytest.mark.parametrize("body, needle", [("x,y\n1,2\n3\n", ":3:"), ("x,y\n1,abc\n", "column 2"), ("x,y\n", "no data")])
def test_feature_csv_errors(tmp_path, body, needle):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(FeatureFileError, match=needle):
        load_feature_csv(p)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        Dataset(np.array([[0.0], [np.nan]]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 1)), np.array([0, 1]))
