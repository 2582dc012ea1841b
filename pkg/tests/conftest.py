import numpy as np
import pytest

from sparsehfs.graph import WeightedGraph, build_graph


def random_connected_graph(rng, n, extra=0.1, weighted=True, low=0.5, high=2.0) -> WeightedGraph:
    """Random spanning tree plus each remaining pair with probability ``extra``."""
    parents = [int(rng.integers(0, i)) for i in range(1, n)]
    edges = {(min(i, p), max(i, p)) for i, p in zip(range(1, n), parents)}
    if extra > 0 and n > 2:
        iu, ju = np.triu_indices(n, 1)
        pick = rng.random(iu.shape[0]) < extra
        edges.update(zip(iu[pick].tolist(), ju[pick].tolist()))
    edges = sorted(edges)
    w = rng.uniform(low, high, len(edges)) if weighted else np.ones(len(edges))
    return build_graph(n, [(a, b, x) for (a, b), x in zip(edges, w)])


def gnm_graph(rng, n, m) -> WeightedGraph:
    """Unweighted G(n, m) conditioned on connectivity by a spanning path."""
    iu, ju = np.triu_indices(n, 1)
    pick = rng.choice(iu.shape[0], m, replace=False)
    u, v = iu[pick], ju[pick]
    perm = rng.permutation(n)
    u = np.concatenate([u, perm[:-1]])
    v = np.concatenate([v, perm[1:]])
    g = build_graph(n, (u, v, np.ones(u.shape[0])))
    # merging the path may create duplicates with weight 2; reset to unweighted
    return WeightedGraph(n, g.u, g.v, np.ones(g.m))


def path_graph(n, weight=1.0) -> WeightedGraph:
    return build_graph(n, [(i, i + 1, weight) for i in range(n - 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
