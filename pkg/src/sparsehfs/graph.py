"""Immutable weighted undirected graphs.

A :class:`WeightedGraph` stores its edges in canonical form (``u < v``,
sorted by ``(u, v)``, parallel edges merged by summing their weights) together
with a CSR adjacency matrix built once at construction.  Everything downstream
(solvers, sparsifier, HFS) only reads from it.
"""
from __future__ import annotations

from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid graph construction input."""


class DimensionError(ValueError):
    """Vector length does not match the node count."""


class WeightedEdge(NamedTuple):
    u: int
    v: int
    weight: float = 1.0


class EdgeList(NamedTuple):
    """Edge arrays plus node count; usable directly as an edge stream."""

    n: int
    u: np.ndarray
    v: np.ndarray
    weight: np.ndarray

    def __len__(self) -> int:  # number of edges, not tuple arity
        return int(self.u.shape[0])

    def iter_blocks(self, size: int) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        m = len(self)
        for start in range(0, m, size):
            stop = min(start + size, m)
            yield self.u[start:stop], self.v[start:stop], self.weight[start:stop]


def edge_arrays(edges) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coerce a sequence of ``(u, v, w)`` triples or an array triple to arrays."""
    if isinstance(edges, EdgeList):
        return edges.u, edges.v, edges.weight
    if (
        isinstance(edges, tuple)
        and len(edges) == 3
        and all(isinstance(a, np.ndarray) for a in edges)
    ):
        u, v, w = edges
    else:
        rows = list(edges)
        if not rows:
            return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise GraphError("edges must be (u, v) or (u, v, weight) triples")
        u, v = arr[:, 0], arr[:, 1]
        if np.any(u != np.floor(u)) or np.any(v != np.floor(v)):
            raise GraphError("node ids must be integers")
        w = arr[:, 2] if arr.shape[1] == 3 else np.ones(arr.shape[0])
    return (
        np.asarray(u, dtype=np.int64),
        np.asarray(v, dtype=np.int64),
        np.asarray(w, dtype=np.float64),
    )


def canonicalize(n: int, u, v, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validate, orient ``u < v`` and merge duplicates by weight summation.

    The result is sorted by ``(u, v)``.  Duplicate weights are summed in
    ascending weight order so the output does not depend on input order.
    """
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=np.float64)
    if not (u.shape == v.shape == w.shape) or u.ndim != 1:
        raise GraphError("edge arrays must be 1-D and of equal length")
    if u.size == 0:
        return u, v, w
    if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
        raise GraphError(f"edge endpoint out of range [0, {n})")
    if np.any(u == v):
        bad = int(np.flatnonzero(u == v)[0])
        raise GraphError(f"self-loop at node {int(u[bad])}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise GraphError("edge weights must be finite and > 0")
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    keys = lo * n + hi
    order = np.lexsort((w, keys))
    keys = keys[order]
    w = w[order]
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    if starts.size == keys.size:
        merged = w
    else:
        merged = np.add.reduceat(w, starts)
    ukeys = keys[starts]
    return ukeys // n, ukeys % n, merged


class WeightedGraph:
    """Weighted undirected graph on nodes ``0 .. n-1``.

    Use :func:`build_graph` to construct one from arbitrary edge input.
    """

    __slots__ = ("n", "u", "v", "weight", "degree", "adjacency", "_ncomp", "_labels")

    def __init__(self, n: int, u: np.ndarray, v: np.ndarray, weight: np.ndarray):
        # arrays must already be canonical (see canonicalize)
        if n < 0:
            raise GraphError("node count must be non-negative")
        self.n = int(n)
        self.u = u
        self.v = v
        self.weight = weight
        for a in (u, v, weight):
            a.flags.writeable = False
        deg = np.bincount(u, weights=weight, minlength=n) + np.bincount(
            v, weights=weight, minlength=n
        )
        self.degree = deg
        self.degree.flags.writeable = False
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.concatenate([weight, weight])
        self.adjacency = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        self._ncomp = None
        self._labels = None

    @property
    def m(self) -> int:
        return int(self.u.shape[0])

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = None

    def edges(self) -> Iterator[WeightedEdge]:
        for a, b, w in zip(self.u.tolist(), self.v.tolist(), self.weight.tolist()):
            yield WeightedEdge(a, b, w)

    def edge_keys(self) -> np.ndarray:
        return self.u * self.n + self.v

    def edge_list(self) -> EdgeList:
        return EdgeList(self.n, self.u, self.v, self.weight)

    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degree) - self.adjacency).tocsr()

    def dense_laplacian(self) -> np.ndarray:
        return np.diag(self.degree) - self.adjacency.toarray()

    def laplacian_apply(self, x) -> np.ndarray:
        x = _check_vector(self, x)
        if x.ndim == 1:
            return self.degree * x - self.adjacency @ x
        return self.degree[:, None] * x - self.adjacency @ x

    def quadratic_form(self, x) -> float:
        x = _check_vector(self, x)
        diff = x[self.u] - x[self.v]
        return float(np.dot(self.weight, diff * diff))

    def components(self) -> tuple[int, np.ndarray]:
        """Number of connected components and the per-node component label."""
        if self._labels is None:
            if self.n == 0:
                ncomp, labels = 0, np.empty(0, dtype=np.int64)
            else:
                ncomp, labels = connected_components(self.adjacency, directed=False)
            labels.flags.writeable = False
            self._ncomp, self._labels = int(ncomp), labels
        return self._ncomp, self._labels

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        return self.components()[0] == 1

    def subgraph(self, nodes) -> "WeightedGraph":
        """Induced subgraph on ``nodes`` (sorted), relabelled ``0 .. len(nodes)-1``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        index = np.full(self.n, -1, dtype=np.int64)
        index[nodes] = np.arange(nodes.shape[0])
        keep = (index[self.u] >= 0) & (index[self.v] >= 0)
        return WeightedGraph(
            nodes.shape[0], index[self.u[keep]], index[self.v[keep]], self.weight[keep].copy()
        )

    def scaled(self, factor: float) -> "WeightedGraph":
        if factor <= 0:
            raise GraphError("scale factor must be > 0")
        return WeightedGraph(self.n, self.u.copy(), self.v.copy(), self.weight * factor)


def _check_vector(g: WeightedGraph, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.n or x.ndim > 2:
        raise DimensionError(f"expected length {g.n}, got shape {x.shape}")
    return x


def build_graph(n: int, edges) -> WeightedGraph:
    """Build a graph from ``(u, v, weight)`` triples, merging parallel edges.

    Raises :class:`GraphError` on out-of-range endpoints, self-loops or
    non-positive weights.
    """
    u, v, w = edge_arrays(edges)
    return WeightedGraph(n, *canonicalize(n, u, v, w))


def graph_sum(n: int, parts: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]]) -> WeightedGraph:
    """Graph whose weights are the sums of the given edge sets."""
    if not parts:
        return build_graph(n, [])
    u = np.concatenate([p[0] for p in parts])
    v = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    return WeightedGraph(n, *canonicalize(n, u, v, w))


def laplacian_apply(g: WeightedGraph, x) -> np.ndarray:
    """Return ``(D - A) x``."""
    return g.laplacian_apply(x)


def quadratic_form(g: WeightedGraph, x) -> float:
    """Return ``sum_e a_e (x_u - x_v)^2``."""
    return g.quadratic_form(x)


def is_connected(g: WeightedGraph) -> bool:
    return g.is_connected()


def iter_edge_tuples(edges: Iterable) -> Iterator[WeightedEdge]:
    for e in edges:
        if len(e) == 2:
            yield WeightedEdge(int(e[0]), int(e[1]), 1.0)
        else:
            yield WeightedEdge(int(e[0]), int(e[1]), float(e[2]))
