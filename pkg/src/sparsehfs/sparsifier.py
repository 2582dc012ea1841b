"""Semi-streaming spectral sparsification by effective-resistance resampling.

The sparsifier is kept as a list of edge *instances*.  Every instance is one
canonical edge from one stream block and remembers its original weight
``a_e``, its current sampling probability ``p_e`` and the number of retained
samples.  Its weight in the sparsifier is ``copies * a_e / (budget_N * p_e)``.
An instance with ``p_e = 1`` carries ``budget_N`` copies, so its weight is
exactly ``a_e``.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .graph import EdgeList, GraphError, WeightedGraph, canonicalize, edge_arrays
from .linalg import SolverConfig, default_sketch_dim, resistance_array

log = logging.getLogger(__name__)

BUDGET_MODES = ("theory", "practical")

# a resistance oracle maps a graph to one value per edge of that graph
ResistanceOracle = Callable[[WeightedGraph], np.ndarray]


class EmptyGraphError(GraphError):
    """The edge stream contained no edges."""


def budget_size(n: int, epsilon: float, mode: str = "practical", constant: float = 1.0) -> int:
    """Sample budget ``N``.

    ``theory``: ``alpha^2 n ln(n)^2 / eps^2``; ``practical``:
    ``constant * n ln(n) / eps^2``.  Never below ``n - 1``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if mode not in BUDGET_MODES:
        raise ValueError(f"budget mode must be one of {BUDGET_MODES}")
    logn = math.log(max(n, 2))
    if mode == "theory":
        alpha = 1.0 / (1.0 - epsilon)
        raw = alpha**2 * n * logn**2 / epsilon**2
    else:
        raw = constant * n * logn / epsilon**2
    return max(math.ceil(raw), n - 1, 1)


@dataclass(frozen=True)
class SparsifierParams:
    epsilon: float
    n: int
    budget_N: int
    alpha: float | None = None  # defaults to 1 / (1 - epsilon)
    sketch_dim: int | None = None  # None: default_sketch_dim(n, alpha, m, sketch_constant)
    sketch_constant: float = 24.0
    sketch_tolerance: float | None = None  # CG tolerance for sketch solves; None keeps the solver config's
    p_min: float = 1e-12

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / (1.0 - self.epsilon))
        if not self.alpha > 1:
            raise ValueError("alpha must be > 1")
        if self.budget_N < max(self.n - 1, 1):
            raise ValueError("budget_N must be at least n - 1")
        if not 0 < self.p_min < 1:
            raise ValueError("p_min must lie in (0, 1)")

    @classmethod
    def create(cls, n: int, epsilon: float, budget: str = "practical", budget_constant: float = 1.0, **kw):
        return cls(epsilon=epsilon, n=n, budget_N=budget_size(n, epsilon, budget, budget_constant), **kw)

    def sketch_config(self, cfg: SolverConfig) -> SolverConfig:
        if self.sketch_tolerance is None:
            return cfg
        return dataclasses.replace(cfg, rel_tolerance=self.sketch_tolerance)

    def sketch_rows(self, m: int) -> int:
        if self.sketch_dim is not None:
            return max(1, min(self.sketch_dim, max(m, 1)))
        return default_sketch_dim(self.n, self.alpha, m, self.sketch_constant)


@dataclass
class SparsifierState:
    n: int
    budget_N: int
    u: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    v: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    original_weight: np.ndarray = field(default_factory=lambda: np.empty(0))
    prob: np.ndarray = field(default_factory=lambda: np.empty(0))
    copies: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    edges_seen: int = 0
    diagnostics: dict = field(default_factory=dict)
    _graph: WeightedGraph | None = field(default=None, repr=False)

    @classmethod
    def empty(cls, n: int, budget_N: int) -> "SparsifierState":
        return cls(n, budget_N)

    @property
    def instances(self) -> int:
        return int(self.u.shape[0])

    def instance_weights(self) -> np.ndarray:
        return self.original_weight * (self.copies / (self.budget_N * self.prob))

    @property
    def graph_H(self) -> WeightedGraph:
        if self._graph is None:
            self._graph = WeightedGraph(self.n, *canonicalize(self.n, self.u, self.v, self.instance_weights()))
        return self._graph

    def _keyed(self, values) -> dict:
        out = {}
        for a, b, x in zip(self.u.tolist(), self.v.tolist(), values.tolist()):
            key = (a, b)
            j = 0
            while key in out:
                j += 1
                key = (a, b, j)
            out[key] = x
        return out

    @property
    def probs(self) -> dict:
        """Edge -> retained probability.

        A pair that arrived in several blocks is listed once per arrival,
        as ``(u, v)``, ``(u, v, 1)``, ``(u, v, 2)`` and so on.
        """
        return self._keyed(self.prob)

    @property
    def original_weights(self) -> dict:
        return self._keyed(self.original_weight)


def _component_denominators(g: WeightedGraph) -> tuple[np.ndarray, int]:
    ncomp, labels = g.components()
    sizes = np.bincount(labels, minlength=ncomp)
    return (sizes[labels[g.u]] - 1).astype(np.float64), int(np.count_nonzero(sizes > 1))


def _rng(seed, block_index: int, tag: int) -> np.random.Generator:
    words = list(seed) if isinstance(seed, (list, tuple)) else [0 if seed is None else int(seed)]
    return np.random.default_rng(words + [int(block_index), tag])


def sparsify_step(
    state: SparsifierState,
    delta,
    params: SparsifierParams,
    cfg: SolverConfig | None = None,
    seed=0,
    block_index: int = 0,
    resistance: ResistanceOracle | None = None,
    passthrough: bool = True,
    jobs: int = 1,
) -> SparsifierState:
    """Merge one block of stream edges into the sparsifier and resample.

    Parameters
    ----------
    delta
        New edges, as anything accepted by :func:`edge_arrays`.  Repeated
        pairs within the block are merged first.
    resistance
        Optional replacement for the sketched estimator, called with the
        merged graph ``H + delta``.
    passthrough
        When ``H + delta`` has at most ``budget_N`` distinct edges every
        probability is capped at 1, so nothing is dropped.

    If ``H + delta`` is disconnected, each component uses its own node count
    in the probability normalisation and a warning is logged.
    """
    cfg = cfg or SolverConfig()
    n, N = state.n, state.budget_N
    if n != params.n or N != params.budget_N:
        raise ValueError("state and params disagree on n or budget_N")
    du, dv, da = canonicalize(n, *edge_arrays(delta))
    merged = WeightedGraph(
        n,
        *canonicalize(
            n,
            np.concatenate([state.u, du]),
            np.concatenate([state.v, dv]),
            np.concatenate([state.instance_weights(), da]),
        ),
    )
    old = state.instances
    u = np.concatenate([state.u, du])
    v = np.concatenate([state.v, dv])
    a = np.concatenate([state.original_weight, da])

    if passthrough and merged.m <= N:
        p_new = np.ones(u.shape[0])
    else:
        if resistance is not None:
            r_merged = np.asarray(resistance(merged), dtype=np.float64)
        else:
            r_merged = resistance_array(
                merged,
                params.sketch_rows(merged.m),
                params.sketch_config(cfg),
                seed=_seed_list(seed) + [block_index, 0],
                allow_disconnected=True,
                jobs=jobs,
            )
        denom, ncomp = _component_denominators(merged)
        if ncomp > 1:
            log.warning("block %d: H + delta has %d components; normalising per component", block_index, ncomp)
        pos = np.searchsorted(merged.edge_keys(), u * n + v)
        p_new = a * r_merged[pos] / (params.alpha * denom[pos])
        p_new = np.clip(p_new, params.p_min, 1.0)

    # existing instances: thin the retained samples
    p_old = state.prob
    p_h = np.minimum(p_old, p_new[:old])
    keep_h = _rng(seed, block_index, 1).binomial(state.copies, p_h / p_old)
    # new instances: fresh samples
    p_d = p_new[old:]
    copies_d = _rng(seed, block_index, 2).binomial(N, p_d)

    prob = np.concatenate([p_h, p_d])
    copies = np.concatenate([keep_h, copies_d]).astype(np.int64)
    alive = copies > 0
    return SparsifierState(
        n=n,
        budget_N=N,
        u=u[alive],
        v=v[alive],
        original_weight=a[alive],
        prob=prob[alive],
        copies=copies[alive],
        edges_seen=state.edges_seen + int(du.shape[0]),
        diagnostics=dict(state.diagnostics),
    )


def _seed_list(seed) -> list[int]:
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [0 if seed is None else int(seed)]


def _blocks(edge_stream, size: int):
    if hasattr(edge_stream, "iter_blocks"):
        yield from edge_stream.iter_blocks(size)
        return
    if isinstance(edge_stream, tuple) and len(edge_stream) == 3 and isinstance(edge_stream[0], np.ndarray):
        yield from EdgeList(0, *edge_stream).iter_blocks(size)
        return
    it = iter(edge_stream)
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield edge_arrays(chunk)


def stream_sparsify(
    edge_stream: Iterable,
    n: int,
    params: SparsifierParams,
    cfg: SolverConfig | None = None,
    seed=0,
    block_size: int | None = None,
    resistance: ResistanceOracle | None = None,
    jobs: int = 1,
) -> SparsifierState:
    """Sparsify an edge stream block by block.

    The stream is consumed in consecutive blocks of ``block_size`` edges
    (default ``budget_N``).  Only the current block and the sparsifier are
    held in memory.  ``state.diagnostics`` records edges_seen, blocks,
    distinct_edges, peak_memory_edges and per_block_timings_ms.
    """
    size = params.budget_N if block_size is None else int(block_size)
    if size < 1:
        raise ValueError("block_size must be >= 1")
    state = SparsifierState.empty(n, params.budget_N)
    timings: list[float] = []
    peak = 0
    for index, block in enumerate(_blocks(edge_stream, size)):
        if len(block[0]) == 0:
            continue
        t0 = time.perf_counter()
        peak = max(peak, state.instances + len(block[0]))
        state = sparsify_step(state, block, params, cfg, seed, len(timings), resistance, jobs=jobs)
        timings.append((time.perf_counter() - t0) * 1e3)
    if not timings:
        raise EmptyGraphError("edge stream is empty")
    state.diagnostics = {
        "edges_seen": state.edges_seen,
        "blocks": len(timings),
        "distinct_edges": state.graph_H.m,
        "peak_memory_edges": peak,
        "per_block_timings_ms": [round(t, 3) for t in timings],
    }
    return state
