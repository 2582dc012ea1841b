"""Stable harmonic function solutions.

For labels ``y`` on the labeled set ``S`` and ``M = gamma * l * L + I_S`` the
solution is ``f = z1 - mu * z2`` with ``M z1 = y``, ``M z2 = 1`` and
``mu = sum(z1) / sum(z2)``.  It is the minimiser of
``(1/l) * sum_S (f_i - y_i)^2 + gamma * f^T L f`` over mean-zero ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graph import WeightedGraph
from .linalg import (
    DisconnectedGraphError,
    SolverConfig,
    SolverError,
    ConvergenceError,
    conjugate_gradient,
)
from .sparsifier import SparsifierParams, SparsifierState, stream_sparsify

ORACLE_MAX_NODES = 2000


class LabelError(ValueError):
    pass


class CenteringError(SolverError):
    """The returned solution is not mean-zero within tolerance."""


@dataclass(frozen=True)
class LabelAssignment:
    labeled: dict
    n: int
    M: float | None = None  # label bound, defaults to max |y|

    def __post_init__(self):
        if not self.labeled:
            raise LabelError("at least one labeled node is required")
        clean = {}
        for i, y in self.labeled.items():
            i = int(i)
            if not 0 <= i < self.n:
                raise LabelError(f"labeled node {i} out of range [0, {self.n})")
            y = float(y)
            if not np.isfinite(y):
                raise LabelError(f"label of node {i} is not finite")
            clean[i] = y
        object.__setattr__(self, "labeled", clean)
        bound = max(abs(y) for y in clean.values())
        if self.M is None:
            object.__setattr__(self, "M", bound)
        elif bound > self.M:
            raise LabelError(f"label magnitude {bound} exceeds bound M={self.M}")

    @classmethod
    def from_arrays(cls, n: int, nodes, values, M: float | None = None) -> "LabelAssignment":
        nodes = np.asarray(nodes).tolist()
        if len(set(nodes)) != len(nodes):
            raise LabelError("duplicate labeled node")
        return cls(dict(zip(nodes, np.asarray(values, dtype=float).tolist())), n, M)

    @property
    def l(self) -> int:
        return len(self.labeled)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        nodes = np.array(sorted(self.labeled), dtype=np.int64)
        return nodes, np.array([self.labeled[i] for i in nodes.tolist()])

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Label vector ``y_S`` and indicator of ``S``, both of length ``n``."""
        nodes, values = self.arrays()
        y = np.zeros(self.n)
        mask = np.zeros(self.n)
        y[nodes] = values
        mask[nodes] = 1.0
        return y, mask


class HfsSolution(NamedTuple):
    f: np.ndarray
    mu: float
    gamma: float
    residual: float
    iterations: int
    centered_mean: float

    def sidecar(self) -> dict:
        return {
            "mu": self.mu,
            "gamma": self.gamma,
            "residual": self.residual,
            "iterations": self.iterations,
            "centered_mean": self.centered_mean,
        }


def center_labels(labels: LabelAssignment) -> tuple[LabelAssignment, float]:
    nodes, values = labels.arrays()
    mean = float(values.mean())
    centered = dict(zip(nodes.tolist(), (values - mean).tolist()))
    return LabelAssignment(centered, labels.n, max(labels.M + abs(mean), 0.0)), mean


def centering_tolerance(f: np.ndarray) -> float:
    return 1e-6 * f.shape[0] * (float(np.abs(f).max(initial=0.0)) + 1.0)


def stable_hfs(
    g: WeightedGraph,
    labels: LabelAssignment,
    gamma: float,
    cfg: SolverConfig | None = None,
    center: bool = True,
    allow_disconnected: bool = False,
) -> HfsSolution:
    """Stable-HFS solution on ``g``.

    Parameters
    ----------
    center : bool
        Subtract the labeled mean before solving (recorded as
        ``centered_mean``).  Pass False when the labels are already centered.
    allow_disconnected : bool
        Accept graphs with several components.  The system matrix is then
        inverted in the pseudoinverse sense: components without labeled
        nodes get ``f = 0`` and ``mu`` is shared by all other components.
        Otherwise a disconnected graph raises ``DisconnectedGraphError``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if labels.n != g.n:
        raise LabelError(f"labels are for {labels.n} nodes, graph has {g.n}")
    cfg = cfg or SolverConfig()
    mean = 0.0
    if center:
        labels, mean = center_labels(labels)
    y, mask = labels.dense()
    l = labels.l
    n = g.n

    ncomp, comp = g.components()
    if ncomp > 1:
        if not allow_disconnected:
            raise DisconnectedGraphError(f"graph has {ncomp} connected components")
        nodes, _ = labels.arrays()
        active = np.flatnonzero(np.isin(comp, np.unique(comp[nodes])))
    else:
        active = None

    if active is not None and active.size < n:
        sub = g.subgraph(active)
        z, iterations, residual = _solve_pair(sub, y[active], mask[active], gamma * l, cfg)
        z1 = np.zeros(n)
        z2 = np.zeros(n)
        z1[active] = z[:, 0]
        z2[active] = z[:, 1]
    else:
        z, iterations, residual = _solve_pair(g, y, mask, gamma * l, cfg)
        z1, z2 = z[:, 0], z[:, 1]

    total = z2.sum()
    if not total > 0:
        raise SolverError("degenerate system: sum of z2 is not positive")
    mu = float(z1.sum() / total)
    f = z1 - mu * z2
    if not np.all(np.isfinite(f)):
        raise SolverError("non-finite solution")
    if abs(f.sum()) > centering_tolerance(f):
        raise CenteringError(f"solution not centered: sum(f) = {f.sum():.3e}")
    return HfsSolution(f, mu, float(gamma), residual, iterations, mean)


def _solve_pair(g: WeightedGraph, y, mask, scale: float, cfg: SolverConfig):
    def matvec(x):
        return scale * g.laplacian_apply(x) + mask[:, None] * x

    diag = scale * g.degree + mask
    inv = None if cfg.preconditioner == "none" else 1.0 / diag
    rhs = np.column_stack([y, np.ones(g.n)])
    res = conjugate_gradient(matvec, rhs, inv, cfg.rel_tolerance, cfg.iteration_cap(g.n))
    if not res.converged:
        raise ConvergenceError("HFS solve did not converge", res.residual, res.iterations)
    return res.x, res.iterations, res.residual


def predict_classes(sol) -> np.ndarray:
    """Sign of ``f`` with ties at exactly zero sent to +1."""
    f = sol.f if isinstance(sol, HfsSolution) else np.asarray(sol)
    return np.where(f >= 0, 1, -1)


def hfs_dense_oracle(g: WeightedGraph, labels: LabelAssignment, gamma: float, center: bool = True) -> HfsSolution:
    """Dense reference solution for small graphs.

    Solves ``P M P f = P y`` for ``f`` in the range of ``P = L L^+`` with an
    explicit pseudoinverse, where ``M = gamma * l * L + I_S``.
    """
    if g.n > ORACLE_MAX_NODES:
        raise ValueError(f"dense oracle limited to n <= {ORACLE_MAX_NODES}, got {g.n}")
    mean = 0.0
    if center:
        labels, mean = center_labels(labels)
    y, mask = labels.dense()
    L = g.dense_laplacian()
    proj = L @ pseudoinverse(L)
    system = gamma * labels.l * L + np.diag(mask)
    f = pseudoinverse(proj @ system @ proj) @ (proj @ y)
    z2 = np.linalg.solve(system, np.ones(g.n)) if g.is_connected() else pseudoinverse(system) @ np.ones(g.n)
    # the offset is the multiple of z2 that separates f from M^-1 y
    z1 = np.linalg.lstsq(system, y, rcond=None)[0]
    mu = float(np.dot(z1 - f, z2) / np.dot(z2, z2))
    return HfsSolution(f, mu, float(gamma), 0.0, 0, mean)


def pseudoinverse(a: np.ndarray, rel_cutoff: float = 1e-10) -> np.ndarray:
    """Symmetric pseudoinverse, dropping eigenvalues below ``rel_cutoff * max``."""
    a = 0.5 * (a + a.T)
    w, v = np.linalg.eigh(a)
    cut = rel_cutoff * max(float(np.abs(w).max(initial=0.0)), np.finfo(float).tiny)
    inv = np.zeros_like(w)
    big = np.abs(w) > cut
    inv[big] = 1.0 / w[big]
    return (v * inv) @ v.T


def sparse_hfs(
    edge_stream,
    n: int,
    labels: LabelAssignment,
    gamma: float,
    params: SparsifierParams,
    cfg: SolverConfig | None = None,
    seed=0,
    block_size: int | None = None,
    allow_disconnected: bool = False,
    jobs: int = 1,
) -> tuple[HfsSolution, SparsifierState]:
    """Sparsify the stream, then solve Stable-HFS on the sparsifier."""
    state = stream_sparsify(edge_stream, n, params, cfg, seed, block_size=block_size, jobs=jobs)
    centered, mean = center_labels(labels)
    sol = stable_hfs(state.graph_H, centered, gamma, cfg, center=False, allow_disconnected=allow_disconnected)
    return sol._replace(centered_mean=mean), state
