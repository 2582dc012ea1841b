"""Laplacian solves and effective resistances.

Systems ``L x = b`` are solved on ``range(L)`` by Jacobi-preconditioned
conjugate gradient whose iterates are re-centered every step.  Several
right-hand sides are handled together as the columns of one block, each
column running its own independent CG recurrence.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .graph import DimensionError, WeightedGraph

PRECONDITIONERS = ("jacobi", "none")


class SolverError(RuntimeError):
    """Base class for linear solver failures."""


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class DisconnectedGraphError(SolverError):
    """The Laplacian of a disconnected graph has a larger nullspace than span(1)."""


@dataclass(frozen=True)
class SolverConfig:
    rel_tolerance: float = 1e-8
    max_iterations: int | None = None  # None means 10 * n
    preconditioner: str = "jacobi"

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be > 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")

    def iteration_cap(self, n: int) -> int:
        return self.max_iterations if self.max_iterations is not None else max(10 * n, 1)


class ResistanceEstimate(NamedTuple):
    edge: tuple[int, int]
    value: float
    accuracy_factor: float


class CGResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float  # worst relative true residual over columns
    converged: bool


class ComponentProjector:
    """Subtract the per-component mean from each column.

    With a single component this is ``x - mean(x)``, the orthogonal projector
    onto the complement of ``span(1)``.
    """

    def __init__(self, labels: np.ndarray | None = None, ncomp: int = 1):
        self.labels = labels if ncomp > 1 else None
        self.ncomp = ncomp
        if self.labels is not None:
            self.sizes = np.bincount(labels, minlength=ncomp).astype(np.float64)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.labels is None:
            return x - x.mean(axis=0)
        if x.ndim == 1:
            means = np.bincount(self.labels, weights=x, minlength=self.ncomp) / self.sizes
            return x - means[self.labels]
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            col = x[:, j]
            means = np.bincount(self.labels, weights=col, minlength=self.ncomp) / self.sizes
            out[:, j] = col - means[self.labels]
        return out


def conjugate_gradient(
    matvec: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    inv_diagonal: np.ndarray | None = None,
    rel_tolerance: float = 1e-8,
    max_iterations: int = 1000,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> CGResult:
    """Preconditioned CG for a symmetric positive (semi)definite operator.

    ``rhs`` may be 1-D or an ``(n, k)`` block; every column is solved with its
    own step sizes and stops once its residual drops below
    ``rel_tolerance * ||rhs_j||``.  When ``project`` is given, iterates,
    residuals and preconditioned residuals are projected after every update,
    which keeps a semidefinite solve on the range of the operator.
    The recursive residual is checked against the true residual at the end
    and CG restarts from the current iterate if they disagree.
    """
    vector = rhs.ndim == 1
    B = rhs.reshape(rhs.shape[0], -1).astype(np.float64, copy=True)
    n, k = B.shape
    proj = project if project is not None else (lambda a: a)
    if inv_diagonal is None:
        precond = proj
    else:
        dinv = inv_diagonal[:, None]
        precond = lambda r: proj(dinv * r)  # noqa: E731
    bnorm = np.linalg.norm(B, axis=0)
    target = rel_tolerance * bnorm
    X = np.zeros_like(B)
    pending = np.flatnonzero(bnorm > 0)
    total = 0
    rel = np.zeros(k)
    for _restart in range(4):
        if pending.size == 0 or total >= max_iterations:
            break
        R = B[:, pending] - matvec(X[:, pending])
        R = proj(R)
        total, Xa = _cg_columns(matvec, precond, proj, X[:, pending], R, target[pending], total, max_iterations)
        X[:, pending] = Xa
        true_r = np.linalg.norm(proj(B[:, pending] - matvec(Xa)), axis=0)
        rel[pending] = true_r / bnorm[pending]
        pending = pending[true_r > target[pending]]
    worst = float(rel.max()) if k else 0.0
    x = X[:, 0] if vector else X
    return CGResult(x, total, worst, pending.size == 0)


def _cg_columns(matvec, precond, proj, X, R, target, total, max_iterations):
    Z = precond(R)
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    active = np.arange(X.shape[1])
    rnorm = np.linalg.norm(R, axis=0)
    active = active[rnorm > target]
    while active.size and total < max_iterations:
        total += 1
        full = active.size == X.shape[1]
        Pa = P if full else P[:, active]
        Q = matvec(Pa)
        pq = np.einsum("ij,ij->j", Pa, Q)
        bad = ~(pq > 0)
        pq[bad] = 1.0
        step = rz[active] / pq
        step[bad] = 0.0
        if full:
            X += step * Pa
            R -= step * Q
            X[:] = proj(X)
            R[:] = proj(R)
            Ra = R
        else:
            X[:, active] = proj(X[:, active] + step * Pa)
            R[:, active] = proj(R[:, active] - step * Q)
            Ra = R[:, active]
        rn = np.linalg.norm(Ra, axis=0)
        keep = (rn > target[active]) & ~bad
        if not keep.all():
            active = active[keep]
            Ra = R[:, active]
            Pa = P[:, active]
            if not active.size:
                break
        elif not full:
            Pa = P[:, active]
        Za = precond(Ra)
        rz_new = np.einsum("ij,ij->j", Ra, Za)
        beta = rz_new / rz[active]
        rz[active] = rz_new
        if active.size == X.shape[1]:
            P *= beta
            P += Za
        else:
            P[:, active] = Za + beta * Pa
    return total, X


def _jacobi(g: WeightedGraph, cfg: SolverConfig, shift: np.ndarray | None = None):
    if cfg.preconditioner == "none":
        return None
    diag = g.degree if shift is None else g.degree + shift
    out = np.zeros(g.n)
    pos = diag > 0
    out[pos] = 1.0 / diag[pos]
    return out


def _laplacian_projector(g: WeightedGraph, allow_disconnected: bool) -> ComponentProjector:
    ncomp, labels = g.components()
    if ncomp > 1 and not allow_disconnected:
        raise DisconnectedGraphError(f"graph has {ncomp} connected components")
    return ComponentProjector(labels, ncomp)


def laplacian_pseudo_solve(
    g: WeightedGraph,
    b: np.ndarray,
    cfg: SolverConfig | None = None,
    allow_disconnected: bool = False,
) -> CGResult:
    """``L^+ b`` for a vector or an ``(n, k)`` block, with solve diagnostics.

    With ``allow_disconnected`` each component is treated separately, so the
    result is the pseudoinverse applied to ``b`` projected per component.
    """
    cfg = cfg or SolverConfig()
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != g.n or b.ndim > 2:
        raise DimensionError(f"expected {g.n} rows, got shape {b.shape}")
    proj = _laplacian_projector(g, allow_disconnected)
    res = conjugate_gradient(
        g.laplacian_apply,
        proj(b),
        _jacobi(g, cfg),
        cfg.rel_tolerance,
        cfg.iteration_cap(g.n),
        proj,
    )
    if not res.converged:
        raise ConvergenceError("Laplacian solve did not converge", res.residual, res.iterations)
    return res


def solve_laplacian(g: WeightedGraph, b, cfg: SolverConfig | None = None) -> np.ndarray:
    """Solve ``L x = b - mean(b)`` for the mean-zero solution ``x``.

    Raises
    ------
    DisconnectedGraphError
        if ``g`` is not connected.
    ConvergenceError
        if the iteration cap is reached first.
    """
    return laplacian_pseudo_solve(g, b, cfg).x


def effective_resistance_exact(g: WeightedGraph, e, cfg: SolverConfig | None = None) -> ResistanceEstimate:
    u, v = int(e[0]), int(e[1])
    if u == v:
        raise ValueError("effective resistance needs two distinct nodes")
    if not (0 <= u < g.n and 0 <= v < g.n):
        raise ValueError(f"node out of range [0, {g.n})")
    b = np.zeros(g.n)
    b[u] = 1.0
    b[v] = -1.0
    x = solve_laplacian(g, b, cfg)
    return ResistanceEstimate((min(u, v), max(u, v)), float(x[u] - x[v]), 1.0)


def default_sketch_dim(n: int, alpha: float, m: int | None = None, constant: float = 24.0) -> int:
    """``ceil(constant * ln(n) / (1 - 1/alpha)^2)``, capped at ``m``."""
    if not alpha > 1:
        raise ValueError("alpha must be > 1")
    dim = max(1, math.ceil(constant * math.log(max(n, 2)) / (1.0 - 1.0 / alpha) ** 2))
    if m is not None:
        dim = min(dim, max(m, 1))
    return dim


def sketch_rows(g: WeightedGraph, sketch_dim: int, seed, projection: np.ndarray | None = None) -> np.ndarray:
    """The ``n x sketch_dim`` matrix ``(Q W^{1/2} B)^T``.

    Row ``i`` of ``Q`` has Rademacher entries drawn from a generator seeded
    by ``(seed, i)``, so each column is reproducible on its own.  When
    ``sketch_dim >= m`` a random sketch cannot save any solves, so ``Q`` is
    the identity and the resulting resistances are exact.
    """
    m = g.m
    sw = np.sqrt(g.weight)
    if projection is None and sketch_dim >= m:
        out = np.zeros((g.n, m))
        cols = np.arange(m)
        out[g.u, cols] = sw
        out[g.v, cols] = -sw
        return out
    if projection is not None:
        projection = np.asarray(projection, dtype=np.float64)
        if projection.ndim != 2 or projection.shape[1] != m:
            raise DimensionError(f"projection must have {m} columns")
        sketch_dim = projection.shape[0]
    out = np.empty((g.n, sketch_dim))
    scale = 1.0 / math.sqrt(sketch_dim)
    base = _seed_words(seed)
    for i in range(sketch_dim):
        if projection is None:
            rng = np.random.default_rng(base + [i])
            q = (rng.integers(0, 2, size=m, dtype=np.int8) * 2 - 1) * scale
        else:
            q = projection[i]
        c = q * sw
        out[:, i] = np.bincount(g.u, weights=c, minlength=g.n) - np.bincount(g.v, weights=c, minlength=g.n)
    return out


def _seed_words(seed) -> list[int]:
    if seed is None:
        return [int(np.random.SeedSequence().entropy % (1 << 63))]
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return [int(seed)]


def resistance_array(
    g: WeightedGraph,
    sketch_dim: int,
    cfg: SolverConfig | None = None,
    seed=0,
    projection: np.ndarray | None = None,
    allow_disconnected: bool = False,
    jobs: int = 1,
    chunk: int = 1 << 16,
) -> np.ndarray:
    """Sketched resistances for every edge of ``g``, in edge order."""
    cfg = cfg or SolverConfig()
    proj = _laplacian_projector(g, allow_disconnected)
    Y = sketch_rows(g, sketch_dim, seed, projection)
    dinv = _jacobi(g, cfg)
    cap = cfg.iteration_cap(g.n)

    def run(cols):
        res = conjugate_gradient(g.laplacian_apply, Y[:, cols], dinv, cfg.rel_tolerance, cap, proj)
        if not res.converged:
            raise ConvergenceError("sketch solve did not converge", res.residual, res.iterations)
        return res.x

    ncols = Y.shape[1]
    if jobs > 1 and ncols > 1:
        groups = np.array_split(np.arange(ncols), min(jobs, ncols))
        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            parts = list(pool.map(run, groups))
        Z = np.concatenate(parts, axis=1)
    else:
        Z = run(np.arange(ncols))
    out = np.empty(g.m)
    for s in range(0, g.m, chunk):
        d = Z[g.u[s:s + chunk]] - Z[g.v[s:s + chunk]]
        out[s:s + chunk] = np.einsum("ij,ij->i", d, d)
    return out


def estimate_all_resistances(
    g: WeightedGraph,
    alpha: float,
    sketch_dim: int | None = None,
    cfg: SolverConfig | None = None,
    seed=0,
    projection: np.ndarray | None = None,
    jobs: int = 1,
) -> dict[tuple[int, int], ResistanceEstimate]:
    """JL-sketched effective resistance of every edge of a connected graph.

    Parameters
    ----------
    alpha : float
        Target accuracy factor, only used for the default ``sketch_dim``.
    sketch_dim : int, optional
        Number of sketch rows; defaults to :func:`default_sketch_dim`.
    projection : ndarray, optional
        Explicit ``sketch_dim x m`` matrix replacing the random sketch
        (the identity gives exact resistances).
    """
    if sketch_dim is None:
        sketch_dim = default_sketch_dim(g.n, alpha, g.m)
    if sketch_dim < 1:
        raise ValueError("sketch_dim must be >= 1")
    vals = resistance_array(g, sketch_dim, cfg, seed, projection, jobs=jobs)
    return {
        (a, b): ResistanceEstimate((a, b), r, alpha)
        for a, b, r in zip(g.u.tolist(), g.v.tolist(), vals.tolist())
    }
