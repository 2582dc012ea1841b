"""Metrics, baselines, spectral probes and the generalization bound."""
from __future__ import annotations

import logging
import math
from typing import NamedTuple

import numpy as np
import scipy.sparse.linalg as spla

from .graph import WeightedGraph, build_graph
from .hfs import LabelAssignment, predict_classes, stable_hfs
from .knn import Dataset, build_knn_graph
from .linalg import SolverConfig

log = logging.getLogger(__name__)

DENSE_EIGEN_MAX_NODES = 2000
# added to eps in eigenvalue and probe-ratio checks of streamed sparsifiers;
# measured by scripts/calibrate_sandwich_slack.py (results in scripts/sandwich_slack.json)
SANDWICH_SLACK = 0.15


class BoundUndefinedError(ValueError):
    """``l * gamma * (1 - eps) * lambda2 <= 1``: the bound is infinite."""


def accuracy(pred, truth, mask=None) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    agree = pred == truth
    if mask is not None:
        mask = np.asarray(mask)
        if mask.dtype != bool:
            sel = np.zeros(pred.shape[0], dtype=bool)
            sel[mask] = True
            mask = sel
        agree = agree[mask]
    if agree.size == 0:
        raise ValueError("empty evaluation set")
    return float(np.count_nonzero(agree) / agree.size)


def spectral_similarity(g: WeightedGraph, h: WeightedGraph, probes: int = 20, seed=0) -> tuple[float, float]:
    """Extremes of ``x^T L_H x / x^T L_G x`` over random mean-zero probes.

    This only bounds the true spectral distortion from below.
    """
    if g.n != h.n:
        raise ValueError("graphs must have the same node count")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(probes):
        for _attempt in range(100):
            x = rng.standard_normal(g.n)
            x -= x.mean()
            qg = g.quadratic_form(x)
            if qg > 1e-14:
                break
        else:
            raise ValueError("could not draw a non-degenerate probe")
        ratios.append(h.quadratic_form(x) / qg)
    return float(min(ratios)), float(max(ratios))


def edge_ratio(h: WeightedGraph, g: WeightedGraph) -> float:
    return h.m / g.m if g.m else 0.0


def nearest_reference(points: np.ndarray, reference: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Position in ``reference`` of the nearest reference point; ties to the first."""
    out = np.empty(points.shape[0], dtype=np.int64)
    for s in range(0, points.shape[0], chunk):
        diff = points[s:s + chunk, None, :] - reference[None, :, :]
        out[s:s + chunk] = np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
    return out


def baseline_1nn(data: Dataset, labels: LabelAssignment) -> np.ndarray:
    """Label of the Euclidean-nearest labeled node, ties to the lower node id."""
    nodes, values = labels.arrays()
    near = nearest_reference(data.points, data.points[nodes])
    return np.where(values[near] >= 0, 1, -1)


def baseline_subsampling(
    data: Dataset,
    labels: LabelAssignment,
    s: int,
    k: int,
    gamma: float,
    seed=0,
    sigma2: float | None = None,
    cfg: SolverConfig | None = None,
) -> np.ndarray:
    """Stable-HFS on a uniform node sample, extended by nearest sampled node.

    All labeled nodes are always part of the sample.  If the sample's kNN
    graph is disconnected only its largest labeled component is kept.
    """
    n = data.n
    if not 1 <= s <= n:
        raise ValueError("sample size must lie in [1, n]")
    nodes, _ = labels.arrays()
    rng = np.random.default_rng(seed)
    rest = np.setdiff1d(np.arange(n), nodes)
    extra = max(0, min(s - nodes.size, rest.size))
    sample = np.sort(np.concatenate([nodes, rng.choice(rest, extra, replace=False)]))
    pred = np.empty(n, dtype=np.int64)
    if sample.size < 2:
        return baseline_1nn(data, labels)
    edges = build_knn_graph(data.points[sample], min(k, sample.size - 1), sigma2)
    g = build_graph(sample.size, edges)
    local = {int(np.searchsorted(sample, i)): y for i, y in labels.labeled.items()}
    ncomp, comp = g.components()
    keep = np.arange(sample.size)
    if ncomp > 1:
        sizes = np.bincount(comp, minlength=ncomp)
        labeled_comps = np.unique(comp[list(local)])
        best = labeled_comps[np.argmax(sizes[labeled_comps])]
        keep = np.flatnonzero(comp == best)
        log.warning("subsample graph has %d components; keeping the largest labeled one (%d nodes)",
                    ncomp, keep.size)
        g = g.subgraph(keep)
        local = {int(np.searchsorted(keep, i)): y for i, y in local.items() if comp[i] == best}
    sol = stable_hfs(g, LabelAssignment(local, g.n), gamma, cfg)
    kept_nodes = sample[keep]
    pred_kept = predict_classes(sol)
    near = nearest_reference(data.points, data.points[kept_nodes])
    pred[:] = pred_kept[near]
    pred[kept_nodes] = pred_kept
    return pred


class BoundInputs(NamedTuple):
    l: int
    u: int
    gamma: float
    epsilon: float
    lambda2: float
    lambda_n: float
    M: float
    c: float
    delta: float
    R_hat: float


class BoundTerms(NamedTuple):
    beta: float
    bound: float
    pi_lu: float
    sparsification_term: float
    confidence_term: float


def transductive_factor(l: int, u: int) -> float:
    top = 2 * max(l, u)
    return l * u / (l + u - 0.5) * top / (top - 1)


def generalization_bound(b: BoundInputs) -> BoundTerms:
    """Stability-based generalization bound of Stable-HFS on a sparsifier.

    With ``D = l gamma (1 - eps) lambda2 - 1``::

        beta  = 1.5 M sqrt(l) / D^2 + 4 M / D
        bound = R_hat + l^2 gamma^2 lambda_n^2 M^2 eps^2 / D^4 + beta
                + (2 beta + c^2 (l + u) / (l u)) sqrt(pi(l, u) ln(1/delta) / 2)
    """
    if b.l < 1 or b.u < 1:
        raise ValueError("l and u must be positive")
    if not (b.gamma > 0 and b.lambda2 > 0 and b.lambda_n > 0 and b.M > 0 and b.c > 0):
        raise ValueError("gamma, lambda2, lambda_n, M and c must be positive")
    if not 0 <= b.epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if not 0 < b.delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    D = b.l * b.gamma * (1.0 - b.epsilon) * b.lambda2 - 1.0
    if not D > 0:
        raise BoundUndefinedError(f"l*gamma*(1-eps)*lambda2 - 1 = {D:.6g} is not positive")
    beta = 1.5 * b.M * math.sqrt(b.l) / D**2 + 4.0 * b.M / D
    sparsification = (b.l * b.gamma * b.lambda_n * b.M * b.epsilon) ** 2 / D**4
    pi_lu = transductive_factor(b.l, b.u)
    confidence = (2.0 * beta + b.c**2 * (b.l + b.u) / (b.l * b.u)) * math.sqrt(
        pi_lu * math.log(1.0 / b.delta) / 2.0
    )
    return BoundTerms(beta, b.R_hat + sparsification + beta + confidence, pi_lu, sparsification, confidence)


class EigenExtremes(NamedTuple):
    lambda2: float
    lambda_n: float
    connected: bool
    converged: bool


def graph_eigen_extremes(g: WeightedGraph, tol: float = 1e-6, maxiter: int = 2000, seed=0) -> EigenExtremes:
    """Smallest nonzero and largest Laplacian eigenvalue.

    Dense for ``n <= 2000``; otherwise ARPACK for the largest and LOBPCG
    (constrained orthogonal to the constant vector, Jacobi-preconditioned)
    for the smallest nonzero one.  A disconnected graph reports
    ``lambda2 = 0`` and ``connected = False``.
    """
    if g.n < 2 or g.m == 0:
        return EigenExtremes(0.0, 0.0, g.n <= 1, True)
    connected = g.is_connected()
    if g.n <= DENSE_EIGEN_MAX_NODES:
        w = np.linalg.eigvalsh(g.dense_laplacian())
        return EigenExtremes(float(w[1]) if connected else 0.0, float(w[-1]), connected, True)
    L = g.laplacian()
    lam_n = float(spla.eigsh(L, k=1, which="LA", tol=tol, return_eigenvectors=False)[0])
    if not connected:
        return EigenExtremes(0.0, lam_n, False, True)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((g.n, 1))
    ones = np.ones((g.n, 1)) / math.sqrt(g.n)
    inv_deg = 1.0 / g.degree
    precond = spla.LinearOperator((g.n, g.n), matvec=lambda x: inv_deg * np.ravel(x), dtype=float)
    vals, _vecs, hist = spla.lobpcg(
        L, X, M=precond, Y=ones, tol=tol, maxiter=maxiter, largest=False, retResidualNormsHistory=True
    )
    res = hist[-1] if len(hist) else np.array([np.inf])
    lam2 = float(vals[0])
    converged = bool(np.all(np.asarray(res) <= tol * max(lam_n, 1.0) * 10))
    return EigenExtremes(lam2, lam_n, True, converged)
