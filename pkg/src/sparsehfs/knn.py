"""Exact k-nearest-neighbour graphs from feature vectors."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import EdgeList

WEIGHT_MODES = ("unweighted", "exponential")
# exp(-d / (2 sigma2)) or exp(-d / sigma2), d the unsquared Euclidean distance
WEIGHT_FORMS = ("two-sigma2", "sigma2")
SYMMETRIZATIONS = ("union", "mutual")


class FeatureFileError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    truth_labels: np.ndarray | None = None
    cluster_ids: np.ndarray | None = None
    clusters: tuple | None = None  # ClusterSpec per cluster id, when generated

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] < 1:
            raise ValueError("points must be an n x d matrix with n >= 2, d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)
        if self.truth_labels is not None:
            lab = np.asarray(self.truth_labels).astype(np.int64)
            if lab.shape != (pts.shape[0],) or not np.all(np.isin(lab, (-1, 1))):
                raise ValueError("truth_labels must be n values in {-1, +1}")
            object.__setattr__(self, "truth_labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def knn_indices(points: np.ndarray, k: int, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Indices and distances of the ``k`` nearest other points of every point.

    Exact brute force on squared distances computed from coordinate
    differences.  Equal distances are ordered by the lower index.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n = {n}")
    idx = np.empty((n, k), dtype=np.int64)
    dist2 = np.empty((n, k))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        rows = np.arange(start, stop)
        diff = X[start:stop, None, :] - X[None, :, :]
        D = np.einsum("ijk,ijk->ij", diff, diff)
        D[rows - start, rows] = np.inf
        kth = np.partition(D, k - 1, axis=1)[:, k - 1]
        r, c = np.nonzero(D <= kth[:, None])
        d = D[r, c]
        order = np.lexsort((c, d, r))
        r, c, d = r[order], c[order], d[order]
        first = np.searchsorted(r, np.arange(stop - start))
        rank = np.arange(r.shape[0]) - first[r]
        keep = rank < k
        idx[start:stop] = c[keep].reshape(-1, k)
        dist2[start:stop] = d[keep].reshape(-1, k)
    return idx, dist2


def build_knn_graph(
    data: Dataset | np.ndarray,
    k: int,
    sigma2: float | None = None,
    mode: str | None = None,
    weight_form: str = "two-sigma2",
    symmetrize: str = "union",
) -> EdgeList:
    """Symmetrised kNN graph as a canonical edge list sorted by ``(u, v)``.

    ``mode`` defaults to ``exponential`` when ``sigma2`` is given and to
    ``unweighted`` otherwise.  With ``symmetrize="union"`` an edge is kept if
    either endpoint lists the other among its neighbours; ``"mutual"`` needs
    both.
    """
    points = data.points if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    n = points.shape[0]
    if mode is None:
        mode = "unweighted" if sigma2 is None else "exponential"
    if mode not in WEIGHT_MODES:
        raise ValueError(f"mode must be one of {WEIGHT_MODES}")
    if (mode == "exponential") != (sigma2 is not None):
        raise ValueError("sigma2 is required for, and only for, exponential weights")
    if sigma2 is not None and not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")
    if weight_form not in WEIGHT_FORMS:
        raise ValueError(f"weight_form must be one of {WEIGHT_FORMS}")
    if symmetrize not in SYMMETRIZATIONS:
        raise ValueError(f"symmetrize must be one of {SYMMETRIZATIONS}")

    idx, dist2 = knn_indices(points, k)
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = idx.ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    keys, first, counts = np.unique(lo * n + hi, return_index=True, return_counts=True)
    if symmetrize == "mutual":
        keep = counts == 2
        keys, first = keys[keep], first[keep]
    u = keys // n
    v = keys % n
    if mode == "unweighted":
        w = np.ones(keys.shape[0])
    else:
        dist = np.sqrt(dist2.ravel()[first])
        scale = 2.0 * sigma2 if weight_form == "two-sigma2" else sigma2
        w = np.exp(-dist / scale)
    return EdgeList(n, u, v, w)


def shuffled(edges: EdgeList, seed) -> EdgeList:
    """The same edges in a seeded random order."""
    perm = np.random.default_rng(seed).permutation(len(edges))
    return EdgeList(edges.n, edges.u[perm], edges.v[perm], edges.weight[perm])


def load_feature_csv(path) -> Dataset:
    """Read a numeric CSV; a header naming a final ``label`` column is optional."""
    rows: list[list[float]] = []
    labels: list[float] = []
    has_label = False
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, 1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _numeric(row[0]):
                has_label = row[-1].strip().lower() == "label"
                width = len(row)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise FeatureFileError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
            values = []
            for col, cell in enumerate(row, 1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise FeatureFileError(
                        f"{path}:{lineno}: column {col}: non-numeric value {cell!r}"
                    ) from None
            if has_label:
                labels.append(values.pop())
            rows.append(values)
    if not rows:
        raise FeatureFileError(f"{path}: no data rows")
    truth = np.array(labels) if has_label else None
    return Dataset(np.array(rows), truth)


def _numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_feature_csv(path, data: Dataset, columns: Sequence[str] | None = None) -> None:
    cols = list(columns) if columns else [f"x{j}" for j in range(data.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + (["label"] if data.truth_labels is not None else []))
        for i in range(data.n):
            row = [repr(float(x)) for x in data.points[i]]
            if data.truth_labels is not None:
                row.append(str(int(data.truth_labels[i])))
            w.writerow(row)
