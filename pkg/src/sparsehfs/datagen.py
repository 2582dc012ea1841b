"""Synthetic four-cluster, two-class data in the plane.

The default layout puts the two class +1 clusters on top and the two class -1
clusters below.  The labeled clusters (uppermost and lowermost) sit on
opposite corners.  Clusters are far enough apart that sparse kNN graphs keep
them disconnected.  The lower-right cluster is slightly closer to the
upper-right (+1) cluster than to its own class's wide lower-left cluster, so
it first joins its own class and then, for dense graphs, is pulled over to
the other class.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from .hfs import LabelAssignment
from .knn import Dataset


class ClusterSpec(NamedTuple):
    center: tuple[float, float]
    spread: float
    count: int
    class_label: int


class ClusterShape(NamedTuple):
    center: tuple[float, float]
    spread: float
    class_label: int


DEFAULT_LAYOUT: tuple[ClusterShape, ...] = (
    ClusterShape((6.0, 6.5), 1.0, 1),
    ClusterShape((-6.0, 6.0), 1.0, 1),
    ClusterShape((6.0, -4.0), 1.0, -1),
    ClusterShape((-6.0, -7.0), 1.6, -1),
)

# symmetric rectangle: upper clusters at (+-3, 2), lower at (+-3, -2)
RECTANGLE_LAYOUT: tuple[ClusterShape, ...] = (
    ClusterShape((3.0, 2.0), 1.0, 1),
    ClusterShape((-3.0, 2.0), 1.0, 1),
    ClusterShape((3.0, -2.0), 1.0, -1),
    ClusterShape((-3.0, -2.0), 1.0, -1),
)

LAYOUTS = {"default": DEFAULT_LAYOUT, "rectangle": RECTANGLE_LAYOUT}


def cluster_counts(n: int, layout: Sequence[ClusterShape]) -> list[int]:
    """Split ``n`` evenly; leftover points go to clusters of alternating class."""
    k = len(layout)
    counts = [n // k] * k
    pos = [i for i, c in enumerate(layout) if c.class_label == 1]
    neg = [i for i, c in enumerate(layout) if c.class_label == -1]
    order = [x for pair in zip(pos, neg) for x in pair] + pos[len(neg):] + neg[len(pos):]
    for j in range(n - sum(counts)):
        counts[order[j]] += 1
    return counts


def generate_clusters(specs: Sequence[ClusterSpec], seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    pts, ids, labels = [], [], []
    for cid, s in enumerate(specs):
        if s.count < 1 or not s.spread > 0:
            raise ValueError("clusters need count >= 1 and spread > 0")
        pts.append(rng.normal(np.asarray(s.center, dtype=float), s.spread, size=(s.count, 2)))
        ids.append(np.full(s.count, cid))
        labels.append(np.full(s.count, s.class_label))
    return Dataset(np.vstack(pts), np.concatenate(labels), np.concatenate(ids), tuple(specs))


def generate_four_clusters(n: int, seed=0, layout: Sequence[ClusterShape] | str = "default") -> Dataset:
    """Four isotropic Gaussian clusters, two per class, ``n`` points total."""
    if isinstance(layout, str):
        layout = LAYOUTS[layout]
    if len(layout) != 4:
        raise ValueError("layout must describe four clusters")
    if n < 4:
        raise ValueError("need at least 4 points")
    counts = cluster_counts(n, layout)
    specs = [ClusterSpec(tuple(c.center), c.spread, m, c.class_label) for c, m in zip(layout, counts)]
    return generate_clusters(specs, seed)


def extreme_clusters(data: Dataset) -> tuple[int, int]:
    """Ids of the uppermost and lowermost clusters by center height.

    Equal heights are resolved towards opposite corners: the rightmost of
    the top clusters and the leftmost of the bottom clusters.
    """
    if data.clusters is None or data.cluster_ids is None:
        raise ValueError("dataset carries no cluster metadata")
    centers = [tuple(c.center) for c in data.clusters]
    ids = range(len(centers))
    top = max(ids, key=lambda i: (centers[i][1], centers[i][0]))
    bottom = min(ids, key=lambda i: (centers[i][1], centers[i][0]))
    return top, bottom


def select_labeled_set(data: Dataset, per_extreme: int = 2, seed=0) -> LabelAssignment:
    """``per_extreme`` random points from the uppermost and from the lowermost
    cluster, labeled with their cluster's class."""
    if per_extreme < 1:
        raise ValueError("per_extreme must be >= 1")
    top, bottom = extreme_clusters(data)
    rng = np.random.default_rng(seed)
    labeled = {}
    for cid in (top, bottom):
        y = float(data.clusters[cid].class_label)
        members = np.flatnonzero(data.cluster_ids == cid)
        if per_extreme > members.size:
            raise ValueError(f"per_extreme={per_extreme} exceeds cluster size {members.size}")
        for i in rng.choice(members, per_extreme, replace=False).tolist():
            labeled[int(i)] = y
    return LabelAssignment(labeled, data.n, 1.0)
