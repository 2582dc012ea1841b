"""Synthetic k-sweep comparing Stable-HFS, Sparse-HFS and baselines.

One dataset (fixed ``data_seed``) is generated.  For every ``k`` its kNN
graph is built once, then every method runs for each seed; the seed drives
the labeled set and the sparsifier's randomness.  After the sweep the best
``k`` is rerun with ``best_k_seeds`` seeds.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .datagen import LAYOUTS, generate_four_clusters, select_labeled_set
from .evaluation import (
    BoundInputs,
    BoundUndefinedError,
    EigenExtremes,
    accuracy,
    baseline_1nn,
    baseline_subsampling,
    generalization_bound,
    graph_eigen_extremes,
)
from .graph import build_graph
from .hfs import center_labels, predict_classes, sparse_hfs, stable_hfs
from .knn import Dataset, build_knn_graph, shuffled, write_feature_csv
from .linalg import SolverConfig
from .sparsifier import BUDGET_MODES, SparsifierParams

log = logging.getLogger(__name__)

METHODS = ("stable", "sparse", "1nn", "subsampling")
RESULT_COLUMNS = (
    "method", "k", "eps", "gamma", "seed", "l", "accuracy", "edges_H", "edges_G",
    "edge_ratio", "wall_ms", "peak_edges", "lambda2", "lambda_n", "bound",
)
DEFAULT_KS = (10, 20, 40, 70, 100, 150, 200, 250, 300, 400, 600)


@dataclass
class ExperimentConfig:
    n: int = 12100
    ks: tuple = DEFAULT_KS
    seeds: tuple = (0,)
    best_k_seeds: int = 5
    methods: tuple = ("stable", "sparse", "1nn")
    eps: float = 0.8
    gamma: float = 1.0
    per_extreme: int = 2
    data_seed: int = 0
    layout: str = "default"
    sigma2: float | None = None
    weight_form: str = "two-sigma2"
    sym: str = "union"
    shuffle: int | None = None  # seed for shuffling the edge stream
    budget: str = "practical"
    budget_constant: float = 1.0
    block_size: int | None = None
    sketch_constant: float = 4.0
    sketch_tolerance: float | None = 1e-4
    rel_tolerance: float = 1e-8
    bound_c: float = 2.0
    bound_delta: float = 0.05
    eigen: bool = True
    jobs: int = 1
    out_dir: str = "results"

    def validate(self) -> None:
        if self.n < 4:
            raise ValueError("n must be >= 4")
        if not self.ks or any(int(k) < 1 or int(k) >= self.n for k in self.ks):
            raise ValueError("every k must satisfy 1 <= k < n")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.best_k_seeds < 0:
            raise ValueError("best_k_seeds must be >= 0")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if "stable" not in self.methods:
            raise ValueError("the stable method is required to pick the best k")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {sorted(LAYOUTS)}")
        if self.budget not in BUDGET_MODES:
            raise ValueError(f"budget must be one of {BUDGET_MODES}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    best_k: int | None = None
    summary: dict = field(default_factory=dict)


def _solver(cfg: ExperimentConfig) -> SolverConfig:
    return SolverConfig(rel_tolerance=cfg.rel_tolerance)


def _params(cfg: ExperimentConfig) -> SparsifierParams:
    return SparsifierParams.create(
        cfg.n, cfg.eps, cfg.budget, cfg.budget_constant,
        sketch_constant=cfg.sketch_constant, sketch_tolerance=cfg.sketch_tolerance,
    )


def _bound(cfg, labels, sol, eig: EigenExtremes | None, eps: float):
    if eig is None or not eig.connected or eig.lambda2 <= 0:
        return math.nan
    centered, _ = center_labels(labels)
    nodes, values = centered.arrays()
    r_hat = float(np.mean((sol.f[nodes] - values) ** 2))
    try:
        terms = generalization_bound(BoundInputs(
            labels.l, cfg.n - labels.l, cfg.gamma, eps, eig.lambda2, eig.lambda_n,
            labels.M, cfg.bound_c, cfg.bound_delta, r_hat,
        ))
    except BoundUndefinedError:
        return math.nan
    return terms.bound


def run_point(cfg: ExperimentConfig, data: Dataset, k: int, edges, graph, eig, seed: int) -> list[dict]:
    """All configured methods for one ``(k, seed)`` grid point."""
    labels = select_labeled_set(data, cfg.per_extreme, seed)
    truth = data.truth_labels
    solver = _solver(cfg)
    rows = []
    base = dict(k=k, gamma=cfg.gamma, seed=seed, l=labels.l, edges_G=graph.m,
                lambda2=eig.lambda2 if eig else math.nan, lambda_n=eig.lambda_n if eig else math.nan)

    t0 = time.perf_counter()
    sol = stable_hfs(graph, labels, cfg.gamma, solver, allow_disconnected=True)
    rows.append(dict(base, method="stable", eps=0.0, accuracy=accuracy(predict_classes(sol), truth),
                     edges_H=graph.m, edge_ratio=1.0, wall_ms=(time.perf_counter() - t0) * 1e3,
                     peak_edges=graph.m, bound=_bound(cfg, labels, sol, eig, 0.0)))

    edges_h = None
    if "sparse" in cfg.methods:
        stream = edges if cfg.shuffle is None else shuffled(edges, [cfg.shuffle, k])
        t0 = time.perf_counter()
        sol_s, state = sparse_hfs(stream, cfg.n, labels, cfg.gamma, _params(cfg), solver, seed=[seed, k],
                                  block_size=cfg.block_size, allow_disconnected=True, jobs=cfg.jobs)
        wall = (time.perf_counter() - t0) * 1e3
        edges_h = state.graph_H.m
        rows.append(dict(base, method="sparse", eps=cfg.eps, accuracy=accuracy(predict_classes(sol_s), truth),
                         edges_H=edges_h, edge_ratio=edges_h / graph.m, wall_ms=wall,
                         peak_edges=state.diagnostics["peak_memory_edges"],
                         bound=_bound(cfg, labels, sol_s, eig, cfg.eps)))

    if "1nn" in cfg.methods:
        t0 = time.perf_counter()
        pred = baseline_1nn(data, labels)
        rows.append(dict(base, method="1nn", eps=0.0, accuracy=accuracy(pred, truth), edges_H=math.nan,
                         edges_G=math.nan, edge_ratio=math.nan, wall_ms=(time.perf_counter() - t0) * 1e3,
                         peak_edges=math.nan, lambda2=math.nan, lambda_n=math.nan, bound=math.nan))

    if "subsampling" in cfg.methods:
        # same space as the sparsifier: about edges_H / k sampled nodes
        budget_edges = edges_h if edges_h is not None else _params(cfg).budget_N
        s = int(min(cfg.n, max(labels.l + 1, round(budget_edges / k))))
        t0 = time.perf_counter()
        pred = baseline_subsampling(data, labels, s, k, cfg.gamma, seed=[seed, k], sigma2=cfg.sigma2, cfg=solver)
        rows.append(dict(base, method="subsampling", eps=0.0, accuracy=accuracy(pred, truth), edges_H=math.nan,
                         edge_ratio=math.nan, wall_ms=(time.perf_counter() - t0) * 1e3, peak_edges=math.nan,
                         lambda2=math.nan, lambda_n=math.nan, bound=math.nan))
    return rows


def best_k(rows: list[dict]) -> int:
    """``k`` with the highest mean Stable-HFS accuracy; ties go to the larger ``k``."""
    by_k: dict[int, list[float]] = {}
    for r in rows:
        if r["method"] == "stable":
            by_k.setdefault(int(r["k"]), []).append(r["accuracy"])
    if not by_k:
        raise ValueError("no stable rows")
    return max(by_k, key=lambda k: (round(float(np.mean(by_k[k])), 12), k))


def mean_by(rows: list[dict], method: str, column: str, k: int | None = None) -> float:
    vals = [r[column] for r in rows if r["method"] == method and (k is None or int(r["k"]) == k)]
    return float(np.mean(vals)) if vals else math.nan


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None, progress=None) -> ExperimentResult:
    cfg.validate()
    data = data if data is not None else generate_four_clusters(cfg.n, cfg.data_seed, cfg.layout)
    if data.n != cfg.n:
        raise ValueError("dataset size differs from cfg.n")
    graphs = {}
    rows: list[dict] = []

    def graph_for(k):
        if k not in graphs:
            edges = build_knn_graph(data, k, cfg.sigma2, weight_form=cfg.weight_form, symmetrize=cfg.sym)
            g = build_graph(cfg.n, edges)
            eig = graph_eigen_extremes(g, seed=cfg.data_seed) if cfg.eigen else None
            graphs.clear()  # keep one graph at a time
            graphs[k] = (edges, g, eig)
        return graphs[k]

    for k in map(int, cfg.ks):
        edges, g, eig = graph_for(k)
        for seed in cfg.seeds:
            point = run_point(cfg, data, k, edges, g, eig, int(seed))
            rows.extend(point)
            if progress:
                progress(point)

    k_best = best_k(rows)
    extra = [s for s in range(cfg.best_k_seeds) if s not in set(map(int, cfg.seeds))]
    if extra:
        edges, g, eig = graph_for(k_best)
        for seed in extra:
            point = run_point(cfg, data, k_best, edges, g, eig, seed)
            rows.extend(point)
            if progress:
                progress(point)

    summary = summarize(rows, k_best, cfg)
    return ExperimentResult(rows, k_best, summary)


def summarize(rows: list[dict], k_best: int, cfg: ExperimentConfig) -> dict:
    best_seeds = set(range(cfg.best_k_seeds)) | set(map(int, cfg.seeds))
    at_best = [r for r in rows if int(r["k"]) == k_best and int(r["seed"]) in best_seeds]
    out = {
        "best_k": k_best,
        "seeds_at_best_k": sorted({int(r["seed"]) for r in at_best}),
        "stable_accuracy_at_best_k": mean_by(at_best, "stable", "accuracy"),
        "accuracy_by_k": {
            m: {int(k): mean_by(rows, m, "accuracy", int(k)) for k in cfg.ks}
            for m in cfg.methods
        },
    }
    if "sparse" in cfg.methods:
        out["sparse_accuracy_at_best_k"] = mean_by(at_best, "sparse", "accuracy")
        out["accuracy_gap_at_best_k"] = abs(out["sparse_accuracy_at_best_k"] - out["stable_accuracy_at_best_k"])
        out["edge_ratio_at_best_k"] = mean_by(at_best, "sparse", "edge_ratio")
        out["max_peak_edges"] = max(r["peak_edges"] for r in rows if r["method"] == "sparse")
        out["budget_N"] = _params(cfg).budget_N
    return out


def curve_shape(acc_by_k: dict, low: float = 0.8, high: float = 0.95) -> dict:
    """Low accuracy at the smallest k, a high plateau, then a decline at the largest k."""
    ks = sorted(acc_by_k)
    accs = [acc_by_k[k] for k in ks]
    peak = max(accs)
    return {
        "low_at_small_k": accs[0] < low,
        "plateau": peak >= high,
        "decline_at_large_k": accs[-1] < peak - (1.0 - low),
        "peak_inside": 0 < accs.index(peak) < len(ks) - 1,
    }


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def write_rows(path, rows: list[dict], columns=RESULT_COLUMNS) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def write_outputs(result: ExperimentResult, cfg: ExperimentConfig, data: Dataset | None = None) -> dict:
    """Results CSV, one CSV per figure and a summary JSON in ``cfg.out_dir``."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = {
        "results": os.path.join(cfg.out_dir, "results.csv"),
        "accuracy_vs_k": os.path.join(cfg.out_dir, "accuracy_vs_k.csv"),
        "edge_ratio_vs_k": os.path.join(cfg.out_dir, "edge_ratio_vs_k.csv"),
        "summary": os.path.join(cfg.out_dir, "summary.json"),
    }
    write_rows(paths["results"], result.rows)
    ks = sorted({int(r["k"]) for r in result.rows})
    acc_rows = [dict(k=k, **{m: mean_by(result.rows, m, "accuracy", k) for m in cfg.methods}) for k in ks]
    write_rows(paths["accuracy_vs_k"], acc_rows, ("k",) + tuple(cfg.methods))
    if "sparse" in cfg.methods:
        ratio_rows = [dict(k=k, edge_ratio=mean_by(result.rows, "sparse", "edge_ratio", k),
                           edges_G=mean_by(result.rows, "sparse", "edges_G", k),
                           edges_H=mean_by(result.rows, "sparse", "edges_H", k)) for k in ks]
        write_rows(paths["edge_ratio_vs_k"], ratio_rows, ("k", "edge_ratio", "edges_G", "edges_H"))
    else:
        del paths["edge_ratio_vs_k"]
    if data is not None:
        paths["dataset"] = os.path.join(cfg.out_dir, "dataset.csv")
        write_feature_csv(paths["dataset"], data, ["x", "y"])
    with open(paths["summary"], "w", encoding="utf-8") as fh:
        json.dump({"config": _jsonable(asdict(cfg)), "summary": result.summary}, fh, indent=2, sort_keys=True)
    return paths


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
