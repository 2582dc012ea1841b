"""``sparsehfs`` command-line entry point.

Option values are resolved in order: command-line flag, ``SPARSEHFS_<NAME>``
environment variable, ``--config`` file (flat ``key = value`` lines), then
the built-in default.  Errors print one JSON line on stderr and exit with a
code that depends on the error kind (see ``EXIT_CODES``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable

from . import __version__
from .datagen import LAYOUTS, generate_four_clusters, select_labeled_set
from .evaluation import BoundUndefinedError
from .experiment import METHODS, ExperimentConfig, run_experiment, write_outputs
from .formats import (
    EdgeListFile,
    FormatError,
    read_edge_list,
    read_labels,
    write_edge_list,
    write_labels,
    write_solution,
)
from .graph import DimensionError, GraphError, build_graph
from .hfs import LabelAssignment, LabelError, predict_classes, sparse_hfs, stable_hfs
from .knn import (
    SYMMETRIZATIONS,
    WEIGHT_FORMS,
    WEIGHT_MODES,
    FeatureFileError,
    build_knn_graph,
    load_feature_csv,
    shuffled,
    write_feature_csv,
)
from .linalg import SolverConfig, SolverError
from .sparsifier import BUDGET_MODES, SparsifierParams, stream_sparsify

log = logging.getLogger("sparsehfs")

ENV_PREFIX = "SPARSEHFS_"

EXIT_CODES = {
    "ok": 0,
    "internal": 1,
    "usage": 2,
    "io": 3,
    "parse": 4,
    "solver": 5,
    "graph": 6,
    "bound": 7,
}


class ConfigError(ValueError):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        out = tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)
    except ValueError:
        raise ValueError(f"expected a comma-separated integer list, got {text!r}") from None
    if not out:
        raise ValueError("empty list")
    return out


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(x for x in str(text).replace(" ", "").split(",") if x)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(kind: Callable) -> Callable:
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return kind(text)
    return parse


@dataclass(frozen=True)
class Option:
    name: str  # flag name without dashes
    kind: Callable[[Any], Any]
    default: Any = None
    help: str = ""
    choices: tuple | None = None
    required: bool = False
    flag: bool = False  # boolean switch on the command line

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


SOLVER_OPTIONS = [
    Option("tol", float, 1e-8, "relative CG tolerance"),
    Option("jobs", int, 1, "worker threads for sketch solves"),
]
SPARSIFY_OPTIONS = [
    Option("eps", float, 0.8, "sparsifier accuracy epsilon in (0, 1)"),
    Option("budget", str, "practical", "sample budget formula", BUDGET_MODES),
    Option("budget-constant", float, 1.0, "constant of the practical budget"),
    Option("block-size", _optional(int), None, "stream block size (default: budget)"),
    Option("sketch-constant", float, 24.0, "constant of the default sketch dimension"),
    Option("sketch-tolerance", _optional(float), None, "CG tolerance of the sketch solves"),
    Option("seed", int, 0, "random seed"),
]
KNN_OPTIONS = [
    Option("k", int, 10, "neighbours per node"),
    Option("sigma2", _optional(float), None, "exponential weight bandwidth; unweighted if unset"),
    Option("mode", _optional(str), None, "weight mode", WEIGHT_MODES),
    Option("weight-form", str, "two-sigma2", "exponent denominator", WEIGHT_FORMS),
    Option("sym", str, "union", "symmetrisation", SYMMETRIZATIONS),
    Option("shuffle", _optional(int), None, "shuffle the edge order with this seed"),
]

COMMANDS: dict[str, list[Option]] = {
    "datagen": [
        Option("n", int, 12100, "number of points"),
        Option("seed", int, 0, "random seed"),
        Option("layout", str, "default", "cluster layout", tuple(LAYOUTS)),
        Option("out", str, required=True, help="feature CSV to write"),
        Option("labels-out", _optional(str), None, "also write a labeled set here"),
        Option("per-extreme", int, 2, "labels drawn from each extreme cluster"),
        Option("label-seed", int, 0, "seed of the labeled set"),
    ],
    "knn-build": [
        Option("input", str, required=True, help="feature CSV"),
        *KNN_OPTIONS,
        Option("out", str, required=True, help="edge list to write"),
    ],
    "sparsify": [
        Option("input", str, required=True, help="edge list to read"),
        *SPARSIFY_OPTIONS,
        *SOLVER_OPTIONS,
        Option("out", str, required=True, help="sparsifier edge list to write"),
        Option("diag", _optional(str), None, "diagnostics JSON (default: <out>.diag.json)"),
    ],
    "solve": [
        Option("edges", str, required=True, help="edge list"),
        Option("labels", str, required=True, help="labels file"),
        Option("gamma", float, 1.0, "regularisation"),
        Option("allow-disconnected", _bool, False, "accept disconnected graphs", flag=True),
        *SOLVER_OPTIONS,
        Option("out", str, required=True, help="solution file to write"),
    ],
    "pipeline": [
        Option("edges", _optional(str), None, "edge list (streamed)"),
        Option("features", _optional(str), None, "feature CSV; a kNN graph is built first"),
        Option("labels", str, required=True, help="labels file"),
        Option("gamma", float, 1.0, "regularisation"),
        Option("allow-disconnected", _bool, False, "accept disconnected graphs", flag=True),
        *KNN_OPTIONS,
        *SPARSIFY_OPTIONS,
        *SOLVER_OPTIONS,
        Option("out", str, required=True, help="solution file to write"),
        Option("diag", _optional(str), None, "diagnostics JSON (default: <out>.diag.json)"),
    ],
    "experiment": [
        Option("n", int, 12100, "number of points"),
        Option("k", _int_list, ExperimentConfig.ks, "comma-separated k values"),
        Option("seeds", _int_list, ExperimentConfig.seeds, "sweep seeds"),
        Option("best-k-seeds", int, 5, "seeds 0..N-1 rerun at the best k"),
        Option("methods", _str_list, ExperimentConfig.methods, f"subset of {','.join(METHODS)}"),
        Option("eps", float, 0.8, "sparsifier epsilon"),
        Option("gamma", float, 1.0, "regularisation"),
        Option("per-extreme", int, 2, "labels per extreme cluster"),
        Option("data-seed", int, 0, "dataset seed"),
        Option("layout", str, "default", "cluster layout", tuple(LAYOUTS)),
        Option("sigma2", _optional(float), None, "exponential weight bandwidth"),
        Option("weight-form", str, "two-sigma2", "exponent denominator", WEIGHT_FORMS),
        Option("sym", str, "union", "symmetrisation", SYMMETRIZATIONS),
        Option("shuffle", _optional(int), None, "shuffle the edge stream with this seed"),
        Option("budget", str, "practical", "sample budget formula", BUDGET_MODES),
        Option("budget-constant", float, 1.0, "constant of the practical budget"),
        Option("block-size", _optional(int), None, "stream block size"),
        Option("sketch-constant", float, ExperimentConfig.sketch_constant, "sketch dimension constant"),
        Option("sketch-tolerance", _optional(float), ExperimentConfig.sketch_tolerance, "sketch CG tolerance"),
        Option("tol", float, 1e-8, "relative CG tolerance"),
        Option("eigen", _bool, True, "compute lambda2 and lambda_n for the bound column"),
        Option("jobs", int, 1, "worker threads for sketch solves"),
        Option("out-dir", str, "results", "output directory"),
        Option("write-dataset", _bool, False, "also write the dataset CSV", flag=True),
    ],
}


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` comments and blank lines skipped."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise FormatError(path, lineno, "expected key=value")
            key, value = (x.strip() for x in s.split("=", 1))
            key = key.replace("_", "-")
            if key in out:
                raise FormatError(path, lineno, f"duplicate key {key!r}")
            out[key] = value
    return out


def resolve_options(command: str, flags: dict, environ=None, config: dict | None = None) -> dict:
    """Merge flags, environment and config file into validated values."""
    environ = os.environ if environ is None else environ
    options = COMMANDS[command]
    known = {o.name for o in options}
    config = config or {}
    unknown = sorted(set(config) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    values = {}
    for opt in options:
        raw = flags.get(opt.dest)
        source = "flag"
        if raw is None:
            env_key = ENV_PREFIX + opt.dest.upper()
            if env_key in environ:
                raw, source = environ[env_key], env_key
            elif opt.name in config:
                raw, source = config[opt.name], "config"
        if raw is None:
            if opt.required:
                raise ConfigError(f"missing required option --{opt.name}")
            values[opt.dest] = opt.default
            continue
        try:
            value = opt.kind(raw) if not isinstance(raw, bool) or opt.kind is _bool else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for {opt.name} ({source}): {exc}") from None
        if opt.choices is not None and value is not None and value not in opt.choices:
            raise ConfigError(f"{opt.name} must be one of {', '.join(opt.choices)}, got {value!r}")
        values[opt.dest] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsehfs", description="Semi-supervised learning on sparsified graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value configuration file")
        for opt in options:
            if opt.flag:
                p.add_argument(f"--{opt.name}", dest=opt.dest, action="store_const", const=True, default=None,
                               help=opt.help)
            else:
                p.add_argument(f"--{opt.name}", dest=opt.dest, default=None, help=opt.help,
                               metavar=opt.dest.upper())
    return parser


def _solver(o: dict) -> SolverConfig:
    return SolverConfig(rel_tolerance=o["tol"])


def _params(o: dict, n: int) -> SparsifierParams:
    return SparsifierParams.create(
        n, o["eps"], o["budget"], o["budget_constant"],
        sketch_constant=o["sketch_constant"], sketch_tolerance=o["sketch_tolerance"],
    )


def _diag_path(o: dict) -> str:
    return o["diag"] or o["out"] + ".diag.json"


def _write_diag(path, data: dict, started: float) -> None:
    out = dict(data)
    # the only time-dependent values live under this key
    out["run_info"] = {"finished_unix": round(time.time(), 3), "elapsed_s": round(time.perf_counter() - started, 3)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_datagen(o: dict) -> dict:
    data = generate_four_clusters(o["n"], o["seed"], o["layout"])
    write_feature_csv(o["out"], data, ["x", "y"])
    info = {"n": data.n, "out": o["out"]}
    if o["labels_out"]:
        labels = select_labeled_set(data, o["per_extreme"], o["label_seed"])
        write_labels(o["labels_out"], labels.labeled)
        info["labels_out"] = o["labels_out"]
    return info


def _knn_edges(o: dict, path):
    data = load_feature_csv(path)
    edges = build_knn_graph(data, o["k"], o["sigma2"], o["mode"], o["weight_form"], o["sym"])
    if o["shuffle"] is not None:
        edges = shuffled(edges, o["shuffle"])
    return edges


def cmd_knn_build(o: dict) -> dict:
    edges = _knn_edges(o, o["input"])
    write_edge_list(o["out"], edges.n, edges.u, edges.v, edges.weight)
    return {"n": edges.n, "edges": len(edges), "out": o["out"]}


def cmd_sparsify(o: dict) -> dict:
    started = time.perf_counter()
    stream = EdgeListFile(o["input"])
    params = _params(o, stream.n)
    state = stream_sparsify(stream, stream.n, params, _solver(o), o["seed"], o["block_size"], jobs=o["jobs"])
    h = state.graph_H
    write_edge_list(o["out"], h.n, h.u, h.v, h.weight)
    diag = dict(state.diagnostics, budget_N=params.budget_N)
    _write_diag(_diag_path(o), diag, started)
    return {"edges_H": h.m, "out": o["out"]}


def _labels(o: dict, n: int) -> LabelAssignment:
    return LabelAssignment(read_labels(o["labels"], n), n)


def cmd_solve(o: dict) -> dict:
    edges = read_edge_list(o["edges"])
    g = build_graph(edges.n, edges)
    sol = stable_hfs(g, _labels(o, g.n), o["gamma"], _solver(o), allow_disconnected=o["allow_disconnected"])
    write_solution(o["out"], sol.f, predict_classes(sol), sol.sidecar())
    return {"n": g.n, "edges": g.m, "out": o["out"]}


def cmd_pipeline(o: dict) -> dict:
    started = time.perf_counter()
    if (o["edges"] is None) == (o["features"] is None):
        raise ConfigError("give exactly one of --edges and --features")
    if o["edges"] is not None:
        stream = EdgeListFile(o["edges"])
        n = stream.n
    else:
        stream = _knn_edges(o, o["features"])
        n = stream.n
    params = _params(o, n)
    sol, state = sparse_hfs(stream, n, _labels(o, n), o["gamma"], params, _solver(o), o["seed"],
                            o["block_size"], o["allow_disconnected"], o["jobs"])
    write_solution(o["out"], sol.f, predict_classes(sol), sol.sidecar())
    diag = dict(state.diagnostics, budget_N=params.budget_N, peak_edges=state.diagnostics["peak_memory_edges"])
    _write_diag(_diag_path(o), diag, started)
    return {"edges_H": state.graph_H.m, "out": o["out"]}


def cmd_experiment(o: dict) -> dict:
    cfg = ExperimentConfig(
        n=o["n"], ks=o["k"], seeds=o["seeds"], best_k_seeds=o["best_k_seeds"], methods=o["methods"],
        eps=o["eps"], gamma=o["gamma"], per_extreme=o["per_extreme"], data_seed=o["data_seed"],
        layout=o["layout"], sigma2=o["sigma2"], weight_form=o["weight_form"], sym=o["sym"],
        shuffle=o["shuffle"], budget=o["budget"], budget_constant=o["budget_constant"],
        block_size=o["block_size"], sketch_constant=o["sketch_constant"],
        sketch_tolerance=o["sketch_tolerance"], rel_tolerance=o["tol"], eigen=o["eigen"],
        jobs=o["jobs"], out_dir=o["out_dir"],
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = generate_four_clusters(cfg.n, cfg.data_seed, cfg.layout)
    result = run_experiment(cfg, data)
    paths = write_outputs(result, cfg, data if o["write_dataset"] else None)
    return {"best_k": result.best_k, **{k: v for k, v in paths.items()}}


HANDLERS = {
    "datagen": cmd_datagen,
    "knn-build": cmd_knn_build,
    "sparsify": cmd_sparsify,
    "solve": cmd_solve,
    "pipeline": cmd_pipeline,
    "experiment": cmd_experiment,
}


def classify_error(exc: BaseException) -> str:
    if isinstance(exc, ConfigError):
        return "usage"
    if isinstance(exc, (FormatError, FeatureFileError, LabelError, DimensionError, json.JSONDecodeError)):
        return "parse"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, BoundUndefinedError):
        return "bound"
    if isinstance(exc, SolverError):
        return "solver"
    if isinstance(exc, GraphError):
        return "graph"
    if isinstance(exc, ValueError):
        return "usage"
    return "internal"


def error_line(kind: str, exc: BaseException) -> str:
    message = " ".join(str(exc).split()) or type(exc).__name__
    return json.dumps({"error": kind, "exit_code": EXIT_CODES[kind], "type": type(exc).__name__, "message": message})


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = read_config_file(args.config) if args.config else None
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "log_level")}
        options = resolve_options(args.command, flags, environ, config)
        info = HANDLERS[args.command](options)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one error line
        kind = classify_error(exc)
        log.debug("command failed", exc_info=True)
        print(error_line(kind, exc), file=sys.stderr)
        return EXIT_CODES[kind]
    print(json.dumps(info, sort_keys=True, default=str))
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
