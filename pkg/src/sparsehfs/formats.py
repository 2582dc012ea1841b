"""Text file formats: edge lists, label files and HFS solution files.

Edge list::

    # nodes=<n>
    u<TAB>v<TAB>weight

Labels::

    node_id<TAB>value

Solutions::

    node_id<TAB>f_value<TAB>predicted_class

Lines starting with ``#`` are comments.  Node ids are zero-based.
"""
from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterator

import numpy as np

from .graph import EdgeList, GraphError

_NODES_RE = re.compile(r"^#\s*nodes\s*=\s*(\d+)\s*$")


class FormatError(ValueError):
    """Malformed input file; the message names the offending line."""

    def __init__(self, path, lineno: int | None, message: str):
        where = f"{path}:{lineno}" if lineno is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.lineno = lineno


def _read_header(path) -> int:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                m = _NODES_RE.match(s)
                if m:
                    return int(m.group(1))
                continue
            raise FormatError(path, lineno, "edge line before required '# nodes=<n>' header")
    raise FormatError(path, None, "missing required '# nodes=<n>' header")


class EdgeListFile:
    """Lazy single-pass reader over an edge-list file.

    ``iter_blocks(size)`` yields ``(u, v, w)`` arrays of at most ``size``
    edges, so only one block is resident at a time.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.n = _read_header(self.path)

    def __iter__(self):
        for u, v, w in self.iter_blocks(65536):
            yield from zip(u.tolist(), v.tolist(), w.tolist())

    def iter_blocks(self, size: int) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        n = self.n
        us: list[int] = []
        vs: list[int] = []
        ws: list[float] = []
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                s = line.strip()
                if not s or s.startswith("#"):
                    continue
                parts = s.split()
                if len(parts) != 3:
                    raise FormatError(self.path, lineno, f"expected 3 fields, got {len(parts)}")
                try:
                    a, b, w = int(parts[0]), int(parts[1]), float(parts[2])
                except ValueError:
                    raise FormatError(self.path, lineno, f"cannot parse {s!r}") from None
                if not (0 <= a < n and 0 <= b < n):
                    raise FormatError(self.path, lineno, f"node id out of range [0, {n})")
                if a == b:
                    raise FormatError(self.path, lineno, "self-loop")
                if not (w > 0 and np.isfinite(w)):
                    raise FormatError(self.path, lineno, "weight must be finite and > 0")
                us.append(a)
                vs.append(b)
                ws.append(w)
                if len(us) == size:
                    yield (np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                           np.array(ws, dtype=np.float64))
                    us, vs, ws = [], [], []
        if us:
            yield (np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                   np.array(ws, dtype=np.float64))


def read_edge_list(path) -> EdgeList:
    src = EdgeListFile(path)
    blocks = list(src.iter_blocks(1 << 20))
    if blocks:
        u, v, w = (np.concatenate(x) for x in zip(*blocks))
    else:
        u = v = np.empty(0, np.int64)
        w = np.empty(0, np.float64)
    return EdgeList(src.n, u, v, w)


def write_edge_list(path, n: int, u, v, w) -> None:
    u = np.asarray(u)
    v = np.asarray(v)
    w = np.asarray(w, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nodes={n}\n")
        chunk = 1 << 16
        for s in range(0, u.shape[0], chunk):
            fh.write(
                "".join(
                    f"{a}\t{b}\t{c!r}\n"
                    for a, b, c in zip(u[s:s + chunk].tolist(), v[s:s + chunk].tolist(),
                                       w[s:s + chunk].tolist())
                )
            )


def read_labels(path, n: int) -> dict[int, float]:
    labeled: dict[int, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise FormatError(path, lineno, f"expected 2 fields, got {len(parts)}")
            try:
                i, y = int(parts[0]), float(parts[1])
            except ValueError:
                raise FormatError(path, lineno, f"cannot parse {s!r}") from None
            if not 0 <= i < n:
                raise FormatError(path, lineno, f"node id out of range [0, {n})")
            if not np.isfinite(y):
                raise FormatError(path, lineno, "label must be finite")
            if i in labeled:
                raise FormatError(path, lineno, f"node {i} labeled twice")
            labeled[i] = y
    if not labeled:
        raise FormatError(path, None, "no labels")
    return labeled


def write_labels(path, labeled: dict[int, float]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in sorted(labeled):
            fh.write(f"{i}\t{float(labeled[i])!r}\n")


def write_solution(path, f, classes, sidecar: dict) -> Path:
    """Write the solution table and its JSON sidecar (``<path>.json``)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, (fi, ci) in enumerate(zip(np.asarray(f).tolist(), np.asarray(classes).tolist())):
            fh.write(f"{i}\t{fi!r}\t{int(ci)}\n")
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return side


def read_solution(path) -> tuple[np.ndarray, np.ndarray]:
    f, c = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split("\t")
            if len(parts) != 3:
                raise FormatError(path, lineno, "expected 3 fields")
            f.append(float(parts[1]))
            c.append(int(parts[2]))
    return np.array(f), np.array(c)


__all__ = [
    "EdgeListFile",
    "FormatError",
    "GraphError",
    "read_edge_list",
    "write_edge_list",
    "read_labels",
    "write_labels",
    "write_solution",
    "read_solution",
]
