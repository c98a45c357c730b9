"""Graphs, cue sets and labels from files; k-NN graphs from feature vectors."""
from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import PERFECT, CueAssignment, GraphInstance, GroundTruth

log = logging.getLogger(__name__)

_NODES_RE = re.compile(r"#\s*nodes:\s*(\d+)\s*$")


class ParseError(ValueError):
    def __init__(self, path, lineno: int, line: str, why: str):
        super().__init__(f"{path}:{lineno}: {why}: {line.rstrip()!r}")
        self.lineno = lineno


@dataclass(frozen=True)
class EdgeListReport:
    n: int
    edges: int
    duplicates: int
    self_loops: int


def _parse_int_rows(path, width: int) -> tuple[np.ndarray, int | None]:
    """Integer rows of exactly ``width`` fields; comments and blanks skipped.

    Also returns n from a ``# nodes: n`` comment if there is one.
    """
    rows: list[list[int]] = []
    declared = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.strip()
            if not body:
                continue
            if body.startswith("#"):
                m = _NODES_RE.match(body)
                if m and declared is None:
                    declared = int(m.group(1))
                continue
            body = body.split("#", 1)[0]
            parts = body.split()
            if len(parts) != width:
                raise ParseError(path, lineno, line,
                                 f"expected {width} field(s), got {len(parts)}")
            try:
                vals = [int(x) for x in parts]
            except ValueError:
                raise ParseError(path, lineno, line, "not an integer") from None
            if min(vals) < 0:
                raise ParseError(path, lineno, line, "negative node id")
            rows.append(vals)
    arr = np.array(rows, dtype=np.int64).reshape(-1, width)
    return arr, declared


def load_edge_list(path: str | Path, n: int | None = None,
                   return_report: bool = False):
    """Read a whitespace-separated "u v" edge list.

    Duplicate edges (in either orientation) and self-loops are dropped and
    counted.  ``n`` defaults to the ``# nodes:`` comment, else max id + 1.
    """
    arr, declared = _parse_int_rows(path, 2)
    if arr.shape[0] == 0:
        raise ValueError(f"{path}: no edges")
    top = int(arr.max()) + 1
    if n is None:
        n = declared if declared is not None else top
    if top > n:
        raise ValueError(f"{path}: node id {top - 1} does not fit n={n}")
    graph, n_dup, n_loops = GraphInstance.from_edges(n, arr[:, 0], arr[:, 1],
                                                     return_counts=True)
    if n_dup or n_loops:
        log.info("%s: dropped %d duplicate edge(s) and %d self-loop(s)",
                 path, n_dup, n_loops)
    if return_report:
        return graph, EdgeListReport(n, graph.num_edges, n_dup, n_loops)
    return graph


def load_id_list(path: str | Path, n: int) -> np.ndarray:
    """Sorted distinct node ids, one per line."""
    arr, _ = _parse_int_rows(path, 1)
    ids = np.unique(arr.ravel())
    if ids.size and ids[-1] >= n:
        raise ValueError(f"{path}: node id {int(ids[-1])} out of range [0, {n})")
    return ids


def _indicator(ids: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int8)
    out[ids] = 1
    return out


def load_cue_file(path: str | Path, n: int, model: str = PERFECT,
                  beta: float = 1.0) -> CueAssignment:
    return CueAssignment(_indicator(load_id_list(path, n), n), model, beta)


def load_label_file(path: str | Path, n: int) -> GroundTruth:
    return GroundTruth(_indicator(load_id_list(path, n), n))


def check_cues_against_truth(cues: CueAssignment, truth: GroundTruth) -> None:
    """Warn when the cues cover the whole community (alpha = 1)."""
    if cues.count and cues.count >= truth.K:
        warnings.warn("cue set covers the entire community; perfect-cue BP "
                      "needs alpha < 1", stacklevel=2)


def load_features(path: str | Path) -> np.ndarray:
    """CSV feature matrix, one row per node; a non-numeric first row is a header."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(x) for x in first.strip().split(",") if x.strip()]
        skip = 0
    except ValueError:
        skip = 1
    X = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if X.size == 0:
        raise ValueError(f"{path}: no feature rows")
    return X


def _row_neighbours(x: np.ndarray, X: np.ndarray, approx: np.ndarray,
                    self_id: int, k: int) -> np.ndarray:
    """k nearest ids to x, exact distances, ties to the smaller id."""
    approx = approx.copy()
    approx[self_id] = np.inf
    kth = np.partition(approx, k - 1)[k - 1]
    # Gram-form distances carry rounding error; widen the cut and redo exactly
    slack = 1e-9 * (kth + np.dot(x, x)) + 1e-12
    cand = np.flatnonzero(approx <= kth + slack)
    cand = cand[cand != self_id]
    diff = X[cand] - x
    exact = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((cand, exact))
    return cand[order[:k]]


def knn_graph(features, k: int, chunk: int = 1024) -> GraphInstance:
    """Union-symmetrised k-nearest-neighbour graph (Euclidean, exact scan)."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be an n x d matrix")
    n = X.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} points, got {n}")
    sq = np.einsum("ij,ij->i", X, X)
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = np.empty(n * k, dtype=np.int64)
    for s in range(0, n, chunk):
        block = X[s:s + chunk]
        approx = sq[s:s + chunk, None] + sq[None, :] - 2.0 * block @ X.T
        np.maximum(approx, 0.0, out=approx)
        for r in range(block.shape[0]):
            i = s + r
            dst[i * k:(i + 1) * k] = _row_neighbours(X[i], X, approx[r], i, k)
    return GraphInstance.from_edges(n, src, dst)


def estimate_pq(graph: GraphInstance, cues) -> tuple[float, float]:
    """Default (p, q) for a real graph.

    p is the edge density inside the cues' closed neighbourhood and q the
    density of the whole graph.
    """
    n = graph.n
    if n < 2:
        raise ValueError("graph needs at least two nodes")
    q = 2.0 * graph.num_edges / (n * (n - 1))
    c = np.asarray(cues).astype(bool)
    zone = c.copy()
    src = graph.src
    zone[graph.indices[c[src]]] = True
    m = int(zone.sum())
    if m < 2:
        raise ValueError("cue neighbourhood has fewer than two nodes")
    inside = int(np.count_nonzero(zone[src] & zone[graph.indices])) // 2
    p = 2.0 * inside / (m * (m - 1))
    return p, q
