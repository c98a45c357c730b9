"""Planted dense subgraph model G(K, n, p, q) with cue side-information.

A hidden community S of K = round(kappa * n) nodes is drawn uniformly; pairs
inside S are linked with probability p = a / n, every other pair with
probability q = b / n.  Cues are then revealed either perfectly (only members
of S, each with probability alpha) or imperfectly (a fraction beta of the cues
lands in S on average).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .rng import SeedLike, make_rng

PERFECT = "perfect"
IMPERFECT = "imperfect"


@dataclass(frozen=True)
class ModelParams:
    """Full parameterization of G(K, n, p, q) plus the cue model."""

    n: int
    kappa: float
    a: float
    b: float
    alpha: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.b < 0 or self.a < self.b:
            raise ValueError(f"need 0 <= b <= a, got a={self.a}, b={self.b}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not 1 <= self.K <= self.n:
            raise ValueError(f"K = round(kappa*n) = {self.K} out of range")

    @property
    def K(self) -> int:
        return int(round(self.kappa * self.n))

    @property
    def p(self) -> float:
        return self.a / self.n

    @property
    def q(self) -> float:
        return self.b / self.n

    @property
    def kappa_eff(self) -> float:
        """K / n, the community fraction actually realised after rounding."""
        return self.K / self.n

    @property
    def rho(self) -> float:
        return self.a / self.b

    @property
    def degree_gap(self) -> float:
        """K (p - q), computed without forming p and q."""
        return self.K * (self.a - self.b) / self.n

    def replace(self, **changes) -> "ModelParams":
        fields = dict(n=self.n, kappa=self.kappa, a=self.a, b=self.b,
                      alpha=self.alpha, beta=self.beta)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class GroundTruth:
    sigma: np.ndarray

    @property
    def K(self) -> int:
        return int(self.sigma.sum())

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.sigma)


@dataclass(frozen=True)
class CueAssignment:
    c: np.ndarray
    model: str = PERFECT
    beta: float = 1.0

    @property
    def cues(self) -> np.ndarray:
        return np.flatnonzero(self.c)

    @property
    def count(self) -> int:
        return int(self.c.sum())


class GraphInstance:
    """Immutable simple undirected graph in CSR form.

    Slot ``e`` in row ``i`` (``indptr[i] <= e < indptr[i+1]``) is the directed
    edge ``i -> indices[e]``; ``rev[e]`` is the slot of the reverse edge.
    Neighbour lists are sorted.
    """

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray,
                 rev: np.ndarray):
        self.n = int(n)
        self.indptr = indptr
        self.indices = indices
        self.rev = rev
        for arr in (indptr, indices, rev):
            arr.flags.writeable = False
        self._src: np.ndarray | None = None

    # construction -------------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, u: Iterable[int], v: Iterable[int],
                   return_counts: bool = False):
        """Build from arbitrary endpoint arrays, dropping self-loops and repeats.

        With ``return_counts`` also returns ``(n_duplicates, n_self_loops)``.
        """
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        if u.shape != v.shape:
            raise ValueError("endpoint arrays differ in length")
        if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n):
            raise ValueError(f"node id out of range [0, {n})")
        loops = u == v
        n_loops = int(loops.sum())
        lo = np.minimum(u[~loops], v[~loops])
        hi = np.maximum(u[~loops], v[~loops])
        keys = np.unique(lo * n + hi)
        n_dup = int(lo.size - keys.size)
        graph = cls._from_sorted_keys(n, keys)
        if return_counts:
            return graph, n_dup, n_loops
        return graph

    @classmethod
    def _from_sorted_keys(cls, n: int, keys: np.ndarray) -> "GraphInstance":
        # keys: strictly increasing lo * n + hi with lo < hi
        lo, hi = np.divmod(keys, n)
        directed = np.concatenate([keys, hi * n + lo])
        del lo, hi
        directed.sort()
        idx_dtype = np.int32 if n < 2**31 else np.int64
        src, dst = np.divmod(directed, n)
        del directed
        src = src.astype(idx_dtype)
        dst = dst.astype(idx_dtype)
        counts = np.bincount(src, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        # slots are ordered by (src, dst); stable-sorting by dst orders them by
        # (dst, src), which lists the reverse of slot k in position k
        slot_dtype = np.int32 if dst.size < 2**31 else np.int64
        rev = np.argsort(dst, kind="stable").astype(slot_dtype)
        g = cls(n, indptr, dst, rev)
        src.flags.writeable = False
        g._src = src
        return g

    # queries ------------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def num_slots(self) -> int:
        return int(self.indices.size)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def src(self) -> np.ndarray:
        """Source node of every directed slot."""
        if self._src is None:
            src = np.repeat(np.arange(self.n, dtype=self.indices.dtype),
                            self.degrees)
            src.flags.writeable = False
            self._src = src
        return self._src

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def slot(self, i: int, u: int) -> int:
        """Directed-edge index of ``i -> u``."""
        row = self.neighbors(i)
        k = int(np.searchsorted(row, u))
        if k == row.size or row[k] != u:
            raise KeyError(f"({i}, {u}) is not an edge")
        return int(self.indptr[i]) + k

    def edges(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with u < v, sorted."""
        src = self.src
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]]).astype(np.int64)

    def row_sums(self, values: np.ndarray) -> np.ndarray:
        """Sum a per-slot array over each node's row."""
        out = np.zeros(self.n, dtype=np.float64)
        if values.size == 0:
            return out
        deg = self.degrees
        nz = deg > 0
        out[nz] = np.add.reduceat(values, self.indptr[:-1][nz])
        return out

    def __repr__(self) -> str:
        return f"GraphInstance(n={self.n}, edges={self.num_edges})"


# sampling ---------------------------------------------------------------


def _skip_sample(num_pairs: int, prob: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of successes among ``num_pairs`` Bernoulli(prob) trials.

    Gaps between successes are geometric, so the cost is proportional to the
    number of successes rather than the number of trials.
    """
    if num_pairs <= 0 or prob <= 0.0:
        return np.empty(0, dtype=np.int64)
    if prob >= 1.0:
        return np.arange(num_pairs, dtype=np.int64)
    mean = num_pairs * prob
    chunk = int(mean + 6.0 * math.sqrt(mean) + 16)
    chunk = min(chunk, 1 << 24)
    parts = []
    last = -1
    while True:
        gaps = rng.geometric(prob, size=chunk)
        pos = np.cumsum(gaps, dtype=np.int64)
        pos += last
        if pos[-1] >= num_pairs:
            parts.append(pos[: np.searchsorted(pos, num_pairs)])
            break
        parts.append(pos)
        last = int(pos[-1])
    return np.concatenate(parts)


def _unrank_pairs(k: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Map row-major ranks of pairs (i < j) among ``m`` items to (i, j)."""
    k = np.asarray(k, dtype=np.int64)
    two_m1 = 2 * m - 1
    disc = float(two_m1) ** 2 - 8.0 * k.astype(np.float64)
    i = np.floor((two_m1 - np.sqrt(np.maximum(disc, 0.0))) / 2.0).astype(np.int64)
    i = np.clip(i, 0, m - 2)

    def offset(r):
        return r * (two_m1 - r) // 2

    # float rounding can be off by one either way
    i -= offset(i) > k
    i += offset(i + 1) <= k
    j = k - offset(i) + i + 1
    return i, j


def sample_graph(params: ModelParams, seed: SeedLike
                 ) -> tuple[GraphInstance, GroundTruth]:
    """Draw one instance of G(K, n, p, q) and its community labels."""
    if params.p > 1.0 or params.q > 1.0:
        raise ValueError(f"edge probabilities must be <= 1 (p={params.p}, "
                         f"q={params.q})")
    rng = make_rng(seed)
    n, K = params.n, params.K
    community = np.sort(rng.choice(n, size=K, replace=False))
    sigma = np.zeros(n, dtype=np.int8)
    sigma[community] = 1

    # background at rate q over all pairs, then redraw the within-S pairs at p
    ranks = _skip_sample(n * (n - 1) // 2, params.q, rng)
    i, j = _unrank_pairs(ranks, n)
    del ranks
    outside = (sigma[i] == 0) | (sigma[j] == 0)
    keys = i[outside] * n + j[outside]
    del i, j, outside

    inner = _skip_sample(K * (K - 1) // 2, params.p, rng)
    if inner.size:
        si, sj = _unrank_pairs(inner, K)
        # community is sorted, so community[si] < community[sj]
        inner_keys = community[si].astype(np.int64) * n + community[sj]
        keys = np.concatenate([keys, inner_keys])
        keys.sort()
    graph = GraphInstance._from_sorted_keys(n, keys)
    sigma.flags.writeable = False
    return graph, GroundTruth(sigma)


def sample_cues_perfect(truth: GroundTruth, alpha: float,
                        seed: SeedLike) -> CueAssignment:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    rng = make_rng(seed)
    draw = rng.random(truth.sigma.size) < alpha
    c = (draw & (truth.sigma == 1)).astype(np.int8)
    c.flags.writeable = False
    return CueAssignment(c, PERFECT, 1.0)


def cue_probabilities(n: int, K: int, alpha: float, beta: float
                      ) -> tuple[float, float]:
    """P(c=1 | sigma=1) and P(c=1 | sigma=0) under the imperfect model."""
    inside = alpha * beta
    outside = alpha * K * (1.0 - beta) / (n - K) if n > K else 0.0
    if inside > 1.0 or outside > 1.0:
        raise ValueError(f"cue probability exceeds 1 (inside={inside}, "
                         f"outside={outside})")
    return inside, outside


def sample_cues_imperfect(truth: GroundTruth, alpha: float, beta: float,
                          seed: SeedLike) -> CueAssignment:
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    n = truth.sigma.size
    p_in, p_out = cue_probabilities(n, truth.K, alpha, beta)
    rng = make_rng(seed)
    u = rng.random(n)
    prob = np.where(truth.sigma == 1, p_in, p_out)
    c = (u < prob).astype(np.int8)
    c.flags.writeable = False
    return CueAssignment(c, IMPERFECT if beta < 1.0 else PERFECT, beta)


# signal-to-noise ----------------------------------------------------------


def snr(kappa: float, a: float, b: float) -> float:
    if b <= 0:
        raise ValueError("b must be positive")
    if not kappa < 1:
        raise ValueError("kappa must be < 1")
    return kappa**2 * (a - b) ** 2 / ((1.0 - kappa) * b)


def lambda_of(params: ModelParams) -> float:
    """Effective SNR kappa^2 (a-b)^2 / ((1-kappa) b), with kappa = K/n."""
    return snr(params.K / params.n, params.a, params.b)


def lambda_alpha_of(params: ModelParams) -> float:
    """SNR of the uncued remainder of the community, lambda * (1-alpha)^2."""
    return lambda_of(params) * (1.0 - params.alpha) ** 2


def a_for_lambda(b: float, kappa: float, lambda_target: float,
                 alpha_for_lambda_alpha: float | None = None) -> float:
    """Inverse of :func:`lambda_of` in ``a``.

    When ``alpha_for_lambda_alpha`` is given, ``lambda_target`` is read as the
    cue-adjusted SNR lambda_alpha instead.
    """
    if lambda_target < 0:
        raise ValueError("lambda_target must be >= 0")
    shift = math.sqrt(lambda_target * (1.0 - kappa) * b) / kappa
    if alpha_for_lambda_alpha is not None:
        shift /= 1.0 - alpha_for_lambda_alpha
    return b + shift


# text formats -------------------------------------------------------------


def write_edge_list(graph: GraphInstance, path: str | Path,
                    header: str | None = None) -> None:
    """Edges as sorted "u v" lines with u < v.

    A ``# nodes: n`` comment keeps isolated trailing nodes on reload.
    """
    edges = graph.edges()
    with open(path, "w") as fh:
        fh.write(f"# nodes: {graph.n}\n")
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        np.savetxt(fh, edges, fmt="%d")


def write_id_list(ids: Iterable[int], path: str | Path) -> None:
    with open(path, "w") as fh:
        for i in ids:
            fh.write(f"{int(i)}\n")
