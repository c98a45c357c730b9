"""Cue-seeded belief propagation for planted dense subgraph detection.

Messages live in a flat array indexed by directed-edge slot (see
:class:`~cuebp.model.GraphInstance`).  Every round is a Jacobi sweep: the new
bank is a pure function of the old bank, so the result does not depend on the
order in which slots are visited.  Slots are processed in fixed-size chunks to
keep temporaries bounded on graphs with 10^8 slots.
"""
from __future__ import annotations

import math
from typing import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .model import (IMPERFECT, PERFECT, CueAssignment, GraphInstance,
                    ModelParams)

CHUNK = 1 << 22

# called with (depth, beliefs) after every round but the last
RoundHook = Callable[[int, np.ndarray], None]


def f_update(x, rho):
    """log((e^x rho + 1) / (e^x + 1)), stable for |x| up to ~700 and beyond.

    Equals log1p((rho-1) * expit(x)) for x <= 0 and
    log(rho) + log1p((1/rho - 1) * expit(-x)) for x > 0, so the two limits
    0 and log(rho) are hit exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    neg = x <= 0
    lo = np.log1p((rho - 1.0) * expit(np.where(neg, x, 0.0)))
    hi = np.log(rho) + np.log1p((1.0 / rho - 1.0) * expit(-np.where(neg, 0.0, x)))
    out = np.where(neg, lo, hi)
    return out[()] if out.ndim == 0 else out


def default_tf(n: int, p: float) -> int:
    """Largest round count strictly below log(n)/log(np) + 1 (at least 1)."""
    np_ = n * p
    if np_ <= 1.0:
        raise ValueError(f"need n*p > 1, got {np_}")
    bound = math.log(n) / math.log(np_) + 1.0
    nearest = round(bound)
    if abs(bound - nearest) < 1e-9:
        bound = float(nearest)
    return max(1, math.ceil(bound) - 1)


@dataclass(frozen=True)
class BpConfig:
    t_f: int
    mode: str
    upsilon: float
    nu: float
    h_cue: float = 0.0
    h_noncue: float = 0.0

    def __post_init__(self):
        if self.t_f < 1:
            raise ValueError(f"t_f must be >= 1, got {self.t_f}")
        if self.mode not in (PERFECT, IMPERFECT):
            raise ValueError(f"unknown mode {self.mode!r}")

    @classmethod
    def from_params(cls, params: ModelParams, mode: str,
                    t_f: int | None = None) -> "BpConfig":
        n, K = params.n, params.K
        if not 0 < K < n:
            raise ValueError("thresholds need 0 < K < n")
        if t_f is None:
            t_f = default_tf(n, params.p)
        upsilon = math.log((n - K) / (K * (1.0 - params.alpha)))
        nu = math.log((n - K) / K)
        h_cue = h_noncue = 0.0
        if mode == IMPERFECT:
            h_cue, h_noncue = prior_offsets(params.kappa_eff, params.alpha,
                                            params.beta)
        return cls(t_f=t_f, mode=mode, upsilon=upsilon, nu=nu, h_cue=h_cue,
                   h_noncue=h_noncue)


def prior_offsets(kappa: float, alpha: float, beta: float
                  ) -> tuple[float, float]:
    """Cue log-likelihood ratios (cued node, uncued node)."""
    if alpha == 0.0:
        return 0.0, 0.0
    if not 0.0 < beta < 1.0:
        raise ValueError("prior offsets need 0 < beta < 1; use perfect-cue BP "
                         "for beta = 1")
    h_cue = math.log(beta * (1 - kappa) / ((1 - beta) * kappa))
    h_noncue = math.log((1 - alpha * beta) * (1 - kappa)
                        / (1 - kappa - alpha * kappa + alpha * kappa * beta))
    return h_cue, h_noncue


@dataclass
class MessageState:
    """Two banks of per-slot messages; ``values`` is the bank for ``round``."""

    values: np.ndarray
    spare: np.ndarray
    round: int = 0

    @classmethod
    def zeros(cls, num_slots: int) -> "MessageState":
        return cls(np.zeros(num_slots), np.empty(num_slots))

    def swap(self) -> None:
        self.values, self.spare = self.spare, self.values
        self.round += 1


@dataclass(frozen=True)
class BeliefVector:
    """Final node log-likelihood ratios; NaN where undefined (perfect cues)."""

    beliefs: np.ndarray
    t_final: int
    mode: str = PERFECT
    messages: np.ndarray | None = field(default=None, repr=False)


def _incoming(graph: GraphInstance, msgs: np.ndarray, shift: float,
              rho: float, out: np.ndarray, cue_slot: np.ndarray | None,
              log_rho: float) -> np.ndarray:
    """out[e] = contribution of neighbour indices[e] to node src[e].

    For slot e = (i, l) that is f(R_{l->i} - shift), or log(rho) when l is a
    perfect cue.
    """
    rev = graph.rev
    for s in range(0, out.size, CHUNK):
        e = slice(s, min(s + CHUNK, out.size))
        out[e] = f_update(msgs[rev[e]] - shift, rho)
        if cue_slot is not None:
            out[e][cue_slot[e]] = log_rho
    return out


def _run(graph: GraphInstance, cues: CueAssignment, params: ModelParams,
         config: BpConfig, node_offset: np.ndarray, shift: float,
         perfect_cues: bool, keep_messages: bool,
         on_round: RoundHook | None = None) -> BeliefVector:
    if params.n != graph.n or cues.c.size != graph.n:
        raise ValueError("graph, cues and params disagree on n")
    if not math.isfinite(shift):
        raise ValueError("threshold is not finite")
    if params.b <= 0:
        raise ValueError("BP needs b > 0")
    rho = params.rho
    log_rho = math.log(rho)
    gap = params.degree_gap
    state = MessageState.zeros(graph.num_slots)
    src = graph.src
    cue_slot = dead_slot = None
    if perfect_cues and cues.count:
        # slot (i, l) whose neighbour l is a cue
        cue_slot = cues.c[graph.indices].astype(bool)
        dead_slot = cue_slot | cues.c[src].astype(bool)

    cue_mask = cues.c.astype(bool)

    def report(t, b):
        if on_round is not None:
            if perfect_cues:
                b = b.copy()
                b[cue_mask] = np.nan
            on_round(t, b)

    contrib = state.spare
    for t in range(1, config.t_f):
        _incoming(graph, state.values, shift, rho, contrib, cue_slot, log_rho)
        node_total = node_offset - gap + graph.row_sums(contrib)
        report(t, node_total)
        # new R_{i->u} = node total of i minus u's own contribution, in place
        for s in range(0, contrib.size, CHUNK):
            e = slice(s, min(s + CHUNK, contrib.size))
            np.subtract(node_total[src[e]], contrib[e], out=contrib[e])
        if dead_slot is not None:
            # messages touching a cue are never read; keep them at zero
            contrib[dead_slot] = 0.0
        state.swap()
        contrib = state.spare

    _incoming(graph, state.values, shift, rho, contrib, cue_slot, log_rho)
    beliefs = node_offset - gap + graph.row_sums(contrib)
    if perfect_cues:
        beliefs[cue_mask] = np.nan
    if not np.all(np.isfinite(state.values)):
        raise FloatingPointError("non-finite BP message")
    return BeliefVector(beliefs, config.t_f, config.mode,
                        state.values if keep_messages else None)


def run_bp_perfect(graph: GraphInstance, cues: CueAssignment,
                   params: ModelParams, config: BpConfig | None = None,
                   keep_messages: bool = False,
                   on_round: RoundHook | None = None) -> BeliefVector:
    """BP with reliable cues.

    Beliefs are returned for every uncued node; cue entries are NaN.
    """
    if config is None:
        config = BpConfig.from_params(params, PERFECT)
    offset = np.zeros(graph.n)
    return _run(graph, cues, params, config, offset, config.upsilon,
                perfect_cues=True, keep_messages=keep_messages,
                on_round=on_round)


def run_bp_imperfect(graph: GraphInstance, cues: CueAssignment,
                     params: ModelParams, config: BpConfig | None = None,
                     keep_messages: bool = False,
                     on_round: RoundHook | None = None) -> BeliefVector:
    """BP with unreliable cues; every node (cued or not) gets a belief."""
    if config is None:
        config = BpConfig.from_params(params, IMPERFECT)
    offset = np.where(cues.c.astype(bool), config.h_cue, config.h_noncue)
    return _run(graph, cues, params, config, offset, config.nu,
                perfect_cues=False, keep_messages=keep_messages,
                on_round=on_round)


def top_k(scores: np.ndarray, k: int, candidates: np.ndarray | None = None
          ) -> np.ndarray:
    """Ids of the k largest scores, ties going to the smaller id."""
    ids = np.arange(scores.size) if candidates is None else np.asarray(candidates)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((ids, -scores[ids]))
    return np.sort(ids[order[:k]])


def select_estimate(beliefs: np.ndarray, cues: np.ndarray, K: int,
                    mode: str) -> np.ndarray:
    """The K-node community estimate.

    Perfect mode keeps every cue and fills the remaining K - |C| places with
    the best uncued nodes; imperfect mode takes the top K over all nodes.
    """
    beliefs = np.asarray(beliefs, dtype=np.float64)
    cue_mask = np.asarray(cues).astype(bool)
    if mode == PERFECT:
        n_cues = int(cue_mask.sum())
        if n_cues > K:
            raise ValueError(f"{n_cues} cues exceed K={K}")
        rest = top_k(beliefs, K - n_cues, np.flatnonzero(~cue_mask))
        return np.union1d(np.flatnonzero(cue_mask), rest)
    if mode == IMPERFECT:
        return top_k(beliefs, K)
    raise ValueError(f"unknown mode {mode!r}")


def map_estimate(beliefs: np.ndarray, threshold: float) -> np.ndarray:
    beliefs = np.asarray(beliefs, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.flatnonzero(beliefs > threshold)
