"""Personalised PageRank seeded on the cue set (comparison baseline)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bp import select_estimate
from .model import GraphInstance


class PprNotConverged(RuntimeError):
    def __init__(self, residual: float, iters: int):
        super().__init__(f"PageRank did not converge in {iters} iterations "
                         f"(L1 residual {residual:.3e})")
        self.residual = residual
        self.iters = iters


@dataclass(frozen=True)
class PprConfig:
    damping: float = 0.9
    tol: float = 1e-10
    max_iters: int = 1000

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")


def personalized_pagerank(graph: GraphInstance, cues, cfg: PprConfig = PprConfig()
                          ) -> np.ndarray:
    """Power iteration for pi = (1-d) e_C + d pi W.

    ``e_C`` is uniform over the cues and W is the random-walk matrix; the mass
    sitting on isolated nodes restarts to ``e_C``.
    """
    c = np.asarray(cues).astype(bool)
    if c.size != graph.n:
        raise ValueError("cue vector has the wrong length")
    if not c.any():
        raise ValueError("personalised PageRank needs at least one cue")
    restart = c / c.sum()
    deg = graph.degrees.astype(np.float64)
    dangling = deg == 0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, deg))
    d = cfg.damping
    pi = restart.copy()
    residual = np.inf
    for it in range(1, cfg.max_iters + 1):
        spread = graph.row_sums((pi * inv_deg)[graph.indices])
        nxt = (1.0 - d) * restart + d * (spread + pi[dangling].sum() * restart)
        nxt /= nxt.sum()
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < cfg.tol:
            return pi
    raise PprNotConverged(residual, cfg.max_iters)


def ppr_estimate(scores: np.ndarray, cues, K: int, mode: str) -> np.ndarray:
    """Same selection rule as :func:`cuebp.bp.select_estimate`."""
    return select_estimate(scores, cues, K, mode)
