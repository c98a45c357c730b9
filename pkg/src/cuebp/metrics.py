"""Error and success measures for a community estimate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _as_set(x) -> set[int]:
    return {int(i) for i in np.asarray(x).ravel()}


@dataclass(frozen=True)
class DetectionResult:
    """One trial: estimate, truth, cues and the community size K.

    ``estimated`` and ``truth`` are node-id collections; ``n`` is needed for the
    rescaled success probability.
    """

    estimated: np.ndarray
    truth: np.ndarray
    cue_set: np.ndarray
    K: int
    n: int

    def sets(self, exclude_cues: bool = False) -> tuple[set[int], set[int]]:
        est, tru = _as_set(self.estimated), _as_set(self.truth)
        if exclude_cues:
            cues = _as_set(self.cue_set)
            est, tru = est - cues, tru - cues
        return est, tru


def symmetric_difference_size(a, b) -> int:
    a, b = _as_set(a), _as_set(b)
    return len(a ^ b)


def error_fraction(result: DetectionResult, exclude_cues: bool = False
                   ) -> float:
    """|S xor S_hat| / K, or |S-bar xor S_hat| / (K - |C|) with cues removed.

    The cue-excluded variant divides by the number of uncued members, which
    is K(1 - alpha) on average.
    """
    est, tru = result.sets(exclude_cues)
    if exclude_cues:
        if len(est) != len(tru):
            raise ValueError(f"size mismatch: |S_hat|={len(est)}, "
                             f"|S-bar|={len(tru)}")
        denom = len(tru)
        if denom == 0:
            return 0.0
    else:
        if len(est) != result.K or len(tru) != result.K:
            raise ValueError(f"size mismatch: |S_hat|={len(est)}, "
                             f"|S|={len(tru)}, K={result.K}")
        denom = result.K
    return len(est ^ tru) / denom


def missed_members(result: DetectionResult) -> int:
    """r_n: members left out of the estimate."""
    est, tru = result.sets()
    return len(tru - est)


def false_members(result: DetectionResult) -> int:
    est, tru = result.sets()
    return len(est - tru)


def success_prob(results: Sequence[DetectionResult]) -> float:
    """Empirical P(i in S_hat | i in S) + P(i not in S_hat | i not in S) - 1."""
    if not results:
        raise ValueError("need at least one trial")
    hit = miss_out = members = outsiders = 0
    for r in results:
        est, tru = r.sets()
        hit += len(est & tru)
        members += len(tru)
        outsiders += r.n - len(tru)
        miss_out += len(est - tru)
    p_in = hit / members
    p_out = 1.0 - miss_out / outsiders if outsiders else 1.0
    return p_in + p_out - 1.0


def recall(result: DetectionResult, exclude_cues: bool = False,
           denominator: str = "truth") -> float:
    """|S cap S_hat| / |S|.

    With ``exclude_cues`` the cues are removed from both sets.  The
    denominator is then |S| - |C| (``"truth"``) or the full |S| (``"full"``).
    """
    est, tru = result.sets(exclude_cues)
    full = _as_set(result.truth)
    if not full:
        raise ValueError("empty truth set")
    if denominator == "full":
        denom = len(full)
    elif denominator == "truth":
        denom = len(tru)
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    if denom == 0:
        return 1.0
    return len(est & tru) / denom


def mean_and_se(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se
