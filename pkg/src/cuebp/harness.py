"""Experiment plumbing: single trials, parameter sweeps and density-evolution runs.

Every trial is a pure function of its config and master seed.  Graph and cue
seeds are derived from ``(master_seed, trial, stage)`` so that BP and PageRank
runs with the same seed see the same instance.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import density as de
from .bp import (BpConfig, default_tf, run_bp_imperfect, run_bp_perfect,
                 select_estimate)
from .metrics import (DetectionResult, error_fraction, mean_and_se, recall,
                      success_prob)
from .model import (IMPERFECT, PERFECT, CueAssignment, ModelParams,
                    a_for_lambda, lambda_alpha_of, lambda_of, sample_cues_imperfect,
                    sample_cues_perfect, sample_graph)
from .ppr import PprConfig, personalized_pagerank, ppr_estimate
from .rng import derive_seed

log = logging.getLogger(__name__)

TRIAL_COLUMNS = ("seed", "n", "kappa", "a", "b", "alpha", "beta", "lambda",
                 "lambda_alpha", "tf", "algo", "E", "recall", "P_succ_batch",
                 "wall_time_ms")
SUMMARY_COLUMNS = ("param", "value", "algo", "trials", "failures", "E_mean",
                   "E_se", "recall_mean", "recall_se", "P_succ", "error")
DEFAULT_EDGE_CAP = 2 * 10**8


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - source checkout
        return "unknown"


class EdgeBudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class TrialConfig:
    """One synthetic experiment.

    Exactly one of ``a``, ``lam`` and ``lam_alpha`` fixes the community
    degree.  ``beta == 1`` runs the perfect-cue detector, ``beta < 1`` the
    imperfect one; ``alpha == 0`` gives cue-free BP.
    """

    n: int
    kappa: float
    b: float
    alpha: float
    beta: float = 1.0
    a: float | None = None
    lam: float | None = None
    lam_alpha: float | None = None
    algo: str = "bp"
    tf: int | None = None
    damping: float = 0.9
    seed: int = 0
    max_directed_edges: int = DEFAULT_EDGE_CAP
    timing: bool = True

    def __post_init__(self):
        given = sum(x is not None for x in (self.a, self.lam, self.lam_alpha))
        if given != 1:
            raise ValueError("give exactly one of a, lam and lam_alpha")
        if self.algo not in ("bp", "ppr"):
            raise ValueError(f"unknown algo {self.algo!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @property
    def mode(self) -> str:
        return PERFECT if self.beta == 1.0 else IMPERFECT

    def resolved_a(self) -> float:
        if self.a is not None:
            return float(self.a)
        K = round(self.kappa * self.n)
        kappa = K / self.n
        if self.lam is not None:
            return a_for_lambda(self.b, kappa, self.lam)
        return a_for_lambda(self.b, kappa, self.lam_alpha,
                            alpha_for_lambda_alpha=self.alpha)

    def params(self) -> ModelParams:
        # beta = 0 stands for "no side information" and is run with alpha = 0
        alpha = 0.0 if self.beta == 0.0 else self.alpha
        beta = 1.0 if self.beta == 0.0 else self.beta
        return ModelParams(n=self.n, kappa=self.kappa, a=self.resolved_a(),
                           b=self.b, alpha=alpha, beta=beta)


def expected_directed_edges(params: ModelParams) -> float:
    n, K = params.n, params.K
    return 2.0 * (n * (n - 1) / 2 * params.q + K * (K - 1) / 2 * (params.p - params.q))


def check_budget(params: ModelParams, cap: int) -> None:
    need = expected_directed_edges(params)
    if need > cap:
        raise EdgeBudgetExceeded(
            f"expected {need:.3g} directed edges exceeds the cap {cap:.3g}")


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def run_trial(cfg: TrialConfig, trial: int = 0) -> dict:
    """Generate, cue, detect and score one instance; returns a CSV row dict."""
    t0 = time.perf_counter()
    P = cfg.params()
    check_budget(P, cfg.max_directed_edges)
    graph, truth = sample_graph(P, derive_seed(cfg.seed, trial, "graph"))
    cue_seed = derive_seed(cfg.seed, trial, "cues")
    if P.alpha == 0.0:
        cues = CueAssignment(np.zeros(P.n, dtype=np.int8), IMPERFECT, P.beta)
    elif cfg.mode == PERFECT:
        cues = sample_cues_perfect(truth, P.alpha, cue_seed)
    else:
        cues = sample_cues_imperfect(truth, P.alpha, P.beta, cue_seed)
    # cue-free runs use the imperfect detector with zero prior offsets
    mode = PERFECT if cfg.mode == PERFECT and P.alpha > 0 else IMPERFECT
    tf = cfg.tf if cfg.tf is not None else default_tf(P.n, P.p)

    if cfg.algo == "bp":
        bcfg = BpConfig.from_params(P, mode, t_f=tf)
        runner = run_bp_perfect if mode == PERFECT else run_bp_imperfect
        scores = runner(graph, cues, P, bcfg).beliefs
        estimate = select_estimate(scores, cues.c, P.K, mode)
    else:
        # no cues drawn: fall back to plain PageRank (uniform restart)
        seeds = cues.c if cues.count else np.ones(P.n, dtype=np.int8)
        scores = personalized_pagerank(graph, seeds, PprConfig(cfg.damping))
        estimate = ppr_estimate(scores, cues.c, P.K, mode)

    result = DetectionResult(estimate, truth.members, cues.cues, P.K, P.n)
    wall = (time.perf_counter() - t0) * 1000.0 if cfg.timing else 0.0
    return {
        "seed": derive_seed(cfg.seed, trial, "graph"),
        "n": P.n, "kappa": P.kappa, "a": P.a, "b": P.b,
        "alpha": P.alpha, "beta": cfg.beta,
        "lambda": lambda_of(P), "lambda_alpha": lambda_alpha_of(P),
        "tf": tf if cfg.algo == "bp" else 0, "algo": cfg.algo,
        "E": error_fraction(result), "recall": recall(result),
        "P_succ_batch": success_prob([result]),
        "wall_time_ms": round(wall, 3),
    }


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


@dataclass
class SweepPoint:
    param: str
    value: float
    algo: str
    rows: list[dict] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        E = [r["E"] for r in self.rows]
        R = [r["recall"] for r in self.rows]
        e_mean, e_se = mean_and_se(E)
        r_mean, r_se = mean_and_se(R)
        ps = (float(np.mean([r["P_succ_batch"] for r in self.rows]))
              if self.rows else float("nan"))
        return {"param": self.param, "value": self.value, "algo": self.algo,
                "trials": len(self.rows), "failures": len(self.errors),
                "E_mean": e_mean, "E_se": e_se, "recall_mean": r_mean,
                "recall_se": r_se, "P_succ": ps,
                "error": self.errors[0] if self.errors else ""}


def _one(args):
    cfg, trial = args
    try:
        return run_trial(cfg, trial), None
    except Exception as exc:  # recorded per point, the sweep carries on
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(base: TrialConfig, param: str, values: Sequence[float],
              trials: int = 10, algos: Sequence[str] = ("bp",),
              workers: int = 1) -> list[SweepPoint]:
    """Vary one field of ``base`` over ``values``; ``trials`` seeds per point.

    Trial ``k`` at every point uses the same derived seeds, so all
    algorithms at a point are scored on identical instances.
    """
    if not values:
        raise ValueError("empty grid")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    names = {f.name for f in fields(TrialConfig)}
    if param not in names:
        raise ValueError(f"cannot sweep unknown field {param!r}")
    points, jobs = [], []
    for v in values:
        for algo in algos:
            pt = SweepPoint(param, v, algo)
            points.append(pt)
            for k in range(trials):
                try:
                    cfg = replace(base, **{param: v, "algo": algo})
                except Exception as exc:
                    pt.errors.append(f"{type(exc).__name__}: {exc}")
                    break
                jobs.append((pt, cfg, k))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_one, [(c, k) for _, c, k in jobs]))
    else:
        outcomes = [_one((c, k)) for _, c, k in jobs]
    for (pt, _, _), (row, err) in zip(jobs, outcomes):
        if err is None:
            pt.rows.append(row)
        else:
            log.warning("%s=%s algo=%s failed: %s", pt.param, pt.value, pt.algo, err)
            pt.errors.append(err)
    return points


# density evolution ------------------------------------------------------------

def run_de(cfg: de.DEConfig, mode: str, seed: int | None = None) -> list[dict]:
    """Rows of t, mu (or population moments), predicted_error, theorem_bound."""
    if mode == "perfect":
        traj = de.mu_recursion_perfect(cfg)
        bound = de.theorem_bound_perfect(cfg.lambda_alpha, cfg.kappa, cfg.alpha)
        return [{"t": t, "mu": mu,
                 "predicted_error": (de.predicted_error_perfect(mu, cfg.kappa, cfg.alpha)
                                     if mu > 0 else float("nan")),
                 "theorem_bound": bound} for t, mu in enumerate(traj.mu)]
    if mode == "imperfect":
        if not 0 < cfg.beta < 1:
            raise ValueError("imperfect density evolution needs 0 < beta < 1")
        traj = de.mu_recursion_imperfect(cfg)
        bound = de.theorem_bound_imperfect(cfg.lambda_, cfg.kappa, cfg.alpha, cfg.beta)
        return [{"t": t, "mu": mu,
                 "predicted_error": (de.predicted_error_imperfect(
                     mu, cfg.kappa, cfg.alpha, cfg.beta) if mu > 0 else float("nan")),
                 "theorem_bound": bound} for t, mu in enumerate(traj.mu)]
    if mode == "population":
        if seed is None:
            raise ValueError("population dynamics needs a seed")
        pops = de.population_dynamics(cfg, seed)
        bound = de.theorem_bound_perfect(cfg.lambda_alpha, cfg.kappa, cfg.alpha)
        rows = []
        for s in pops:
            m = s.moments()
            # read mu off the spread of the two populations
            mu = m["mean1"] - m["mean0"]
            rows.append({"t": s.t, **m,
                         "predicted_error": (de.predicted_error_perfect(
                             mu, cfg.kappa, cfg.alpha) if mu > 0 else float("nan")),
                         "theorem_bound": bound})
        return rows
    raise ValueError(f"unknown mode {mode!r}")


DE_COLUMNS = {"perfect": ("t", "mu", "predicted_error", "theorem_bound"),
              "imperfect": ("t", "mu", "predicted_error", "theorem_bound"),
              "population": ("t", "mean0", "var0", "mean1", "var1",
                             "predicted_error", "theorem_bound")}


def write_metadata(path: str | Path, command: str, config: dict) -> None:
    """JSON sidecar with the resolved config and code version."""
    meta = {"command": command, "version": code_version(), "config": config}
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def config_dict(cfg) -> dict:
    return asdict(cfg)
