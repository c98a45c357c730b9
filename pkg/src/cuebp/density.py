"""Density evolution for cue-seeded BP.

Two levels of description are provided:

* the finite-degree distributional recursion for the posterior messages
  (xi_0 for non-members, xi_1 for members), realised by population dynamics;
* its large-degree limit, in which both messages are Gaussian with variance
  mu and means -L -/+ mu/2, and mu follows a scalar recursion evaluated with
  Gauss-Hermite quadrature.

The module also evaluates the MAP-threshold error predicted from mu and the
closed-form error bounds, and samples labelled Galton-Watson trees (the local
limit of the sparse graph) for exact small-tree checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import expit, ndtr

from .bp import f_update
from .model import GraphInstance, ModelParams
from .rng import SeedLike, make_rng

BOUND_SLACK = 1e-9


@lru_cache(maxsize=16)
def _hermite(quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite.hermgauss(quad_nodes)
    z = math.sqrt(2.0) * x
    w = w / math.sqrt(math.pi)
    z.flags.writeable = False
    w.flags.writeable = False
    return z, w


def gauss_expect(g: Callable[[np.ndarray], np.ndarray], mu: float,
                 quad_nodes: int = 80, mean: float | None = None) -> float:
    """E[g(mean + sqrt(mu) Z)] for Z ~ N(0, 1); ``mean`` defaults to mu / 2."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    if mean is None:
        mean = mu / 2.0
    if mu == 0:
        return float(g(np.asarray(mean, dtype=np.float64)))
    z, w = _hermite(quad_nodes)
    return float(np.dot(w, g(mean + math.sqrt(mu) * z)))


def Q(x):
    """Standard normal tail probability."""
    return ndtr(-np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class DEConfig:
    """Parameters of a density-evolution run.

    Give either ``lam`` (SNR of the whole community) or ``lam_alpha`` (SNR of
    its uncued part); the other is derived through the factor (1 - alpha)^2.
    ``a`` and ``b`` are only needed for population dynamics.
    """

    kappa: float
    alpha: float
    beta: float = 1.0
    lam: float | None = None
    lam_alpha: float | None = None
    t_max: int = 200
    quad_nodes: int = 80
    tol: float = 1e-10
    pop_size: int = 100_000
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if (self.lam is None) == (self.lam_alpha is None):
            raise ValueError("give exactly one of lam and lam_alpha")
        if not 0 < self.kappa < 1:
            raise ValueError("kappa must lie in (0, 1)")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if self.quad_nodes < 20:
            raise ValueError("quad_nodes must be >= 20")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")

    @property
    def lambda_(self) -> float:
        if self.lam is not None:
            return self.lam
        return self.lam_alpha / (1.0 - self.alpha) ** 2

    @property
    def lambda_alpha(self) -> float:
        if self.lam_alpha is not None:
            return self.lam_alpha
        return self.lam * (1.0 - self.alpha) ** 2


@dataclass
class MuTrajectory:
    mu: np.ndarray
    converged: bool
    lower: float
    upper: float
    predicted_error: float | None = None
    monotone_violations: list[int] = field(default_factory=list)

    @property
    def final(self) -> float:
        return float(self.mu[-1])

    def within_bounds(self, slack: float = BOUND_SLACK) -> bool:
        mu = self.mu[1:]
        return bool(np.all(mu >= self.lower - slack)
                    and np.all(mu <= self.upper + slack))


def _iterate(step: Callable[[float], float], t_max: int, tol: float
             ) -> tuple[np.ndarray, bool, list[int]]:
    mu = [0.0]
    converged = False
    violations = []
    for t in range(t_max):
        nxt = step(mu[-1])
        if nxt < mu[-1] - 1e-12 * max(1.0, mu[-1]):
            violations.append(t + 1)
        mu.append(nxt)
        if abs(nxt - mu[-2]) < tol:
            converged = True
            break
    return np.array(mu), converged, violations


def perfect_mu_bounds(lam_alpha: float, kappa: float, alpha: float
                      ) -> tuple[float, float]:
    upper = lam_alpha * (1 - kappa) / (kappa * (1 - alpha) ** 2)
    return alpha * upper, upper


def imperfect_mu_bounds(lam: float, kappa: float, alpha: float, beta: float
                        ) -> tuple[float, float]:
    upper = lam * (1 - kappa) / kappa
    return alpha * beta**2 * upper, upper


def mu_step_perfect(mu: float, lam_alpha: float, kappa: float, alpha: float,
                    quad_nodes: int = 80) -> float:
    const = lam_alpha * alpha * (1 - kappa) / ((1 - alpha) ** 2 * kappa)
    c1, c0 = kappa * (1 - alpha), 1 - kappa

    def g(x):
        # (1-kappa) / (kappa(1-alpha) + (1-kappa) e^{-x}), written via expit
        return (c0 / c1) * expit(x + math.log(c1 / c0))

    return const + lam_alpha * gauss_expect(g, mu, quad_nodes)


def mu_step_imperfect(mu: float, lam: float, kappa: float, alpha: float,
                      beta: float, quad_nodes: int = 80) -> float:
    ab = alpha * beta
    rest = 1 - kappa - alpha * kappa + alpha * kappa * beta
    log_odds_cue = math.log(beta / (1 - beta))
    log_odds_free = math.log(kappa * (1 - ab) / rest)

    def g(x):
        # first term: ((1-kappa)/kappa) / (beta + (1-beta) e^{-x})
        cue = ((1 - kappa) / kappa / beta) * expit(x + log_odds_cue)
        # second: (1-kappa) / (kappa(1-ab) + rest e^{-x})
        free = ((1 - kappa) / (kappa * (1 - ab))) * expit(x + log_odds_free)
        return alpha * beta**2 * cue + (1 - ab) ** 2 * free

    return lam * gauss_expect(g, mu, quad_nodes)


def mu_recursion_perfect(cfg: DEConfig) -> MuTrajectory:
    lam_alpha = cfg.lambda_alpha
    lower, upper = perfect_mu_bounds(lam_alpha, cfg.kappa, cfg.alpha)
    mu, converged, bad = _iterate(
        lambda m: mu_step_perfect(m, lam_alpha, cfg.kappa, cfg.alpha,
                                  cfg.quad_nodes),
        cfg.t_max, cfg.tol)
    traj = MuTrajectory(mu, converged, lower, upper, monotone_violations=bad)
    if traj.final > 0:
        traj.predicted_error = predicted_error_perfect(traj.final, cfg.kappa,
                                                       cfg.alpha)
    return traj


def mu_recursion_imperfect(cfg: DEConfig) -> MuTrajectory:
    if not 0 < cfg.beta < 1:
        raise ValueError("imperfect recursion needs 0 < beta < 1")
    lam = cfg.lambda_
    lower, upper = imperfect_mu_bounds(lam, cfg.kappa, cfg.alpha, cfg.beta)
    mu, converged, bad = _iterate(
        lambda m: mu_step_imperfect(m, lam, cfg.kappa, cfg.alpha, cfg.beta,
                                    cfg.quad_nodes),
        cfg.t_max, cfg.tol)
    traj = MuTrajectory(mu, converged, lower, upper, monotone_violations=bad)
    if traj.final > 0:
        traj.predicted_error = predicted_error_imperfect(
            traj.final, cfg.kappa, cfg.alpha, cfg.beta)
    return traj


# error predictions ----------------------------------------------------------


def predicted_error_perfect(mu: float, kappa: float, alpha: float) -> float:
    """Twice the MAP misclassification rate of the uncued community.

    Upper estimate of E|S-bar xor S-hat| / (K (1 - alpha)), capped at 2.
    """
    if mu <= 0:
        raise ValueError("mu must be > 0")
    odds = (1 - kappa) / (kappa * (1 - alpha))
    L = math.log(odds)
    s = math.sqrt(mu)
    val = 2.0 * (odds * Q((L + mu / 2) / s) + Q((mu / 2 - L) / s))
    return min(2.0, float(val))


def predicted_error_imperfect(mu: float, kappa: float, alpha: float,
                              beta: float) -> float:
    """Twice the MAP misclassification rate n p_e / K, capped at 2."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    if not 0 < beta < 1:
        raise ValueError("need 0 < beta < 1")
    s = math.sqrt(mu)
    ab = alpha * beta
    cue_odds = math.log(beta / (1 - beta))
    rest = 1 - kappa - alpha * kappa * (1 - beta)
    free_odds = math.log(kappa * (1 - ab) / rest)
    w_outside_free = (1 - kappa) / kappa - alpha * (1 - beta)
    val = (ab * Q((mu / 2 + cue_odds) / s)
           + (1 - ab) * Q((mu / 2 + free_odds) / s)
           + alpha * (1 - beta) * Q((mu / 2 - cue_odds) / s)
           + w_outside_free * Q((mu / 2 - free_odds) / s))
    return min(2.0, float(2.0 * val))


def theorem_bound_perfect(lam_alpha: float, kappa: float, alpha: float
                          ) -> float:
    pref = 2.0 * math.sqrt((1 - kappa) / (kappa * (1 - alpha)))
    expo = -alpha * lam_alpha * (1 - kappa) / (8 * kappa * (1 - alpha) ** 2)
    return min(2.0, pref * math.exp(expo))


def theorem_bound_imperfect(lam: float, kappa: float, alpha: float,
                            beta: float) -> float:
    pref = 2.0 * (alpha * math.sqrt(beta * (1 - beta))
                  + math.sqrt((1 - alpha * beta)
                              * ((1 - kappa) / kappa - alpha * (1 - beta))))
    expo = -lam * alpha * beta**2 * (1 - kappa) / (8 * kappa)
    return min(2.0, pref * math.exp(expo))


# population dynamics --------------------------------------------------------


@dataclass(frozen=True)
class PopulationSample:
    t: int
    xi0: np.ndarray
    xi1: np.ndarray

    def moments(self) -> dict[str, float]:
        return dict(mean0=float(self.xi0.mean()), var0=float(self.xi0.var()),
                    mean1=float(self.xi1.mean()), var1=float(self.xi1.var()))


def _poisson_sums(values: np.ndarray, counts: np.ndarray,
                  rng: np.random.Generator, chunk: int = 1 << 23) -> np.ndarray:
    """For each entry k, the sum of counts[k] values drawn with replacement."""
    out = np.zeros(counts.size)
    start = 0
    cum = np.cumsum(counts)
    while start < counts.size:
        base = cum[start - 1] if start else 0
        stop = int(np.searchsorted(cum, base + chunk, side="right"))
        stop = max(stop, start + 1)
        c = counts[start:stop]
        total = int(c.sum())
        if total:
            draws = values[rng.integers(0, values.size, size=total)]
            nz = c > 0
            offsets = np.concatenate([[0], np.cumsum(c)[:-1]])
            out[start:stop][nz] = np.add.reduceat(draws, offsets[nz])
        start = stop
    return out


def population_dynamics(cfg: DEConfig, seed: SeedLike, t_max: int | None = None
                        ) -> list[PopulationSample]:
    """Monte-Carlo iteration of the finite-degree message recursion.

    Returns the populations for t = 0 .. t_max (``cfg.t_max`` by default).
    """
    if cfg.a is None or cfg.b is None:
        raise ValueError("population dynamics needs finite a and b")
    a, b = cfg.a, cfg.b
    if not a >= b > 0:
        raise ValueError("need a >= b > 0")
    if cfg.pop_size < 10_000:
        raise ValueError("pop_size must be >= 10^4")
    rng = make_rng(seed)
    kappa, alpha = cfg.kappa, cfg.alpha
    N = cfg.pop_size
    rho = a / b
    log_rho = math.log(rho)
    upsilon = math.log((1 - kappa) / (kappa * (1 - alpha)))
    h = -kappa * (a - b) - upsilon
    steps = cfg.t_max if t_max is None else t_max

    xi0 = np.full(N, -upsilon)
    xi1 = np.full(N, -upsilon)
    out = [PopulationSample(0, xi0, xi1)]
    for t in range(1, steps + 1):
        f0 = f_update(xi0, rho)
        f1 = f_update(xi1, rho)
        new0 = (h + log_rho * rng.poisson(kappa * b * alpha, N)
                + _poisson_sums(f0, rng.poisson((1 - kappa) * b, N), rng)
                + _poisson_sums(f1, rng.poisson(kappa * b * (1 - alpha), N), rng))
        new1 = (h + log_rho * rng.poisson(kappa * a * alpha, N)
                + _poisson_sums(f0, rng.poisson((1 - kappa) * b, N), rng)
                + _poisson_sums(f1, rng.poisson(kappa * a * (1 - alpha), N), rng))
        if a > b and t >= 1 and (np.ptp(new0) == 0 or np.ptp(new1) == 0):
            raise RuntimeError(f"population collapsed to a constant at t={t}")
        xi0, xi1 = new0, new1
        out.append(PopulationSample(t, xi0, xi1))
    return out


def gaussian_prediction(mu: float, kappa: float, alpha: float
                        ) -> dict[str, float]:
    """Large-degree means and variances of xi_0 and xi_1 for variance mu."""
    L = math.log((1 - kappa) / (kappa * (1 - alpha)))
    return dict(mean0=-L - mu / 2, var0=mu, mean1=-L + mu / 2, var1=mu)


def change_of_measure_terms(sample: PopulationSample, kappa: float, alpha: float,
                            g: Callable[[np.ndarray], np.ndarray],
                            g_tilted: Callable[[np.ndarray], np.ndarray] | None = None
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample terms of E g(xi_0) = w E[g(xi_1) exp(-xi_1)].

    Returns ``(g(xi0), w * g(xi1) * exp(-xi1))`` with w = kappa(1-alpha)/(1-kappa).
    ``g_tilted`` may supply x -> g(x) exp(-x) in a numerically safe form.
    """
    w = kappa * (1 - alpha) / (1 - kappa)
    if g_tilted is None:
        def g_tilted(x):
            return g(x) * np.exp(-x)
    return g(sample.xi0), w * g_tilted(sample.xi1)


# Galton-Watson trees -----------------------------------------------------------


@dataclass(frozen=True)
class GWTree:
    """Labelled tree; node 0 is the root and ``parent[0] == -1``."""

    parent: np.ndarray
    depth: np.ndarray
    label: np.ndarray
    cue: np.ndarray

    @property
    def size(self) -> int:
        return int(self.parent.size)

    def to_graph(self, n: int | None = None) -> GraphInstance:
        """The tree as a graph on ``n`` nodes (extra nodes are isolated)."""
        n = self.size if n is None else n
        child = np.arange(1, self.size)
        return GraphInstance.from_edges(n, self.parent[1:], child)


def sample_gw_tree(params: ModelParams, depth: int, seed: SeedLike,
                   imperfect: bool = False, max_nodes: int = 1_000_000
                   ) -> GWTree:
    """Sample the depth-limited labelled Galton-Watson tree of the model.

    A member has Poisson(Kp) member children and Poisson((n-K)q) non-member
    children; a non-member has Poisson(Kq) and Poisson((n-K)q).  Cues follow
    the perfect model, or the imperfect one when ``imperfect`` is set.
    """
    if depth > 4:
        raise ValueError("depth > 4 is not supported")
    rng = make_rng(seed)
    n, K = params.n, params.K
    m1 = (K * params.p, K * params.q)          # member children | parent 1, 0
    m0 = (n - K) * params.q                    # non-member children
    if imperfect:
        p_cue = (params.alpha * params.beta,
                 params.alpha * K * (1 - params.beta) / (n - K))
    else:
        p_cue = (params.alpha, 0.0)

    parent = [-1]
    dep = [0]
    label = [int(rng.random() < K / n)]
    frontier = [0]
    for d in range(1, depth + 1):
        nxt = []
        for v in frontier:
            lv = label[v]
            ones = rng.poisson(m1[0] if lv else m1[1])
            zeros = rng.poisson(m0)
            kids = [1] * ones + [0] * zeros
            rng.shuffle(kids)
            for lab in kids:
                parent.append(v)
                dep.append(d)
                label.append(lab)
                nxt.append(len(parent) - 1)
            if len(parent) > max_nodes:
                raise RuntimeError("tree exceeded max_nodes")
        frontier = nxt
    label_arr = np.array(label, dtype=np.int8)
    u = rng.random(label_arr.size)
    cue = (u < np.where(label_arr == 1, p_cue[0], p_cue[1])).astype(np.int8)
    return GWTree(np.array(parent), np.array(dep), label_arr, cue)
