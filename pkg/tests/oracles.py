"""Reference computations that share no code path with the library."""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np


def _logsumexp(x):
    m = np.max(x)
    if not np.isfinite(m):
        return m
    return m + math.log(np.sum(np.exp(x - m)))


def neighbourhood(adj: dict[int, list[int]], root: int, depth: int):
    """BFS ball of radius ``depth``: list of (node, parent, level)."""
    seen = {root: (-1, 0)}
    order = [root]
    queue = deque([root])
    while queue:
        v = queue.popleft()
        par, lev = seen[v]
        if lev == depth:
            continue
        for w in adj[v]:
            if w == par:
                continue
            if w in seen:
                raise ValueError("neighbourhood is not a tree")
            seen[w] = (v, lev + 1)
            order.append(w)
            queue.append(w)
    return [(v, seen[v][0], seen[v][1]) for v in order]


def exact_tree_llr(adj, cues, root, depth, n, K, p, q, alpha, beta=1.0,
                   imperfect=False):
    """log P(ball, cues | root in S) - log P(ball, cues | root not in S).

    Enumerates every labelling of the ball under the Poisson tree model: a
    member has Poisson(Kp) member children and Poisson((n-K)q) others, a
    non-member Poisson(Kq) and Poisson((n-K)q).  Nodes on the boundary of the
    ball contribute no offspring factor.  With ``imperfect`` the root's own
    cue factor is included.
    """
    ball = neighbourhood(adj, root, depth)
    nodes = [v for v, _, _ in ball]
    pos = {v: k for k, v in enumerate(nodes)}
    m = len(nodes)
    d1 = K * p + (n - K) * q
    d0 = n * q
    mean_deg = {1: d1, 0: d0}
    child_p = {1: {1: K * p / d1, 0: (n - K) * q / d1},
               0: {1: K * q / d0, 0: (n - K) * q / d0}}
    if imperfect:
        cue_p = {1: alpha * beta, 0: alpha * K * (1 - beta) / (n - K)}
    else:
        cue_p = {1: alpha, 0: 0.0}

    def log_or_ninf(x):
        return math.log(x) if x > 0 else -math.inf

    scores = {0: [], 1: []}
    for rest in itertools.product((0, 1), repeat=m - 1):
        for root_lab in (0, 1):
            lab = (root_lab,) + rest
            total = 0.0
            for v, par, lev in ball:
                lv = lab[pos[v]]
                if lev < depth:
                    kids = len(adj[v]) - (0 if par == -1 else 1)
                    d = mean_deg[lv]
                    total += kids * math.log(d) - d - math.lgamma(kids + 1)
                if par != -1:
                    total += log_or_ninf(child_p[lab[pos[par]]][lv])
                if imperfect and lev == depth:
                    continue
                if par != -1 or imperfect:
                    pc = cue_p[lv]
                    total += log_or_ninf(pc if cues[v] else 1 - pc)
            scores[root_lab].append(total)
    return _logsumexp(np.array(scores[1])) - _logsumexp(np.array(scores[0]))


def random_tree(m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform random recursive tree on m nodes."""
    return [(int(rng.integers(0, v)), v) for v in range(1, m)]


def adjacency(n: int, edges) -> dict[int, list[int]]:
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    return adj


def ppr_linear_solve(n, edges, cues, damping):
    """Personalised PageRank from the dense linear system.

    pi = (1-d) e + d pi W, dangling rows restart to e.
    """
    A = np.zeros((n, n))
    for u, v in edges:
        A[u, v] = A[v, u] = 1.0
    e = np.zeros(n)
    e[list(cues)] = 1.0 / len(cues)
    deg = A.sum(axis=1)
    W = np.zeros((n, n))
    for i in range(n):
        W[i] = A[i] / deg[i] if deg[i] > 0 else e
    M = np.eye(n) - damping * W.T
    return np.linalg.solve(M, (1 - damping) * e)


def knn_brute(X, k):
    """Union-symmetrised k-NN edge set; distance ties go to the smaller id."""
    n = len(X)
    edges = set()
    for i in range(n):
        d = [(float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(n) if j != i]
        d.sort()
        for _, j in d[:k]:
            edges.add((min(i, j), max(i, j)))
    return edges
