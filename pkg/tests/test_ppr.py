from __future__ import annotations

import numpy as np
import pytest

from cuebp.model import IMPERFECT, PERFECT, GraphInstance, ModelParams, sample_graph
from cuebp.ppr import PprConfig, PprNotConverged, personalized_pagerank, ppr_estimate

from oracles import ppr_linear_solve


def graph_from(n, edges):
    u, v = zip(*edges) if edges else ((), ())
    return GraphInstance.from_edges(n, u, v)


def test_single_node():
    pi = personalized_pagerank(graph_from(1, []), np.array([1]))
    assert pi.tolist() == [1.0]


def test_two_nodes():
    pi = personalized_pagerank(graph_from(2, [(0, 1)]), np.array([1, 0]))
    assert pi == pytest.approx([10 / 19, 9 / 19], abs=1e-9)


def test_symmetric_star():
    # leaves of a star seeded at the centre score the same
    g = graph_from(6, [(0, i) for i in range(1, 6)])
    pi = personalized_pagerank(g, np.eye(6, dtype=int)[0])
    assert np.ptp(pi[1:]) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_matches_linear_solve(seed):
    rng = np.random.default_rng(seed)
    n = 30
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.1]
    cues = rng.choice(n, 4, replace=False)
    c = np.zeros(n, dtype=int)
    c[cues] = 1
    d = float(rng.uniform(0.5, 0.95))
    got = personalized_pagerank(graph_from(n, edges), c, PprConfig(damping=d, tol=1e-13))
    want = ppr_linear_solve(n, edges, cues, d)
    np.testing.assert_allclose(got, want, atol=1e-10)
    assert got.sum() == pytest.approx(1.0)


def test_errors():
    g = graph_from(3, [(0, 1)])
    with pytest.raises(ValueError):
        personalized_pagerank(g, np.zeros(3))
    with pytest.raises(ValueError):
        personalized_pagerank(g, np.ones(2))
    with pytest.raises(ValueError):
        PprConfig(damping=1.0)
    P = ModelParams(n=500, kappa=0.1, a=40, b=4)
    big, truth = sample_graph(P, 0)
    with pytest.raises(PprNotConverged) as exc:
        personalized_pagerank(big, truth.sigma, PprConfig(tol=1e-15, max_iters=3))
    assert exc.value.iters == 3


def test_estimates():
    scores = np.array([0.4, 0.1, 0.3, 0.2])
    cues = np.array([0, 1, 0, 0])
    assert list(ppr_estimate(scores, cues, 2, PERFECT)) == [0, 1]
    assert list(ppr_estimate(scores, cues, 2, IMPERFECT)) == [0, 2]
