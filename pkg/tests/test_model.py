from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cuebp.ingest import load_edge_list
from cuebp.model import (GraphInstance, ModelParams, _unrank_pairs,
                         a_for_lambda, cue_probabilities, lambda_alpha_of,
                         lambda_of, sample_cues_imperfect, sample_cues_perfect,
                         sample_graph, write_edge_list)


def check_simple_symmetric(g: GraphInstance):
    for i in range(g.n):
        nb = g.neighbors(i)
        assert i not in nb
        assert np.all(np.diff(nb) > 0)
        for u in nb:
            assert i in g.neighbors(u)
    assert g.num_slots == 2 * g.num_edges
    # rev is an involution pairing i->u with u->i
    assert np.array_equal(g.rev[g.rev], np.arange(g.num_slots))
    assert np.array_equal(g.src[g.rev], g.indices)


class TestParams:
    def test_derived(self):
        P = ModelParams(n=1000, kappa=0.1, a=50, b=10, alpha=0.2)
        assert P.K == 100
        assert P.p == pytest.approx(0.05)
        assert P.q == pytest.approx(0.01)
        assert P.rho == pytest.approx(5.0)

    def test_rounding(self):
        assert ModelParams(n=1000, kappa=0.0105, a=50, b=10).K == 10

    @pytest.mark.parametrize("kw", [dict(b=20, a=10), dict(alpha=1.0),
                                    dict(alpha=-0.1), dict(beta=0.0),
                                    dict(kappa=0.0), dict(kappa=1e-6)])
    def test_rejects(self, kw):
        base = dict(n=1000, kappa=0.1, a=50, b=10)
        with pytest.raises(ValueError):
            ModelParams(**(base | kw))


class TestSampling:
    def test_unrank_matches_enumeration(self):
        m = 9
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
        u, v = _unrank_pairs(np.arange(len(pairs)), m)
        assert list(zip(u.tolist(), v.tolist())) == pairs

    def test_deterministic(self):
        P = ModelParams(n=2000, kappa=0.05, a=100, b=5)
        g1, t1 = sample_graph(P, 5)
        g2, t2 = sample_graph(P, 5)
        assert np.array_equal(g1.indices, g2.indices)
        assert np.array_equal(t1.sigma, t2.sigma)
        g3, _ = sample_graph(P, 6)
        assert not np.array_equal(g1.indices, g3.indices)

    def test_structure(self):
        P = ModelParams(n=300, kappa=0.1, a=60, b=6)
        g, truth = sample_graph(P, 0)
        assert truth.K == 30
        check_simple_symmetric(g)

    def test_complete_when_p_is_one(self):
        n = 40
        P = ModelParams(n=n, kappa=1 - 1e-9, a=n, b=n)
        g, truth = sample_graph(P, 1)
        assert truth.K == n
        assert g.num_edges == n * (n - 1) // 2

    def test_no_background_edges(self):
        P = ModelParams(n=400, kappa=0.5, a=40, b=0)
        g, truth = sample_graph(P, 2)
        e = g.edges()
        assert e.size > 0
        assert truth.sigma[e].all()

    def test_rejects_p_above_one(self):
        P = ModelParams(n=100, kappa=0.1, a=150, b=10)
        with pytest.raises(ValueError):
            sample_graph(P, 0)

    def test_edge_densities(self):
        # 100 seeds: within-S and outside densities within 3 binomial sigma
        P = ModelParams(n=400, kappa=0.1, a=40, b=4)
        K, n = P.K, P.n
        inside = outside = 0
        for s in range(100):
            g, t = sample_graph(P, s)
            e = g.edges()
            both = t.sigma[e[:, 0]] & t.sigma[e[:, 1]]
            inside += int(both.sum())
            outside += int((~both.astype(bool)).sum())
        n_in = 100 * K * (K - 1) // 2
        n_out = 100 * (n * (n - 1) // 2 - K * (K - 1) // 2)
        for count, trials, prob in ((inside, n_in, P.p), (outside, n_out, P.q)):
            sd = math.sqrt(trials * prob * (1 - prob))
            assert abs(count - trials * prob) < 3 * sd

    def test_community_is_uniform(self):
        P = ModelParams(n=20, kappa=0.25, a=2, b=1)
        hits = np.zeros(20)
        for s in range(2000):
            hits += sample_graph(P, s)[1].sigma
        expected = 2000 * 0.25
        sd = math.sqrt(2000 * 0.25 * 0.75)
        assert np.all(np.abs(hits - expected) < 4 * sd)

    @pytest.mark.slow
    def test_barrier_regime_background_degree(self):
        n, kappa = 10**6, 5e-4
        P = ModelParams(n=n, kappa=kappa, a=a_for_lambda(100, kappa, 0.25), b=100)
        for s in range(2):
            g, t = sample_graph(P, s)
            deg = g.degrees[t.sigma == 0]
            assert abs(deg.mean() - 100) < 1


class TestCues:
    def test_perfect_containment_and_rate(self):
        P = ModelParams(n=5000, kappa=0.2, a=50, b=5)
        _, truth = sample_graph(P, 3)
        alpha = 1 - 1e-3
        fracs = []
        for s in range(100):
            c = sample_cues_perfect(truth, alpha, s)
            assert np.all(truth.sigma[c.cues] == 1)
            fracs.append(c.count / truth.K)
        sd = math.sqrt(alpha * (1 - alpha) / truth.K)
        assert abs(np.mean(fracs) - alpha) < 3 * sd / math.sqrt(100) + 1e-12

    def test_alpha_zero(self):
        P = ModelParams(n=100, kappa=0.1, a=20, b=2)
        _, truth = sample_graph(P, 0)
        assert sample_cues_perfect(truth, 0.0, 1).count == 0

    def test_imperfect_reliability(self):
        P = ModelParams(n=10_000, kappa=0.1, a=50, b=5)
        _, truth = sample_graph(P, 0)
        alpha, beta = 0.1, 0.8
        inside = total = 0
        for s in range(200):
            c = sample_cues_imperfect(truth, alpha, beta, s)
            inside += int(truth.sigma[c.cues].sum())
            total += c.count
        frac = inside / total
        assert abs(frac - beta) < 3 * math.sqrt(beta * (1 - beta) / total)
        expected = alpha * truth.K
        assert abs(total / 200 - expected) < 3 * math.sqrt(expected / 200)

    def test_imperfect_beta_one_is_perfect(self):
        P = ModelParams(n=500, kappa=0.1, a=50, b=5)
        _, truth = sample_graph(P, 0)
        for s in range(20):
            c = sample_cues_imperfect(truth, 0.3, 1.0, s)
            assert np.all(truth.sigma[c.cues] == 1)

    def test_conditional_probabilities(self):
        p1, p0 = cue_probabilities(1000, 100, 0.1, 0.8)
        assert p1 == pytest.approx(0.08)
        assert p0 == pytest.approx(0.1 * 100 * 0.2 / 900)
        with pytest.raises(ValueError):
            cue_probabilities(110, 100, 0.9, 0.0)


class TestSnr:
    def test_zero_signal(self):
        assert lambda_of(ModelParams(n=100, kappa=0.1, a=5, b=5)) == 0.0
        assert a_for_lambda(5, 0.1, 0.0) == 5

    def test_alpha_zero(self):
        P = ModelParams(n=100, kappa=0.1, a=9, b=5)
        assert lambda_alpha_of(P) == lambda_of(P)

    def test_barrier_value(self):
        a = a_for_lambda(100, 5e-4, 0.25)
        assert a == pytest.approx(10097.49, abs=0.01)
        P = ModelParams(n=10**6, kappa=5e-4, a=a, b=100)
        assert lambda_of(P) == pytest.approx(0.25, rel=1e-10)

    def test_monotone_in_lambda(self):
        vals = [a_for_lambda(140, 0.033, lam) for lam in np.linspace(0, 1, 11)]
        assert np.all(np.diff(vals) > 0)

    @given(st.floats(1.0, 1e3), st.floats(1e-3, 0.5), st.floats(0.0, 5.0),
           st.floats(0.0, 0.9))
    @settings(max_examples=200, deadline=None)
    def test_round_trip(self, b, kappa, lam, alpha):
        n = 10**7
        kappa = round(kappa * n) / n
        a = a_for_lambda(b, kappa, lam)
        P = ModelParams(n=n, kappa=kappa, a=a, b=b, alpha=alpha)
        assert lambda_of(P) == pytest.approx(lam, rel=1e-10, abs=1e-12)
        a2 = a_for_lambda(b, kappa, lam, alpha_for_lambda_alpha=alpha)
        P2 = ModelParams(n=n, kappa=kappa, a=a2, b=b, alpha=alpha)
        assert lambda_alpha_of(P2) == pytest.approx(lam, rel=1e-10, abs=1e-12)


class TestEdgeListIO:
    def test_round_trip(self, tmp_path):
        P = ModelParams(n=500, kappa=0.1, a=40, b=4)
        g, _ = sample_graph(P, 9)
        g = GraphInstance.from_edges(g.n + 3, *g.edges().T)  # isolated tail
        path = tmp_path / "g.txt"
        write_edge_list(g, path, header="test graph")
        h = load_edge_list(path)
        assert h.n == g.n
        assert np.array_equal(h.edges(), g.edges())
        lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
        pairs = [tuple(map(int, ln.split())) for ln in lines]
        assert pairs == sorted(pairs)
        assert all(u < v for u, v in pairs)
