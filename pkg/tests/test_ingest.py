from __future__ import annotations

import numpy as np
import pytest

from cuebp.ingest import (ParseError, check_cues_against_truth, estimate_pq,
                          knn_graph, load_cue_file, load_edge_list,
                          load_features, load_id_list, load_label_file)
from cuebp.model import IMPERFECT, GraphInstance, ModelParams, sample_graph

from oracles import knn_brute


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestEdgeList:
    def test_duplicate_in_both_orientations(self, tmp_path):
        g, rep = load_edge_list(write(tmp_path, "g", "0 1\n1 0\n"), return_report=True)
        assert g.num_edges == 1 and rep.duplicates == 1

    def test_self_loop_only(self, tmp_path):
        g, rep = load_edge_list(write(tmp_path, "g", "0 0\n"), return_report=True)
        assert g.n == 1 and g.num_edges == 0 and rep.self_loops == 1

    def test_comments_and_declared_nodes(self, tmp_path):
        text = "# nodes: 10\n# a comment\n\n2 3  # inline\n3 4\n"
        g = load_edge_list(write(tmp_path, "g", text))
        assert g.n == 10
        assert g.edges().tolist() == [[2, 3], [3, 4]]

    def test_explicit_n(self, tmp_path):
        path = write(tmp_path, "g", "0 5\n")
        assert load_edge_list(path, n=8).n == 8
        with pytest.raises(ValueError):
            load_edge_list(path, n=5)

    @pytest.mark.parametrize("text, lineno", [("0 1\n1 2 3\n", 2), ("0 1\n\nx y\n", 3),
                                              ("-1 2\n", 1)])
    def test_malformed(self, tmp_path, text, lineno):
        with pytest.raises(ParseError) as exc:
            load_edge_list(write(tmp_path, "g", text))
        assert exc.value.lineno == lineno
        assert f":{lineno}:" in str(exc.value)

    def test_empty(self, tmp_path):
        with pytest.raises(ValueError):
            load_edge_list(write(tmp_path, "g", "# nothing\n"))


class TestIdFiles:
    def test_duplicates_collapse(self, tmp_path):
        assert load_id_list(write(tmp_path, "c", "7\n7\n9\n"), 10).tolist() == [7, 9]

    def test_out_of_range(self, tmp_path):
        with pytest.raises(ValueError):
            load_id_list(write(tmp_path, "c", "10\n"), 10)

    def test_cues_and_labels(self, tmp_path):
        c = load_cue_file(write(tmp_path, "c", "1\n3\n"), 5, IMPERFECT, 0.7)
        assert c.c.tolist() == [0, 1, 0, 1, 0] and c.model == IMPERFECT
        t = load_label_file(write(tmp_path, "l", "1\n"), 5)
        assert t.K == 1
        with pytest.warns(UserWarning):
            check_cues_against_truth(c, t)


class TestFeatures:
    def test_header_detection(self, tmp_path):
        a = load_features(write(tmp_path, "f", "x,y\n0,0\n1,0\n"))
        b = load_features(write(tmp_path, "h", "0,0\n1,0\n"))
        assert np.array_equal(a, b) and a.shape == (2, 2)

    def test_collinear_example(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        assert knn_graph(X, 1).edges().tolist() == [[0, 1], [1, 2], [2, 3]]

    def test_complete(self):
        X = np.random.default_rng(0).normal(size=(7, 3))
        assert knn_graph(X, 6).num_edges == 21

    def test_rejects(self):
        with pytest.raises(ValueError):
            knn_graph(np.zeros((3, 2)), 3)
        with pytest.raises(ValueError):
            knn_graph(np.zeros(4), 1)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        # integer grid forces many distance ties
        X = rng.integers(0, 4, size=(60, 2)).astype(float)
        k = int(rng.integers(1, 6))
        g = knn_graph(X, k, chunk=7)
        assert set(map(tuple, g.edges().tolist())) == knn_brute(X, k)
        assert g.degrees.min() >= k


def test_estimate_pq():
    P = ModelParams(n=2000, kappa=0.05, a=400, b=4)
    g, truth = sample_graph(P, 0)
    p, q = estimate_pq(g, truth.sigma)
    assert q == pytest.approx(2 * g.num_edges / (P.n * (P.n - 1)))
    assert p > 3 * q
    star = GraphInstance.from_edges(3, [0], [1])
    assert estimate_pq(star, np.array([1, 0, 0])) == (1.0, pytest.approx(1 / 3))
    with pytest.raises(ValueError):
        estimate_pq(star, np.array([0, 0, 1]))
