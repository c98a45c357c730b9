"""Belief-propagation detection of a planted dense community from seed cues."""
from __future__ import annotations

from .bp import (BeliefVector, BpConfig, default_tf, run_bp_imperfect, run_bp_perfect,
                 select_estimate)
from .density import DEConfig, mu_recursion_imperfect, mu_recursion_perfect, population_dynamics
from .harness import TrialConfig, run_de, run_sweep, run_trial
from .ingest import knn_graph, load_cue_file, load_edge_list, load_label_file
from .metrics import DetectionResult, error_fraction, recall, success_prob
from .model import (IMPERFECT, PERFECT, CueAssignment, GraphInstance, GroundTruth,
                    ModelParams, a_for_lambda, lambda_alpha_of, lambda_of,
                    sample_cues_imperfect, sample_cues_perfect, sample_graph)
from .ppr import PprConfig, personalized_pagerank

__all__ = [
    "BeliefVector", "BpConfig", "CueAssignment", "DEConfig", "DetectionResult",
    "GraphInstance", "GroundTruth", "IMPERFECT", "ModelParams", "PERFECT", "PprConfig",
    "TrialConfig", "a_for_lambda", "default_tf", "error_fraction", "knn_graph",
    "lambda_alpha_of", "lambda_of", "load_cue_file", "load_edge_list", "load_label_file",
    "mu_recursion_imperfect", "mu_recursion_perfect", "personalized_pagerank",
    "population_dynamics", "recall", "run_bp_imperfect", "run_bp_perfect", "run_de",
    "run_sweep", "run_trial", "sample_cues_imperfect", "sample_cues_perfect",
    "sample_graph", "select_estimate", "success_prob",
]
