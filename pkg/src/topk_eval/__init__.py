"""Top-K retrieval measures and LLM-judged correlation analysis."""

from .metrics import (
    NdcgMode,
    TopKOutcome,
    alpha_from_beta,
    dcg,
    f_estimated,
    f_from_pr,
    f_measure,
    ndcg,
    precision,
    recall,
    t_measure,
    t_unnormalized,
)

__version__ = "0.1.0"

__all__ = [
    "NdcgMode",
    "TopKOutcome",
    "alpha_from_beta",
    "dcg",
    "f_estimated",
    "f_from_pr",
    "f_measure",
    "ndcg",
    "precision",
    "recall",
    "t_measure",
    "t_unnormalized",
]
