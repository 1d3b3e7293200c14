"""Top-K selection measures: P, R, F, F_e, T, T_u and nDCG.

All measures take a :class:`TopKOutcome`, the binary relevance labels of a
ranked top-K selection together with the pool counts. Relevance is binary
throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptyInputError,
    InvalidCutoffError,
    MissingParameterError,
    UndefinedRecallError,
    ZeroRateError,
)

__all__ = [
    "NdcgMode",
    "TopKOutcome",
    "alpha_from_beta",
    "check_alpha",
    "dcg",
    "f_counts",
    "f_estimated",
    "f_from_pr",
    "f_measure",
    "ndcg",
    "precision",
    "recall",
    "t_counts",
    "t_measure",
    "t_unnormalized",
    "tu_counts",
]


class NdcgMode(enum.Enum):
    """How the ideal DCG is built.

    ``OBSERVED`` sorts the observed top-K labels, so it never needs the pool
    size. ``CORPUS`` places ``min(N_p, K)`` positives first, the classical
    definition.
    """

    OBSERVED = "observed"
    CORPUS = "corpus"


@dataclass(frozen=True)
class TopKOutcome:
    """Relevance labels of a top-K selection plus pool counts.

    ``labels_top_2k`` is optional; only :func:`f_estimated` needs it. When
    given it holds the first ``min(2K, N_c)`` labels of the ranking.
    """

    labels_top_k: tuple[int, ...]
    big_n_p: int
    big_n_c: int
    labels_top_2k: tuple[int, ...] | None = None

    def __post_init__(self):
        labels = tuple(int(v) for v in self.labels_top_k)
        object.__setattr__(self, "labels_top_k", labels)
        if any(v not in (0, 1) for v in labels):
            raise DomainError("relevance labels must be 0 or 1")
        k = len(labels)
        if not 0 <= self.big_n_p <= self.big_n_c:
            raise DomainError(f"need 0 <= N_p <= N_c, got N_p={self.big_n_p}, N_c={self.big_n_c}")
        if k > self.big_n_c:
            raise DomainError(f"K={k} exceeds N_c={self.big_n_c}")
        if sum(labels) > self.big_n_p:
            raise DomainError("more positives in the top K than in the pool")
        if self.labels_top_2k is not None:
            window = tuple(int(v) for v in self.labels_top_2k)
            object.__setattr__(self, "labels_top_2k", window)
            if window[:k] != labels:
                raise DomainError("labels_top_k must be a prefix of labels_top_2k")
            if len(window) != min(2 * k, self.big_n_c):
                raise DomainError(
                    f"top-2K window has length {len(window)}, expected {min(2 * k, self.big_n_c)}"
                )
            if any(v not in (0, 1) for v in window) or sum(window) > self.big_n_p:
                raise DomainError("invalid top-2K window")

    @classmethod
    def from_counts(cls, n_p: int, k: int, big_n_p: int, big_n_c: int | None = None) -> TopKOutcome:
        """Outcome with the positives ranked first; enough for count-only measures."""
        if big_n_c is None:
            big_n_c = max(k, big_n_p) + 1
        return cls((1,) * n_p + (0,) * (k - n_p), big_n_p, big_n_c)

    @property
    def k(self) -> int:
        return len(self.labels_top_k)

    @property
    def n_p(self) -> int:
        return sum(self.labels_top_k)

    @property
    def n_n(self) -> int:
        return self.k - self.n_p

    @property
    def estimated_n_p(self) -> int | None:
        """Positives seen in the top-2K window, or None without a window."""
        if self.labels_top_2k is None:
            return None
        return sum(self.labels_top_2k)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _require_cutoff(outcome: TopKOutcome) -> int:
    if outcome.k < 1:
        raise InvalidCutoffError("top-K cutoff must be at least 1")
    return outcome.k


def precision(outcome: TopKOutcome) -> float:
    k = _require_cutoff(outcome)
    return outcome.n_p / k


def recall(outcome: TopKOutcome) -> float:
    if outcome.big_n_p < 1:
        raise UndefinedRecallError("recall is undefined when the pool holds no positives")
    return outcome.n_p / outcome.big_n_p


def f_counts(alpha, n_p, k, big_n_p):
    """F from counts; broadcasts over numpy arrays. Zero wherever ``n_p == 0``."""
    n_p = np.asarray(n_p, dtype=np.float64)
    denom = alpha * np.asarray(k, dtype=np.float64) + (1.0 - alpha) * np.asarray(big_n_p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(n_p == 0, 0.0, n_p / np.where(n_p == 0, 1.0, denom))
    return out


def t_counts(alpha, n_p, k):
    """T from counts; broadcasts over numpy arrays."""
    n_p = np.asarray(n_p, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return (1.0 - alpha) * n_p - alpha * ((k - n_p) / k)


def tu_counts(alpha, n_p, k):
    n_p = np.asarray(n_p, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    return (1.0 - alpha) * n_p - alpha * (k - n_p)


def f_measure(alpha: float, outcome: TopKOutcome) -> float:
    """Weighted harmonic mean of precision and recall, in count form.

    ``n_p / (alpha*K + (1-alpha)*N_p)``; zero when no positive was retrieved.
    """
    alpha = check_alpha(alpha)
    k = _require_cutoff(outcome)
    if outcome.big_n_p < 1:
        raise UndefinedRecallError("F needs at least one positive in the pool")
    return float(f_counts(alpha, outcome.n_p, k, outcome.big_n_p))


def f_from_pr(alpha: float, p: float, r: float) -> float:
    """Harmonic form ``1 / (alpha/P + (1-alpha)/R)``."""
    alpha = check_alpha(alpha)
    if p <= 0 or r <= 0:
        raise ZeroRateError("harmonic F needs positive precision and recall; use f_measure")
    return 1.0 / (alpha / p + (1.0 - alpha) / r)


def alpha_from_beta(beta: float) -> float:
    """Convert the F-beta parameter to alpha, ``alpha = 1 / (1 + beta**2)``."""
    if beta < 0 or math.isnan(beta):
        raise DomainError(f"beta must be non-negative, got {beta}")
    return 1.0 / (1.0 + beta * beta)


def f_estimated(alpha: float, outcome: TopKOutcome) -> float:
    """F with N_p replaced by the positives seen in the top 2K."""
    alpha = check_alpha(alpha)
    k = _require_cutoff(outcome)
    estimate = outcome.estimated_n_p
    if estimate is None:
        raise MissingParameterError("f_estimated needs the top-2K label window")
    return float(f_counts(alpha, outcome.n_p, k, estimate))


def t_measure(alpha: float, outcome: TopKOutcome) -> float:
    """``(1-alpha)*n_p - alpha*n_n/K``; needs no pool size."""
    alpha = check_alpha(alpha)
    k = _require_cutoff(outcome)
    return float(t_counts(alpha, outcome.n_p, k))


def t_unnormalized(alpha: float, outcome: TopKOutcome) -> float:
    alpha = check_alpha(alpha)
    k = _require_cutoff(outcome)
    return float(tu_counts(alpha, outcome.n_p, k))


def dcg(labels: Sequence[int]) -> float:
    """Binary-gain DCG with a log2(i + 1) discount at 1-based position i."""
    gains = np.asarray(labels, dtype=np.float64)
    if gains.size == 0:
        raise EmptyInputError("dcg of an empty label list")
    discounts = np.log2(np.arange(2, gains.size + 2, dtype=np.float64))
    return float(np.sum(gains / discounts))


def ndcg(
    labels: Sequence[int],
    mode: NdcgMode = NdcgMode.OBSERVED,
    big_n_p: int | None = None,
) -> float:
    """DCG normalized by an ideal ordering; 0 when the ideal DCG is 0."""
    labels = [int(v) for v in labels]
    if not labels:
        raise EmptyInputError("ndcg of an empty label list")
    mode = NdcgMode(mode)
    if mode is NdcgMode.OBSERVED:
        ideal = sorted(labels, reverse=True)
    else:
        if big_n_p is None:
            raise MissingParameterError("corpus-ideal nDCG needs N_p")
        if big_n_p < 1:
            raise DomainError("corpus-ideal nDCG needs N_p >= 1")
        placed = min(big_n_p, len(labels))
        ideal = [1] * placed + [0] * (len(labels) - placed)
    ideal_dcg = dcg(ideal)
    if ideal_dcg == 0.0:
        return 0.0
    return dcg(labels) / ideal_dcg
