"""
Top-K retrieval measures on one outcome
=======================================

A retriever returned K documents; some of them are positives. This walks
through the measures computed from that outcome and how alpha moves them.
"""

from __future__ import annotations

import numpy as np

from topk_eval import metrics
from topk_eval.metrics import NdcgMode, TopKOutcome

# 5 retrieved, 3 of them positive, out of 5 positives in the pool
outcome = TopKOutcome.from_counts(n_p=3, k=5, big_n_p=5)
print("P =", metrics.precision(outcome), " R =", metrics.recall(outcome))

# F in count form and in harmonic form agree
f = metrics.f_measure(0.5, outcome)
print("F(0.5) =", f, " harmonic:", metrics.f_from_pr(0.5, 0.6, 0.6))

# alpha and the familiar F-beta parameter are two views of the same weight
print("alpha for beta=2:", metrics.alpha_from_beta(2.0))

# T needs no pool size: reward positives, charge negatives per slot
print("T(0.5) =", metrics.t_measure(0.5, outcome), " Tu(0.5) =", metrics.t_unnormalized(0.5, outcome))

# F_e swaps the pool size for the positives seen in the top 2K
labels = (1, 0, 1, 0, 1, 1, 0, 0, 0, 0)
windowed = TopKOutcome(labels[:5], big_n_p=5, big_n_c=10, labels_top_2k=labels)
print("estimated N_p =", windowed.estimated_n_p, " F_e(0.5) =", metrics.f_estimated(0.5, windowed))

# nDCG: the ideal is either the observed labels sorted or the pool's best case
for mode in NdcgMode:
    print(f"nDCG[{mode.value}] of [0, 1] with N_p=3:", round(metrics.ndcg([0, 1], mode, 3), 6))

# sweeping alpha at K=8, N_p=4: values move but the order in n_p never does
alphas = np.linspace(0.05, 0.95, 7)
n_p = np.arange(0, 5)
print("\nalpha   F(n_p=0..4)")
for a in alphas:
    row = metrics.f_counts(a, n_p, 8, 4)
    print(f"{a:.2f}   " + " ".join(f"{v:.3f}" for v in row))
