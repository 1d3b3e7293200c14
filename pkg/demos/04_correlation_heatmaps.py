"""
Which measure tracks answer quality?
====================================

A synthetic graded corpus where answer quality depends on how many positives
made it into the top K, plus noise. Each measure is correlated with the grade
per (embedding, K/Np bucket); alpha-weighted measures report their best alpha.
"""

from __future__ import annotations

import tempfile

import numpy as np

from topk_eval.analysis import ratio_bucket
from topk_eval.dataset import GradedSample, RankedSample, labels_from_rank
from topk_eval.pipeline import AnalysisSettings, analyze, write_report
from topk_eval.ranker import pr_curve

rng = np.random.default_rng(0)
ranked, graded = [], []
for i in range(400):
    nc, np_ = 30, int(rng.choice([2, 3, 5]))
    for e in ("AM", "EM"):
        # positives tend to float up, more so for EM
        boost = 0.6 if e == "EM" else 0.3
        score = rng.random(nc) + boost * (np.arange(nc) < np_)
        rank = [int(j) for j in np.argsort(-score, kind="stable")]
        ks = [2, 3, 5, 8]
        ps, rs = pr_curve(rank, np_, ks)
        s_r = RankedSample(f"M-{i}", e, nc, np_, ks, ps, rs, rank)
        ranked.append(s_r)
        for k in ks:
            in_k = labels_from_rank(rank[:k], np_)
            recall = sum(in_k) / np_
            grade = int(np.clip(np.rint(1 + 4 * recall + rng.normal(0, 0.7)), 1, 5))
            graded.append(GradedSample(s_r.id, e, nc, np_, k, rank[:k], in_k, "", "", grade,
                                       sum(in_k) / k, recall))

print("buckets:", sorted({ratio_bucket(s.k, s.np) for s in graded}))
report = analyze(graded, ranked, AnalysisSettings(min_count=100))

m = report.correlation_matrices[("spearman", "F", "M")]
print("\nSpearman(F, grade); rows are embeddings, columns K/Np buckets")
print("      " + " ".join(f"{c:>6}" for c in m.col_labels))
for row, cells in zip(m.row_labels, m.cells):
    print(f"{row:5s} " + " ".join(f"{v:6.3f}" for v in cells))

d = report.difference_matrices[("spearman", "T", "F", "M")]
print("\nT minus F (positive where T tracks the grade better)")
for row, cells in zip(d.row_labels, d.cells):
    print(f"{row:5s} " + " ".join(f"{v:+6.3f}" for v in cells))

print("\nnarrow/wide summary (Spearman):")
for r in report.correlations:
    if not r.segment.is_ratio and r.method == "spearman":
        alpha = f" alpha*={r.alpha_star}" if r.alpha_star is not None else ""
        print(f"  {r.segment.embedding} {r.segment.label():6s} {r.measure:4s} {r.coefficient:.3f}{alpha}")

with tempfile.TemporaryDirectory() as out:
    written = write_report(report, out)
    print(f"\nwrote {len(written)} files, e.g. {written[0].name} and heatmaps/")
