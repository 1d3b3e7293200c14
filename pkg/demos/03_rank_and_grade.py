"""
Ranking by cosine similarity and grading with the offline judge
===============================================================

Embeddings rank the candidates; the judge answers from the top K and scores
that answer against one written from the positives. The mock judge keeps the
whole loop offline and deterministic.
"""

from __future__ import annotations

from pathlib import Path

from topk_eval.dataset import Part, load_part
from topk_eval.judge import MockJudge, build_scoring_prompt
from topk_eval.pipeline import grade_ranked, rank_embedded
from topk_eval.ranker import load_vectors

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

query_texts = load_part(DATA / "query_texts.jsonl", Part.QUERY_TEXTS)
embedded = load_vectors(DATA / "vectors.jsonl")
ranked = rank_embedded(embedded, query_texts, ks=[1, 2, 3, 4])
for s in ranked:
    print(s.key, "rank", s.rank)

graded, failures = grade_ranked(ranked, query_texts, MockJudge(seed=7))
print(f"\n{len(graded)} graded, {len(failures)} skipped")
print(" id        E   K  n_p  grade")
for s in graded:
    print(f" {s.id:9s} {s.e}  {s.k}  {sum(s.in_k):3d}  {s.grade:5d}")

# the scoring prompt the live judge would receive for the first sample
system, user = build_scoring_prompt("q", graded[0].answer_topk, graded[0].answer_ideal)
print("\n" + user.split("\n\n")[0])
