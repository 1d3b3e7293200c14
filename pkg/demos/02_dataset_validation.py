"""
Loading and validating the three dataset parts
==============================================

Query texts hold the candidate documents, ranked samples hold a candidate
permutation per embedding, graded samples hold one judged answer per cutoff.
"""

from __future__ import annotations

import copy
import io
from pathlib import Path

from topk_eval.dataset import (
    Part,
    dump_part,
    load_part,
    ranked_texts,
    subset_counts,
    validate_collection,
)

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

parts = {p: load_part(DATA / f"{p.value}.jsonl", p) for p in Part}
for p, samples in parts.items():
    print(f"{p.value:12s} {len(samples)} samples")

# a ranked sample points into p (positives) then n (negatives)
s_r = parts[Part.RANKED][0]
s_q = next(s for s in parts[Part.QUERY_TEXTS] if s.id == s_r.id)
print("\nranked", s_r.key, "rank", s_r.rank)
for k, p, r in zip(s_r.ks, s_r.ps, s_r.rs):
    print(f"  K={k}  P={p:.3f}  R={r:.3f}")
print("top-2 texts:", ranked_texts(s_r, s_q)[:2])

# everything cross-checks cleanly
reports = validate_collection(*parts.values())
print("\nfailing samples:", [r.key for r in reports if not r.ok])

# corrupt one stored precision and validate again
broken = copy.deepcopy(parts[Part.RANKED])
broken[0].ps[1] = 0.9
reports = validate_collection(parts[Part.QUERY_TEXTS], broken, None)
print("after corruption:", [(r.key, r.failures) for r in reports if not r.ok])

# dumps are key-stable, so a round trip is lossless
buf = io.StringIO()
dump_part(parts[Part.GRADED], buf)
print("\nround trip equal:", load_part(io.StringIO(buf.getvalue()), Part.GRADED) == parts[Part.GRADED])

print("\ncounts per (subset, embedding):")
for key, row in subset_counts(parts[Part.RANKED]).items():
    print(" ", key, row)
