"""Regenerate the small fixture corpus in this directory.

Candidate vectors are unit vectors at chosen angles from the query ``[1, 0]``,
so the cosine order is fixed by the angles alone. Graded answers are
placeholder strings; grades are arbitrary valid values.

    python tests/data/make_fixtures.py
"""

import json
import math
from pathlib import Path

HERE = Path(__file__).parent

QUERY_TEXTS = [
    {
        "id": "N-5",
        "q": "who wrote the iliad",
        "p": [
            "The Iliad is an ancient Greek epic poem attributed to Homer.",
            "Homer is the presumed author of the Iliad and the Odyssey.",
        ],
        "n": [
            "Virgil wrote the Aeneid in Latin.",
            "Troy was a city in Asia Minor.",
            "The Odyssey follows Odysseus on his journey home.",
        ],
    },
    {
        "id": "A-0",
        "q": "classical analysis and ODEs",
        "p": [
            "We prove an inequality for Fourier series of bounded variation.",
            "Asymptotics of solutions to a second order linear ODE.",
            "A new bound for the Hardy-Littlewood maximal function.",
        ],
        "n": [
            "Random walks on groups mix in logarithmic time.",
            "A central limit theorem for dependent sequences.",
            "Large deviations of empirical measures.",
        ],
        "c1": "math.ca",
        "c2": "math.pr",
        "q2": "probability",
    },
    {
        "id": "Hs-m-17",
        "q": "which river flows through Vienna",
        "p": ["Vienna lies on the Danube.", "The Danube passes Vienna on its way east."],
        "n": ["Prague lies on the Vltava.", "Budapest has many bridges."],
    },
]

# id, E, Np, candidate angles in degrees (positives first), ks
LAYOUT = [
    ("N-5", "AM", 2, [20, 60, 10, 40, 80], [1, 2, 3, 4]),
    ("A-0", "EM", 3, [5, 15, 35, 25, 45, 55], [2, 3, 4]),
    ("Hs-m-17", "QM", 2, [10, 20, 30, 40], [2, 3]),
]


def unit(deg):
    r = math.radians(deg)
    return [round(math.cos(r), 9), round(math.sin(r), 9)]


def main():
    qt = {s["id"]: s for s in QUERY_TEXTS}
    vectors, ranked, graded = [], [], []
    for sid, e, n_pos, angles, ks in LAYOUT:
        n_cand = len(angles)
        vecs = [unit(a) for a in angles]
        vectors.append(
            {"id": sid, "E": e, "q_vec": [1.0, 0.0], "p_vecs": vecs[:n_pos], "n_vecs": vecs[n_pos:], "Np": n_pos, "Nc": n_cand}
        )
        rank = sorted(range(n_cand), key=lambda i: angles[i])
        labels = [1 if i < n_pos else 0 for i in rank]
        ps = [sum(labels[:k]) / k for k in ks]
        rs = [sum(labels[:k]) / n_pos for k in ks]
        ranked.append({"id": sid, "E": e, "Nc": n_cand, "Np": n_pos, "K": ks, "P": ps, "R": rs, "rank": rank})
        for k, p, r in zip(ks, ps, rs):
            graded.append(
                {
                    "id": sid, "E": e, "Nc": n_cand, "Np": n_pos, "K": k, "rank": rank[:k], "inK": labels[:k],
                    "answer_ideal": f"ideal answer to: {qt[sid]['q']}",
                    "answer_topK": f"answer from top {k}",
                    "grade": 1 + sum(labels[:k]), "P": p, "R": r,
                }
            )

    def dump(name, rows):
        with open(HERE / name, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")

    dump("query_texts.jsonl", QUERY_TEXTS)
    dump("vectors.jsonl", vectors)
    dump("ranked.jsonl", ranked)
    dump("graded.jsonl", graded)


if __name__ == "__main__":
    main()
