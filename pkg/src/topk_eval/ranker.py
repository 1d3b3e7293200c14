"""Cosine ranking of candidate texts over externally computed embeddings."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import IO, Any, Iterator, Sequence

import httpx
import numpy as np

from .dataset import RankedSample, labels_from_rank
from .errors import GeometryError, InvalidCutoffError, ParseError, SchemaError


@dataclass
class EmbeddedSample:
    """Query and candidate vectors for one (id, embedding) pair.

    Candidates are ordered positives first, then negatives, matching the
    query-texts sample, so index ``i < np`` marks a positive.
    """

    id: str
    e: str
    q_vec: np.ndarray
    cand_vecs: np.ndarray
    np: int

    def __post_init__(self):
        self.q_vec = np.asarray(self.q_vec, dtype=np.float64)
        self.cand_vecs = np.atleast_2d(np.asarray(self.cand_vecs, dtype=np.float64))
        if self.q_vec.ndim != 1 or self.q_vec.size < 1:
            raise GeometryError("query vector must be a non-empty 1-d array")
        if self.cand_vecs.shape[1] != self.q_vec.size:
            raise GeometryError(
                f"candidate dimension {self.cand_vecs.shape[1]} != query dimension {self.q_vec.size}"
            )
        if not 0 <= self.np < len(self.cand_vecs):
            raise GeometryError(f"np={self.np} must be below the candidate count {len(self.cand_vecs)}")

    @property
    def nc(self) -> int:
        return len(self.cand_vecs)


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise GeometryError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise GeometryError("cosine of a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def similarities(s: EmbeddedSample) -> np.ndarray:
    qn = np.linalg.norm(s.q_vec)
    cn = np.linalg.norm(s.cand_vecs, axis=1)
    if qn == 0 or np.any(cn == 0):
        raise GeometryError(f"{s.id}/{s.e}: zero-norm vector")
    return np.clip(s.cand_vecs @ s.q_vec / (cn * qn), -1.0, 1.0)


def rank_candidates(s: EmbeddedSample) -> RankedSample:
    """Order candidates by descending cosine to the query, ties by index.

    The returned sample has empty ``ks``/``ps``/``rs``; see :func:`with_cutoffs`.
    """
    sims = similarities(s)
    order = np.argsort(-sims, kind="stable")
    return RankedSample(
        id=s.id, e=s.e, nc=s.nc, np=s.np, ks=[], ps=[], rs=[], rank=[int(i) for i in order]
    )


def pr_curve(rank: Sequence[int], np: int, ks: Sequence[int]) -> tuple[list[float], list[float]]:
    """Precision and recall of each top-K prefix of ``rank``."""
    if np < 1:
        raise InvalidCutoffError("pr_curve needs np >= 1")
    labels = labels_from_rank(rank, np)
    cumulative = [0]
    for flag in labels:
        cumulative.append(cumulative[-1] + flag)
    ps, rs = [], []
    for k in ks:
        if not 1 <= k <= len(labels):
            raise InvalidCutoffError(f"cutoff K={k} outside [1, {len(labels)}]")
        ps.append(cumulative[k] / k)
        rs.append(cumulative[k] / np)
    return ps, rs


def with_cutoffs(s_r: RankedSample, ks: Sequence[int]) -> RankedSample:
    """Fill K/P/R lists; cutoffs above ``nc`` are dropped."""
    ks = sorted({int(k) for k in ks if 1 <= k <= s_r.nc})
    ps, rs = pr_curve(s_r.rank, s_r.np, ks)
    return RankedSample(
        id=s_r.id, e=s_r.e, nc=s_r.nc, np=s_r.np, ks=ks, ps=ps, rs=rs, rank=list(s_r.rank),
        extra=dict(s_r.extra),
    )


# ---------------------------------------------------------------------------
# vectors file: one JSON object per (id, E) with q_vec, p_vecs, n_vecs and
# optional Np/Nc to take the first Np positives and Nc-Np negatives


def embedded_from_record(record: dict[str, Any], line: int | None = None) -> EmbeddedSample:
    for key in ("id", "E", "q_vec", "p_vecs", "n_vecs"):
        if key not in record:
            raise SchemaError(key, line=line)
    p_vecs, n_vecs = record["p_vecs"], record["n_vecs"]
    n_pos = record.get("Np", len(p_vecs))
    n_cand = record.get("Nc", n_pos + len(n_vecs))
    if n_pos > len(p_vecs) or n_cand - n_pos > len(n_vecs) or n_cand <= n_pos:
        raise SchemaError("Nc", f"Np={n_pos}, Nc={n_cand} do not fit the vectors for", line)
    cands = list(p_vecs[:n_pos]) + list(n_vecs[: n_cand - n_pos])
    return EmbeddedSample(
        id=record["id"], e=record["E"], q_vec=record["q_vec"], cand_vecs=cands, np=n_pos
    )


def iter_vectors(source: IO[bytes] | IO[str]) -> Iterator[EmbeddedSample]:
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        if not raw.strip():
            continue
        try:
            record = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, exc.msg) from exc
        yield embedded_from_record(record, lineno)


def load_vectors(path) -> list[EmbeddedSample]:
    with open(path, "rb") as fh:
        return list(iter_vectors(fh))


def vectors_record(
    sample_id: str, e: str, q_vec, p_vecs, n_vecs, **extra: Any
) -> dict[str, Any]:
    def as_list(v):
        return np.asarray(v, dtype=np.float64).tolist()

    record = {
        "id": sample_id,
        "E": e,
        "q_vec": as_list(q_vec),
        "p_vecs": [as_list(v) for v in p_vecs],
        "n_vecs": [as_list(v) for v in n_vecs],
    }
    record.update(extra)
    return record


class EmbeddingClient:
    """Minimal client for an OpenAI-style ``/embeddings`` endpoint.

    Posts ``{"model": ..., "input": [texts]}`` and reads ``data[i].embedding``.
    A bare JSON list of vectors is accepted as well.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str | None = "OPENAI_API_KEY",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {}
        key = os.environ.get(api_key_env, "") if api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self.model = model
        self._http = httpx.Client(
            base_url=base_url.rstrip("/"), headers=headers, timeout=timeout, transport=transport
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        resp = self._http.post("/embeddings", json={"model": self.model, "input": list(texts)})
        resp.raise_for_status()
        body = resp.json()
        if isinstance(body, dict):
            rows = sorted(body["data"], key=lambda d: d.get("index", 0))
            vectors = [row["embedding"] for row in rows]
        else:
            vectors = body
        if len(vectors) != len(texts):
            raise GeometryError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        return np.asarray(vectors, dtype=np.float64)

    def embed_query_texts(self, s_q, e: str) -> dict[str, Any]:
        """Vectors-file record for one query-texts sample."""
        vecs = self.embed([s_q.q, *s_q.p, *s_q.n])
        n_p = len(s_q.p)
        return vectors_record(s_q.id, e, vecs[0], vecs[1 : 1 + n_p], vecs[1 + n_p :])

    def close(self) -> None:
        self._http.close()
