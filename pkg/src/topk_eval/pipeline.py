"""End-to-end steps behind the CLI: rank, grade, analyze and report writing."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analysis
from .analysis import CorrelationResult, HeatmapMatrix, SegmentKey
from .dataset import (
    GradedSample,
    QueryTextsSample,
    RankedSample,
    labels_from_rank,
    positive_texts,
    ranked_texts,
)
from .errors import CrossLinkError, TopKEvalError
from .judge import Judge, generate_response, score_response
from .metrics import NdcgMode
from .ranker import EmbeddedSample, rank_candidates, with_cutoffs

log = logging.getLogger(__name__)


def rank_embedded(
    embedded: Iterable[EmbeddedSample],
    query_texts: Iterable[QueryTextsSample],
    ks: Sequence[int],
) -> list[RankedSample]:
    """Rank every embedded sample and attach P/R at the cutoffs ``ks``."""
    q_ids = {s.id for s in query_texts}
    out = []
    missing = []
    for s in embedded:
        if s.id not in q_ids:
            missing.append(s.id)
            continue
        out.append(with_cutoffs(rank_candidates(s), ks))
    if missing:
        raise CrossLinkError(f"vectors without a query-texts sample: {', '.join(sorted(set(missing)))}")
    return out


@dataclass
class GradeFailure:
    key: tuple
    error: str

    def to_dict(self) -> dict:
        return {"key": list(self.key), "error": self.error}


def grade_ranked(
    ranked: Sequence[RankedSample],
    query_texts: Iterable[QueryTextsSample],
    judge: Judge,
    max_in_flight: int = 1,
) -> tuple[list[GradedSample], list[GradeFailure]]:
    """Produce one graded sample per (ranked sample, K).

    Ideal answers are generated once per ranked sample and reused for every K.
    Judge failures skip the affected sample and are returned, not raised.
    Output order follows the input order regardless of ``max_in_flight``.
    """
    q_by_id = {s.id: s for s in query_texts}
    for s_r in ranked:
        if s_r.id not in q_by_id:
            raise CrossLinkError(f"ranked sample {s_r.key} has no query-texts sample")

    def ideal_task(s_r: RankedSample):
        s_q = q_by_id[s_r.id]
        return generate_response(judge, s_q.q, positive_texts(s_r, s_q))

    def topk_task(s_r: RankedSample, k: int, ideal: str):
        s_q = q_by_id[s_r.id]
        texts = ranked_texts(s_r, s_q)[:k]
        answer = generate_response(judge, s_q.q, texts)
        grade = score_response(judge, s_q.q, answer, ideal)
        rank = list(s_r.rank[:k])
        in_k = labels_from_rank(rank, s_r.np)
        n_p = sum(in_k)
        return GradedSample(
            id=s_r.id, e=s_r.e, nc=s_r.nc, np=s_r.np, k=k, rank=rank, in_k=in_k,
            answer_ideal=ideal, answer_topk=answer, grade=grade, p=n_p / k, r=n_p / s_r.np,
        )

    def guarded(fn, *args):
        try:
            return fn(*args), None
        except TopKEvalError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    graded: list[GradedSample] = []
    failures: list[GradeFailure] = []
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        # per-run cache keyed by (id, E, Nc, Np, K, role); ideals ignore K
        ideals = list(pool.map(lambda s_r: guarded(ideal_task, s_r), ranked))
        jobs = []
        for s_r, (ideal, err) in zip(ranked, ideals):
            for k in s_r.ks:
                key = (*s_r.key, k)
                if err is not None:
                    failures.append(GradeFailure(key, f"ideal answer: {err}"))
                    continue
                jobs.append((key, pool.submit(guarded, topk_task, s_r, k, ideal)))
        for key, fut in jobs:
            sample, err = fut.result()
            if err is not None:
                failures.append(GradeFailure(key, err))
            else:
                graded.append(sample)
    for f in failures:
        log.warning("skipped %s: %s", f.key, f.error)
    return graded, failures


# ---------------------------------------------------------------------------
# analysis report


@dataclass
class AnalysisSettings:
    alpha_grid: Sequence[float] = analysis.DEFAULT_ALPHA_GRID
    min_count: int = analysis.DEFAULT_MIN_COUNT
    ndcg_mode: NdcgMode = NdcgMode.OBSERVED
    rounding: str = "decimal"
    methods: Sequence[str] = analysis.METHODS
    measures: Sequence[str] = analysis.MEASURES


@dataclass
class AnalysisReport:
    settings: AnalysisSettings
    segments: dict[SegmentKey, int]
    correlations: list[CorrelationResult]
    grade_matrices: dict[str, HeatmapMatrix]
    correlation_matrices: dict[tuple[str, str, str], HeatmapMatrix]
    difference_matrices: dict[tuple[str, str, str, str], HeatmapMatrix]
    measures: list[str]
    notes: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.segments


def analyze(
    graded: Sequence[GradedSample],
    ranked: Sequence[RankedSample] | None = None,
    settings: AnalysisSettings | None = None,
) -> AnalysisReport:
    settings = settings or AnalysisSettings()
    notes: list[str] = []
    measures = list(settings.measures)
    windows = analysis.top_2k_windows(ranked) if ranked is not None else None
    if "Fe" in measures and windows is None:
        measures.remove("Fe")
        notes.append("Fe omitted: no ranked samples given for the top-2K windows")
        log.warning(notes[-1])

    endpoints = sorted({float(a) for a in settings.alpha_grid} & {0.0, 1.0})
    if endpoints:
        # alpha=0 makes F pure recall and alpha=1 pure precision
        notes.append(f"alpha grid includes endpoint(s) {endpoints}; F degenerates to R or P there")
        log.warning(notes[-1])

    segments = analysis.segment(graded, settings.min_count, settings.rounding)
    if not segments:
        notes.append(f"no segment has at least {settings.min_count} samples")
        log.warning(notes[-1])
    results = analysis.correlate_segments(
        segments, measures, settings.methods, settings.alpha_grid, settings.ndcg_mode, windows
    )

    subsets = sorted({key.subset for key in segments})
    grade_matrices = {}
    for sub in subsets:
        members = {
            id(s): s
            for key, group in segments.items()
            if key.subset == sub and key.is_ratio
            for s in group
        }
        if members:
            grade_matrices[sub] = analysis.grade_distribution(members.values(), settings.rounding)

    by_cell: dict[tuple[str, str, str], list[CorrelationResult]] = {}
    for r in results:
        if r.segment.is_ratio:
            by_cell.setdefault((r.method, r.measure, r.segment.subset), []).append(r)
    corr_matrices = {key: analysis.correlation_matrix(rs) for key, rs in sorted(by_cell.items())}

    diff_matrices = {}
    for method in settings.methods:
        for minuend, subtrahend in analysis.DIFFERENCE_PAIRS:
            if minuend not in measures or subtrahend not in measures:
                notes.append(f"difference {minuend}-{subtrahend} skipped: measure not computed")
                continue
            for sub in subsets:
                a = by_cell.get((method, minuend, sub))
                b = by_cell.get((method, subtrahend, sub))
                if a and b:
                    diff_matrices[(method, minuend, subtrahend, sub)] = analysis.correlation_difference(a, b)
    return AnalysisReport(
        settings=settings,
        segments={key: len(group) for key, group in segments.items()},
        correlations=results,
        grade_matrices=grade_matrices,
        correlation_matrices=corr_matrices,
        difference_matrices=diff_matrices,
        measures=measures,
        notes=sorted(set(notes)),
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    return "" if math.isnan(value) else repr(value)


def _slice_fields(key: SegmentKey) -> tuple[str, str]:
    return ("ratio", key.label()) if key.is_ratio else ("width", key.label())


def _write_matrix(path: Path, m: HeatmapMatrix) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = [str(analysis.RatioBucket(c)) for c in m.col_labels]
        if m.cells.ndim == 3:
            w.writerow(["embedding", "grade", *cols])
            for i, row in enumerate(m.row_labels):
                for g in range(5):
                    w.writerow([row, g + 1, *(_fmt(v) for v in m.cells[i, :, g])])
        else:
            w.writerow(["embedding", *cols])
            for i, row in enumerate(m.row_labels):
                w.writerow([row, *(_fmt(v) for v in m.cells[i])])


def _matrix_json(m: HeatmapMatrix) -> dict:
    cells = np.where(np.isnan(m.cells), None, m.cells).tolist()
    return {
        "statistic": m.statistic,
        "subset": m.subset,
        "rows": m.row_labels,
        "columns": [str(analysis.RatioBucket(c)) for c in m.col_labels],
        "cells": cells,
    }


CORRELATION_FIELDS = ["subset", "embedding", "slice_kind", "slice", "measure", "method", "alpha_star", "coefficient", "n"]


def _result_row(r: CorrelationResult) -> list:
    kind, label = _slice_fields(r.segment)
    return [r.segment.subset, r.segment.embedding, kind, label, r.measure, r.method,
            _fmt(r.alpha_star), _fmt(r.coefficient), r.n]


def write_report(report: AnalysisReport, out_dir: str | Path) -> list[Path]:
    """Write CSV matrices plus a JSON bundle; returns the written paths in order."""
    out = Path(out_dir)
    (out / "heatmaps").mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "correlations.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CORRELATION_FIELDS)
        for r in report.correlations:
            w.writerow(_result_row(r))
    written.append(path)

    path = out / "narrow_wide.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["table_row", *CORRELATION_FIELDS])
        for r in report.correlations:
            if not r.segment.is_ratio:
                suffix = "n" if r.segment.slice is analysis.Width.NARROW else "w"
                w.writerow([f"{r.segment.subset}-{suffix}", *_result_row(r)])
    written.append(path)

    for sub, m in sorted(report.grade_matrices.items()):
        path = out / "heatmaps" / f"grades_{sub}.csv"
        _write_matrix(path, m)
        written.append(path)
    for (method, measure, sub), m in sorted(report.correlation_matrices.items()):
        path = out / "heatmaps" / f"corr_{method}_{measure}_{sub}.csv"
        _write_matrix(path, m)
        written.append(path)
    for (method, a, b, sub), m in sorted(report.difference_matrices.items()):
        path = out / "heatmaps" / f"diff_{method}_{a}-minus-{b}_{sub}.csv"
        _write_matrix(path, m)
        written.append(path)

    s = report.settings
    bundle = {
        "settings": {
            "alpha_grid": [float(a) for a in s.alpha_grid],
            "min_count": s.min_count,
            "ndcg_mode": NdcgMode(s.ndcg_mode).value,
            "rounding": s.rounding,
            "methods": list(s.methods),
            "measures": report.measures,
        },
        "notes": report.notes,
        "segments": [
            {"subset": k.subset, "embedding": k.embedding, "slice_kind": _slice_fields(k)[0],
             "slice": k.label(), "n": n}
            for k, n in report.segments.items()
        ],
        "correlations": [
            {
                "subset": r.segment.subset,
                "embedding": r.segment.embedding,
                "slice_kind": _slice_fields(r.segment)[0],
                "slice": r.segment.label(),
                "measure": r.measure,
                "method": r.method,
                "alpha_star": r.alpha_star,
                "coefficient": r.coefficient,
                "n": r.n,
            }
            for r in report.correlations
        ],
        "grade_distributions": {sub: _matrix_json(m) for sub, m in sorted(report.grade_matrices.items())},
        "correlation_matrices": {
            f"{method}/{measure}/{sub}": _matrix_json(m)
            for (method, measure, sub), m in sorted(report.correlation_matrices.items())
        },
        "difference_matrices": {
            f"{method}/{a}-{b}/{sub}": _matrix_json(m)
            for (method, a, b, sub), m in sorted(report.difference_matrices.items())
        },
    }
    path = out / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written
