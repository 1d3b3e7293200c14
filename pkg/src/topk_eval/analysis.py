"""Segmentation, measure-vs-grade correlations and the heatmap matrices.

Graded samples are sliced per (subset, embedding, K/Np bucket) and per
(subset, embedding, narrow/wide). Within a slice every measure is correlated
with the grade; alpha-parameterized measures report the best coefficient
over an alpha grid.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import metrics
from .dataset import GradedSample, RankedSample, labels_from_rank, subset_of
from .errors import (
    AlignmentError,
    IncompleteSampleError,
    ShapeError,
    UndefinedCorrelationError,
)
from .metrics import NdcgMode, TopKOutcome

METHODS = ("spearman", "pearson", "kendall-b", "kendall-c")
MEASURES = ("P", "R", "F", "Fe", "T", "Tu", "nDCG")
ALPHA_MEASURES = frozenset({"F", "Fe", "T", "Tu"})
DEFAULT_ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
DEFAULT_MIN_COUNT = 300
# coefficients this close count as tied when picking alpha*
TIE_TOLERANCE = 1e-12

# (minuend, subtrahend) pairs shown as difference heatmaps
DIFFERENCE_PAIRS = (("T", "F"), ("Tu", "T"), ("nDCG", "F"), ("Fe", "F"), ("T", "nDCG"))


# ---------------------------------------------------------------------------
# correlation


def _as_series(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ShapeError(f"series shapes differ: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ShapeError("correlation needs at least two points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("correlation of a constant series")
    return x, y


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise UndefinedCorrelationError("zero variance")
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


def correlate(method: str, x: Sequence[float], y: Sequence[float]) -> float:
    """Correlation coefficient of two series.

    ``method`` is one of ``spearman`` (Pearson on average ranks), ``pearson``,
    ``kendall-b`` or ``kendall-c``.
    """
    x, y = _as_series(x, y)
    if method == "pearson":
        return _pearson(x, y)
    if method == "spearman":
        return _pearson(stats.rankdata(x), stats.rankdata(y))
    if method in ("kendall-b", "kendall-c"):
        tau = stats.kendalltau(x, y, variant=method[-1]).statistic
        if not np.isfinite(tau):
            raise UndefinedCorrelationError(f"{method} undefined for these series")
        return float(np.clip(tau, -1.0, 1.0))
    raise ValueError(f"unknown correlation method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# segmentation


class Width(enum.Enum):
    NARROW = "narrow"
    WIDE = "wide"


@dataclass(frozen=True)
class RatioBucket:
    value: float

    def __str__(self) -> str:
        return f"{self.value:.1f}" if self.value < 10 else f"{self.value:g}"


@dataclass(frozen=True)
class SegmentKey:
    subset: str
    embedding: str
    slice: RatioBucket | Width

    @property
    def is_ratio(self) -> bool:
        return isinstance(self.slice, RatioBucket)

    def sort_key(self):
        if self.is_ratio:
            return (self.subset, self.embedding, 0, self.slice.value, "")
        return (self.subset, self.embedding, 1, 0.0, self.slice.value)

    def label(self) -> str:
        return str(self.slice) if self.is_ratio else self.slice.value


def _round_half_up(frac: Fraction) -> int:
    return math.floor(frac + Fraction(1, 2))


def ratio_bucket(k: int, np: int, mode: str = "decimal") -> float:
    """K/Np rounded half-up, to one decimal place or to one significant digit."""
    if k < 1 or np < 1:
        raise ValueError("ratio bucket needs k >= 1 and np >= 1")
    ratio = Fraction(k, np)
    if mode == "decimal":
        return _round_half_up(ratio * 10) / 10
    if mode == "significant":
        exponent = math.floor(math.log10(ratio.numerator) - math.log10(ratio.denominator))
        # guard the float log against exact powers of ten
        if Fraction(10) ** exponent > ratio:
            exponent -= 1
        elif Fraction(10) ** (exponent + 1) <= ratio:
            exponent += 1
        scale = Fraction(10) ** exponent
        return float(_round_half_up(ratio / scale) * scale)
    raise ValueError(f"unknown rounding mode {mode!r}")


def width_of(k: int, np: int) -> Width:
    return Width.NARROW if k < np else Width.WIDE


def segment(
    samples: Iterable[GradedSample],
    min_count: int = DEFAULT_MIN_COUNT,
    rounding: str = "decimal",
) -> dict[SegmentKey, list[GradedSample]]:
    """Group samples into ratio-bucket and narrow/wide slices.

    Every sample enters one ratio bucket and one width slice; groups with
    fewer than ``min_count`` samples are dropped. Keys come back sorted.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    groups: dict[SegmentKey, list[GradedSample]] = defaultdict(list)
    for s in samples:
        sub = subset_of(s.id)
        groups[SegmentKey(sub, s.e, RatioBucket(ratio_bucket(s.k, s.np, rounding)))].append(s)
        groups[SegmentKey(sub, s.e, width_of(s.k, s.np))].append(s)
    kept = {key: members for key, members in groups.items() if len(members) >= min_count}
    return dict(sorted(kept.items(), key=lambda kv: kv[0].sort_key()))


# ---------------------------------------------------------------------------
# measure series


def top_2k_windows(ranked: Iterable[RankedSample]) -> dict[tuple, dict[int, list[int]]]:
    """Top-2K label windows keyed by ranked key then K."""
    windows: dict[tuple, dict[int, list[int]]] = {}
    for s_r in ranked:
        labels = labels_from_rank(s_r.rank, s_r.np)
        windows[s_r.key] = {k: labels[: 2 * k] for k in s_r.ks}
    return windows


def outcome_of(s: GradedSample, window: Sequence[int] | None = None) -> TopKOutcome:
    return TopKOutcome(tuple(s.in_k), s.np, s.nc, tuple(window) if window is not None else None)


def _window_for(s: GradedSample, windows: Mapping | None) -> list[int] | None:
    if windows is None:
        return None
    by_k = windows.get(s.ranked_key)
    if by_k is None:
        return None
    return by_k.get(s.k)


_MEASURE_FUNCS: dict[str, Callable[[float, TopKOutcome], float]] = {
    "F": metrics.f_measure,
    "Fe": metrics.f_estimated,
    "T": metrics.t_measure,
    "Tu": metrics.t_unnormalized,
}


def measure_value(
    s: GradedSample,
    measure: str,
    alpha: float | None = None,
    ndcg_mode: NdcgMode = NdcgMode.OBSERVED,
    window: Sequence[int] | None = None,
) -> float:
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    if (alpha is None) == (measure in ALPHA_MEASURES):
        raise ValueError(f"alpha must be given exactly for {sorted(ALPHA_MEASURES)}")
    if measure == "Fe" and window is None:
        raise IncompleteSampleError(f"{s.key}: F_e needs the top-2K labels from the ranked sample")
    outcome = outcome_of(s, window if measure == "Fe" else None)
    if measure == "P":
        return metrics.precision(outcome)
    if measure == "R":
        return metrics.recall(outcome)
    if measure == "nDCG":
        return metrics.ndcg(outcome.labels_top_k, ndcg_mode, outcome.big_n_p)
    return _MEASURE_FUNCS[measure](alpha, outcome)


class SeriesTable:
    """Per-sample counts of one sample set, for vectorized measure evaluation.

    Values agree with the scalar functions in :mod:`topk_eval.metrics`; both
    go through the same count kernels.
    """

    def __init__(
        self,
        samples: Sequence[GradedSample],
        ndcg_mode: NdcgMode = NdcgMode.OBSERVED,
        windows: Mapping | None = None,
    ):
        self.samples = list(samples)
        self.ndcg_mode = NdcgMode(ndcg_mode)
        self.n_p = np.array([sum(s.in_k) for s in self.samples], dtype=np.float64)
        self.k = np.array([s.k for s in self.samples], dtype=np.float64)
        self.big_n_p = np.array([s.np for s in self.samples], dtype=np.float64)
        self.grades = np.array([s.grade for s in self.samples], dtype=np.float64)
        self._windows = windows
        self._estimates: np.ndarray | None = None
        self._ndcg: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def estimates(self) -> np.ndarray:
        if self._estimates is None:
            est = []
            for s in self.samples:
                window = _window_for(s, self._windows)
                if window is None:
                    raise IncompleteSampleError(
                        f"{s.key}: F_e needs the top-2K labels from the ranked sample"
                    )
                # validates the window against the sample
                est.append(outcome_of(s, window).estimated_n_p)
            self._estimates = np.asarray(est, dtype=np.float64)
        return self._estimates

    @property
    def ndcg(self) -> np.ndarray:
        if self._ndcg is None:
            self._ndcg = np.array(
                [metrics.ndcg(s.in_k, self.ndcg_mode, s.np) for s in self.samples], dtype=np.float64
            )
        return self._ndcg

    def values(self, measure: str, alpha: float | None = None) -> np.ndarray:
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        if (alpha is None) == (measure in ALPHA_MEASURES):
            raise ValueError(f"alpha must be given exactly for {sorted(ALPHA_MEASURES)}")
        if alpha is not None:
            alpha = metrics.check_alpha(alpha)
        if measure == "P":
            return self.n_p / self.k
        if measure == "R":
            return self.n_p / self.big_n_p
        if measure == "nDCG":
            return self.ndcg
        if measure == "F":
            return metrics.f_counts(alpha, self.n_p, self.k, self.big_n_p)
        if measure == "Fe":
            return metrics.f_counts(alpha, self.n_p, self.k, self.estimates)
        if measure == "T":
            return metrics.t_counts(alpha, self.n_p, self.k)
        return metrics.tu_counts(alpha, self.n_p, self.k)


def measure_series(
    samples: Sequence[GradedSample],
    measure: str,
    alpha: float | None = None,
    ndcg_mode: NdcgMode = NdcgMode.OBSERVED,
    windows: Mapping | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Measure values and grades, aligned sample by sample."""
    table = SeriesTable(samples, ndcg_mode, windows)
    return table.values(measure, alpha), table.grades


@dataclass(frozen=True)
class CorrelationResult:
    segment: SegmentKey | None
    measure: str
    method: str
    alpha_star: float | None
    coefficient: float | None  # None when undefined on this segment
    n: int

    @property
    def defined(self) -> bool:
        return self.coefficient is not None


def _sweep(
    table: SeriesTable,
    measure: str,
    methods: Sequence[str],
    grid: Sequence[float],
    segment_key: SegmentKey | None,
) -> list[CorrelationResult]:
    """Best coefficient per method; each alpha's series is built once."""
    n = len(table)
    if measure not in ALPHA_MEASURES:
        values = table.values(measure)
        out = []
        for method in methods:
            try:
                coef = correlate(method, values, table.grades)
            except UndefinedCorrelationError:
                coef = None
            out.append(CorrelationResult(segment_key, measure, method, None, coef, n))
        return out
    if not grid:
        raise ValueError("alpha grid is empty")
    best: dict[str, tuple[float, float]] = {}
    for alpha in sorted(set(float(a) for a in grid)):
        values = table.values(measure, alpha)
        for method in methods:
            try:
                coef = correlate(method, values, table.grades)
            except UndefinedCorrelationError:
                continue
            if method not in best or coef > best[method][1] + TIE_TOLERANCE:
                best[method] = (alpha, coef)
    return [
        CorrelationResult(segment_key, measure, method, *best.get(method, (None, None)), n)
        for method in methods
    ]


def alpha_max_correlation(
    samples: Sequence[GradedSample],
    measure: str,
    method: str,
    grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    ndcg_mode: NdcgMode = NdcgMode.OBSERVED,
    windows: Mapping | None = None,
    segment_key: SegmentKey | None = None,
) -> CorrelationResult:
    """Best correlation with the grade over ``grid``; ties go to the smallest alpha.

    Measures without alpha are correlated once. Raises
    :class:`UndefinedCorrelationError` when no grid point is defined.
    """
    if len(samples) < 2:
        raise ShapeError("need at least two samples")
    table = SeriesTable(samples, ndcg_mode, windows)
    (result,) = _sweep(table, measure, [method], grid, segment_key)
    if not result.defined:
        raise UndefinedCorrelationError(f"{measure}/{method}: correlation undefined on these samples")
    return result


def correlate_segments(
    segments: Mapping[SegmentKey, Sequence[GradedSample]],
    measures: Sequence[str] = MEASURES,
    methods: Sequence[str] = METHODS,
    grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    ndcg_mode: NdcgMode = NdcgMode.OBSERVED,
    windows: Mapping | None = None,
) -> list[CorrelationResult]:
    """One result per (segment, measure, method); undefined ones carry ``coefficient=None``."""
    results = []
    for key, members in segments.items():
        table = SeriesTable(members, ndcg_mode, windows)
        for measure in measures:
            if len(table) < 2:
                results += [CorrelationResult(key, measure, m, None, None, len(table)) for m in methods]
                continue
            results += _sweep(table, measure, methods, grid, key)
    return results


# ---------------------------------------------------------------------------
# heatmaps


@dataclass
class HeatmapMatrix:
    """Rows are embeddings, columns ascending ratio buckets.

    ``cells`` has shape (rows, cols) for scalar statistics or (rows, cols, 5)
    for grade distributions. NaN marks an absent cell.
    """

    row_labels: list[str]
    col_labels: list[float]
    cells: np.ndarray
    statistic: str
    subset: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.shape[:2] != (len(self.row_labels), len(self.col_labels)):
            raise ShapeError(
                f"cells {self.cells.shape} do not match {len(self.row_labels)}x{len(self.col_labels)} labels"
            )

    def cell(self, row: str, col: float):
        return self.cells[self.row_labels.index(row), self.col_labels.index(col)]


def grade_distribution(samples: Iterable[GradedSample], rounding: str = "decimal") -> HeatmapMatrix:
    """Normalized 1..5 grade frequencies per (embedding, ratio bucket)."""
    counts: dict[tuple[str, float], np.ndarray] = defaultdict(lambda: np.zeros(5))
    subsets = set()
    for s in samples:
        counts[(s.e, ratio_bucket(s.k, s.np, rounding))][s.grade - 1] += 1
        subsets.add(subset_of(s.id))
    rows = sorted({e for e, _ in counts})
    cols = sorted({b for _, b in counts})
    cells = np.full((len(rows), len(cols), 5), np.nan)
    for (e, b), c in counts.items():
        cells[rows.index(e), cols.index(b)] = c / c.sum()
    subset = subsets.pop() if len(subsets) == 1 else None
    return HeatmapMatrix(rows, cols, cells, "grade-distribution", subset)


def correlation_matrix(results: Iterable[CorrelationResult]) -> HeatmapMatrix:
    """Arrange ratio-bucket correlation results of one subset into a matrix."""
    results = [r for r in results if r.segment is not None and r.segment.is_ratio]
    _check_uniform(results)
    rows = sorted({r.segment.embedding for r in results})
    cols = sorted({r.segment.slice.value for r in results})
    cells = np.full((len(rows), len(cols)), np.nan)
    for r in results:
        if r.defined:
            cells[rows.index(r.segment.embedding), cols.index(r.segment.slice.value)] = r.coefficient
    head = results[0] if results else None
    statistic = f"{head.method}:{head.measure}" if head else "empty"
    return HeatmapMatrix(rows, cols, cells, statistic, head.segment.subset if head else None)


def _check_uniform(results: list[CorrelationResult]) -> None:
    if len({r.method for r in results}) > 1:
        raise AlignmentError("results mix correlation methods")
    if len({r.segment.subset for r in results}) > 1:
        raise AlignmentError("results mix dataset subsets")
    keys = [r.segment for r in results]
    if len(set(keys)) != len(keys):
        raise AlignmentError("duplicate segment in result set")


def correlation_difference(
    a: Iterable[CorrelationResult], b: Iterable[CorrelationResult]
) -> HeatmapMatrix:
    """Cellwise ``a - b`` over identical ratio-bucket segments.

    A cell is NaN when either side is undefined there.
    """
    a = [r for r in a if r.segment is not None and r.segment.is_ratio]
    b = [r for r in b if r.segment is not None and r.segment.is_ratio]
    if {r.segment for r in a} != {r.segment for r in b}:
        missing = {r.segment for r in a} ^ {r.segment for r in b}
        raise AlignmentError(f"segment sets differ: {sorted(missing, key=SegmentKey.sort_key)}")
    if {r.method for r in a} != {r.method for r in b}:
        raise AlignmentError("operands use different correlation methods")
    ma, mb = correlation_matrix(a), correlation_matrix(b)
    measures = (a[0].measure, b[0].measure) if a else ("?", "?")
    return HeatmapMatrix(
        ma.row_labels,
        ma.col_labels,
        ma.cells - mb.cells,
        f"{a[0].method if a else '?'}:{measures[0]}-{measures[1]}",
        ma.subset,
    )
