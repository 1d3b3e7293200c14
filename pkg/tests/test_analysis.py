import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ORACLES, round_half_up_decimal
from synth import graded, monotone_corpus, random_ranked, grade_by_np
from topk_eval.analysis import (
    DEFAULT_ALPHA_GRID,
    METHODS,
    CorrelationResult,
    RatioBucket,
    SegmentKey,
    SeriesTable,
    Width,
    alpha_max_correlation,
    correlate,
    correlate_segments,
    correlation_difference,
    correlation_matrix,
    grade_distribution,
    measure_series,
    measure_value,
    ratio_bucket,
    segment,
    top_2k_windows,
    width_of,
)
from topk_eval.errors import (
    AlignmentError,
    IncompleteSampleError,
    ShapeError,
    UndefinedCorrelationError,
)
from topk_eval.metrics import NdcgMode

small_lists = st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 4), min_size=n, max_size=n),
        st.lists(st.integers(0, 4), min_size=n, max_size=n),
    )
)


def nonconstant(x, y):
    return len(set(x)) > 1 and len(set(y)) > 1


class TestCorrelate:
    def test_worked_kendall(self):
        x, y = [1, 2, 2, 3], [1, 2, 3, 3]
        assert correlate("kendall-b", x, y) == pytest.approx(0.8, abs=1e-12)
        assert correlate("kendall-c", x, y) == pytest.approx(0.75, abs=1e-12)

    def test_worked_pearson(self):
        assert correlate("pearson", [1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)

    def test_worked_spearman_ties(self):
        assert correlate("spearman", [1, 2, 2], [1, 2, 3]) == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    @pytest.mark.parametrize("method", METHODS)
    def test_perfect(self, method):
        assert correlate(method, [1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
        assert correlate(method, [1, 2, 3, 4], [8, 6, 4, 2]) == pytest.approx(-1.0)

    @pytest.mark.parametrize("method", METHODS)
    def test_constant_undefined(self, method):
        with pytest.raises(UndefinedCorrelationError):
            correlate(method, [1, 1, 1], [1, 2, 3])

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            correlate("pearson", [1, 2], [1, 2, 3])
        with pytest.raises(ShapeError):
            correlate("pearson", [1], [1])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            correlate("distance", [1, 2], [2, 1])

    @settings(max_examples=300)
    @given(small_lists)
    def test_matches_oracle(self, xy):
        x, y = xy
        if not nonconstant(x, y):
            return
        for method, oracle in ORACLES.items():
            assert correlate(method, x, y) == pytest.approx(oracle(x, y), abs=1e-9)

    @given(small_lists)
    def test_symmetric_and_bounded(self, xy):
        x, y = xy
        if not nonconstant(x, y):
            return
        for method in METHODS:
            c = correlate(method, x, y)
            assert -1.0 <= c <= 1.0
            assert c == pytest.approx(correlate(method, y, x), abs=1e-12)

    @given(small_lists)
    def test_invariances(self, xy):
        x, y = xy
        if not nonconstant(x, y):
            return
        x = np.asarray(x, dtype=float)
        rho = correlate("spearman", x, y)
        assert correlate("spearman", np.exp(x), y) == pytest.approx(rho, abs=1e-12)
        assert correlate("spearman", x**3 + x, y) == pytest.approx(rho, abs=1e-12)
        r = correlate("pearson", x, y)
        assert correlate("pearson", 2.5 * x + 7, y) == pytest.approx(r, abs=1e-9)


class TestRatioBucket:
    @pytest.mark.parametrize("k,np_,bucket", [(4, 2, 2.0), (5, 3, 1.7), (2, 15, 0.1), (1, 20, 0.1), (3, 40, 0.1)])
    def test_examples(self, k, np_, bucket):
        assert ratio_bucket(k, np_) == bucket

    def test_half_rounds_up(self):
        # 1/4 = 0.25 and 3/8 = 0.375 sit exactly on or past a half
        assert ratio_bucket(1, 4) == 0.3
        assert ratio_bucket(3, 8) == 0.4
        assert ratio_bucket(1, 20) == 0.1

    @given(st.integers(1, 60), st.integers(1, 60))
    def test_matches_long_division(self, k, np_):
        assert ratio_bucket(k, np_) == round_half_up_decimal(k, np_)

    @pytest.mark.parametrize("k,np_,bucket", [(5, 3, 2.0), (2, 15, 0.1), (15, 2, 8.0), (20, 2, 10.0), (1, 40, 0.03)])
    def test_significant_mode(self, k, np_, bucket):
        assert ratio_bucket(k, np_, "significant") == pytest.approx(bucket, abs=1e-15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ratio_bucket(0, 2)
        with pytest.raises(ValueError):
            ratio_bucket(2, 2, "nearest")


class TestSegment:
    def test_threshold(self):
        keep = [graded(f"N-{i}", "AM", 4, 2, 1, 2) for i in range(300)]
        drop = [graded(f"N-{i}", "AM", 5, 3, 1, 2) for i in range(299)]
        segs = segment(keep + drop, 300)
        ratio_keys = [k for k in segs if k.is_ratio]
        assert ratio_keys == [SegmentKey("N", "AM", RatioBucket(2.0))]
        # 599 wide samples in one width slice
        assert len(segs[SegmentKey("N", "AM", Width.WIDE)]) == 599

    def test_width(self):
        assert width_of(2, 3) is Width.NARROW
        assert width_of(3, 3) is Width.WIDE

    def test_per_embedding(self):
        samples = [graded("N-1", "AM", 2, 2, 1, 2), graded("N-1", "EM", 2, 2, 1, 2)]
        assert len(segment(samples, 1)) == 4

    def test_sorted_keys(self):
        samples = [graded("N-1", "AM", k, 2, 1, 2) for k in (6, 2, 3)] + [graded("A-1", "AM", 2, 3, 1, 2)]
        labels = [(k.subset, k.label()) for k in segment(samples, 1)]
        assert labels == [("A", "0.7"), ("A", "narrow"), ("N", "1.0"), ("N", "1.5"), ("N", "3.0"), ("N", "wide")]

    @given(st.lists(st.tuples(st.integers(1, 20), st.integers(2, 20), st.sampled_from(["AM", "EM"])), max_size=60))
    def test_partition(self, shapes):
        samples = [graded(f"M-{i}", e, k, np_, 0, 1) for i, (k, np_, e) in enumerate(shapes)]
        segs = segment(samples, 1)
        ratio = [id(s) for key, g in segs.items() if key.is_ratio for s in g]
        width = [id(s) for key, g in segs.items() if not key.is_ratio for s in g]
        assert sorted(ratio) == sorted(id(s) for s in samples)
        assert sorted(width) == sorted(id(s) for s in samples)

    def test_min_count_positive(self):
        with pytest.raises(ValueError):
            segment([], 0)


class TestMeasureSeries:
    samples = [graded("N-1", "AM", 5, 5, 3, 4), graded("N-2", "AM", 2, 4, 1, 2), graded("N-3", "AM", 4, 2, 2, 5)]

    def test_precision(self):
        values, grades = measure_series(self.samples, "P")
        np.testing.assert_allclose(values, [0.6, 0.5, 0.5])
        np.testing.assert_array_equal(grades, [4, 2, 5])

    def test_f_forwards_metrics(self):
        values, _ = measure_series(self.samples[:1], "F", 0.5)
        assert values[0] == pytest.approx(0.6, abs=1e-15)

    def test_fe_needs_window(self):
        with pytest.raises(IncompleteSampleError):
            measure_series(self.samples, "Fe", 0.5)
        with pytest.raises(IncompleteSampleError):
            measure_value(self.samples[0], "Fe", 0.5)

    def test_alpha_required_exactly(self):
        with pytest.raises(ValueError):
            measure_series(self.samples, "F")
        with pytest.raises(ValueError):
            measure_series(self.samples, "P", 0.5)

    @pytest.mark.parametrize("mode", list(NdcgMode))
    def test_vectorized_matches_scalar(self, mode):
        rng = np.random.default_rng(3)
        ranked = [random_ranked(rng, f"A-{i}", "AM", 20, int(rng.integers(2, 8)), range(2, 16)) for i in range(30)]
        samples = grade_by_np(ranked)
        windows = top_2k_windows(ranked)
        table = SeriesTable(samples, mode, windows)
        for measure in ("P", "R", "nDCG"):
            expected = [measure_value(s, measure, None, mode) for s in samples]
            np.testing.assert_allclose(table.values(measure), expected, rtol=0, atol=1e-15)
        for measure in ("F", "Fe", "T", "Tu"):
            for alpha in (0.0, 0.3, 1.0):
                expected = [
                    measure_value(s, measure, alpha, mode, windows[s.ranked_key][s.k]) for s in samples
                ]
                np.testing.assert_allclose(table.values(measure, alpha), expected, rtol=0, atol=1e-14)


def counterexample():
    # F(0.1) and F(0.9) order these three samples in opposite ways
    return [
        graded("A-1", "AM", 2, 8, 2, 5),
        graded("A-2", "AM", 8, 2, 2, 1),
        graded("A-3", "AM", 4, 4, 1, 3),
    ]


class TestAlphaSweep:
    def test_fixed_shape_alpha_invariant(self):
        samples = monotone_corpus(np.random.default_rng(0), "M-", "AM", 6, 4, 50)
        for measure in ("F", "T", "Tu"):
            for method in METHODS:
                result = alpha_max_correlation(samples, measure, method)
                assert result.alpha_star == DEFAULT_ALPHA_GRID[0]
                for alpha in DEFAULT_ALPHA_GRID:
                    v, g = measure_series(samples, measure, alpha)
                    assert correlate(method, v, g) == pytest.approx(result.coefficient, abs=1e-12)

    def test_singleton_grid(self):
        result = alpha_max_correlation(counterexample(), "F", "spearman", [0.5])
        assert result.alpha_star == 0.5

    def test_two_point_counterexample(self):
        samples = counterexample()
        # hand-computed: -0.5 at alpha=0.1, 0.5 at alpha=0.9
        for alpha, rho in ((0.1, -0.5), (0.9, 0.5)):
            v, g = measure_series(samples, "F", alpha)
            assert ORACLES["spearman"](list(v), list(g)) == pytest.approx(rho, abs=1e-12)
        result = alpha_max_correlation(samples, "F", "spearman", [0.1, 0.9])
        assert result.alpha_star == 0.9
        assert result.coefficient == pytest.approx(0.5, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_maximality(self, seed):
        rng = np.random.default_rng(seed)
        samples = [
            graded(f"A-{i}", "AM", int(k), int(np_), int(rng.integers(0, min(k, np_) + 1)), int(rng.integers(1, 6)))
            for i, (k, np_) in enumerate(rng.integers(2, 10, size=(12, 2)))
        ]
        grid = [0.1, 0.35, 0.6, 0.85]
        for method in METHODS:
            try:
                best = alpha_max_correlation(samples, "F", method, grid)
            except UndefinedCorrelationError:
                continue
            for alpha in grid:
                v, g = measure_series(samples, "F", alpha)
                try:
                    assert best.coefficient >= correlate(method, v, g) - 1e-12
                except UndefinedCorrelationError:
                    pass

    def test_all_undefined(self):
        samples = [graded(f"A-{i}", "AM", 2, 2, 1, 3) for i in range(4)]
        with pytest.raises(UndefinedCorrelationError):
            alpha_max_correlation(samples, "F", "spearman")

    def test_preconditions(self):
        with pytest.raises(ShapeError):
            alpha_max_correlation(counterexample()[:1], "F", "spearman")
        with pytest.raises(ValueError):
            alpha_max_correlation(counterexample(), "F", "spearman", [])

    @given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
    def test_t_and_tu_rank_alike_on_fixed_k(self, seed, a, b):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 12))
        samples = [
            graded(f"A-{i}", "AM", k, int(np_), int(rng.integers(0, min(k, np_) + 1)), int(rng.integers(1, 6)))
            for i, np_ in enumerate(rng.integers(2, 15, size=15))
        ]
        table = SeriesTable(samples)
        t, tu = table.values("T", a), table.values("Tu", b)
        if len(set(t)) < 2 or len(set(table.grades)) < 2:
            return
        for method in ("spearman", "kendall-b", "kendall-c"):
            assert correlate(method, t, table.grades) == correlate(method, tu, table.grades)


class TestCorrelateSegments:
    def test_tiny_segment_matches_oracle(self):
        samples = [
            graded("N-1", "AM", 4, 2, 0, 1),
            graded("N-2", "AM", 4, 2, 1, 3),
            graded("N-3", "AM", 4, 2, 2, 4),
            graded("N-4", "AM", 4, 2, 1, 2),
        ]
        results = correlate_segments(segment(samples, 1), ["P", "R", "nDCG"])
        by = {(r.segment.label(), r.measure, r.method): r for r in results}
        for measure in ("P", "R", "nDCG"):
            values, grades = measure_series(samples, measure)
            for method, oracle in ORACLES.items():
                r = by[("2.0", measure, method)]
                assert r.coefficient == pytest.approx(oracle(list(values), list(grades)), abs=1e-9)
                assert r.n == 4

    def test_undefined_is_none(self):
        samples = [graded(f"N-{i}", "AM", 2, 2, 1, 3) for i in range(3)]
        results = correlate_segments(segment(samples, 1), ["P"], ["spearman"])
        assert [r.coefficient for r in results] == [None, None]


def result(emb, bucket, coef, method="spearman", measure="F", subset="A"):
    return CorrelationResult(SegmentKey(subset, emb, RatioBucket(bucket)), measure, method, None, coef, 300)


class TestHeatmaps:
    def test_grade_distribution(self):
        samples = [graded(f"N-{i}", "AM", 2, 2, 1, g) for i, g in enumerate([5, 5, 1])]
        samples.append(graded("N-9", "EM", 4, 2, 1, 3))
        m = grade_distribution(samples)
        assert m.row_labels == ["AM", "EM"] and m.col_labels == [1.0, 2.0]
        np.testing.assert_allclose(m.cell("AM", 1.0), [1 / 3, 0, 0, 0, 2 / 3])
        np.testing.assert_array_equal(m.cell("EM", 2.0), [0, 0, 1, 0, 0])
        # absent cells stay NaN, present ones sum to 1
        assert np.isnan(m.cell("AM", 2.0)).all()
        sums = np.nansum(m.cells, axis=2)
        np.testing.assert_allclose(sums[~np.isnan(m.cells[..., 0])], 1.0)

    def test_difference(self):
        a = [result("AM", 1.0, 0.5), result("AM", 2.0, 0.1), result("EM", 1.0, None)]
        b = [result("AM", 1.0, 0.3, measure="T"), result("AM", 2.0, 0.4, measure="T"), result("EM", 1.0, 0.2, measure="T")]
        d = correlation_difference(a, b)
        assert d.cell("AM", 1.0) == pytest.approx(0.2)
        assert d.cell("AM", 2.0) == pytest.approx(-0.3)
        assert np.isnan(d.cell("EM", 1.0))
        assert np.isnan(d.cell("EM", 2.0))

    def test_self_difference_zero(self):
        a = [result("AM", 1.0, 0.5), result("EM", 1.0, -0.25)]
        np.testing.assert_array_equal(correlation_difference(a, a).cells, 0.0)

    def test_missing_segment(self):
        a = [result("AM", 1.0, 0.5), result("AM", 2.0, 0.1)]
        with pytest.raises(AlignmentError):
            correlation_difference(a, a[:1])

    def test_method_mismatch(self):
        with pytest.raises(AlignmentError):
            correlation_difference([result("AM", 1.0, 0.5)], [result("AM", 1.0, 0.5, method="pearson")])

    def test_matrix_rejects_mixed_methods(self):
        with pytest.raises(AlignmentError):
            correlation_matrix([result("AM", 1.0, 0.5), result("AM", 2.0, 0.5, method="pearson")])
