"""Innovation score behaviour checked against packed-integer brute force.

The oracle path never touches the library's matrix arithmetic: vectors are
packed into Python ints and distances taken with int.bit_count on the XOR,
with exact Fraction means.
"""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from novascape.errors import DimensionError, EmptyWindow
from novascape.metrics import (
    FUTURE,
    PAST,
    FeatureProfile,
    ScoreTable,
    WindowSpec,
    build_profile,
    cross_hamming,
    distinctiveness,
    distinctiveness_fast,
    hamming,
    novelty_binary,
    novelty_count,
    resonance,
    score_corpus,
    window_slice,
    window_years,
)

from conftest import make_recordset


def pack(bits) -> int:
    out = 0
    for j, b in enumerate(bits):
        if b:
            out |= 1 << j
    return out


def oracle_hamming(a, b) -> int:
    return (pack(a) ^ pack(b)).bit_count()


def oracle_mean_distance(g, window):
    if not window:
        return None
    return Fraction(sum(oracle_hamming(g, w) for w in window), len(window))


def oracle_min_distance(g, window):
    return min(oracle_hamming(g, w) for w in window)


bitvec = st.lists(st.integers(0, 1), min_size=6, max_size=6)


class TestHamming:
    def test_frozen_example(self):
        assert hamming([1, 1, 0], [0, 1, 1]) == 2

    def test_identical_is_zero(self):
        assert hamming([1, 0, 1], [1, 0, 1]) == 0

    def test_mismatched_length_raises(self):
        with pytest.raises(DimensionError):
            hamming([1, 0], [1, 0, 1])

    @settings(max_examples=200, deadline=None)
    @given(bitvec, bitvec)
    def test_matches_popcount_oracle(self, a, b):
        assert hamming(a, b) == oracle_hamming(a, b)

    @settings(max_examples=100, deadline=None)
    @given(bitvec, bitvec)
    def test_symmetry(self, a, b):
        assert hamming(a, b) == hamming(b, a)

    @settings(max_examples=100, deadline=None)
    @given(bitvec, bitvec, bitvec)
    def test_triangle_inequality(self, a, b, c):
        assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


class TestCrossHamming:
    @settings(max_examples=80, deadline=None)
    @given(st.lists(bitvec, min_size=1, max_size=6), st.lists(bitvec, min_size=1, max_size=6))
    def test_matches_oracle_elementwise(self, rows_a, rows_b):
        A = np.array(rows_a, dtype=np.uint8)
        B = np.array(rows_b, dtype=np.uint8)
        got = cross_hamming(A, B)
        assert got.dtype == np.int64
        for i, a in enumerate(rows_a):
            for j, b in enumerate(rows_b):
                assert got[i, j] == oracle_hamming(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            cross_hamming(np.zeros((2, 3), dtype=np.uint8), np.zeros((2, 4), dtype=np.uint8))


class TestWindows:
    def test_past_and_future_year_ranges(self):
        assert window_years(2015, 2, PAST) == (2013, 2014)
        assert window_years(2015, 2, FUTURE) == (2016, 2017)
        assert window_years(2015, WindowSpec(span_years=5), PAST) == (2010, 2014)

    def test_same_year_excluded(self):
        rs = make_recordset(
            [("a", 2014, [1, 0]), ("b", 2015, [0, 1]), ("c", 2015, [1, 1]), ("d", 2016, [0, 0])]
        )
        past = window_slice(rs, 2015, 1, PAST)
        future = window_slice(rs, 2015, 1, FUTURE)
        assert past.ids == ("a",)
        assert future.ids == ("d",)

    def test_empty_window_is_allowed(self):
        rs = make_recordset([("a", 2014, [1, 0])])
        assert len(window_slice(rs, 2014, 2, PAST)) == 0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            WindowSpec(span_years=0)
        with pytest.raises(ValueError):
            WindowSpec(comparison_set="nope")


class TestDistinctiveness:
    def test_frozen_example(self):
        rs = make_recordset([("g", 2015, [1, 1, 0]), ("w1", 2014, [0, 1, 1]), ("w2", 2014, [1, 0, 1])])
        assert distinctiveness(rs.by_id["g"], rs, span=1) == 2.0

    def test_duplicates_count_as_multiset(self):
        rs = make_recordset(
            [("g", 2015, [1, 1]), ("w1", 2014, [1, 1]), ("w2", 2014, [1, 1]), ("w3", 2014, [0, 0])]
        )
        # distances 0, 0, 2 over three window records
        assert distinctiveness(rs.by_id["g"], rs, span=1) == pytest.approx(2 / 3, rel=1e-12)

    def test_empty_window_raises(self):
        rs = make_recordset([("g", 2015, [1, 1])])
        with pytest.raises(EmptyWindow):
            distinctiveness(rs.by_id["g"], rs, span=2)

    def test_profile_fast_path_frozen_example(self):
        profile = FeatureProfile(year_lo=2014, year_hi=2014, n=2, counts=np.array([1, 1, 2]))
        assert distinctiveness_fast([1, 1, 0], profile) == 2.0

    def test_build_profile_counts(self):
        rs = make_recordset([("a", 2013, [0, 1, 1]), ("b", 2014, [1, 0, 1]), ("c", 2015, [1, 1, 1])])
        profile = build_profile(rs, 2013, 2014)
        assert profile.n == 2
        assert profile.counts.tolist() == [1, 1, 2]

    @settings(max_examples=100, deadline=None)
    @given(bitvec, st.lists(bitvec, min_size=1, max_size=10))
    def test_fast_path_equals_brute_force(self, g, window):
        rows = [("g", 2015, g)] + [(f"w{i}", 2014, w) for i, w in enumerate(window)]
        rs = make_recordset(rows)
        profile = build_profile(rs, 2014, 2014)
        want = oracle_mean_distance(g, window)
        got_slow = distinctiveness(rs.by_id["g"], rs, span=1)
        got_fast = distinctiveness_fast(g, profile)
        assert got_slow == pytest.approx(float(want), rel=1e-12)
        assert got_fast == got_slow


class TestNovelty:
    def test_frozen_example(self):
        rs = make_recordset(
            [("g", 2015, [1, 1, 0, 0]), ("w1", 2014, [1, 0, 0, 0]), ("w2", 2014, [0, 0, 1, 1])]
        )
        assert novelty_count(rs.by_id["g"], rs, span=1) == 1
        assert novelty_binary(rs.by_id["g"], rs, span=1) is True

    def test_repeat_of_window_vector_is_zero(self):
        rs = make_recordset([("g", 2015, [1, 1]), ("w", 2014, [1, 1])])
        assert novelty_count(rs.by_id["g"], rs, span=1) == 0
        assert novelty_binary(rs.by_id["g"], rs, span=1) is False

    def test_empty_window_raises(self):
        rs = make_recordset([("g", 2015, [1, 1])])
        with pytest.raises(EmptyWindow):
            novelty_count(rs.by_id["g"], rs, span=1)

    @settings(max_examples=100, deadline=None)
    @given(bitvec, st.lists(bitvec, min_size=1, max_size=10))
    def test_matches_exhaustive_scan(self, g, window):
        rows = [("g", 2015, g)] + [(f"w{i}", 2014, w) for i, w in enumerate(window)]
        rs = make_recordset(rows)
        assert novelty_count(rs.by_id["g"], rs, span=1) == oracle_min_distance(g, window)

    @settings(max_examples=100, deadline=None)
    @given(bitvec, st.lists(bitvec, min_size=1, max_size=10))
    def test_min_never_exceeds_mean(self, g, window):
        rows = [("g", 2015, g)] + [(f"w{i}", 2014, w) for i, w in enumerate(window)]
        rs = make_recordset(rows)
        rec = rs.by_id["g"]
        assert novelty_count(rec, rs, span=1) <= distinctiveness(rec, rs, span=1)


class TestResonance:
    def make_corpus(self):
        return make_recordset(
            [("g", 2015, [1, 1, 1]), ("p", 2014, [0, 0, 0]), ("f", 2016, [1, 1, 1])]
        )

    def test_frozen_example(self):
        rs = self.make_corpus()
        got = resonance(rs.by_id["g"], rs, span=1, last_complete_year=2016)
        assert got == 3.0

    def test_absent_without_coverage(self):
        rs = self.make_corpus()
        assert resonance(rs.by_id["g"], rs, span=1, last_complete_year=2015) is None
        assert resonance(rs.by_id["g"], rs, span=1, last_complete_year=None) is None

    def test_identity_against_component_means(self):
        rs = make_recordset(
            [
                ("g", 2015, [1, 0, 1, 0]),
                ("p1", 2013, [1, 1, 0, 0]),
                ("p2", 2014, [0, 0, 1, 1]),
                ("f1", 2016, [1, 0, 1, 1]),
                ("f2", 2017, [1, 0, 1, 0]),
            ]
        )
        g = rs.by_id["g"]
        got = resonance(g, rs, span=2, last_complete_year=2017)
        d_past = oracle_mean_distance([1, 0, 1, 0], [[1, 1, 0, 0], [0, 0, 1, 1]])
        d_future = oracle_mean_distance([1, 0, 1, 0], [[1, 0, 1, 1], [1, 0, 1, 0]])
        assert got == pytest.approx(float(d_past - d_future), rel=1e-12)
        assert got == pytest.approx(distinctiveness(g, rs, span=2) - float(d_future), rel=1e-12)


class TestScoreCorpus:
    def demo_corpus(self):
        return make_recordset(
            [
                ("a", 2013, [1, 0, 0, 0]),
                ("b", 2013, [0, 1, 1, 0]),
                ("c", 2014, [1, 1, 0, 0]),
                ("d", 2014, [0, 0, 1, 1]),
                ("e", 2015, [1, 1, 1, 0]),
                ("f", 2015, [1, 0, 0, 1]),
                ("g", 2016, [0, 1, 0, 1]),
            ]
        )

    def test_batch_agrees_with_single_record_api(self):
        rs = self.demo_corpus()
        table = score_corpus(rs, spans=(1, 2), last_complete_year=2016)
        assert len(table) > 0
        for row in table:
            rec = rs.by_id[row.record_id]
            assert row.distinctiveness == pytest.approx(
                distinctiveness(rec, rs, span=row.span_years), rel=1e-12
            )
            assert row.novelty_count == novelty_count(rec, rs, span=row.span_years)
            want_res = resonance(rec, rs, span=row.span_years, last_complete_year=2016)
            if want_res is None:
                assert row.resonance is None
            else:
                assert row.resonance == pytest.approx(want_res, rel=1e-12)

    def test_unscored_records_listed(self):
        rs = self.demo_corpus()
        table = score_corpus(rs, spans=(1,))
        # 2013 records have no look-back year in corpus
        assert ("a", 1) in table.unscored
        assert ("b", 1) in table.unscored
        assert table.get("a", 1) is None

    def test_rows_sorted_by_id_then_span(self):
        rs = self.demo_corpus()
        table = score_corpus(rs, spans=(2, 1))
        keys = [(r.record_id, r.span_years) for r in table]
        assert keys == sorted(keys)

    def test_separate_comparison_set(self):
        scored = make_recordset([("g", 2015, [1, 1, 0])])
        comparison = make_recordset(
            [("x", 2014, [0, 1, 1]), ("y", 2014, [1, 0, 1]), ("z", 2015, [1, 1, 0])]
        )
        table = score_corpus(scored, spans=(1,), comparison=comparison)
        assert table.get("g", 1).distinctiveness == 2.0

    def test_resonance_rows_are_strict_subset(self):
        rs = self.demo_corpus()
        table = score_corpus(rs, spans=(1,), last_complete_year=2016)
        with_res = [r for r in table if r.resonance is not None]
        assert 0 < len(with_res) < len(table)
        for row in with_res:
            assert rs.by_id[row.record_id].year + row.span_years <= 2016

    def test_deterministic_across_runs(self):
        a = score_corpus(self.demo_corpus(), spans=(1, 2, 5), last_complete_year=2016)
        b = score_corpus(self.demo_corpus(), spans=(1, 2, 5), last_complete_year=2016)
        assert len(a) == len(b)
        for ra, rb in zip(a, b):
            assert ra.record_id == rb.record_id
            assert ra.distinctiveness == rb.distinctiveness
            assert ra.novelty_count == rb.novelty_count
            assert ra.resonance == rb.resonance


class TestScoreTableCsv:
    def test_format(self, tmp_path):
        rs = make_recordset(
            [("a", 2014, [0, 0, 0]), ("b", 2015, [1, 1, 1]), ("c", 2016, [1, 0, 0])]
        )
        table = score_corpus(rs, spans=(1,), last_complete_year=2016)
        path = tmp_path / "scores.csv"
        table.write_csv(path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "id,span,distinctiveness,novelty_count,novelty_binary,resonance,resonance_available"
        # b: past {000} -> dist 3, future {100} -> 2, resonance 1
        assert lines[1] == "b,1,3.000000,3,1,1.000000,1"
        # c: past {111} -> dist 2, no future coverage
        assert lines[2] == "c,1,2.000000,2,1,NA,0"

    def test_byte_deterministic(self, tmp_path):
        rs = make_recordset([("a", 2014, [0, 1]), ("b", 2015, [1, 1])])
        table = score_corpus(rs, spans=(1, 2))
        p1, p2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
        table.write_csv(p1)
        score_corpus(rs, spans=(1, 2)).write_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_duplicate_rows_rejected(self):
        rs = make_recordset([("a", 2014, [0, 1]), ("b", 2015, [1, 1])])
        row = next(iter(score_corpus(rs, spans=(1,))))
        with pytest.raises(ValueError):
            ScoreTable([row, row])
