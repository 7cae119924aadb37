"""Windowed innovation scores over binary feature vectors.

Three per-record measures, each against a look-back (or look-forward) window
of whole calendar years:

* distinctiveness: mean Hamming distance to every record in the past window;
* novelty: minimum Hamming distance to the past window, plus its binary
  indicator (did the record realize a combination unseen in the window);
* resonance: distinctiveness against the past minus distinctiveness against
  the future, positive when later records sit closer than earlier ones.

Same-year records are never part of a window. All Hamming sums are
accumulated exactly in 64-bit integers and divided once, so results are
deterministic and independent of scheduling.
"""

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import Record, RecordSet
from .errors import DimensionError, EmptyWindow

PAST = "past"
FUTURE = "future"

SPAN_PRESETS = (1, 2, 5)
DEFAULT_SPAN = 2

COMPARISON_FILTERED = "filtered"
COMPARISON_RAW = "raw"


@dataclass(frozen=True)
class WindowSpec:
    """Window length in years and which corpus provides the comparators."""

    span_years: int = DEFAULT_SPAN
    comparison_set: str = COMPARISON_FILTERED

    def __post_init__(self):
        if self.span_years < 1:
            raise ValueError("span_years must be >= 1")
        if self.comparison_set not in (COMPARISON_FILTERED, COMPARISON_RAW):
            raise ValueError(f"unknown comparison_set {self.comparison_set!r}")


def _as_spec(span: Union[int, WindowSpec]) -> WindowSpec:
    return span if isinstance(span, WindowSpec) else WindowSpec(span_years=int(span))


def _as_vector(g) -> np.ndarray:
    return g.vector if isinstance(g, Record) else np.asarray(g, dtype=np.uint8)


@dataclass(frozen=True)
class FeatureProfile:
    """Per-feature occurrence counts over one window; fast path for the mean distance.

    The mean Hamming distance from a vector g to n window vectors expands to
    sum_j (g_j ? n - c_j : c_j) / n where c_j counts window records with
    feature j set. The integer numerator equals the brute-force pairwise sum
    exactly.
    """

    year_lo: int
    year_hi: int
    n: int
    counts: np.ndarray

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.n and (self.counts.min() < 0 or self.counts.max() > self.n):
            raise ValueError("feature counts must lie in [0, n]")


@dataclass(frozen=True, eq=False)
class InnovationScores:
    record_id: str
    span_years: int
    distinctiveness: float
    novelty_count: int
    novelty_binary: bool
    resonance: Optional[float]
    window: WindowSpec

    def __post_init__(self):
        assert self.novelty_binary == (self.novelty_count > 0)
        # min <= mean over the same window; exact with integer-sum arithmetic
        assert self.distinctiveness >= self.novelty_count


class ScoreTable:
    """Scores keyed by (record_id, span_years), in deterministic order."""

    def __init__(self, rows: Iterable[InnovationScores], unscored: Iterable = ()):
        self.rows = tuple(sorted(rows, key=lambda r: (r.record_id, r.span_years)))
        self.unscored = tuple(sorted(unscored))
        seen = set()
        for row in self.rows:
            key = (row.record_id, row.span_years)
            if key in seen:
                raise ValueError(f"duplicate score row {key}")
            seen.add(key)
        self._index = {(r.record_id, r.span_years): r for r in self.rows}

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def get(self, record_id: str, span_years: int) -> Optional[InnovationScores]:
        return self._index.get((record_id, span_years))

    def for_span(self, span_years: int) -> tuple:
        return tuple(r for r in self.rows if r.span_years == span_years)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["id", "span", "distinctiveness", "novelty_count", "novelty_binary", "resonance", "resonance_available"]
            )
            for row in self.rows:
                has_res = row.resonance is not None
                writer.writerow(
                    [
                        row.record_id,
                        row.span_years,
                        f"{row.distinctiveness:.6f}",
                        row.novelty_count,
                        int(row.novelty_binary),
                        f"{row.resonance:.6f}" if has_res else "NA",
                        int(has_res),
                    ]
                )


def read_scores_csv(path) -> ScoreTable:
    """Inverse of ScoreTable.write_csv (values at the file's 6-decimal precision)."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            span = int(rec["span"])
            rows.append(
                InnovationScores(
                    record_id=rec["id"],
                    span_years=span,
                    distinctiveness=float(rec["distinctiveness"]),
                    novelty_count=int(rec["novelty_count"]),
                    novelty_binary=bool(int(rec["novelty_binary"])),
                    resonance=None if rec["resonance"] == "NA" else float(rec["resonance"]),
                    window=WindowSpec(span),
                )
            )
    return ScoreTable(rows)


def hamming(a, b) -> int:
    """Number of positions where two equal-length binary vectors differ."""
    va, vb = _as_vector(a), _as_vector(b)
    if va.shape != vb.shape:
        raise DimensionError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return int(np.count_nonzero(va != vb))


def cross_hamming(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise Hamming distances between row vectors of A (m,d) and B (k,d).

    Uses popcount(a) + popcount(b) - 2 a.b; the dot products run through a
    float BLAS matmul whose intermediate values are small exact integers, so
    the int64 result is exact regardless of accumulation order.
    """
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    pa = A.sum(axis=1, dtype=np.int64)
    pb = B.sum(axis=1, dtype=np.int64)
    cross = np.rint(A.astype(np.float64) @ B.T.astype(np.float64)).astype(np.int64)
    return pa[:, None] + pb[None, :] - 2 * cross


def window_years(focal_year: int, span: Union[int, WindowSpec], direction: str):
    spec = _as_spec(span)
    if direction == PAST:
        return focal_year - spec.span_years, focal_year - 1
    if direction == FUTURE:
        return focal_year + 1, focal_year + spec.span_years
    raise ValueError(f"direction must be {PAST!r} or {FUTURE!r}")


def window_slice(records: RecordSet, focal_year: int, span: Union[int, WindowSpec], direction: str) -> RecordSet:
    """Records in the look-back or look-forward window of a focal year.

    The focal year itself is always excluded; the result may be empty.
    """
    lo, hi = window_years(focal_year, span, direction)
    return records.subset(records.rows_in_years(lo, hi))


def build_profile(records: RecordSet, year_lo: int, year_hi: int) -> FeatureProfile:
    rows = records.rows_in_years(year_lo, year_hi)
    counts = records.matrix[rows].sum(axis=0, dtype=np.int64) if len(rows) else np.zeros(
        records.registry.dimension, dtype=np.int64
    )
    return FeatureProfile(year_lo=year_lo, year_hi=year_hi, n=int(len(rows)), counts=counts)


def _mean_distance(g_vec: np.ndarray, window_matrix: np.ndarray) -> float:
    if window_matrix.shape[0] == 0:
        raise EmptyWindow("comparison window is empty")
    total = int(cross_hamming(g_vec[None, :], window_matrix)[0].sum())
    return total / window_matrix.shape[0]


def distinctiveness(g, records: RecordSet, span: Union[int, WindowSpec] = DEFAULT_SPAN) -> float:
    """Mean Hamming distance from g to every record in its past window.

    Records with vectors identical to g contribute distance 0; the window is
    a multiset over records, not unique vectors.
    """
    rec = g if isinstance(g, Record) else None
    if rec is None:
        raise TypeError("distinctiveness requires a Record (needs a publication year)")
    window = window_slice(records, rec.year, span, PAST)
    return _mean_distance(rec.vector, window.matrix)


def distinctiveness_fast(g, profile: FeatureProfile) -> float:
    """Profile-based mean distance; equals the pairwise mean exactly."""
    if profile.n == 0:
        raise EmptyWindow("comparison window is empty")
    bits = _as_vector(g)
    if len(bits) != len(profile.counts):
        raise DimensionError(f"dimension mismatch: {len(bits)} vs {len(profile.counts)}")
    on = bits.astype(bool)
    total = int((profile.n - profile.counts)[on].sum()) + int(profile.counts[~on].sum())
    return total / profile.n


def novelty_count(g, records: RecordSet, span: Union[int, WindowSpec] = DEFAULT_SPAN) -> int:
    """Minimum Hamming distance from g to any record in its past window."""
    rec = g if isinstance(g, Record) else None
    if rec is None:
        raise TypeError("novelty_count requires a Record")
    window = window_slice(records, rec.year, span, PAST)
    if len(window) == 0:
        raise EmptyWindow("comparison window is empty")
    return int(cross_hamming(rec.vector[None, :], window.matrix)[0].min())


def novelty_binary(g, records: RecordSet, span: Union[int, WindowSpec] = DEFAULT_SPAN) -> bool:
    return novelty_count(g, records, span) > 0


def resonance(
    g,
    records: RecordSet,
    span: Union[int, WindowSpec] = DEFAULT_SPAN,
    last_complete_year: Optional[int] = None,
) -> Optional[float]:
    """Past-window distinctiveness minus future-window distinctiveness.

    Returns None (absent) when the corpus does not fully cover the forward
    window: every future year must be <= last_complete_year. Positive values
    mean the record sits closer to what followed than to what preceded it.
    """
    rec = g if isinstance(g, Record) else None
    if rec is None:
        raise TypeError("resonance requires a Record")
    spec = _as_spec(span)
    if last_complete_year is None or rec.year + spec.span_years > last_complete_year:
        return None
    past = window_slice(records, rec.year, spec, PAST)
    future = window_slice(records, rec.year, spec, FUTURE)
    d_past = _mean_distance(rec.vector, past.matrix)
    d_future = _mean_distance(rec.vector, future.matrix)
    return d_past - d_future


def score_corpus(
    records: RecordSet,
    spans: Sequence[Union[int, WindowSpec]] = (DEFAULT_SPAN,),
    last_complete_year: Optional[int] = None,
    comparison: Optional[RecordSet] = None,
) -> ScoreTable:
    """Score every record for every requested window length.

    Comparators default to the scored records themselves; pass a separate
    RecordSet (e.g. the unfiltered corpus) to change the comparison set.
    Records whose past window is empty are listed in ScoreTable.unscored
    instead of receiving a row. Resonance is absent unless the forward window
    is fully covered (<= last_complete_year) and non-empty.
    """
    comparison = records if comparison is None else comparison
    if comparison.registry.dimension != records.registry.dimension:
        raise DimensionError("comparison set dimension differs from scored records")
    rows = []
    unscored = []
    for span in spans:
        spec = _as_spec(span)
        for year in sorted(records.year_rows):
            focal_rows = records.year_rows[year]
            focal_matrix = records.matrix[focal_rows]
            past_lo, past_hi = window_years(year, spec, PAST)
            past_rows = comparison.rows_in_years(past_lo, past_hi)
            if len(past_rows) == 0:
                unscored.extend((records.ids[i], spec.span_years) for i in focal_rows)
                continue
            dist_past = cross_hamming(focal_matrix, comparison.matrix[past_rows])
            sums = dist_past.sum(axis=1)
            mins = dist_past.min(axis=1)
            n_past = len(past_rows)

            res_vals = None
            if last_complete_year is not None and year + spec.span_years <= last_complete_year:
                fut_lo, fut_hi = window_years(year, spec, FUTURE)
                fut_rows = comparison.rows_in_years(fut_lo, fut_hi)
                if len(fut_rows):
                    dist_fut = cross_hamming(focal_matrix, comparison.matrix[fut_rows])
                    res_vals = sums / n_past - dist_fut.sum(axis=1) / len(fut_rows)

            for j, i in enumerate(focal_rows):
                nov = int(mins[j])
                rows.append(
                    InnovationScores(
                        record_id=records.ids[i],
                        span_years=spec.span_years,
                        distinctiveness=int(sums[j]) / n_past,
                        novelty_count=nov,
                        novelty_binary=nov > 0,
                        resonance=float(res_vals[j]) if res_vals is not None else None,
                        window=spec,
                    )
                )
    return ScoreTable(rows, unscored=unscored)
