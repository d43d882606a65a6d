import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from focussearch import published
from focussearch.errors import DataError, EmptyInput, MissingAlgorithm
from focussearch.evaluation import (
    accuracy_error,
    overall_summary,
    render_summary,
    render_table,
    score_table,
    summary_csv,
    table_csv,
)

M103 = [
    ("Binary", 17, 162),
    ("Modified Fast Climbing", 12, 302),
    ("Fibonacci", 10, 363),
    ("Subbarao-Binary", 26, 167),
    ("Subbarao-Fibonacci", 17, 351),
    ("Global", 2, 3800),
]


def test_accuracy_error_examples():
    assert accuracy_error(51500.0, 51500.0) == 0.0
    assert accuracy_error(51338.0, 51500.0) == 162.0


def test_m103_scores():
    table = score_table(M103, "M103")
    got = {r.algorithm_name: r.score for r in table.rows}
    expected = [1.5294, 1.1623, 1.1603, 0.9701, 0.7059, 0.5542]
    for (name, _, _), want in zip(M103, expected):
        assert got[name] == pytest.approx(want, abs=1e-3)
    assert [r.algorithm_name for r in table.rows][0] == "Binary"
    assert got["Binary"] == pytest.approx(26 * 162 / (17 * 162), rel=1e-15)


def test_single_record_scores_one():
    assert score_table([("A", 7, 33.0)]).rows[0].score == 1.0


def test_hand_computed_pair():
    table = score_table([("A", 10, 50), ("B", 20, 25)])
    assert [r.score for r in table.rows] == [1.0, 1.0]


def test_rows_are_ranked():
    table = score_table([("slow", 20, 100), ("fast", 5, 100), ("mid", 10, 100)])
    assert [r.algorithm_name for r in table.rows] == ["fast", "mid", "slow"]


def test_error_floor_clamps():
    table = score_table([("exact", 10, 0.0), ("off", 10, 100.0)], error_floor_um=50.0)
    rows = table.by_algorithm()
    assert rows["exact"].clamped and rows["exact"].scored_error_um == 50.0
    assert rows["exact"].score == 1.0 and rows["off"].score == 0.5
    assert not rows["off"].clamped
    with pytest.raises(DataError):
        score_table([("exact", 10, 0.0)])


def test_score_table_validation():
    with pytest.raises(EmptyInput):
        score_table([])
    with pytest.raises(DataError):
        score_table([("A", 0, 10.0)])
    with pytest.raises(DataError):
        score_table([("A", 3, -1.0)])


def test_binary_overall():
    tables = [score_table([(n, s, a) for n, (s, a, _) in published.RESULTS[seq].items()], seq)
              for seq in published.SEQUENCES]
    summary = {r.algorithm_name: r for r in overall_summary(tables)}
    assert summary["Binary"].overall_score == pytest.approx(1.3175, abs=5e-4)
    assert summary["Binary"].per_sequence == pytest.approx((1.5294, 1.4894, 1.5059, 1.5208, 0.5422), abs=1e-3)


def test_summary_single_table_and_equal_scores():
    t = score_table(M103, "M103")
    summary = overall_summary([t])
    assert {r.algorithm_name: r.overall_score for r in summary} == {r.algorithm_name: r.score for r in t.rows}
    equal = score_table([("A", 10, 50), ("B", 20, 25)])
    assert all(r.overall_score == 1.0 for r in overall_summary([equal, equal]))


def test_summary_errors():
    with pytest.raises(EmptyInput):
        overall_summary([])
    with pytest.raises(MissingAlgorithm):
        overall_summary([score_table([("A", 1, 1), ("B", 2, 2)], "x"), score_table([("A", 1, 1)], "y")])


def test_published_recompute_within_tolerance():
    tables, summary, cell_dev, overall_dev = published.recompute()
    assert len(tables) == 5 and sum(len(t.rows) for t in tables) == 30
    assert cell_dev <= 1e-3 and overall_dev <= 5e-4
    assert [r.algorithm_name for r in summary][0] == "Binary"


records = st.lists(
    st.tuples(st.integers(1, 200), st.floats(0.5, 1e4)), min_size=1, max_size=8
).map(lambda rows: [(f"alg{i}", s, a) for i, (s, a) in enumerate(rows)])


@settings(max_examples=200, deadline=None)
@given(records, st.floats(1e-3, 1e3), st.integers(1, 50))
def test_rescaling_invariance(rows, c, k):
    base = score_table(rows)
    scaled = score_table([(n, s * k, a * c) for n, s, a in rows])
    b, s = base.by_algorithm(), scaled.by_algorithm()
    for name in b:
        assert s[name].score == pytest.approx(b[name].score, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(records)
def test_dominating_row_has_top_score(rows):
    table = score_table(rows)
    max_s = max(r.steps for r in table.rows)
    min_s = min(r.steps for r in table.rows)
    min_a = min(r.accuracy_error_um for r in table.rows)
    assert all(r.score > 0 for r in table.rows)
    top = max(r.score for r in table.rows)
    for r in table.rows:
        if r.steps == max_s and r.accuracy_error_um == min_a:
            assert r.score == 1.0
        if r.steps == min_s and r.accuracy_error_um == min_a:
            assert r.score == top
    assert table.rows[0].score == top


def test_text_outputs():
    t = score_table([("Binary", 17, 162), ("Global", 2, 3800)], "M103")
    csv = table_csv(t)
    assert csv.splitlines()[0] == "algorithm,steps,error_um,score"
    assert csv.splitlines()[1] == "Binary,17,162.000,1.0000"
    text = render_table(t)
    assert text.startswith("Results for M103\n") and "Search Name" in text
    summary = overall_summary([t])
    assert summary_csv(summary, ["M103"]).splitlines()[0] == "algorithm,M103,overall"
    assert "Overall Score" in render_summary(summary, ["M103"])
    clamped = render_table(score_table([("A", 3, 10.0), ("B", 4, 80.0)], "S", error_floor_um=50.0))
    assert "10.0*" in clamped and "50 um floor" in clamped
