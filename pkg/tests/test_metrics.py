import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashsev.metrics import (ISS_BINS, Candidate, EvalReport, IssRecord, aggregate,
                              candidate_view_ids, confusion_matrix, evaluate, iss_classify,
                              iss_validate, rank_views, reports_from_csv, reports_to_csv)
from crashsev.records import RoadClass, Severity
from oracles import brute_force_scores


def test_group3_aggregates_from_published_f1():
    macro, weighted = aggregate([0.833, 0.490, 0.563, 0.689], [162, 514, 1885, 2290])
    assert abs(macro - 0.644) <= 0.0005
    assert abs(weighted - 0.624) <= 0.0005
    # values computed by hand: sum/4 and support-weighted sum/4851
    assert macro == pytest.approx(0.64375, abs=1e-12)
    assert weighted == pytest.approx(3025.871 / 4851, abs=1e-12)


def test_aggregate_skips_absent_classes_for_macro():
    macro, weighted = aggregate([1.0, 0.0, 0.5, 0.5], [10, 0, 10, 20])
    assert macro == pytest.approx((1.0 + 0.5 + 0.5) / 3)
    assert weighted == pytest.approx((10 + 5 + 10) / 40)


def test_confusion_rows_are_true_labels():
    cm = confusion_matrix([0, 0, 1, 3], [0, 1, 1, 2])
    assert cm[0, 0] == 1 and cm[0, 1] == 1 and cm[1, 1] == 1 and cm[3, 2] == 1
    assert cm.sum() == 4


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=200))
def test_evaluate_matches_pair_counting(pairs):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    rep = evaluate(y_true, y_pred)
    for c, (p, r, f, s) in enumerate(brute_force_scores(y_true, y_pred)):
        assert abs(rep.precision[c] - p) <= 1e-12
        assert abs(rep.recall[c] - r) <= 1e-12
        assert abs(rep.f1[c] - f) <= 1e-12
        assert rep.support[c] == s
    assert rep.accuracy == pytest.approx(np.mean(np.array(y_true) == np.array(y_pred)), abs=1e-12)


def test_zero_denominators_give_zero_with_diagnostic():
    rep = evaluate([0, 0, 1, 1], [0, 0, 0, 0])
    assert rep.precision[1] == 0.0 and rep.f1[1] == 0.0
    assert any("no predictions for Major" in d for d in rep.diagnostics)
    assert any("no true rows for Minor" in d for d in rep.diagnostics)


def test_evaluate_rejects_empty():
    with pytest.raises(ValueError):
        evaluate([], [])


def test_report_json_and_csv_round_trip(rng):
    reports = [evaluate(rng.integers(0, 4, 80), rng.integers(0, 4, 80), f"cfg{i}")
               for i in range(3)]
    for rep in reports:
        back = EvalReport.from_dict(json.loads(rep.to_json()))
        assert back.to_json() == rep.to_json()
    parsed = reports_from_csv(reports_to_csv(reports))
    assert [r.to_json() for r in parsed] == [r.to_json() for r in reports]


def test_row_block_layout():
    rows = evaluate([0, 1, 2, 3, 3], [0, 1, 2, 3, 2]).row_block()
    labels = [r[0] for r in rows]
    assert labels == ["Fatal", "Major injury", "Minor injury", "Possible injury", "Macro Avg",
                      "Micro Avg", "Accuracy"]


def _u2l_candidates():
    scores = {"G1-U2L": 0.630, "G2-Urban": 0.634, "G2-Undivided": 0.628,
              "G2-Two-Lane": 0.611, "G2-Non-Freeway": 0.615, "G3-All": 0.644}
    names = {"G1-U2L": ("Group1", "U2L"), "G2-Urban": ("Group2", "Urban"),
             "G2-Undivided": ("Group2", "Undivided"), "G2-Two-Lane": ("Group2", "Two-Lane"),
             "G2-Non-Freeway": ("Group2", "Non-Freeway"), "G3-All": ("Group3", "All")}
    return [Candidate(v, *names[v], scores[v]) for v in candidate_view_ids(RoadClass.U2L)]


def test_u2l_worked_ranking():
    ranked = rank_views({RoadClass.U2L: _u2l_candidates()})[RoadClass.U2L]
    assert [r.candidate.label for r in ranked[:3]] == ["Group 3", "Group 2 & Urban", "Group 1"]
    assert [r.rank for r in ranked] == [1, 2, 3, 4, 5, 6]


def test_candidate_views_per_class():
    assert candidate_view_ids(RoadClass.U2L) == [
        "G1-U2L", "G2-Urban", "G2-Non-Freeway", "G2-Two-Lane", "G2-Undivided", "G3-All"]
    for rc in RoadClass:
        assert len(candidate_view_ids(rc)) == 6


def test_ranking_ties_prefer_larger_scheme():
    cands = [Candidate("G1-U2L", "Group1", "U2L", 0.5), Candidate("G2-Urban", "Group2", "Urban", 0.5),
             Candidate("G3-All", "Group3", "All", 0.5)]
    ranked = rank_views({RoadClass.U2L: cands})[RoadClass.U2L]
    assert [r.candidate.scheme for r in ranked] == ["Group3", "Group2", "Group1"]


@pytest.mark.parametrize("iss,band", [(1, "Minor"), (8, "Minor"), (9, "Moderate"),
                                      (15, "Moderate"), (16, "Severe"), (24, "Severe"),
                                      (25, "Very Severe"), (75, "Very Severe")])
def test_iss_boundaries(iss, band):
    assert iss_classify(iss) == band


@pytest.mark.parametrize("bad", [0, 76, 3.5, -1, True])
def test_iss_out_of_range(bad):
    with pytest.raises(ValueError):
        iss_classify(bad)


def test_iss_bins_partition_range():
    seen = [iss_classify(v) for v in range(1, 76)]
    assert set(seen) == set(ISS_BINS)
    # bands are contiguous and ordered from least to most severe
    order = [ISS_BINS[::-1].index(b) for b in seen]
    assert order == sorted(order)


def test_iss_validate_means_and_marginals(rng):
    recs = []
    for sev, center in zip(Severity, (30, 20, 12, 5)):
        for v in rng.integers(center - 3, center + 4, 40):
            recs.append(IssRecord(sev, int(v)))
    out = iss_validate(recs)
    assert out.monotonic
    assert out.counts.tolist() == [40, 40, 40, 40]
    assert out.crosstab.sum(axis=1).tolist() == [40, 40, 40, 40]
    assert np.all(np.diff(out.mean_iss) < 0)


def test_iss_validate_not_monotonic_with_missing_class():
    out = iss_validate([IssRecord(Severity.FATAL, 30), IssRecord(Severity.MAJOR, 20)])
    assert not out.monotonic
    assert np.isnan(out.mean_iss[2])
