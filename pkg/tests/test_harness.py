import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from crashsev.diagnostics import DataError
from crashsev.harness import synth
from crashsev.harness.config import (BASELINE, STAGE_ORDER, ExperimentConfig, Settings,
                                     derive_seed)
from crashsev.harness.pipeline import (ExperimentData, PipelineCache, StageError,
                                       enumerate_experiments, execute, run_experiment)
from crashsev.harness.plots import render_figures
from crashsev.harness.report import (best_per_view, compute_rankings, emit_report,
                                     lift_summary, narrative_lift, render_markdown,
                                     results_from_csv)
from crashsev.harness.runner import run_matrix, simulate_schedule
from crashsev.harness.synth import SynthParams, generate_synthetic
from crashsev.ingest import build_dataset_views, view_definitions
from crashsev.metrics import evaluate
from crashsev.records import CrashRecord, RoadClass, Severity
from crashsev.textfeat import tokenize


def _views(untrainable=()):
    recs = [CrashRecord(f"r{i}", "R", 0.0, Severity(i % 4), road_class=rc)
            for i, rc in enumerate(list(RoadClass) * 4)]
    views = build_dataset_views(recs)
    return [replace(v, trainable=False, skip_reason="insufficient class records: Fatal=1 (< 10)")
            if v.view_id in untrainable else v for v in views]


def test_enumeration_counts_and_order():
    views = _views()
    cfgs = enumerate_experiments(views)
    assert len(cfgs) == 102
    assert len(enumerate_experiments(views, include_structured_baseline=True)) == 153
    assert [c.config_id for c in cfgs[:3]] == ["G1-R2L|TFIDF|RF", "G1-R2L|TFIDF|AdaBoost",
                                               "G1-R2L|TFIDF|GBT"]
    assert len({c.config_id for c in cfgs}) == 102


def test_untrainable_view_configs_carry_reason():
    cfgs = enumerate_experiments(_views(untrainable={"G1-RMD"}))
    rmd = [c for c in cfgs if c.view_id == "G1-RMD"]
    assert len(rmd) == 6
    assert all(c.skip_reason.startswith("insufficient class records") for c in rmd)


def test_duplicate_views_rejected():
    views = _views()
    with pytest.raises(ValueError, match="duplicate"):
        enumerate_experiments(views + views[:1])


def test_config_seed_is_stable_and_local():
    a = ExperimentConfig("G3-All", "TFIDF", "RF", 7)
    assert a.config_seed == derive_seed(7, "G3-All", "TFIDF", "RF")
    assert a.config_seed == ExperimentConfig("G3-All", "TFIDF", "RF", 7).config_seed
    assert a.config_seed != ExperimentConfig("G3-All", "TFIDF", "GBT", 7).config_seed
    assert 0 <= a.config_seed < 2**63


def test_settings_round_trip_and_unknown_keys():
    s = Settings()
    assert Settings.from_dict(json.loads(json.dumps(s.to_dict()))) == s
    with pytest.raises(ValueError):
        Settings.from_dict({"rf": {"trees": 3}})
    with pytest.raises(ValueError):
        Settings.from_dict({"extra": {}})


def test_synth_class_counts_within_three_sigma():
    priors = (0.03, 0.10, 0.39, 0.48)
    data = generate_synthetic(SynthParams(n_records=5000, priors=priors, include_iss=False), 11)
    counts = Counter(int(r.severity) for r in data.crashes)
    for k, p in enumerate(priors):
        sigma = np.sqrt(5000 * p * (1 - p))
        assert abs(counts[k] - 5000 * p) <= 3 * sigma


def test_synth_same_seed_same_corpus():
    a = generate_synthetic(SynthParams(n_records=300), seed=4)
    b = generate_synthetic(SynthParams(n_records=300), seed=4)
    assert [(r.record_id, r.narrative, r.categorical, r.numeric) for r in a.crashes] == \
        [(r.record_id, r.narrative, r.categorical, r.numeric) for r in b.crashes]
    assert a.iss == b.iss


def _keyword_mutual_information(data):
    """Plug-in MI (nats) between severity and which class's keywords a narrative mentions."""
    owners = {w: k for k, name in enumerate(synth._KEYWORD_KEYS)
              for w in synth.DEFAULT_KEYWORDS[name]}
    joint = Counter()
    for r in data.crashes:
        found = {owners[t] for t in tokenize(r.narrative) if t in owners}
        joint[(int(r.severity), min(found) if found else -1)] += 1
    n = sum(joint.values())
    px, py = Counter(), Counter()
    for (x, y), c in joint.items():
        px[x] += c
        py[y] += c
    return sum(c / n * np.log(c * n / (px[x] * py[y])) for (x, y), c in joint.items())


def test_synth_signal_strength_controls_narrative_information():
    noise = generate_synthetic(SynthParams(n_records=4000, narrative_signal_strength=0.0), 1)
    strong = generate_synthetic(SynthParams(n_records=4000, narrative_signal_strength=0.8), 1)
    assert _keyword_mutual_information(noise) < 0.01
    assert _keyword_mutual_information(strong) > 0.3


def test_synth_parameter_validation():
    with pytest.raises(ValueError):
        SynthParams(keywords={})
    with pytest.raises(ValueError):
        SynthParams(priors=(0.5, 0.5, 0.5, 0.5))
    SynthParams(keywords={}, narrative_signal_strength=0.0, confuser_rate=0.0)
    params = SynthParams(n_records=10)
    assert SynthParams.from_dict(json.loads(json.dumps(params.to_dict()))) == params


def test_synth_populates_all_road_classes(small_synthetic):
    _, joined = small_synthetic
    assert {r.road_class for r in joined.records} == set(RoadClass)
    assert joined.unmatched > 0 and joined.speed_discrepancies > 0


def test_synth_iss_means_decrease(small_synthetic):
    data, _ = small_synthetic
    by_sev = {}
    for r in data.crashes:
        if r.record_id in data.iss:
            by_sev.setdefault(int(r.severity), []).append(data.iss[r.record_id])
    means = [np.mean(by_sev[k]) for k in range(4)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_synth_write_files(tmp_path):
    paths = generate_synthetic(SynthParams(n_records=50), 0).write(tmp_path)
    assert all(p.exists() for p in paths.values())
    schema = json.loads(paths["schema"].read_text())
    assert "crash" in schema and "segments" in schema


@pytest.fixture(scope="module")
def experiment_data(small_synthetic):
    return ExperimentData.from_records(small_synthetic[1].records)


@pytest.fixture(scope="module")
def g3_results(experiment_data, fast_settings):
    cache = PipelineCache()
    return {f: execute(ExperimentConfig("G3-All", f, "GBT"), experiment_data, fast_settings, cache)
            for f in ("TFIDF", "W2V", BASELINE)}


def test_stage_order_is_recorded(g3_results):
    man = g3_results["TFIDF"].manifest
    assert man.stage_order == list(STAGE_ORDER)
    assert man.settings["selection_forest_input"] == "smote_resampled_structured_train"
    assert man.settings["smote"]["k_neighbors"] == 5


@pytest.mark.parametrize("featurizer", ["TFIDF", "W2V", BASELINE])
def test_leakage_guards_hold(g3_results, featurizer):
    man = g3_results[featurizer].manifest
    assert man.leakage_checks and all(man.leakage_checks.values())


def test_held_out_histograms_never_resampled(g3_results):
    counts = g3_results["TFIDF"].manifest.class_counts
    post = counts["train_post_smote"]
    assert len(set(post)) == 1 and post[0] == max(counts["train_pre_smote"])
    test_hist = np.bincount(g3_results["TFIDF"].test_true, minlength=4).tolist()
    assert counts["test"] == test_hist
    assert sum(counts["validation"]) < sum(counts["train_pre_smote"])


def test_text_is_fit_on_train_rows_only(g3_results):
    text = g3_results["TFIDF"].manifest.text
    counts = g3_results["TFIDF"].manifest.class_counts
    assert text["fit_rows"] == sum(counts["train_pre_smote"])


def test_baseline_has_no_text_columns(g3_results):
    man = g3_results[BASELINE].manifest
    assert man.model["n_features"] == len(man.selected_features)
    assert g3_results["TFIDF"].manifest.model["n_features"] > len(man.selected_features)


def test_narrative_helps_on_synthetic(g3_results):
    assert g3_results["TFIDF"].report.macro_f1 > g3_results[BASELINE].report.macro_f1


def test_rerun_is_byte_identical(experiment_data, fast_settings, g3_results):
    rep, man = run_experiment(ExperimentConfig("G3-All", "TFIDF", "GBT"), experiment_data,
                              fast_settings)
    assert rep.to_json() == g3_results["TFIDF"].report.to_json()
    assert man.to_json() == g3_results["TFIDF"].manifest.to_json()


def test_untrainable_view_raises_stage_error(experiment_data, fast_settings):
    views = dict(experiment_data.views)
    views["G1-U2L"] = replace(views["G1-U2L"], trainable=False, skip_reason="forced")
    data = ExperimentData(experiment_data.records, views)
    with pytest.raises(StageError) as info:
        execute(ExperimentConfig("G1-U2L", "TFIDF", "RF"), data, fast_settings)
    assert info.value.stage == "restrict_to_view" and isinstance(info.value.cause, DataError)
    assert "G1-U2L|TFIDF|RF" in str(info.value)


def test_matrix_runner_records_skips_and_order(experiment_data, fast_settings):
    view = "G2-Urban"
    cfgs = [c for c in enumerate_experiments(experiment_data.views.values()) if c.view_id == view]
    cfgs.append(ExperimentConfig("G1-RMD", "TFIDF", "RF", 0, "insufficient class records"))
    out = run_matrix(experiment_data, cfgs, fast_settings)
    assert [r.config.config_id for r in out.results] == [c.config_id for c in cfgs[:-1]]
    assert [c.config_id for c in out.skipped] == ["G1-RMD|TFIDF|RF"]
    assert not out.failures
    assert list(out.task_seconds) == [view] and out.task_seconds[view] > 0


def _fake_results(rng, views=("G1-U2L", "G2-Urban", "G3-All")):
    out = []
    for v in views:
        for f in ("TFIDF", "W2V", BASELINE):
            for m in ("RF", "AdaBoost", "GBT"):
                y = rng.integers(0, 4, 60)
                pred = np.where(rng.random(60) < (0.7 if f != BASELINE else 0.4), y,
                                rng.integers(0, 4, 60))
                cfg = ExperimentConfig(v, f, m)
                out.append((cfg, evaluate(y, pred, cfg.config_id)))
    return out


def test_best_per_view_tie_precedence():
    y = np.array([0, 1, 2, 3])
    res = [(ExperimentConfig("G3-All", f, m), evaluate(y, y, f"{f}{m}"))
           for f in ("W2V", "TFIDF") for m in ("AdaBoost", "RF", "GBT")]
    cfg, _ = best_per_view(res)["G3-All"]
    assert (cfg.featurizer, cfg.model) == ("TFIDF", "GBT")


def test_single_result_report(tmp_path):
    y = np.array([0, 1, 2, 3, 3])
    cfg = ExperimentConfig("G1-U2L", "TFIDF", "GBT")
    res = [(cfg, evaluate(y, y, cfg.config_id))]
    rankings = compute_rankings(res)
    assert rankings["U2L"][0].rank == 1 and len(rankings["U2L"]) == 1
    md = render_markdown(res, rankings)
    assert "Macro Avg" in md and "Micro Avg" in md and "Support" in md


def test_report_formats_and_csv_round_trip(tmp_path, rng):
    res = _fake_results(rng)
    skipped = [ExperimentConfig("G1-RMD", "TFIDF", "RF", 0, "insufficient class records")]
    paths = {fmt: emit_report(res, fmt=fmt, out_dir=tmp_path / fmt, skipped=skipped)
             for fmt in ("markdown", "json", "csv")}
    md = (tmp_path / "markdown" / "report.md").read_text()
    assert "G1-RMD" in md and "insufficient class records" in md
    js = json.loads((tmp_path / "json" / "report.json").read_text())
    assert js
    back = results_from_csv((tmp_path / "csv" / "results.csv").read_text())
    assert [(c.config_id, r.to_json()) for c, r in back] == \
        [(c.config_id, r.to_json()) for c, r in res]
    assert all(paths.values())
    with pytest.raises(ValueError):
        emit_report(res, fmt="xml", out_dir=tmp_path)


def test_lift_pairs_compare_same_view_and_model(rng):
    res = _fake_results(rng)
    pairs = narrative_lift(res)
    assert len(pairs) == 3 * 2 * 3
    summary = lift_summary(pairs)
    assert summary["comparisons"] == 18 and 0.0 <= summary["win_rate"] <= 1.0


def test_figures_render(tmp_path, rng):
    paths = render_figures(_fake_results(rng), tmp_path)
    assert paths and all(p.exists() and p.stat().st_size > 0 for p in paths)


def test_view_definitions_cover_seventeen():
    assert len(view_definitions()) == 17


def test_schedule_simulation():
    assert simulate_schedule([5, 4, 3, 3, 1], 1) == 16
    # 5 | 4 | 3 | 3, then 1 joins the worker that finished first
    assert simulate_schedule([5, 4, 3, 3, 1], 4) == 5
    assert simulate_schedule([2, 2, 2, 2, 2], 2) == 6
    with pytest.raises(ValueError):
        simulate_schedule([1], 0)
