"""Leakage-safe staged pipeline for one experiment configuration."""

from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from ..balance import SmoteParams, smote_resample
from ..diagnostics import DataError, Diagnostics
from ..ingest import DatasetView, build_dataset_views
from ..metrics import EvalReport, evaluate
from ..models import fit_adaboost, fit_gbt, fit_random_forest
from ..prep import (SplitBundle, clean_features, encode_categoricals, records_to_matrix,
                    screen_view, stratified_split)
from ..records import N_CLASSES, CrashRecord
from ..select import mdi_importances, select_top_k
from ..textfeat import embed_documents, fuse_features, tfidf_fit, tokenize, w2v_train
from .config import (BASELINE, FEATURIZERS, MODELS, STAGE_ORDER, ExperimentConfig, Settings,
                     derive_seed)

CLASSES = np.arange(N_CLASSES)
SELECTION_FOREST_INPUT = "smote_resampled_structured_train"


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and config id."""

    def __init__(self, stage: str, config_id: str, cause: BaseException):
        super().__init__(f"[{config_id}] stage {stage!r} failed: {cause}")
        self.stage = stage
        self.config_id = config_id
        self.cause = cause


def enumerate_experiments(views, include_structured_baseline: bool = False,
                          master_seed: int = 0) -> list[ExperimentConfig]:
    """All (view, featurizer, model) configs in view order, then featurizer, then model.

    Untrainable views stay in the list with their skip reason attached.
    """
    views = list(views)
    ids = [v.view_id for v in views]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ValueError(f"duplicate view ids: {dupes}")
    featurizers = (*FEATURIZERS, BASELINE) if include_structured_baseline else FEATURIZERS
    return [ExperimentConfig(v.view_id, f, m, master_seed,
                             None if v.trainable else v.skip_reason)
            for v in views for f in featurizers for m in MODELS]


def fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.asarray(a)
        if a.dtype == object:
            h.update("\x1f".join(map(str, a.tolist())).encode())
        else:
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(b"\x1e")
    return h.hexdigest()


@dataclass
class ExperimentData:
    """Joined records plus their screened views, indexed for the pipeline."""

    records: list[CrashRecord]
    views: dict[str, DatasetView]

    @classmethod
    def from_records(cls, records, min_per_class: int = 10) -> "ExperimentData":
        labels = {r.record_id: int(r.severity) for r in records}
        views = [screen_view(v, labels, min_per_class) for v in build_dataset_views(records)]
        return cls(list(records), {v.view_id: v for v in views})

    def view_records(self, view_id: str) -> list[CrashRecord]:
        members = self.views[view_id].members
        return [r for r in self.records if r.road_class in members]


@dataclass
class RunManifest:
    """Everything needed to rerun a config; ``timings`` stay out of the canonical JSON."""

    config: dict
    settings: dict
    stage_order: list[str]
    seeds: dict
    fingerprints: dict
    class_counts: dict
    selected_features: list[str]
    text: dict
    model: dict
    leakage_checks: dict
    diagnostics: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {k: getattr(self, k) for k in (
            "config", "settings", "stage_order", "seeds", "fingerprints", "class_counts",
            "selected_features", "text", "model", "leakage_checks", "diagnostics")}
        if include_timings:
            out["timings"] = dict(self.timings)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: EvalReport
    manifest: RunManifest
    test_row_ids: np.ndarray
    test_true: np.ndarray
    test_pred: np.ndarray


@dataclass
class _ViewStage:
    split: SplitBundle
    selected: list[str]
    selection_seed: int
    train_tokens: list
    all_tokens: dict
    diagnostics: Diagnostics
    fingerprints: dict
    timings: dict


@dataclass
class _FusedStage:
    train: object
    validation: object
    test: object
    train_pre_smote_counts: list
    text: dict
    smote_seed: int
    timings: dict


class PipelineCache:
    """Shares view- and featurizer-level stages across configs of one process.

    Every cached value is a pure function of its key, so results do not
    depend on which configs ran before.
    """

    def __init__(self):
        self.views: dict = {}
        self.fused: dict = {}

    def clear(self):
        self.views.clear()
        self.fused.clear()


@contextmanager
def _stage(name: str, config_id: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - rewrapped with stage context
        raise StageError(name, config_id, exc) from exc
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def _view_stage(config: ExperimentConfig, data: ExperimentData, settings: Settings) -> _ViewStage:
    cid = config.config_id
    timings: dict = {}
    diag = Diagnostics()
    with _stage("restrict_to_view", cid, timings):
        records = data.view_records(config.view_id)
        if not records:
            raise DataError(f"view {config.view_id} has no records")
        raw = records_to_matrix(records)
    with _stage("clean_features", cid, timings):
        cleaned = clean_features(raw, settings.split.drop_threshold)
        dropped = sorted(set(raw.feature_names) - set(cleaned.feature_names))
        if dropped:
            diag.add("dropped_columns", ", ".join(dropped), n=len(dropped))
    with _stage("encode_categoricals", cid, timings):
        encoded = encode_categoricals(cleaned, diagnostics=diag)
    split_seed = derive_seed(config.master_seed, config.view_id, "split")
    with _stage("stratified_split", cid, timings):
        split = stratified_split(encoded, settings.split.proportions, split_seed)
    with _stage("fit_text_featurizer_on_train", cid, timings):
        stop = settings.text.stopwords
        tokens = {name: [tokenize(t, stop) for t in part.narratives]
                  for name, part in split.parts().items()}
    select_seed = derive_seed(config.master_seed, config.view_id, "select")
    with _stage("importance_forest_and_top_k", cid, timings):
        sel = settings.select
        if sel.fit_on == "smote_resampled_train":
            fit_rows = smote_resample(split.train, SmoteParams(
                settings.smote.k_neighbors, settings.smote.target, select_seed))
        else:
            fit_rows = split.train
        forest = fit_random_forest(fit_rows.values, fit_rows.labels, n_trees=sel.n_trees,
                                   features_per_split=sel.features_per_split,
                                   seed=select_seed, classes=CLASSES)
        importances = mdi_importances(forest, split.train.feature_names)
        chosen = set(select_top_k(importances, sel.top_k))
        # keep the encoded column order for the selected subset
        selected = [n for n in split.train.feature_names if n in chosen]
    fps = {
        "view_records": fingerprint(raw.row_ids, raw.labels),
        **{f"{name}_rows": fingerprint(part.row_ids) for name, part in split.parts().items()},
        "encoded_train": fingerprint(split.train.values, split.train.missing_mask),
        "selection_fit_rows": fingerprint(fit_rows.row_ids[~fit_rows.synthetic]),
    }
    return _ViewStage(split, selected, select_seed, tokens["train"], tokens, diag, fps, timings)


def _fused_stage(config: ExperimentConfig, vs: _ViewStage, settings: Settings) -> _FusedStage:
    cid = config.config_id
    timings: dict = {}
    split = vs.split
    parts = {name: part.select_columns(vs.selected) for name, part in split.parts().items()}
    text_info: dict = {"featurizer": config.featurizer, "fit_rows": 0}
    text_seed = derive_seed(config.master_seed, config.view_id, config.featurizer, "text")
    blocks = {name: None for name in parts}
    names = None
    with _stage("fit_text_featurizer_on_train", cid, timings):
        if config.featurizer == "TFIDF":
            model = tfidf_fit(vs.train_tokens, settings.text.tfidf_max_vocab)
            blocks = {name: model.transform(vs.all_tokens[name]) for name in parts}
            names = [f"tfidf:{t}" for t in model.terms]
            text_info.update(vocab_size=len(model.terms), n_docs=model.n_docs,
                             vocab_fingerprint=fingerprint(np.array(model.terms, dtype=object)))
        elif config.featurizer == "W2V":
            t = settings.text
            model = w2v_train(vs.train_tokens, dim=t.w2v_dim, window=t.w2v_window,
                              negatives=t.w2v_negatives, epochs=t.w2v_epochs,
                              min_count=t.w2v_min_count, learning_rate=t.w2v_learning_rate,
                              seed=text_seed, workers=t.w2v_workers)
            if t.pooling != "mean":
                raise ValueError(f"unsupported pooling {t.pooling!r}")
            blocks = {name: embed_documents(model, vs.all_tokens[name]) for name in parts}
            names = [f"w2v:{d}" for d in range(model.dim)]
            text_info.update(vocab_size=len(model.terms), seed=text_seed,
                             final_epoch_loss=model.loss_history[-1],
                             embedding_fingerprint=fingerprint(model.input_vectors))
        elif config.featurizer != BASELINE:
            raise ValueError(f"unknown featurizer {config.featurizer!r}")
        text_info["fit_rows"] = len(vs.train_tokens)
    with _stage("fuse_features", cid, timings):
        fused = {name: fuse_features(parts[name], blocks[name], names) for name in parts}
    smote_seed = derive_seed(config.master_seed, config.view_id, config.featurizer, "smote")
    with _stage("smote_train_only", cid, timings):
        pre = fused["train"].class_counts().tolist()
        train = smote_resample(fused["train"], SmoteParams(
            settings.smote.k_neighbors, settings.smote.target, smote_seed))
    return _FusedStage(train, fused["validation"], fused["test"], pre, text_info, smote_seed,
                       timings)


def _fit_model(config: ExperimentConfig, train, validation, settings: Settings):
    """Fit the config's learner; returns (model, uses_mask, selection record)."""
    seed = config.config_seed
    if config.model == "RF":
        s = settings.rf
        model = fit_random_forest(train.values, train.labels, n_trees=s.n_trees,
                                  features_per_split=s.features_per_split, bootstrap=s.bootstrap,
                                  max_depth=s.max_depth, min_samples_leaf=s.min_samples_leaf,
                                  seed=seed, classes=CLASSES)
        return model, False, {}
    if config.model == "AdaBoost":
        s = settings.adaboost
        model = fit_adaboost(train.values, train.labels, max_stages=s.max_stages,
                             max_depth=s.max_depth, seed=seed, classes=CLASSES)
        return model, False, {"stages": len(model.stages)}
    if config.model == "GBT":
        s = settings.gbt
        grid = []
        best = None
        for lr in s.grid_learning_rate:
            for depth in s.grid_max_depth:
                m = fit_gbt(train.values, train.labels, train.missing_mask, n_rounds=s.n_rounds,
                            learning_rate=lr, lambda_l2=s.lambda_l2, alpha_l1=s.alpha_l1,
                            gamma_min_gain=s.gamma_min_gain, max_depth=depth,
                            base_score=s.base_score, seed=seed, X_valid=validation.values,
                            y_valid=validation.labels, valid_mask=validation.missing_mask,
                            early_stopping_rounds=s.early_stopping_rounds, classes=CLASSES)
                pred = m.predict(validation.values, validation.missing_mask)
                score = evaluate(validation.labels, pred).macro_f1
                grid.append({"learning_rate": lr, "max_depth": depth,
                             "rounds": m.n_rounds, "validation_macro_f1": score})
                # strict improvement keeps the earliest grid point on ties
                if best is None or score > best[0]:
                    best = (score, m, len(grid) - 1)
        return best[1], True, {"grid": grid, "chosen": grid[best[2]]}
    raise ValueError(f"unknown model {config.model!r}")


def _leakage_checks(vs: _ViewStage, fs: _FusedStage) -> dict:
    test_ids = set(vs.split.test.row_ids.tolist())
    valid_ids = set(vs.split.validation.row_ids.tolist())
    train_ids = vs.split.train.row_ids
    n_orig = int((~fs.train.synthetic).sum())
    prov = fs.train.provenance
    synth = prov[fs.train.synthetic] if prov is not None else np.zeros((0, 3))
    parents = set(train_ids[synth[:, :2].astype(np.int64).ravel()].tolist()) if len(synth) else set()
    checks = {
        "text_fit_rows_are_train": len(vs.train_tokens) == vs.split.train.n_rows,
        "smote_parents_are_train": (not parents & (test_ids | valid_ids))
        and bool(np.all(synth[:, :2] < n_orig)),
        "smote_originals_are_train": bool(np.array_equal(fs.train.row_ids[:n_orig], train_ids)),
        "test_untouched": bool(fs.test.n_rows == vs.split.test.n_rows
                               and not fs.test.synthetic.any()),
        "validation_untouched": bool(fs.validation.n_rows == vs.split.validation.n_rows
                                     and not fs.validation.synthetic.any()),
        "partitions_disjoint": not (test_ids & valid_ids) and not (
            set(train_ids.tolist()) & (test_ids | valid_ids)),
    }
    failed = [k for k, ok in checks.items() if not ok]
    if failed:
        raise AssertionError(f"leakage guard failed: {failed}")
    return checks


def execute(config: ExperimentConfig, data: ExperimentData, settings: Settings | None = None,
            cache: PipelineCache | None = None) -> ExperimentResult:
    """Run every stage for ``config`` and evaluate once on the test partition."""
    settings = settings or Settings()
    cid = config.config_id
    view = data.views.get(config.view_id)
    if view is None:
        raise StageError("restrict_to_view", cid, KeyError(f"unknown view {config.view_id}"))
    if not view.trainable:
        raise StageError("restrict_to_view", cid, DataError(
            f"view is untrainable: {view.skip_reason}"))
    cache = cache if cache is not None else PipelineCache()
    skey = json.dumps(settings.to_dict(), sort_keys=True)
    vkey = (config.master_seed, config.view_id, skey)
    timings: dict = {}
    if vkey not in cache.views:
        cache.views[vkey] = _view_stage(config, data, settings)
        timings.update(cache.views[vkey].timings)
    vs = cache.views[vkey]
    fkey = (*vkey, config.featurizer)
    if fkey not in cache.fused:
        cache.fused[fkey] = _fused_stage(config, vs, settings)
        for k, v in cache.fused[fkey].timings.items():
            timings[k] = timings.get(k, 0.0) + v
    fs = cache.fused[fkey]

    with _stage("train_and_tune_on_validation", cid, timings):
        model, uses_mask, selection = _fit_model(config, fs.train, fs.validation, settings)
    with _stage("evaluate_on_test", cid, timings):
        checks = _leakage_checks(vs, fs)
        test_mask = fs.test.missing_mask if uses_mask else None
        pred = model.predict(fs.test.values, test_mask)
        report = evaluate(fs.test.labels, pred, cid)

    split = vs.split
    manifest = RunManifest(
        config=config.to_dict(),
        settings={**settings.to_dict(),
                  "selection_forest_input": SELECTION_FOREST_INPUT,
                  "imputation_for_rf_and_adaboost": "imputed values, no missing mask",
                  "gbt_missing_values": "learned default direction from the missing mask"},
        stage_order=list(STAGE_ORDER),
        seeds={"master": config.master_seed, "config": config.config_seed,
               "split": split.seed, "selection": vs.selection_seed,
               "text": derive_seed(config.master_seed, config.view_id, config.featurizer, "text"),
               "smote": fs.smote_seed},
        fingerprints={**vs.fingerprints,
                      "model_train": fingerprint(fs.train.values, fs.train.labels),
                      "test_predictions": fingerprint(pred)},
        class_counts={"train_pre_smote": fs.train_pre_smote_counts,
                      "train_post_smote": fs.train.class_counts().tolist(),
                      "validation": fs.validation.class_counts().tolist(),
                      "test": fs.test.class_counts().tolist()},
        selected_features=list(vs.selected),
        text=dict(fs.text),
        model={"name": config.model, "n_features": fs.train.n_cols, **selection},
        leakage_checks=checks,
        diagnostics=vs.diagnostics.to_dict(),
        timings=timings,
    )
    return ExperimentResult(config, report, manifest, fs.test.row_ids.copy(),
                            fs.test.labels.copy(), np.asarray(pred).copy())


def run_experiment(config: ExperimentConfig, data: ExperimentData,
                   settings: Settings | None = None,
                   cache: PipelineCache | None = None) -> tuple[EvalReport, RunManifest]:
    result = execute(config, data, settings, cache)
    return result.report, result.manifest
