import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashsev.diagnostics import DataError, Diagnostics
from crashsev.ingest import DatasetView
from crashsev.prep import (CATEGORICAL, NUMERIC, ONEHOT, Encoder, FeatureMatrix, SplitBundle,
                           apportion, clean_features, encode_categoricals, records_to_matrix,
                           screen_view, stratified_split)
from crashsev.records import CrashRecord, Severity


def matrix(columns, kinds, labels=None, categories=None):
    values = np.column_stack([np.array(c, dtype=float) for c in columns])
    n = values.shape[0]
    labels = np.zeros(n, np.int64) if labels is None else np.asarray(labels, np.int64)
    return FeatureMatrix(values=values, missing_mask=np.isnan(values),
                         feature_names=[f"c{i}" for i in range(len(columns))],
                         labels=labels, row_ids=np.array([f"r{i}" for i in range(n)], dtype=object),
                         kinds=list(kinds), categories=categories or {})


def labelled(counts, seed=0):
    labels = np.repeat(np.arange(4), counts)
    rng = np.random.default_rng(seed)
    return matrix([rng.random(len(labels))], [NUMERIC], labels[rng.permutation(len(labels))])


def test_drop_threshold_is_strict():
    nan = np.nan
    m = matrix([[1, nan, nan, nan, 5], [1, 2, nan, nan, nan], [1, 2, 3, nan, nan],
                [nan, nan, nan, 4, 5]], [NUMERIC] * 4)
    out = clean_features(m.take(np.arange(5)), 0.5)
    assert out.feature_names == ["c2"]
    four = matrix([[1, 2, nan, nan]], [NUMERIC])
    assert clean_features(four).feature_names == ["c0"]


def test_numeric_median_and_categorical_mode():
    nan = np.nan
    m = matrix([[1, 2, 100, nan], [0, 0, 1, nan]], [NUMERIC, CATEGORICAL],
               categories={"c1": ("A", "B")})
    out = clean_features(m)
    assert out.values[3, 0] == 2.0
    assert out.values[3, 1] == 0.0
    assert out.missing_mask[3].all()


def test_even_length_median_is_lower_element_and_mode_tie_is_smallest():
    nan = np.nan
    m = matrix([[1, 2, 3, 4, nan], [1, 0, 1, 0, nan]], [NUMERIC, CATEGORICAL],
               categories={"c1": ("A", "B")})
    out = clean_features(m)
    assert out.values[4, 0] == 2.0
    assert out.values[4, 1] == 0.0


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1])
def test_drop_threshold_domain(bad):
    with pytest.raises(ValueError):
        clean_features(matrix([[1.0]], [NUMERIC]), bad)


@given(st.lists(st.lists(st.one_of(st.none(), st.integers(0, 5)), min_size=6, max_size=6),
                min_size=1, max_size=5))
def test_clean_leaves_no_gaps(cols):
    m = matrix([[np.nan if v is None else v for v in c] for c in cols], [NUMERIC] * len(cols))
    out = clean_features(m)
    assert not np.isnan(out.values).any()
    assert out.missing_mask.sum() <= m.missing_mask.sum()


def test_one_hot_layout_and_unseen_category():
    train = matrix([[0, 1, 2], [1200, 12000, 5]], [CATEGORICAL, NUMERIC],
                   categories={"c0": ("Clear", "Raining", "Snowing")})
    enc = Encoder.fit(train)
    assert enc.feature_names == ["c0=Clear", "c0=Raining", "c0=Snowing", "c1"]
    out = enc.transform(train)
    assert out.values.tolist() == [[1, 0, 0, 1200], [0, 1, 0, 12000], [0, 0, 1, 5]]
    assert out.kinds == [ONEHOT] * 3 + [NUMERIC]
    test =matrix([[0, 1], [7, 7]], [CATEGORICAL, NUMERIC], categories={"c0": ("Clear", "Fog")})
    diag = Diagnostics()
    coded = encode_categoricals(test, enc, diag)
    assert coded.values[1, :3].tolist() == [0, 0, 0]
    assert diag["unseen_category"] == 1


def test_encoder_only_uses_observed_categories():
    m = matrix([[0, 0, 2]], [CATEGORICAL], categories={"c0": ("a", "b", "c")})
    assert Encoder.fit(m).feature_names == ["c0=a", "c0=c"]


def test_encode_requires_fitted_fields():
    enc = Encoder.fit(matrix([[0.0], [1.0]], [CATEGORICAL, NUMERIC], categories={"c0": ("a",)}))
    with pytest.raises(DataError):
        enc.transform(matrix([[0.0]], [CATEGORICAL], categories={"c0": ("a",)}))


def test_one_hot_has_single_one_per_block(small_synthetic):
    _, joined = small_synthetic
    m = clean_features(records_to_matrix(joined.records))
    out = encode_categoricals(m)
    for name, kind in zip(m.feature_names, m.kinds):
        if kind != CATEGORICAL:
            continue
        cols = [i for i, n in enumerate(out.feature_names) if n.startswith(name + "=")]
        assert np.all(out.values[:, cols].sum(axis=1) == 1.0)


def test_split_sizes_follow_class_shares():
    split = stratified_split(labelled([100, 200, 300, 400]), seed=1)
    assert split.train.class_counts().tolist() == [70, 140, 210, 280]
    assert split.validation.class_counts().tolist() == [15, 30, 45, 60]


@given(st.lists(st.integers(3, 40), min_size=4, max_size=4), st.integers(0, 2**32 - 1))
def test_split_partition_invariants(counts, seed):
    m = labelled(counts)
    split = stratified_split(m, seed=seed)
    ids = [set(p.row_ids) for p in (split.train, split.validation, split.test)]
    assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
    assert set().union(*ids) == set(m.row_ids)
    for part, share in zip((split.train, split.validation, split.test), split.proportions):
        exact = np.array(counts) * share
        assert np.all(np.abs(part.class_counts() - exact) < 1.0 + 1e-9)


def test_split_is_deterministic_and_seed_sensitive():
    m = labelled([10, 10, 10, 10])
    a, b = stratified_split(m, seed=5), stratified_split(m, seed=5)
    assert a.test.row_ids.tolist() == b.test.row_ids.tolist()
    c = stratified_split(m, seed=6)
    assert a.train.row_ids.tolist() != c.train.row_ids.tolist()


def test_split_rejects_tiny_class():
    with pytest.raises(DataError, match="Fatal"):
        stratified_split(labelled([2, 10, 10, 10]))


def test_apportion_largest_remainder():
    assert apportion(10, (0.7, 0.15, 0.15)) == [7, 2, 1]
    assert sum(apportion(13, (0.7, 0.15, 0.15))) == 13


def test_split_bundle_round_trip(tmp_path):
    m = labelled([5, 5, 5, 5])
    m.missing_mask[0, 0] = True
    split = stratified_split(m, seed=2)
    split.save(tmp_path)
    back = SplitBundle.load(tmp_path)
    for a, b in zip(split.parts().values(), back.parts().values()):
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.missing_mask, b.missing_mask)
        assert a.row_ids.tolist() == b.row_ids.tolist()


def _view(n):
    return DatasetView("G1-RMD", "Group1", "RMD", frozenset(), tuple(f"r{i}" for i in range(n)))


def test_screen_view_flags_single_fatal():
    labels = [0] + [1] * 50 + [2] * 50 + [3] * 50
    out = screen_view(_view(len(labels)), labels, 10)
    assert not out.trainable and "Fatal" in out.skip_reason


def test_screen_view_accepts_balanced_and_zero_threshold():
    labels = np.repeat(np.arange(4), 50)
    assert screen_view(_view(200), labels, 10).trainable
    assert screen_view(_view(1), [0], 0).trainable


def test_records_to_matrix_layout():
    recs = [CrashRecord("a", "R", 0.0, Severity.MAJOR, categorical={"w": "Rain"},
                        numeric={"age": 30.0}),
            CrashRecord("b", "R", 0.0, Severity.FATAL, categorical={"w": None}, numeric={"age": None})]
    m = records_to_matrix(recs)
    assert m.feature_names == ["w", "age"]
    assert m.missing_mask.tolist() == [[False, False], [True, True]]
    assert m.labels.tolist() == [1, 0]
