import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashsev.balance import SmoteParams, nearest_neighbors, smote_resample, target_counts
from crashsev.diagnostics import DataError
from crashsev.prep import NUMERIC, ONEHOT, FeatureMatrix


def train_matrix(counts, d=3, seed=0, partition="train", kinds=None):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(4), counts)
    X = rng.normal(size=(len(labels), d))
    return FeatureMatrix(values=X, missing_mask=np.zeros_like(X, dtype=bool),
                         feature_names=[f"f{i}" for i in range(d)], labels=labels,
                         row_ids=np.array([f"r{i}" for i in range(len(labels))], dtype=object),
                         kinds=kinds or [NUMERIC] * d, partition=partition)


def test_interpolation_formula():
    xi, xj = np.array([0.0, 0.0]), np.array([2.0, 2.0])
    assert np.allclose(xi + 0.5 * (xj - xi), [1.0, 1.0])


def test_counts_equalize_to_majority():
    out = smote_resample(train_matrix([10, 30, 60, 100]), SmoteParams(seed=1))
    assert out.class_counts().tolist() == [100, 100, 100, 100]
    assert out.synthetic.sum() == 400 - 200


def test_explicit_target_and_no_shrinking():
    counts = np.array([10, 30, 60, 100])
    assert target_counts(counts, {0: 50}).tolist() == [50, 30, 60, 100]
    with pytest.raises(ValueError):
        target_counts(counts, {3: 50})


def test_originals_kept_unchanged():
    m = train_matrix([10, 30, 60, 100])
    out = smote_resample(m, SmoteParams(seed=2))
    assert np.array_equal(out.values[:m.n_rows], m.values)
    assert out.row_ids[:m.n_rows].tolist() == m.row_ids.tolist()
    assert not out.synthetic[:m.n_rows].any()


@given(st.integers(0, 2**32 - 1), st.lists(st.integers(7, 30), min_size=4, max_size=4))
def test_synthetic_rows_lie_on_recorded_segments(seed, counts):
    m = train_matrix(counts, seed=seed % 1000)
    out = smote_resample(m, SmoteParams(seed=seed))
    nbrs = {}
    for r in np.flatnonzero(out.synthetic):
        i, j, delta = out.provenance[r]
        i, j = int(i), int(j)
        assert m.labels[i] == m.labels[j] == out.labels[r]
        assert 0.0 <= delta < 1.0
        xi, xj = m.values[i], m.values[j]
        assert np.allclose(out.values[r], xi + delta * (xj - xi), atol=1e-9)
        lo, hi = np.minimum(xi, xj), np.maximum(xi, xj)
        assert np.all(out.values[r] >= lo - 1e-9) and np.all(out.values[r] <= hi + 1e-9)
        cls = m.labels[i]
        if cls not in nbrs:
            rows = np.flatnonzero(m.labels == cls)
            nbrs[cls] = (rows, nearest_neighbors(m.values[rows], 5))
        rows, table = nbrs[cls]
        assert j in rows[table[np.searchsorted(rows, i)]]
    assert out.class_counts().tolist() == [max(counts)] * 4


def test_delta_endpoints():
    m = train_matrix([10, 10, 10, 20])
    near_i = smote_resample(m, SmoteParams(seed=0, delta_range=(0.0, 1e-12)))
    for r in np.flatnonzero(near_i.synthetic):
        i = int(near_i.provenance[r, 0])
        assert np.allclose(near_i.values[r], m.values[i])


def test_seed_gives_bit_identical_output():
    m = train_matrix([10, 30, 60, 100])
    a = smote_resample(m, SmoteParams(seed=9))
    b = smote_resample(m, SmoteParams(seed=9))
    assert a.values.tobytes() == b.values.tobytes()
    assert a.provenance.tobytes() == b.provenance.tobytes()


def test_one_hot_values_stay_fractional_in_unit_interval():
    m = train_matrix([10, 30, 30, 30], d=2, kinds=[ONEHOT, ONEHOT])
    m.values[:] = (m.values > 0).astype(float)
    out = smote_resample(m, SmoteParams(seed=3))
    synth = out.values[out.synthetic]
    assert np.all((synth >= 0) & (synth <= 1))


def test_small_class_error_names_class():
    with pytest.raises(DataError, match="Fatal.*smaller k"):
        smote_resample(train_matrix([5, 30, 30, 30]), SmoteParams(k_neighbors=5))


@pytest.mark.parametrize("part", ["validation", "test"])
def test_refuses_held_out_partitions(part):
    with pytest.raises(DataError):
        smote_resample(train_matrix([10, 10, 10, 10], partition=part))


def test_missing_mask_propagates_from_either_parent():
    m = train_matrix([10, 10, 10, 30])
    m.missing_mask[m.labels == 0, 1] = True
    out = smote_resample(m, SmoteParams(seed=4))
    synth_fatal = out.synthetic & (out.labels == 0)
    assert out.missing_mask[synth_fatal, 1].all()


def test_nearest_neighbour_ties_prefer_lower_index():
    X = np.array([[0.0], [1.0], [-1.0], [5.0]])
    assert nearest_neighbors(X, 2)[0].tolist() == [1, 2]


def test_params_validation():
    with pytest.raises(ValueError):
        SmoteParams(k_neighbors=0)
    with pytest.raises(ValueError):
        SmoteParams(delta_range=(0.5, 0.5))
