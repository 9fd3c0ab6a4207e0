import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crashsev.models import fit_random_forest
from crashsev.select import ImportanceVector, gini_impurity, mdi_importances, select_top_k


@pytest.mark.parametrize("p,expected", [((1, 0, 0, 0), 0.0), ((0.5, 0.5), 0.5),
                                        ((0.25, 0.25, 0.25, 0.25), 0.75)])
def test_gini_values(p, expected):
    assert gini_impurity(p) == pytest.approx(expected)


@pytest.mark.parametrize("bad", [(0.5, 0.6), (-0.1, 1.1), [[0.5, 0.5]]])
def test_gini_rejects_bad_proportions(bad):
    with pytest.raises(ValueError):
        gini_impurity(bad)


def test_only_informative_feature_scores():
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.integers(0, 4, 200), np.full(200, 3.0), np.zeros(200)])
    y = X[:, 0].astype(int)
    forest = fit_random_forest(X, y, n_trees=20, seed=1)
    imp = mdi_importances(forest)
    assert imp.scores.tolist() == [1.0, 0.0, 0.0]


def test_importances_normalized():
    rng = np.random.default_rng(1)
    X, y = rng.random((150, 6)), rng.integers(0, 4, 150)
    imp = mdi_importances(fit_random_forest(X, y, n_trees=10, seed=2))
    assert abs(imp.scores.sum() - 1.0) <= 1e-6


def test_depth_one_mdi_matches_brute_force():
    rng = np.random.default_rng(2)
    X, y = rng.random((40, 3)), rng.integers(0, 2, 40)
    forest = fit_random_forest(X, y, n_trees=1, bootstrap=False, features_per_split=3, max_depth=1)
    tree = forest.trees[0]
    f, thr = tree.feature[0], tree.threshold[0]
    left = X[:, f] <= thr

    def g(mask):
        p = np.bincount(y[mask], minlength=2) / mask.sum()
        return 1 - np.sum(p * p)

    full = np.ones(40, bool)
    decrease = g(full) - left.mean() * g(left) - (~left).mean() * g(~left)
    raw = mdi_importances(forest, normalize=False)
    assert raw.scores[f] == pytest.approx(decrease, abs=1e-12)


def test_importance_equivariant_under_column_permutation():
    rng = np.random.default_rng(3)
    X = rng.random((400, 4))
    y = np.digitize(X[:, 0] + X[:, 2] + 0.3 * rng.random(400), [0.8, 1.3])
    perm = np.array([2, 0, 3, 1])
    # one deterministic tree; shallow so no two candidate splits tie on gain
    kw = dict(n_trees=1, bootstrap=False, features_per_split=4, max_depth=2)
    a = mdi_importances(fit_random_forest(X, y, **kw), list("abcd"))
    b = mdi_importances(fit_random_forest(X[:, perm], y, **kw), [list("abcd")[i] for i in perm])
    assert dict(zip(a.feature_names, a.scores)) == pytest.approx(dict(zip(b.feature_names, b.scores)))


def test_untrained_forest_raises():
    with pytest.raises(ValueError):
        mdi_importances(None)


def test_select_counts_and_ties():
    scores = np.linspace(1, 0, 350)
    imp = ImportanceVector(scores, [f"x{i}" for i in range(350)], True)
    assert len(select_top_k(imp, 100)) == 100
    assert len(select_top_k(imp, 360)) == 350
    tie = ImportanceVector(np.array([0.1, 0.4, 0.4]), ["a", "b", "c"], True)
    assert select_top_k(tie, 2) == ["b", "c"]
    with pytest.raises(ValueError):
        select_top_k(tie, 0)


@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=30), st.integers(1, 40))
def test_selection_is_subset_with_non_increasing_scores(scores, k):
    names = [f"n{i}" for i in range(len(scores))]
    imp = ImportanceVector(np.array(scores), names, False)
    chosen = select_top_k(imp, k)
    assert set(chosen) <= set(names) and len(chosen) == min(k, len(names))
    picked = [scores[names.index(c)] for c in chosen]
    assert all(a >= b for a, b in zip(picked, picked[1:]))


def test_importance_csv(tmp_path):
    imp = ImportanceVector(np.array([0.2, 0.8]), ["a", "b"], True)
    imp.to_csv(tmp_path / "imp.csv")
    assert (tmp_path / "imp.csv").read_text().splitlines()[1].startswith("b,")
