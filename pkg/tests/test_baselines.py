import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from featvec.baselines import (ImportanceScores, gini_importance, load_external_scores,
                               permutation_importance, write_scores_tsv)
from featvec.dataset import REGRESSION, FeatureSchema, FeatureSpec
from featvec.errors import SchemaError
from featvec.forest import Forest, TrainParams, train_forest, train_tree
from helpers import make_ds, threshold_data
from oracles import load_frozen

# Root splits on x1 (gain 0.125 beats 0.071 for x0); the left child splits
# on x0 into pure leaves; the right child has identical rows and stays a leaf.
HAND_X = [[0, 0, 0], [0, 0, 0], [0, 0, 0], [1, 0, 0],
          [0, 1, 0], [0, 1, 0], [0, 1, 0], [0, 1, 0]]
HAND_Y = [0, 0, 0, 1, 1, 1, 1, 0]


def hand_forest():
    ds = make_ds(HAND_X, HAND_Y)
    params = TrainParams(max_depth=4, subset_size=3)
    tree = train_tree(ds, params, 0)
    return Forest([tree], params, 0, 3, 2, ds.task, ds.feature_names), tree


def test_hand_tree_structure():
    _, tree = hand_forest()
    assert tree.feature[0] == 1
    assert tree.n_splits == 2
    assert sorted(tree.feature[tree.feature >= 0].tolist()) == [0, 1]


def test_hand_tree_matches_manual_oracle():
    frozen = load_frozen()["hand_tree_gini"]
    forest, tree = hand_forest()
    split = tree.feature >= 0
    raw = np.zeros(3)
    np.add.at(raw, tree.feature[split], tree.n_samples[split] / tree.n_samples[0] * tree.impurity_decrease[split])
    np.testing.assert_allclose(raw, frozen["raw"], atol=1e-12)
    np.testing.assert_allclose(gini_importance(forest).scores, frozen["normalised"], atol=1e-12)


def test_leaf_only_tree_gives_zeros():
    ds = make_ds(np.arange(6.0), np.zeros(6))
    forest = train_forest(ds, 3, TrainParams(max_depth=3), 0)
    with pytest.warns(UserWarning):
        scores = gini_importance(forest)
    np.testing.assert_array_equal(scores.scores, 0.0)


def test_unused_feature_scores_zero():
    ds = threshold_data(500, 3)
    X = np.array(ds.X)
    X[:, 2] = 1.0  # constant: never splittable
    forest = train_forest(make_ds(X, ds.y), 10, TrainParams(max_depth=3), 0)
    g = gini_importance(forest)
    assert g.scores[2] == 0.0
    assert g.scores.sum() == pytest.approx(1.0)
    assert g.scores[0] > 0.9


def test_permutation_absent_feature_is_exactly_zero():
    ds = threshold_data(1000, 3)
    X = np.array(ds.X)
    X[:, 2] = 1.0
    ds = make_ds(X, ds.y)
    forest = train_forest(ds, 10, TrainParams(max_depth=3), 0)
    p = permutation_importance(forest, ds, seed=3)
    assert p.scores[2] == 0.0


def test_permutation_of_a_test_constant_column_is_zero():
    train = threshold_data(1000, 3)
    forest = train_forest(train, 10, TrainParams(max_depth=4), 0)
    X = np.array(threshold_data(500, 3, seed=1).X)
    X[:, 1] = 0.25
    test = make_ds(X, (X[:, 0] > 0).astype(np.int64))
    assert permutation_importance(forest, test, seed=0).scores[1] == 0.0


def test_permuting_the_signal_drops_accuracy_to_half():
    train, test = threshold_data(2000, 4, seed=0), threshold_data(2000, 4, seed=1)
    forest = train_forest(train, 10, TrainParams(max_depth=3), 0)
    base = forest.score(test)
    p = permutation_importance(forest, test, repeats=5, seed=0)
    assert base > 0.97
    assert base - p.scores[0] == pytest.approx(0.5, abs=0.05)
    assert np.all(np.abs(p.scores[1:]) < 0.02)


def test_permutation_is_deterministic():
    ds = threshold_data(500, 4)
    forest = train_forest(ds, 5, TrainParams(max_depth=4), 0)
    a = permutation_importance(forest, ds, seed=9)
    b = permutation_importance(forest, ds, seed=9)
    np.testing.assert_array_equal(a.scores, b.scores)


def test_permutation_regression_uses_negative_mse():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((800, 3))
    ds = make_ds(X, 3 * X[:, 1], task=REGRESSION)
    forest = train_forest(ds, 5, TrainParams(max_depth=5, task=REGRESSION), 0)
    p = permutation_importance(forest, ds, seed=0)
    assert p.ranking()[0] == 1
    assert p.scores[1] > 1.0


def test_permutation_argument_errors():
    ds = threshold_data(200, 3)
    forest = train_forest(ds, 2, TrainParams(max_depth=2), 0)
    with pytest.raises(ValueError):
        permutation_importance(forest, ds, repeats=0)
    with pytest.raises(ValueError):
        permutation_importance(forest, ds.select([0, 1]))


@given(st.floats(0.01, 100.0))
def test_gini_is_invariant_to_feature_scaling(c):
    ds = threshold_data(300, 3, seed=2)
    scaled = make_ds(ds.X * c, ds.y)
    a = gini_importance(train_forest(ds, 3, TrainParams(max_depth=3), 0))
    b = gini_importance(train_forest(scaled, 3, TrainParams(max_depth=3), 0))
    np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)


def test_ranking_is_stable_on_ties():
    s = ImportanceScores("x", [0.2, 0.5, 0.2, 0.1])
    np.testing.assert_array_equal(s.ranking(), [1, 0, 2, 3])
    with pytest.raises(ValueError):
        ImportanceScores("x", [np.nan, 1.0])


SCHEMA = FeatureSchema((FeatureSpec("a"), FeatureSpec("b"), FeatureSpec("c")), "y")


def test_external_scores_in_schema_order(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("feature_name\tscore\na\t0.5\nb\t0.25\nc\t1\n")
    s = load_external_scores(path, SCHEMA, "shap")
    assert s.method == "shap"
    np.testing.assert_array_equal(s.scores, [0.5, 0.25, 1.0])


def test_external_scores_shuffled_without_header(tmp_path):
    path = tmp_path / "s.tsv"
    path.write_text("c\t1\na\t0.5\nb\t0.25\n")
    np.testing.assert_array_equal(load_external_scores(path, SCHEMA).scores, [0.5, 0.25, 1.0])


@pytest.mark.parametrize("body,match", [
    ("a\t1\na\t2\nb\t1\nc\t1\n", "duplicate"),
    ("a\t1\nb\t1\nc\t1\nd\t1\n", "unknown"),
    ("a\t1\nb\t1\n", "no score"),
    ("a\t1\nb\tlots\nc\t1\n", "not a number"),
])
def test_external_scores_errors(tmp_path, body, match):
    path = tmp_path / "s.tsv"
    path.write_text(body)
    with pytest.raises(SchemaError, match=match):
        load_external_scores(path, SCHEMA)


def test_scores_tsv_round_trip(tmp_path):
    s = ImportanceScores("gini", [0.125, 0.5, 0.375])
    write_scores_tsv(s, SCHEMA.names, tmp_path / "g.tsv")
    np.testing.assert_array_equal(load_external_scores(tmp_path / "g.tsv", SCHEMA).scores, s.scores)
