import itertools

import numpy as np
import pytest

from tekws.analysis import (confusion_shares, mean_spikes_per_utterance,
                            permutation_importance, select_few, single_neuron_scores)
from tekws.readout import fit_logreg, predict


def test_constant_feature_importance_exactly_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    X[:, 2] = 5.0
    y = (X[:, 0] > 0).astype(int)
    model = fit_logreg(X, y, lam=0.1)
    report = permutation_importance(model, X, y, repeats=5, seed=2)
    assert report.importances[2] == 0.0
    assert report.stds[2] == 0.0


def test_zero_weight_model_all_importances_zero():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 4))
    y = np.array([0, 1] * 15)
    model = fit_logreg(X, y, lam=1e-3)
    model.weights[:] = 0.0
    report = permutation_importance(model, X, y, repeats=4, seed=3)
    assert (report.importances == 0.0).all()


def test_duplicated_predictive_feature_masks_importance():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(-2, 0.3, 50), rng.normal(2, 0.3, 50)])
    y = (x > 0).astype(int)
    X_single = x[:, None]
    X_twin = np.column_stack([x, x])
    model_single = fit_logreg(X_single, y, lam=0.1)
    model_twin = fit_logreg(X_twin, y, lam=0.1)
    imp_single = permutation_importance(model_single, X_single, y, repeats=10, seed=5)
    imp_twin = permutation_importance(model_twin, X_twin, y, repeats=10, seed=5)
    # the twin keeps classifying through the intact copy: permuting one copy
    # costs far less accuracy than permuting the only copy
    assert imp_single.importances[0] > 0.4
    assert imp_twin.importances.max() < 0.6 * imp_single.importances[0]
    base = 1.0
    assert (base - imp_twin.importances.max()) >= 0.7  # still classifies


def test_importance_matches_exact_permutation_enumeration():
    # 4-sample fixture with a perfect single feature: the exact expected
    # importance is computable by enumerating all 24 column permutations
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = fit_logreg(X, y, lam=1e-6)
    base = 1.0
    accs = []
    for perm in itertools.permutations(range(4)):
        labels, _ = predict(model, X[list(perm)])
        accs.append(np.mean(labels == y))
    exact = base - np.mean(accs)
    assert exact == pytest.approx(0.5, abs=1e-12)
    report = permutation_importance(model, X, y, repeats=600, seed=6)
    assert report.importances[0] == pytest.approx(exact, abs=0.05)


def test_importance_deterministic():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(25, 5))
    y = (X[:, 1] > 0).astype(int)
    model = fit_logreg(X, y, lam=0.1)
    a = permutation_importance(model, X, y, repeats=6, seed=11)
    b = permutation_importance(model, X, y, repeats=6, seed=11)
    np.testing.assert_array_equal(a.importances, b.importances)
    np.testing.assert_array_equal(a.stds, b.stds)


def test_single_neuron_perfect_feature():
    rng = np.random.default_rng(8)
    x_train = np.concatenate([rng.normal(-3, 0.2, 30), rng.normal(3, 0.2, 30)])
    y_train = (x_train > 0).astype(int)
    x_test = np.concatenate([rng.normal(-3, 0.2, 10), rng.normal(3, 0.2, 30)])
    y_test = (x_test > 0).astype(int)
    scores = single_neuron_scores(x_train[:, None], y_train, x_test[:, None], y_test,
                                  lam=1e-4)
    assert scores["test_accuracy"][0] == 1.0
    assert scores["tp_share"][0] == pytest.approx(0.75)  # 30 TP of 40 correct
    assert scores["tn_share"][0] == pytest.approx(0.25)
    assert not scores["degenerate"][0]


def test_single_neuron_uninformative_feature_near_chance():
    rng = np.random.default_rng(9)
    X_train = rng.normal(size=(200, 1))
    y_train = np.array([0, 1] * 100)
    X_test = rng.normal(size=(200, 1))
    y_test = np.array([0, 1] * 100)
    scores = single_neuron_scores(X_train, y_train, X_test, y_test)
    assert abs(scores["test_accuracy"][0] - 0.5) < 0.05


def test_single_neuron_all_positive_predictions():
    X_train = np.zeros((10, 1))
    X_train[:, 0] = np.arange(10) * 0.01
    y_train = np.array([1] * 8 + [0] * 2)  # majority positive, weak feature
    scores = single_neuron_scores(X_train, y_train, X_train, y_train, lam=10.0)
    assert scores["tp_share"][0] == 1.0
    assert scores["tn_share"][0] == 0.0


def test_single_neuron_degenerate_shares_flagged():
    x = np.array([-1.0, 1.0, -1.0, 1.0])
    y_train = (x > 0).astype(int)
    y_test = 1 - y_train  # every prediction wrong on the test side
    scores = single_neuron_scores(x[:, None], y_train, x[:, None], y_test, lam=1e-4)
    assert scores["degenerate"][0]
    assert np.isnan(scores["tp_share"][0]) and np.isnan(scores["tn_share"][0])
    assert scores["test_accuracy"][0] == 0.0


def test_confusion_shares_basic():
    tp, tn, degenerate = confusion_shares([1, 1, 0, 0], [1, 0, 0, 1])
    assert (tp, tn, degenerate) == (0.5, 0.5, False)


def test_select_few_first_matches_best_single_feature():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(60, 4))
    y = (X[:, 2] > 0).astype(int)
    imp = np.array([0.0, 0.1, 0.5, 0.2])
    result = select_few(X, y, imp, k_max=3, lam=1e-3)
    assert result.order[0] == 2
    assert result.order[1:] == (3, 1, 0)  # remaining sorted by importance desc


def test_select_few_duplicate_feature_keeps_training_accuracy():
    rng = np.random.default_rng(11)
    x = np.concatenate([rng.normal(-2, 0.3, 30), rng.normal(2, 0.3, 30)])
    y = (x > 0).astype(int)
    X = np.column_stack([x, x])
    result = select_few(X, y, np.array([1.0, 0.9]), k_max=2, lam=1e-3)
    assert result.train_accuracy[0] == result.train_accuracy[1] == 1.0


def test_select_few_two_channel_pattern_needs_both():
    rng = np.random.default_rng(12)
    a = rng.normal(size=400)
    b = rng.normal(size=400)
    y = ((a + b) > 0).astype(int)
    X = np.column_stack([a, b])
    imp = np.array([0.3, 0.3])
    result = select_few(X, y, imp, k_max=2, lam=1e-4)
    assert result.train_accuracy[1] > result.train_accuracy[0]


def test_select_few_order_is_permutation_and_truncates():
    rng = np.random.default_rng(13)
    X = rng.normal(size=(30, 5))
    y = (X[:, 0] > 0).astype(int)
    imp = rng.random(5)
    with pytest.warns(UserWarning, match="truncating"):
        result = select_few(X, y, imp, k_max=9, lam=1e-3)
    assert sorted(result.order) == [0, 1, 2, 3, 4]
    assert result.train_accuracy.size == 5


def test_select_few_reports_test_accuracy():
    rng = np.random.default_rng(14)
    x = np.concatenate([rng.normal(-2, 0.4, 40), rng.normal(2, 0.4, 40)])
    y = (x > 0).astype(int)
    X = x[:, None]
    result = select_few(X, y, np.array([0.5]), k_max=1, X_test=X, y_test=y, lam=1e-3)
    assert result.test_accuracy[0] == 1.0


def test_mean_spikes_silent_unit():
    means, stds = mean_spikes_per_utterance(np.zeros((5, 2)))
    assert means.tolist() == [0.0, 0.0]
    assert stds.tolist() == [0.0, 0.0]


def test_mean_spikes_population_std():
    means, stds = mean_spikes_per_utterance(np.array([[10.0], [20.0]]))
    assert means[0] == 15.0
    assert stds[0] == 5.0
