"""Permutation importance, few-neuron readout selection and spike statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import derive_seed
from .readout import LinearModel, accuracy, fit_logreg, predict


@dataclass(frozen=True)
class ImportanceReport:
    """Per-feature drop in accuracy when that feature's column is shuffled."""

    importances: np.ndarray      # mean over repeats
    stds: np.ndarray             # std over repeats
    repeats: int
    seed: int
    split: str
    columns: tuple | None = None


@dataclass(frozen=True)
class SelectionResult:
    """Feature order for few-neuron readouts and the per-k refit accuracies."""

    order: tuple[int, ...]
    train_accuracy: np.ndarray
    test_accuracy: np.ndarray | None = None


def permutation_importance(model: LinearModel, X, y, repeats=10, seed=0,
                           split="test") -> ImportanceReport:
    """importance(f) = accuracy(X) - mean over repeats of accuracy with
    column f permuted; permutations are seeded per (repeat, feature)."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    columns = getattr(X, "columns", None)
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    y = np.asarray(y).ravel()
    n, p = X.shape
    Xs = (X - model.feature_mean) / model.feature_std
    z = Xs @ model.weights + model.bias
    base = float(np.mean((z >= 0.0) == y))
    importances = np.empty(p)
    stds = np.empty(p)
    for f in range(p):
        col = Xs[:, f]
        w_f = model.weights[f]
        accs = np.empty(repeats)
        for r in range(repeats):
            rng = np.random.default_rng(derive_seed(seed, "perm", r, f))
            perm = rng.permutation(n)
            z_perm = z + w_f * (col[perm] - col)
            accs[r] = np.mean((z_perm >= 0.0) == y)
        importances[f] = base - accs.mean()
        stds[f] = accs.std()
    return ImportanceReport(importances=importances, stds=stds, repeats=repeats,
                            seed=seed, split=split, columns=columns)


def confusion_shares(y_true, y_pred):
    """Shares of true positives and true negatives among correct predictions.

    Returns (tp_share, tn_share, degenerate); both shares are NaN and the flag
    set when there are no correct predictions at all.
    """
    y_true = np.asarray(y_true).ravel()
    y_pred = np.asarray(y_pred).ravel()
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    tn = int(np.sum((y_pred == 0) & (y_true == 0)))
    if tp + tn == 0:
        return float("nan"), float("nan"), True
    return tp / (tp + tn), tn / (tp + tn), False


def single_neuron_scores(X_train, y_train, X_test, y_test, lam=1.0, tol=1e-8,
                         max_iter=10000):
    """Fit a one-feature readout per feature; score it on the test split.

    Returns dict of arrays: train_accuracy, test_accuracy, tp_share, tn_share,
    degenerate (True where the feature yields no correct test predictions).
    """
    X_train = np.asarray(getattr(X_train, "values", X_train), dtype=np.float64)
    X_test = np.asarray(getattr(X_test, "values", X_test), dtype=np.float64)
    y_train = np.asarray(y_train).ravel()
    y_test = np.asarray(y_test).ravel()
    if X_train.shape[0] == 0 or X_test.shape[0] == 0:
        raise ValueError("train and test splits must be non-empty")
    p = X_train.shape[1]
    out = {k: np.empty(p) for k in ("train_accuracy", "test_accuracy", "tp_share", "tn_share")}
    out["degenerate"] = np.zeros(p, dtype=bool)
    for f in range(p):
        model = fit_logreg(X_train[:, [f]], y_train, lam=lam, tol=tol, max_iter=max_iter)
        out["train_accuracy"][f] = accuracy(model, X_train[:, [f]], y_train)
        labels, _ = predict(model, X_test[:, [f]])
        out["test_accuracy"][f] = float(np.mean(labels == y_test))
        tp, tn, degenerate = confusion_shares(y_test, labels)
        out["tp_share"][f], out["tn_share"][f] = tp, tn
        out["degenerate"][f] = degenerate
    return out


def select_few(X_train, y_train, importances, k_max=10, X_test=None, y_test=None,
               lam=1.0, tol=1e-8, max_iter=10000) -> SelectionResult:
    """Order features for few-neuron readouts and refit per subset size.

    The first feature maximizes single-feature training accuracy; the rest
    follow by descending importance. Ties break toward the lowest feature id.
    A model is refit on the first k features for k = 1..k_max.
    """
    X_train = np.asarray(getattr(X_train, "values", X_train), dtype=np.float64)
    y_train = np.asarray(y_train).ravel()
    importances = np.asarray(importances, dtype=np.float64)
    p = X_train.shape[1]
    if importances.size != p:
        raise ValueError("one importance per feature required")
    if k_max > p:
        warnings.warn(f"k_max={k_max} exceeds feature count {p}; truncating")
        k_max = p
    single_train = np.empty(p)
    for f in range(p):
        model = fit_logreg(X_train[:, [f]], y_train, lam=lam, tol=tol, max_iter=max_iter)
        single_train[f] = accuracy(model, X_train[:, [f]], y_train)
    first = int(np.argmax(single_train))  # argmax takes the lowest id on ties
    rest = sorted((f for f in range(p) if f != first),
                  key=lambda f: (-importances[f], f))
    order = [first] + rest
    train_acc = np.empty(k_max)
    test_acc = np.empty(k_max) if X_test is not None else None
    if X_test is not None:
        X_test = np.asarray(getattr(X_test, "values", X_test), dtype=np.float64)
        y_test = np.asarray(y_test).ravel()
    for k in range(1, k_max + 1):
        cols = order[:k]
        model = fit_logreg(X_train[:, cols], y_train, lam=lam, tol=tol, max_iter=max_iter)
        train_acc[k - 1] = accuracy(model, X_train[:, cols], y_train)
        if test_acc is not None:
            test_acc[k - 1] = accuracy(model, X_test[:, cols], y_test)
    return SelectionResult(order=tuple(order), train_accuracy=train_acc,
                           test_accuracy=test_acc)


def mean_spikes_per_utterance(counts):
    """Mean and population std of per-utterance spike counts, per unit.

    counts: (n_utterances, n_units) spike-count matrix.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] < 1:
        raise ValueError("need a (n_utterances, n_units) matrix with >= 1 row")
    return counts.mean(axis=0), counts.std(axis=0)
