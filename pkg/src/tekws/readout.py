"""L2-regularized logistic regression on spike-count features.

The readout minimizes mean logistic loss plus (lambda/2)*||w||^2 with an
unpenalized bias, on internally standardized features. The objective and its
exact gradient are exposed so the fit can be verified against finite
differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.special import expit


@dataclass
class FeatureMatrix:
    """Samples x features spike-count matrix with (layer, unit) column tags."""

    values: np.ndarray
    columns: tuple[tuple[str, int], ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if len(self.columns) != self.values.shape[1]:
            raise ValueError("one (layer, unit) tag per column required")


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    lam: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    n_iter: int = 0
    columns: tuple | None = None


def logistic_objective(wb, X, y, lam):
    """Mean logistic loss + (lam/2)*||w||^2 and its gradient.

    wb stacks the weights and the (unpenalized) bias as the last entry.
    X is assumed standardized when used inside the fit.
    """
    w, b = wb[:-1], wb[-1]
    z = X @ w + b
    n = y.size
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * (w @ w))
    r = expit(z) - y
    grad = np.empty_like(wb)
    grad[:-1] = X.T @ r / n + lam * w
    grad[-1] = r.mean()
    return loss, grad


def fit_logreg(X, y, lam=1.0, tol=1e-8, max_iter=10000) -> LinearModel:
    """Fit the readout by L-BFGS with the analytic gradient.

    Converged when the gradient infinity-norm drops below tol. Features are
    standardized internally; constant columns are left centered at zero.
    """
    columns = getattr(X, "columns", None)
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"X must be (n_samples, n_features) matching y, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("need samples of both classes to fit")
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be binary 0/1")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    Xs = (X - mean) / std

    trace = []

    def record(wb):
        trace.append(logistic_objective(wb, Xs, y, lam)[0])

    wb0 = np.zeros(X.shape[1] + 1)
    record(wb0)
    res = scipy.optimize.minimize(
        logistic_objective, wb0, args=(Xs, y, lam), jac=True, method="L-BFGS-B",
        callback=record, options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-16, "maxcor": 30})
    grad_inf = float(np.max(np.abs(res.jac)))
    return LinearModel(weights=res.x[:-1], bias=float(res.x[-1]), lam=lam,
                       feature_mean=mean, feature_std=std,
                       loss_trace=np.array(trace), converged=grad_inf < tol,
                       n_iter=int(res.nit), columns=columns)


def decision_values(model: LinearModel, X):
    X = np.asarray(getattr(X, "values", X), dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.size:
        raise ValueError(
            f"feature count mismatch: model has {model.weights.size}, input has "
            f"{X.shape[1] if X.ndim == 2 else 'non-2-D'}")
    Xs = (X - model.feature_mean) / model.feature_std
    return Xs @ model.weights + model.bias


def predict(model: LinearModel, X):
    """Predicted labels and probabilities; label 1 when probability >= 0.5."""
    z = decision_values(model, X)
    probs = expit(z)
    return (z >= 0.0).astype(np.int64), probs


def accuracy(model: LinearModel, X, y) -> float:
    y = np.asarray(y).ravel()
    if y.size == 0:
        raise ValueError("cannot score an empty sample set")
    labels, _ = predict(model, X)
    return float(np.mean(labels == y))


def save_model(model: LinearModel, csv_path, extra=None):
    """Dump weights as CSV rows feature,layer,unit,weight plus a JSON sidecar
    with the regularization, convergence and standardization record."""
    columns = model.columns or tuple(("feature", i) for i in range(model.weights.size))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("feature,layer,unit,weight\n")
        for i, ((layer, unit), w) in enumerate(zip(columns, model.weights)):
            f.write(f"{i},{layer},{unit},{w!r}\n")
    header = {
        "lambda": model.lam,
        "bias": model.bias,
        "converged": model.converged,
        "n_iter": model.n_iter,
        "standardization": {
            "mean": [float(v) for v in model.feature_mean],
            "std": [float(v) for v in model.feature_std],
        },
    }
    if extra:
        header.update(extra)
    json_path = str(csv_path) + ".json"
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
