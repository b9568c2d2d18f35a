"""Linear classification and retrieval metrics over image signatures.

The classifier is one-vs-rest l2-regularized logistic regression trained by
minibatch SGD (a logistic substitute for a linear SVM: same linear scoring
rule, smooth loss instead of hinge).  Scores double as retrieval rankings
for the average-precision metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import io as fvio
from .errors import ArgumentError, FormatError, FvcError, NotFittedError
from .validation import as_matrix, as_vector, check_count, check_positive, frozen_array


@dataclass(frozen=True)
class LinearModel:
    """One-vs-rest scorer: weights (C, S), bias (C,), ascending class_ids."""

    weights: np.ndarray
    bias: np.ndarray
    class_ids: tuple

    def __post_init__(self):
        weights = frozen_array(as_matrix(self.weights, "weights"))
        bias = frozen_array(as_vector(self.bias, "bias", dim=weights.shape[0]))
        ids = tuple(int(c) for c in self.class_ids)
        if len(ids) != weights.shape[0]:
            raise ArgumentError(
                f"class_ids has {len(ids)} entries, weights has {weights.shape[0]} rows"
            )
        if len(ids) < 2:
            raise ArgumentError(f"need at least 2 classes, got {len(ids)}")
        if list(ids) != sorted(set(ids)):
            raise ArgumentError("class_ids must be strictly ascending")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "class_ids", ids)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _targets(labels: np.ndarray, class_ids) -> np.ndarray:
    """Per-class +/-1 target matrix (N, C)."""
    return np.where(labels[:, None] == np.asarray(class_ids)[None, :], 1.0, -1.0)


def _objective(w, b, x, t, l2) -> float:
    z = x @ w.T + b
    return float(np.logaddexp(0.0, -t * z).sum(axis=1).mean()) + 0.5 * l2 * float((w**2).sum())


def _gradients(w, b, x, t, l2):
    z = x @ w.T + b
    # d/dz log(1 + exp(-t z)) = -t / (1 + exp(t z))
    dz = -t / (1.0 + np.exp(np.clip(t * z, -500.0, 500.0)))
    dz /= x.shape[0]
    g_w = dz.T @ x + l2 * w
    g_b = dz.sum(axis=0)
    return g_w, g_b


def train_linear(signatures, labels, l2: float = 1e-4, epochs: int = 50,
                 lr: float = 0.1, batch_size: int = 32, seed=0):
    """Fit the one-vs-rest scorer.  Returns (LinearModel, losses).

    losses[0] is the full-data objective at the zero initialization,
    losses[i] the value after epoch i; the final entry must not exceed the
    first (asserted).
    """
    x = as_matrix(signatures, "signatures")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ArgumentError(
            f"labels must be 1-D with {x.shape[0]} entries, got shape {y.shape}"
        )
    y = y.astype(int)
    check_positive(lr, "lr")
    check_positive(l2, "l2", strict=False)
    check_count(epochs, "epochs", minimum=0)
    check_count(batch_size, "batch_size", minimum=1)
    class_ids = sorted(set(int(c) for c in y))
    if len(class_ids) < 2:
        raise ArgumentError(f"need at least 2 classes in labels, got {len(class_ids)}")
    t = _targets(y, class_ids)
    n = x.shape[0]
    w = np.zeros((len(class_ids), x.shape[1]))
    b = np.zeros(len(class_ids))
    rng = np.random.default_rng(seed)
    losses = [_objective(w, b, x, t, l2)]
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            take = perm[start:start + batch_size]
            g_w, g_b = _gradients(w, b, x[take], t[take], l2)
            w = w - lr * g_w
            b = b - lr * g_b
        losses.append(_objective(w, b, x, t, l2))
    if not np.isfinite(losses[-1]) or losses[-1] > losses[0] + 1e-12 * max(1.0, abs(losses[0])):
        raise FvcError(
            f"classifier training diverged: loss {losses[0]:.6g} -> {losses[-1]:.6g}"
        )
    model = LinearModel(weights=w, bias=b, class_ids=tuple(class_ids))
    return model, np.asarray(losses)


def decision_scores(model: LinearModel, signatures) -> np.ndarray:
    x = as_matrix(signatures, "signatures")
    if x.shape[1] != model.dim:
        raise ArgumentError(
            f"signatures have dimension {x.shape[1]}, model expects {model.dim}"
        )
    return x @ model.weights.T + model.bias


def predict(model: LinearModel, signature):
    """Predicted class id and the per-class scores for one signature.

    Score ties resolve to the lower class id.
    """
    scores = decision_scores(model, np.atleast_2d(np.asarray(signature, dtype=np.float64)))[0]
    return model.class_ids[int(np.argmax(scores))], scores


def predict_batch(model: LinearModel, signatures):
    scores = decision_scores(model, signatures)
    ids = np.asarray(model.class_ids)[np.argmax(scores, axis=1)]
    return ids, scores


def average_precision(scores, relevant) -> float:
    """AP of one ranking: mean precision at each relevant rank.

    Sorting is stable on descending score, so ties keep input order.
    Returns nan when nothing is relevant.
    """
    scores = as_vector(scores, "scores")
    rel = np.asarray(relevant, dtype=bool)
    if rel.shape != scores.shape:
        raise ArgumentError(f"relevant shape {rel.shape} does not match scores {scores.shape}")
    if not rel.any():
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    hits = rel[order]
    ranks = np.flatnonzero(hits) + 1
    precisions = np.cumsum(hits)[ranks - 1] / ranks
    return float(precisions.mean())


def evaluate(model: LinearModel, signatures, labels) -> dict:
    """Accuracy, per-class precision and AP, and mean AP on a labeled set.

    Classes with no positive example in ``labels`` are left out of the AP
    table and the mean; a class never predicted gets precision 0.
    """
    x = as_matrix(signatures, "signatures")
    y = np.asarray(labels).astype(int)
    if y.shape[0] != x.shape[0]:
        raise ArgumentError(
            f"labels must have {x.shape[0]} entries, got {y.shape[0]}"
        )
    ids, scores = predict_batch(model, x)
    accuracy = float((ids == y).mean())
    precision = {}
    ap = {}
    for col, cid in enumerate(model.class_ids):
        picked = ids == cid
        precision[cid] = float((y[picked] == cid).mean()) if picked.any() else 0.0
        value = average_precision(scores[:, col], y == cid)
        if not np.isnan(value):
            ap[cid] = value
    mean_ap = float(np.mean(list(ap.values()))) if ap else float("nan")
    return {"accuracy": accuracy, "precision": precision, "ap": ap, "mean_ap": mean_ap}


def save_linear(path, model: LinearModel) -> None:
    fvio.write_model_file(
        path, fvio.TAG_LINEAR, (model.n_classes, model.dim),
        [np.asarray(model.class_ids, dtype=np.float64), model.weights, model.bias],
    )


def load_linear(path) -> LinearModel:
    def payload_len(dims):
        c, s = dims
        return c + c * s + c

    dims, payload = fvio.read_model_file(path, fvio.TAG_LINEAR, 2, payload_len)
    c, s = dims
    raw_ids = payload[:c]
    if np.any(raw_ids != np.round(raw_ids)):
        raise FormatError(f"{path}: non-integer class id at byte 14")
    weights = payload[c:c + c * s].reshape(c, s)
    bias = payload[c + c * s:]
    return LinearModel(weights=weights, bias=bias,
                       class_ids=tuple(int(v) for v in raw_ids))


class LinearClassifier(BaseEstimator, ClassifierMixin):
    """Estimator wrapper over :func:`train_linear`.

    After fit: model_ and loss_trace_.
    """

    def __init__(self, l2: float = 1e-4, epochs: int = 50, lr: float = 0.1,
                 batch_size: int = 32, seed: int = 0):
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        self.model_, self.loss_trace_ = train_linear(
            X, y, l2=self.l2, epochs=self.epochs, lr=self.lr,
            batch_size=self.batch_size, seed=self.seed,
        )
        return self

    def _check_fitted(self) -> LinearModel:
        if not hasattr(self, "model_"):
            raise NotFittedError("LinearClassifier is not fitted; call fit first")
        return self.model_

    def decision_function(self, X):
        return decision_scores(self._check_fitted(), X)

    def predict(self, X):
        return predict_batch(self._check_fitted(), X)[0]

    def evaluate(self, X, y) -> dict:
        return evaluate(self._check_fitted(), X, y)
