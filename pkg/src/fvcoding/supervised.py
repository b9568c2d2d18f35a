"""Supervised coding: a one-layer feature coder trained through image labels.

The coder maps a feature x to the non-negative code c = max(0, P^T x + b).
Training wires the coder into a small classification head: per-image codes
are sum-pooled, power-normalized (the pooled code is non-negative, so that
is an elementwise s**alpha), and fed to a multinomial logistic layer; P, b,
and the head are optimized jointly by minibatch SGD on the cross-entropy
plus l2 penalties on the two weight matrices.  The head is discarded; only
the coder ships.  Codes from the trained coder, sparsified to their top-k1
entries, later serve as the per-feature priors of hybrid pursuit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import io as fvio
from .errors import ArgumentError, FvcError, NotFittedError
from .io import FeatureSet
from .validation import as_matrix, as_vector, check_count, check_positive, frozen_array


@dataclass(frozen=True)
class SupervisedEncoder:
    """The learned coder: projection (D, M1) and bias (M1,)."""

    projection: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        projection = frozen_array(as_matrix(self.projection, "projection"))
        bias = frozen_array(as_vector(self.bias, "bias", dim=projection.shape[1]))
        object.__setattr__(self, "projection", projection)
        object.__setattr__(self, "bias", bias)

    @property
    def d(self) -> int:
        return self.projection.shape[0]

    @property
    def m1(self) -> int:
        return self.projection.shape[1]


def sup_encode(encoder: SupervisedEncoder, x) -> np.ndarray:
    """Non-negative code max(0, P^T x + b); accepts one feature or rows."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = as_matrix(np.atleast_2d(arr), "x")
    if rows.shape[1] != encoder.d:
        raise ArgumentError(f"x has dimension {rows.shape[1]}, coder expects {encoder.d}")
    codes = np.maximum(rows @ encoder.projection + encoder.bias, 0.0)
    return codes[0] if single else codes


def sparsify_top_k(code, k: int) -> np.ndarray:
    """Zero all but the k largest entries; ties keep the lower index."""
    arr = np.asarray(code, dtype=np.float64)
    check_count(k, "k", minimum=0)
    single = arr.ndim == 1
    rows = np.atleast_2d(arr)
    if k >= rows.shape[1]:
        out = rows.copy()
        return out[0] if single else out
    order = np.argsort(-rows, axis=1, kind="stable")
    mask = np.zeros_like(rows, dtype=bool)
    np.put_along_axis(mask, order[:, :k], True, axis=1)
    out = np.where(mask, rows, 0.0)
    return out[0] if single else out


def guidance_codes(encoder: SupervisedEncoder, features, k: int) -> np.ndarray:
    """Top-k sparsified coder output for every feature row."""
    return sparsify_top_k(sup_encode(encoder, as_matrix(features, "features")), k)


def _pooled_powered(x, p, bias, alpha):
    """Forward pass of one image: activations, pooled code, powered code."""
    a = x @ p + bias
    z = np.maximum(a, 0.0)
    s = z.sum(axis=0)
    return a, s, s**alpha


def _loss_and_grads(p, bias, w, d, images, y_idx, alpha, l2):
    """Cross-entropy plus l2 objective and its exact gradients on a batch.

    images is a list of (T_i, D) arrays, y_idx the matching class indices.
    The power-normalization derivative at a pooled value of 0 is taken as 0.
    """
    batch = len(images)
    h_rows = np.empty((batch, p.shape[1]))
    cache = []
    for i, x in enumerate(images):
        a, s, h = _pooled_powered(x, p, bias, alpha)
        cache.append((a, s))
        h_rows[i] = h
    logits = h_rows @ w.T + d
    shift = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shift).sum(axis=1))
    ce = float((log_z - shift[np.arange(batch), y_idx]).mean())
    loss = ce + 0.5 * l2 * (float((p**2).sum()) + float((w**2).sum()))

    probs = np.exp(shift - log_z[:, None])
    dlogits = probs
    dlogits[np.arange(batch), y_idx] -= 1.0
    dlogits /= batch
    g_w = dlogits.T @ h_rows + l2 * w
    g_d = dlogits.sum(axis=0)
    dh = dlogits @ w
    g_p = l2 * p
    g_b = np.zeros_like(bias)
    for i, x in enumerate(images):
        a, s = cache[i]
        safe_s = np.where(s > 0, s, 1.0)
        ds = np.where(s > 0, dh[i] * alpha * safe_s ** (alpha - 1.0), 0.0)
        da = (a > 0) * ds
        g_p += x.T @ da
        g_b += da.sum(axis=0)
    return loss, g_p, g_b, g_w, g_d


def train_sup_encoder(feature_sets, m1: int, epochs: int = 30, lr: float = 0.05,
                      batch_size: int = 16, l2: float = 1e-4, alpha: float = 0.5,
                      seed=0):
    """Train the coder on labeled feature sets.  Returns (encoder, losses).

    losses[0] is the full-data objective before training, losses[i] the value
    after epoch i; the final entry must not exceed the first (asserted).
    """
    if not feature_sets:
        raise ArgumentError("feature_sets must be non-empty")
    check_count(m1, "m1", minimum=1)
    check_count(epochs, "epochs", minimum=0)
    check_count(batch_size, "batch_size", minimum=1)
    check_positive(lr, "lr")
    check_positive(l2, "l2", strict=False)
    if not 0.0 < alpha <= 1.0:
        raise ArgumentError(f"alpha must be in (0, 1], got {alpha}")
    images = []
    labels = []
    for fs in feature_sets:
        if not isinstance(fs, FeatureSet):
            raise ArgumentError("feature_sets entries must be FeatureSet instances")
        if fs.label is None:
            raise ArgumentError(f"feature set {fs.image_id!r} has no label")
        images.append(fs.features)
        labels.append(int(fs.label))
    dim = images[0].shape[1]
    if any(x.shape[1] != dim for x in images):
        raise ArgumentError("all feature sets must share one dimensionality")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ArgumentError(f"need at least 2 classes, got {len(classes)}")
    index_of = {c: i for i, c in enumerate(classes)}
    y_idx = np.asarray([index_of[c] for c in labels])

    rng = np.random.default_rng(seed)
    p = rng.standard_normal((dim, m1)) / np.sqrt(dim)
    bias = np.zeros(m1)
    w = rng.standard_normal((len(classes), m1)) / np.sqrt(m1)
    d = np.zeros(len(classes))

    def full_loss():
        return _loss_and_grads(p, bias, w, d, images, y_idx, alpha, l2)[0]

    losses = [full_loss()]
    n = len(images)
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            take = perm[start:start + batch_size]
            _, g_p, g_b, g_w, g_d = _loss_and_grads(
                p, bias, w, d, [images[i] for i in take], y_idx[take], alpha, l2
            )
            p = p - lr * g_p
            bias = bias - lr * g_b
            w = w - lr * g_w
            d = d - lr * g_d
        losses.append(full_loss())
    if not np.isfinite(losses[-1]) or losses[-1] > losses[0] + 1e-12 * max(1.0, abs(losses[0])):
        raise FvcError(
            f"supervised coder training diverged: loss {losses[0]:.6g} -> {losses[-1]:.6g}"
        )
    return SupervisedEncoder(projection=p, bias=bias), np.asarray(losses)


def save_sup_encoder(path, encoder: SupervisedEncoder) -> None:
    fvio.write_model_file(
        path, fvio.TAG_SUP_CODER, (encoder.d, encoder.m1),
        [encoder.projection, encoder.bias],
    )


def load_sup_encoder(path) -> SupervisedEncoder:
    def payload_len(dims):
        d, m1 = dims
        return d * m1 + m1

    dims, payload = fvio.read_model_file(path, fvio.TAG_SUP_CODER, 2, payload_len)
    d, m1 = dims
    return SupervisedEncoder(
        projection=payload[:d * m1].reshape(d, m1), bias=payload[d * m1:]
    )


class SupervisedCoder(BaseEstimator):
    """Estimator wrapper over :func:`train_sup_encoder`.

    fit takes a list of labeled FeatureSet objects (or an explicit label
    sequence).  After fit: encoder_ and loss_trace_.
    """

    def __init__(self, m1: int = 32, epochs: int = 30, lr: float = 0.05,
                 batch_size: int = 16, l2: float = 1e-4, alpha: float = 0.5,
                 seed: int = 0):
        self.m1 = m1
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.l2 = l2
        self.alpha = alpha
        self.seed = seed

    def fit(self, X, y=None):
        sets = list(X)
        if y is not None:
            sets = [
                FeatureSet(features=fs.features, image_id=fs.image_id, label=int(label))
                for fs, label in zip(sets, y)
            ]
        self.encoder_, self.loss_trace_ = train_sup_encoder(
            sets, self.m1, epochs=self.epochs, lr=self.lr,
            batch_size=self.batch_size, l2=self.l2, alpha=self.alpha, seed=self.seed,
        )
        return self

    def _check_fitted(self) -> SupervisedEncoder:
        if not hasattr(self, "encoder_"):
            raise NotFittedError("SupervisedCoder is not fitted; call fit first")
        return self.encoder_

    def transform(self, X):
        return sup_encode(self._check_fitted(), as_matrix(X, "X"))

    def guidance(self, X, k: int):
        return guidance_codes(self._check_fitted(), X, k)
