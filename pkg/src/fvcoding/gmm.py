"""Diagonal-covariance Gaussian mixtures fit by EM.

Initialization is k-means++ seeding (no Lloyd refinement); E-steps run in
log space; M-steps floor every variance at var_floor.  The fit returns the
model together with the mean per-feature log-likelihood trace, which is
non-decreasing within roundoff.  A component that loses all responsibility
is re-seeded from the feature farthest from the current means (global
variance, 1/N weight, weights renormalized); a re-seed restarts the
monotone-trace guarantee at that iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import io as fvio
from .errors import ArgumentError, NotFittedError
from .validation import as_matrix, check_count, check_positive, frozen_array

_LOG_2PI = float(np.log(2.0 * np.pi))
_EMPTY_WEIGHT = 1e-10


@dataclass(frozen=True)
class GmmModel:
    """Mixture weights (K,), means (K, D), per-dimension variances (K, D)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        weights = frozen_array(np.asarray(self.weights, dtype=np.float64))
        means = frozen_array(as_matrix(self.means, "means"))
        variances = frozen_array(as_matrix(self.variances, "variances"))
        if weights.ndim != 1:
            raise ArgumentError(f"weights must be 1-D, got shape {weights.shape}")
        k = weights.shape[0]
        if means.shape[0] != k or variances.shape != means.shape:
            raise ArgumentError(
                f"inconsistent shapes: weights {weights.shape}, means {means.shape}, "
                f"variances {variances.shape}"
            )
        if np.any(weights < 0):
            raise ArgumentError("weights must be non-negative")
        if abs(float(weights.sum()) - 1.0) > 1e-10:
            raise ArgumentError(f"weights sum to {weights.sum():.12g}, expected 1 within 1e-10")
        if np.any(variances <= 0):
            raise ArgumentError("variances must be strictly positive")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.means.shape[1]


def _component_log_densities(model: GmmModel, x_rows: np.ndarray) -> np.ndarray:
    """log(w_k) + log N(x | mu_k, diag sigma2_k) for every row, shape (N, K)."""
    inv_var = 1.0 / model.variances
    quad = (
        (x_rows**2) @ inv_var.T
        - 2.0 * (x_rows @ (model.means * inv_var).T)
        + ((model.means**2) * inv_var).sum(axis=1)
    )
    log_det = np.log(model.variances).sum(axis=1)
    log_norm = -0.5 * (model.d * _LOG_2PI + log_det)
    return np.log(model.weights) + log_norm - 0.5 * quad


def log_likelihood(model: GmmModel, features) -> float:
    """Mean per-feature log-likelihood of (N, D) features."""
    x = as_matrix(features, "features")
    if x.shape[1] != model.d:
        raise ArgumentError(f"features have dimension {x.shape[1]}, model expects {model.d}")
    logp = _component_log_densities(model, x)
    m = logp.max(axis=1)
    return float((m + np.log(np.exp(logp - m[:, None]).sum(axis=1))).mean())


def responsibilities(model: GmmModel, x) -> np.ndarray:
    """Posterior component probabilities, (K,) for a vector, (N, K) for rows.

    Computed in log space, then renormalized so each row sums to 1.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = as_matrix(np.atleast_2d(arr), "x")
    if rows.shape[1] != model.d:
        raise ArgumentError(f"x has dimension {rows.shape[1]}, model expects {model.d}")
    logp = _component_log_densities(model, rows)
    logp = logp - logp.max(axis=1, keepdims=True)
    gamma = np.exp(logp)
    gamma /= gamma.sum(axis=1, keepdims=True)
    return gamma[0] if single else gamma


def nearest_prototype_distance(model: GmmModel, x) -> float | np.ndarray:
    """Euclidean distance to the closest mixture mean; scalar or per row."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = as_matrix(np.atleast_2d(arr), "x")
    if rows.shape[1] != model.d:
        raise ArgumentError(f"x has dimension {rows.shape[1]}, model expects {model.d}")
    d2 = (
        (rows**2).sum(axis=1, keepdims=True)
        - 2.0 * rows @ model.means.T
        + (model.means**2).sum(axis=1)
    )
    out = np.sqrt(np.maximum(d2, 0.0).min(axis=1))
    return float(out[0]) if single else out


def _kmeanspp_means(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[0]
    means = np.empty((k, x.shape[1]))
    means[0] = x[rng.integers(n)]
    if k == 1:
        return means
    d2 = ((x - means[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        means[i] = x[idx]
        d2 = np.minimum(d2, ((x - means[i]) ** 2).sum(axis=1))
    return means


def fit_gmm(features, k: int, max_iters: int = 100, tol: float = 1e-6,
            seed=0, var_floor: float = 1e-6):
    """EM fit.  Returns (GmmModel, trace of mean log-likelihood per E-step).

    Stops early when the trace improves by less than tol relative to
    max(1, |previous value|).
    """
    x = as_matrix(features, "features")
    check_count(k, "k", minimum=1)
    check_count(max_iters, "max_iters", minimum=1)
    check_positive(tol, "tol", strict=False)
    check_positive(var_floor, "var_floor")
    n, d = x.shape
    if n < k:
        raise ArgumentError(f"need at least k={k} features, got {n}")
    rng = np.random.default_rng(seed)

    global_var = np.maximum(x.var(axis=0), var_floor)
    means = _kmeanspp_means(x, k, rng)
    variances = np.tile(global_var, (k, 1))
    weights = np.full(k, 1.0 / k)
    model = GmmModel(weights=weights, means=means, variances=variances)

    trace = []
    prev = -np.inf
    for _ in range(max_iters):
        logp = _component_log_densities(model, x)
        m = logp.max(axis=1)
        lse = m + np.log(np.exp(logp - m[:, None]).sum(axis=1))
        ll = float(lse.mean())
        trace.append(ll)
        if np.isfinite(prev) and ll - prev <= tol * max(1.0, abs(prev)):
            break
        prev = ll

        gamma = np.exp(logp - lse[:, None])
        nk = gamma.sum(axis=0)
        empty = nk <= _EMPTY_WEIGHT
        safe_nk = np.where(empty, 1.0, nk)
        weights = nk / n
        means = (gamma.T @ x) / safe_nk[:, None]
        variances = np.maximum((gamma.T @ (x**2)) / safe_nk[:, None] - means**2, var_floor)
        if np.any(empty):
            dist = (
                (x**2).sum(axis=1, keepdims=True)
                - 2.0 * x @ means.T
                + (means**2).sum(axis=1)
            )
            order = np.argsort(-np.maximum(dist, 0.0).min(axis=1), kind="stable")
            for rank, comp in enumerate(np.flatnonzero(empty)):
                means[comp] = x[order[rank % n]]
                variances[comp] = global_var
                weights[comp] = 1.0 / n
        weights = weights / weights.sum()
        model = GmmModel(weights=weights, means=means, variances=variances)
    return model, np.asarray(trace)


def save_gmm(path, model: GmmModel) -> None:
    fvio.write_model_file(
        path, fvio.TAG_GMM, (model.k, model.d),
        [model.weights, model.means, model.variances],
    )


def load_gmm(path) -> GmmModel:
    def payload_len(dims):
        k, d = dims
        return k + 2 * k * d

    dims, payload = fvio.read_model_file(path, fvio.TAG_GMM, 2, payload_len)
    k, d = dims
    weights = payload[:k]
    means = payload[k:k + k * d].reshape(k, d)
    variances = payload[k + k * d:].reshape(k, d)
    return GmmModel(weights=weights, means=means, variances=variances)


class DiagonalGaussianMixture(BaseEstimator):
    """Estimator wrapper over :func:`fit_gmm`.

    After fit: model_ (GmmModel) and log_likelihood_trace_ (1-D array).
    """

    def __init__(self, n_components: int = 8, max_iters: int = 100,
                 tol: float = 1e-6, var_floor: float = 1e-6, seed: int = 0):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.var_floor = var_floor
        self.seed = seed

    def fit(self, X, y=None):
        self.model_, self.log_likelihood_trace_ = fit_gmm(
            X, self.n_components, max_iters=self.max_iters,
            tol=self.tol, seed=self.seed, var_floor=self.var_floor,
        )
        return self

    def _check_fitted(self) -> GmmModel:
        if not hasattr(self, "model_"):
            raise NotFittedError("DiagonalGaussianMixture is not fitted; call fit first")
        return self.model_

    def predict_proba(self, X):
        return responsibilities(self._check_fitted(), as_matrix(X, "X"))

    def score(self, X, y=None):
        return log_likelihood(self._check_fitted(), X)

    def nearest_prototype_distance(self, X):
        return nearest_prototype_distance(self._check_fitted(), X)
