"""PCA decorrelation of local features.

Plain eigendecomposition of the sample covariance (n - 1 denominator).  The
projection keeps the top eigenvectors by eigenvalue; each column's sign is
fixed so its largest-magnitude entry is positive, which pins the transform
down to a deterministic representative.  Whitening (dividing projected
coordinates by sqrt(eigenvalue)) is available behind a flag and off by
default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import io as fvio
from .errors import ArgumentError, NotFittedError
from .io import FeatureSet
from .validation import as_matrix, frozen_array

# variance floor used only when whitening, to keep 1/sqrt(eig) finite
_WHITEN_FLOOR = 1e-12


@dataclass(frozen=True)
class PcaTransform:
    """A fitted projection: x -> (x - mean) @ projection.

    projection is (D, D') with orthonormal columns (within 1e-8);
    eigenvalues is the matching (D',) non-increasing, non-negative spectrum.
    """

    mean: np.ndarray
    projection: np.ndarray
    eigenvalues: np.ndarray
    whiten: bool = False

    def __post_init__(self):
        mean = frozen_array(np.asarray(self.mean, dtype=np.float64))
        proj = frozen_array(as_matrix(self.projection, "projection"))
        eig = frozen_array(np.asarray(self.eigenvalues, dtype=np.float64))
        if mean.ndim != 1:
            raise ArgumentError(f"mean must be 1-D, got shape {mean.shape}")
        if proj.shape[0] != mean.shape[0]:
            raise ArgumentError(
                f"projection rows {proj.shape[0]} do not match mean length {mean.shape[0]}"
            )
        if eig.shape != (proj.shape[1],):
            raise ArgumentError(
                f"eigenvalues shape {eig.shape} does not match projection columns {proj.shape[1]}"
            )
        gram = proj.T @ proj
        if not np.allclose(gram, np.eye(proj.shape[1]), atol=1e-8):
            raise ArgumentError("projection columns are not orthonormal within 1e-8")
        if np.any(np.diff(eig) > 1e-12):
            raise ArgumentError("eigenvalues must be non-increasing")
        if eig.size and eig[-1] < 0:
            raise ArgumentError("eigenvalues must be non-negative")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def d_in(self) -> int:
        return self.projection.shape[0]

    @property
    def d_out(self) -> int:
        return self.projection.shape[1]


def fit_pca(features, target_dim: int, whiten: bool = False) -> PcaTransform:
    """Fit a PCA projection to (N, D) features, keeping ``target_dim`` axes.

    Requires target_dim <= D and N >= max(2, target_dim).  Eigenvalues of the
    (n - 1)-normalized covariance, sorted non-increasing; tiny negative
    eigenvalues from roundoff are clipped to 0.
    """
    x = as_matrix(features, "features")
    n, d = x.shape
    if not 1 <= target_dim <= d:
        raise ArgumentError(f"target_dim must be in [1, {d}], got {target_dim}")
    if n < max(2, target_dim):
        raise ArgumentError(f"need at least {max(2, target_dim)} samples, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:target_dim]
    eigvals = np.maximum(eigvals[order], 0.0)
    vecs = eigvecs[:, order]
    # deterministic sign: largest-magnitude entry of each axis made positive
    anchor = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[anchor, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    return PcaTransform(mean=mean, projection=vecs, eigenvalues=eigvals, whiten=whiten)


def apply_pca(transform: PcaTransform, fs: FeatureSet) -> FeatureSet:
    """Project a feature set, preserving image id and label."""
    if fs.d != transform.d_in:
        raise ArgumentError(
            f"feature dimensionality {fs.d} does not match transform input {transform.d_in}"
        )
    projected = (fs.features - transform.mean) @ transform.projection
    if transform.whiten:
        projected = projected / np.sqrt(np.maximum(transform.eigenvalues, _WHITEN_FLOOR))
    return FeatureSet(features=projected, image_id=fs.image_id, label=fs.label)


def save_pca(path, transform: PcaTransform) -> None:
    fvio.write_model_file(
        path,
        fvio.TAG_PCA,
        (transform.d_in, transform.d_out, 1 if transform.whiten else 0),
        [transform.mean, transform.projection, transform.eigenvalues],
    )


def load_pca(path) -> PcaTransform:
    def payload_len(dims):
        d, d_out, _ = dims
        return d + d * d_out + d_out

    dims, payload = fvio.read_model_file(path, fvio.TAG_PCA, 3, payload_len)
    d, d_out, whiten = dims
    mean = payload[:d]
    proj = payload[d:d + d * d_out].reshape(d, d_out)
    eig = payload[d + d * d_out:]
    return PcaTransform(mean=mean, projection=proj, eigenvalues=eig, whiten=bool(whiten))


class PcaDecorrelator(BaseEstimator, TransformerMixin):
    """Estimator wrapper over :func:`fit_pca` / :func:`apply_pca`.

    Parameters
    ----------
    n_components : int
        Output dimensionality D'.
    whiten : bool, default False
        Divide projected coordinates by sqrt(eigenvalue).
    """

    def __init__(self, n_components: int = 2, whiten: bool = False):
        self.n_components = n_components
        self.whiten = whiten

    def fit(self, X, y=None):
        self.transform_ = fit_pca(X, self.n_components, whiten=self.whiten)
        return self

    def transform(self, X):
        if not hasattr(self, "transform_"):
            raise NotFittedError("PcaDecorrelator is not fitted; call fit first")
        fs = X if isinstance(X, FeatureSet) else FeatureSet(features=as_matrix(X, "X"))
        return apply_pca(self.transform_, fs).features
