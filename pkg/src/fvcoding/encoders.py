"""Fisher-vector encoders and the image-level signature pipeline.

Per-feature encodings are gradients of a generative model's log-likelihood
with respect to its basis parameters, with inferred codes held fixed:

* sparse coding: G = (1/sigma^2) (x - B u*) u*^T, one (D, M) block;
* hybrid coding: the same outer product of the final residual with u_d* and
  with u_r*, two blocks;
* Gaussian mixture baseline: columns gamma_k (x - mu_k) / sigma_k, a (D, K)
  block, plus an optional second block of variance gradients
  gamma_k / sqrt(2) ((x - mu_k)^2 / sigma_k^2 - 1) behind a flag (off by
  default so signature sizes match the sparse encoders at M = K).

Constant factors dropped from the quadratic derivatives are absorbed by the
normalization below, as is any global 1/sigma^2 scale.

An image signature sum-pools the per-feature blocks, power-normalizes each
pooled block elementwise (sign(z) |z|^alpha), scales every block column to
unit l2 norm (columns that pooled to exactly zero stay zero), flattens each
block column-major, and concatenates the blocks.  Power normalization runs
before the per-column scaling, so the column scaling is exact in the final
vector.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .dictionary import Dictionary, learn_dictionary, learn_hybrid_dictionaries
from .errors import ArgumentError, NotFittedError
from .gmm import GmmModel, fit_gmm, responsibilities
from .io import FeatureSet
from .pursuit import MpConfig, hybrid_mp_encode, mp_encode
from .supervised import SupervisedEncoder, guidance_codes
from .validation import as_matrix, as_vector, frozen_array


@dataclass(frozen=True)
class ImageSignature:
    """A finalized image vector plus the fingerprint of its encoder."""

    vector: np.ndarray
    encoder_id: str

    def __post_init__(self):
        vector = frozen_array(as_vector(self.vector, "vector"))
        object.__setattr__(self, "vector", vector)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def fingerprint(tag: str, *arrays) -> str:
    """Deterministic short id for a model: hash of tag, shapes, and bytes."""
    h = hashlib.sha256()
    h.update(tag.encode("ascii"))
    for arr in arrays:
        a = np.ascontiguousarray(arr, dtype="<f8")
        h.update(str(a.shape).encode("ascii"))
        h.update(a.tobytes())
    return h.hexdigest()[:16]


def scfvc_encode(dictionary, x, config: MpConfig) -> np.ndarray:
    """Sparse-coding Fisher block (D, M) for one feature."""
    bases = dictionary.bases if isinstance(dictionary, Dictionary) else np.asarray(dictionary, dtype=np.float64)
    code = mp_encode(bases, x, config.k)
    x = np.asarray(x, dtype=np.float64)
    residual = x - bases @ code.values
    return np.outer(residual, code.values) / config.noise_var


def hscfvc_encode(bases_d, bases_r, x, code_prior, config: MpConfig):
    """Hybrid Fisher blocks ((D, M1), (D, M2)) for one feature."""
    b_d = bases_d.bases if isinstance(bases_d, Dictionary) else np.asarray(bases_d, dtype=np.float64)
    b_r = bases_r.bases if isinstance(bases_r, Dictionary) else np.asarray(bases_r, dtype=np.float64)
    code = hybrid_mp_encode(b_d, b_r, x, code_prior, config)
    x = np.asarray(x, dtype=np.float64)
    residual = x - b_d @ code.values_d - b_r @ code.values_r
    block_d = np.outer(residual, code.values_d) / config.noise_var
    block_r = np.outer(residual, code.values_r) / config.noise_var
    return block_d, block_r


def gmmfvc_encode(model: GmmModel, x, include_variances: bool = False):
    """Mixture Fisher block(s) for one feature.

    Returns the (D, K) mean-gradient block, or a (mean, variance) block pair
    when include_variances is set.
    """
    x = as_vector(x, "x", dim=model.d)
    gamma = responsibilities(model, x)
    sigma = np.sqrt(model.variances)
    diff = x[None, :] - model.means
    mean_block = (gamma[:, None] * diff / sigma).T
    if not include_variances:
        return mean_block
    var_block = (gamma[:, None] / np.sqrt(2.0) * (diff**2 / model.variances - 1.0)).T
    return mean_block, var_block


def pool_sum(blocks) -> np.ndarray:
    """Sum per-feature blocks of one shape into the pooled block."""
    blocks = list(blocks)
    if not blocks:
        raise ArgumentError("pool_sum needs at least one block")
    out = np.array(blocks[0], dtype=np.float64, copy=True)
    for blk in blocks[1:]:
        blk = np.asarray(blk, dtype=np.float64)
        if blk.shape != out.shape:
            raise ArgumentError(
                f"block shape {blk.shape} does not match {out.shape}"
            )
        out += blk
    return out


def power_normalize(z, alpha: float = 0.5) -> np.ndarray:
    """Elementwise sign(z) |z|^alpha for alpha in (0, 1]."""
    if not 0.0 < alpha <= 1.0:
        raise ArgumentError(f"alpha must be in (0, 1], got {alpha}")
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.abs(z) ** alpha


def intra_normalize(block) -> np.ndarray:
    """Scale each column to unit l2 norm; all-zero columns stay zero."""
    block = as_matrix(block, "block")
    norms = np.linalg.norm(block, axis=0)
    return block / np.where(norms == 0, 1.0, norms)


def l2_normalize(vector) -> np.ndarray:
    """Scale a vector to unit l2 norm; the zero vector stays zero."""
    vector = as_vector(vector, "vector")
    norm = np.linalg.norm(vector)
    return vector if norm == 0 else vector / norm


def finalize_blocks(blocks, alpha: float = 0.5) -> np.ndarray:
    """Power-normalize, column-normalize, and flatten pooled blocks."""
    pieces = []
    for blk in blocks:
        normalized = intra_normalize(power_normalize(blk, alpha))
        pieces.append(normalized.flatten(order="F"))
    if not pieces:
        raise ArgumentError("finalize_blocks needs at least one block")
    return np.concatenate(pieces)


def _feature_rows(x) -> np.ndarray:
    if isinstance(x, FeatureSet):
        return x.features
    return as_matrix(x, "features")


def scfvc_signature(dictionary, features, config: MpConfig, alpha: float = 0.5) -> np.ndarray:
    rows = _feature_rows(features)
    pooled = pool_sum([scfvc_encode(dictionary, x, config) for x in rows])
    return finalize_blocks([pooled], alpha)


def hscfvc_signature(bases_d, bases_r, coder: SupervisedEncoder, features,
                     config: MpConfig, alpha: float = 0.5) -> np.ndarray:
    rows = _feature_rows(features)
    priors = guidance_codes(coder, rows, config.k1)
    blocks = [
        hscfvc_encode(bases_d, bases_r, x, priors[t], config)
        for t, x in enumerate(rows)
    ]
    pooled_d = pool_sum([b[0] for b in blocks])
    pooled_r = pool_sum([b[1] for b in blocks])
    return finalize_blocks([pooled_d, pooled_r], alpha)


def gmmfvc_signature(model: GmmModel, features, include_variances: bool = False,
                     alpha: float = 0.5) -> np.ndarray:
    rows = _feature_rows(features)
    if include_variances:
        blocks = [gmmfvc_encode(model, x, include_variances=True) for x in rows]
        pooled_mean = pool_sum([b[0] for b in blocks])
        pooled_var = pool_sum([b[1] for b in blocks])
        return finalize_blocks([pooled_mean, pooled_var], alpha)
    pooled = pool_sum([gmmfvc_encode(model, x) for x in rows])
    return finalize_blocks([pooled], alpha)


def _stack_training_features(X) -> np.ndarray:
    if isinstance(X, FeatureSet):
        return X.features
    if isinstance(X, (list, tuple)) and X and isinstance(X[0], FeatureSet):
        return np.vstack([fs.features for fs in X])
    return as_matrix(X, "X")


class _SignatureEncoder(BaseEstimator, TransformerMixin):
    """Shared transform plumbing: rows of signatures from feature sets."""

    def encode(self, features) -> ImageSignature:
        raise NotImplementedError

    def transform(self, X):
        if isinstance(X, (FeatureSet, np.ndarray)):
            X = [X]
        return np.vstack([self.encode(fs).vector for fs in X])


class ScfvcImageEncoder(_SignatureEncoder):
    """Sparse-coding Fisher vector encoder.

    fit learns the dictionary on training features (stacked from a matrix, a
    FeatureSet, or a list of FeatureSet) unless a pre-built Dictionary is
    supplied.  After fit: dictionary_, error_trace_, encoder_id_.
    """

    def __init__(self, m: int = 200, k: int = 10, iters: int = 20,
                 seed: int = 0, ridge: float = 1e-8, alpha: float = 0.5,
                 noise_var: float = 1.0, dictionary: Dictionary | None = None):
        self.m = m
        self.k = k
        self.iters = iters
        self.seed = seed
        self.ridge = ridge
        self.alpha = alpha
        self.noise_var = noise_var
        self.dictionary = dictionary

    def fit(self, X, y=None):
        if self.dictionary is not None:
            self.dictionary_ = self.dictionary
            self.error_trace_ = np.asarray([])
        else:
            self.dictionary_, self.error_trace_ = learn_dictionary(
                _stack_training_features(X), self.m, self.k,
                iters=self.iters, seed=self.seed, ridge=self.ridge,
            )
        self.encoder_id_ = fingerprint("scfvc", self.dictionary_.bases)
        return self

    def _config(self) -> MpConfig:
        return MpConfig(k=self.k, noise_var=self.noise_var)

    def encode(self, features) -> ImageSignature:
        if not hasattr(self, "dictionary_"):
            raise NotFittedError("ScfvcImageEncoder is not fitted; call fit first")
        vec = scfvc_signature(self.dictionary_, features, self._config(), self.alpha)
        return ImageSignature(vector=vec, encoder_id=self.encoder_id_)


class HscfvcImageEncoder(_SignatureEncoder):
    """Hybrid Fisher vector encoder guided by a trained supervised coder.

    The coder supplies per-feature priors (its top-k1 sparsified codes); fit
    learns the dictionary pair against those priors unless a pre-built pair
    is supplied.  After fit: dictionary_d_, dictionary_r_, objective_trace_,
    encoder_id_.
    """

    def __init__(self, coder: SupervisedEncoder | None = None, m1: int = 100,
                 m2: int = 100, k1: int = 10, k2: int = 10,
                 fidelity_weight: float = 0.5, iters: int = 20, seed: int = 0,
                 ridge: float = 1e-8, alpha: float = 0.5, noise_var: float = 1.0,
                 dictionary_d: Dictionary | None = None,
                 dictionary_r: Dictionary | None = None):
        self.coder = coder
        self.m1 = m1
        self.m2 = m2
        self.k1 = k1
        self.k2 = k2
        self.fidelity_weight = fidelity_weight
        self.iters = iters
        self.seed = seed
        self.ridge = ridge
        self.alpha = alpha
        self.noise_var = noise_var
        self.dictionary_d = dictionary_d
        self.dictionary_r = dictionary_r

    def _config(self) -> MpConfig:
        return MpConfig(k1=self.k1, k2=self.k2,
                        fidelity_weight=self.fidelity_weight,
                        noise_var=self.noise_var)

    def fit(self, X, y=None):
        if self.coder is None:
            raise ArgumentError("HscfvcImageEncoder needs a trained supervised coder")
        if self.coder.m1 != self.m1:
            raise ArgumentError(
                f"coder produces {self.coder.m1}-dim codes but m1 is {self.m1}"
            )
        if self.dictionary_d is not None and self.dictionary_r is not None:
            self.dictionary_d_ = self.dictionary_d
            self.dictionary_r_ = self.dictionary_r
            self.objective_trace_ = np.asarray([])
        else:
            rows = _stack_training_features(X)
            priors = guidance_codes(self.coder, rows, self.k1)
            self.dictionary_d_, self.dictionary_r_, self.objective_trace_ = (
                learn_hybrid_dictionaries(
                    rows, priors, self.m1, self.m2, self._config(),
                    iters=self.iters, seed=self.seed, ridge=self.ridge,
                )
            )
        self.encoder_id_ = fingerprint(
            "hscfvc", self.dictionary_d_.bases, self.dictionary_r_.bases,
            self.coder.projection, self.coder.bias,
        )
        return self

    def encode(self, features) -> ImageSignature:
        if not hasattr(self, "dictionary_d_"):
            raise NotFittedError("HscfvcImageEncoder is not fitted; call fit first")
        vec = hscfvc_signature(
            self.dictionary_d_, self.dictionary_r_, self.coder,
            features, self._config(), self.alpha,
        )
        return ImageSignature(vector=vec, encoder_id=self.encoder_id_)


class GmmFvcImageEncoder(_SignatureEncoder):
    """Mixture-model Fisher vector baseline encoder.

    After fit: model_, log_likelihood_trace_, encoder_id_.
    """

    def __init__(self, n_components: int = 200, max_iters: int = 100,
                 tol: float = 1e-6, var_floor: float = 1e-6, seed: int = 0,
                 alpha: float = 0.5, include_variances: bool = False,
                 model: GmmModel | None = None):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.var_floor = var_floor
        self.seed = seed
        self.alpha = alpha
        self.include_variances = include_variances
        self.model = model

    def fit(self, X, y=None):
        if self.model is not None:
            self.model_ = self.model
            self.log_likelihood_trace_ = np.asarray([])
        else:
            self.model_, self.log_likelihood_trace_ = fit_gmm(
                _stack_training_features(X), self.n_components,
                max_iters=self.max_iters, tol=self.tol,
                seed=self.seed, var_floor=self.var_floor,
            )
        self.encoder_id_ = fingerprint(
            "gmmfvc", self.model_.weights, self.model_.means, self.model_.variances
        )
        return self

    def encode(self, features) -> ImageSignature:
        if not hasattr(self, "model_"):
            raise NotFittedError("GmmFvcImageEncoder is not fitted; call fit first")
        vec = gmmfvc_signature(
            self.model_, features, include_variances=self.include_variances,
            alpha=self.alpha,
        )
        return ImageSignature(vector=vec, encoder_id=self.encoder_id_)


def encode_image(features, encoder: _SignatureEncoder) -> ImageSignature:
    """Signature of one image's feature set under a fitted encoder."""
    return encoder.encode(features)
