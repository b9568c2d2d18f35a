"""Dictionary learning by alternating pursuit and least squares.

Each outer iteration infers codes for every feature with the current bases,
then solves a ridge-regularized least-squares problem for the bases with the
codes held fixed, and finally renormalizes columns to unit norm.  The
least-squares step cannot increase the reconstruction error for the fixed
codes; that descent is asserted before renormalization, and the
pre-renormalization error is what the returned trace records.  Codes are
re-inferred from the renormalized bases at the next iteration.

A column no code selected (or one that collapsed to zero) is replaced by the
currently worst-reconstructed feature; successive replacements take
successively worse features so replacements stay distinct.

The hybrid learner runs the same scheme over the concatenated pair
[B_d B_r] with hybrid pursuit as the inference step and per-feature guidance
codes as priors; its trace records the full surrogate objective
(reconstruction plus fidelity term).  With m2 = 0, k2 = 0, and fidelity
weight 0 it reduces exactly to the plain learner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from . import io as fvio
from .errors import ArgumentError, FvcError, NotFittedError
from .pursuit import MpConfig, hybrid_mp_encode_batch, mp_encode_batch
from .validation import as_matrix, check_count, check_positive, check_unit_columns, frozen_array

_DESCENT_TOL = 1e-9


@dataclass(frozen=True)
class Dictionary:
    """A (D, M) basis matrix with unit-norm columns (within 1e-10)."""

    bases: np.ndarray

    def __post_init__(self):
        bases = frozen_array(as_matrix(self.bases, "bases"))
        if bases.shape[0] < 1:
            raise ArgumentError("bases must have at least one row")
        check_unit_columns(bases, "bases", tol=1e-10)
        object.__setattr__(self, "bases", bases)

    @property
    def d(self) -> int:
        return self.bases.shape[0]

    @property
    def m(self) -> int:
        return self.bases.shape[1]


def _init_bases(x: np.ndarray, m: int, rng) -> np.ndarray:
    """m distinct nonzero feature rows, transposed and column-normalized."""
    norms = np.linalg.norm(x, axis=1)
    ok = np.flatnonzero(norms > 0)
    if ok.size < m:
        raise ArgumentError(
            f"need at least {m} features with nonzero norm to initialize, got {ok.size}"
        )
    idx = rng.choice(ok, size=m, replace=False)
    return x[idx].T / norms[idx]


def _ls_bases(x: np.ndarray, u: np.ndarray, ridge: float) -> np.ndarray:
    """Minimize |X - U B^T|_F^2 + ridge |B|_F^2 over B for fixed codes U."""
    m = u.shape[1]
    if m == 0:
        return np.zeros((x.shape[1], 0))
    gram = u.T @ u + ridge * np.eye(m)
    return np.linalg.solve(gram, u.T @ x).T


def _replace_and_normalize(b: np.ndarray, used: np.ndarray, x: np.ndarray,
                           recon_err_rows: np.ndarray) -> np.ndarray:
    b = b.copy()
    norms = np.linalg.norm(b, axis=0)
    replace = np.flatnonzero(~used | (norms == 0))
    if replace.size:
        row_norms = np.linalg.norm(x, axis=1)
        order = [i for i in np.argsort(-recon_err_rows, kind="stable") if row_norms[i] > 0]
        if len(order) < replace.size:
            raise ArgumentError(
                f"cannot replace {replace.size} dead columns from "
                f"{len(order)} nonzero features"
            )
        for rank, col in enumerate(replace):
            b[:, col] = x[order[rank]]
        norms = np.linalg.norm(b, axis=0)
    return b / norms


def learn_dictionary(features, m: int, k: int, iters: int = 20, seed=0,
                     ridge: float = 1e-8):
    """Alternating pursuit/least-squares fit of a (D, m) dictionary.

    Returns (Dictionary, trace) where trace[i] is the mean per-feature
    reconstruction error after iteration i's least-squares step, measured
    before column renormalization.  The trace is produced by fresh codes per
    iteration, so while each least-squares step descends (asserted), the
    sequence across iterations is only typically decreasing.
    """
    x = as_matrix(features, "features")
    check_count(m, "m", minimum=1)
    check_count(k, "k", minimum=0)
    check_count(iters, "iters", minimum=0)
    check_positive(ridge, "ridge")
    rng = np.random.default_rng(seed)
    b = _init_bases(x, m, rng)
    n = x.shape[0]
    trace = []
    for _ in range(iters):
        u, _ = mp_encode_batch(b, x, k)
        recon = x - u @ b.T
        err_before = float((recon**2).sum()) / n
        b_new = _ls_bases(x, u, ridge)
        recon_new = x - u @ b_new.T
        err_after = float((recon_new**2).sum()) / n
        if err_after > err_before + _DESCENT_TOL * max(1.0, err_before):
            raise FvcError(
                f"least-squares update increased reconstruction error: "
                f"{err_before:.12g} -> {err_after:.12g}"
            )
        trace.append(err_after)
        used = (u != 0).any(axis=0)
        b = _replace_and_normalize(b_new, used, x, (recon_new**2).sum(axis=1))
    return Dictionary(bases=b), np.asarray(trace)


def learn_hybrid_dictionaries(features, guidance_codes, m1: int, m2: int,
                              config: MpConfig, iters: int = 20, seed=0,
                              ridge: float = 1e-8):
    """Joint alternating fit of the discriminative/residual dictionary pair.

    guidance_codes is the (N, m1) matrix of per-feature priors c.  Returns
    (Dictionary_d, Dictionary_r, trace) where trace[i] is the mean surrogate
    objective (reconstruction plus fidelity term) after iteration i's joint
    least-squares step, before renormalization.
    """
    x = as_matrix(features, "features")
    codes_c = as_matrix(guidance_codes, "guidance_codes")
    check_count(m1, "m1", minimum=1)
    check_count(m2, "m2", minimum=0)
    check_count(iters, "iters", minimum=0)
    check_positive(ridge, "ridge")
    if codes_c.shape != (x.shape[0], m1):
        raise ArgumentError(
            f"guidance_codes must be {(x.shape[0], m1)}, got {codes_c.shape}"
        )
    lam = config.fidelity_weight
    rng = np.random.default_rng(seed)
    b_all = _init_bases(x, m1 + m2, rng)
    b_d, b_r = b_all[:, :m1], b_all[:, m1:]
    n = x.shape[0]
    trace = []
    for _ in range(iters):
        u_d, u_r, _ = hybrid_mp_encode_batch(b_d, b_r, x, codes_c, config)
        u = np.hstack([u_d, u_r])
        fidelity = lam * float(((u_d - codes_c) ** 2).sum()) / n
        recon = x - u_d @ b_d.T - u_r @ b_r.T
        obj_before = float((recon**2).sum()) / n + fidelity
        b_new = _ls_bases(x, u, ridge)
        recon_new = x - u @ b_new.T
        obj_after = float((recon_new**2).sum()) / n + fidelity
        if obj_after > obj_before + _DESCENT_TOL * max(1.0, obj_before):
            raise FvcError(
                f"least-squares update increased the surrogate objective: "
                f"{obj_before:.12g} -> {obj_after:.12g}"
            )
        trace.append(obj_after)
        used = (u != 0).any(axis=0)
        b_all = _replace_and_normalize(b_new, used, x, (recon_new**2).sum(axis=1))
        b_d, b_r = b_all[:, :m1], b_all[:, m1:]
    return Dictionary(bases=b_d), Dictionary(bases=b_r), np.asarray(trace)


def save_dictionary(path, dictionary: Dictionary) -> None:
    fvio.write_model_file(
        path, fvio.TAG_DICTIONARY, (dictionary.d, dictionary.m), [dictionary.bases]
    )


def load_dictionary(path) -> Dictionary:
    dims, payload = fvio.read_model_file(
        path, fvio.TAG_DICTIONARY, 2, lambda dims: dims[0] * dims[1]
    )
    d, m = dims
    return Dictionary(bases=payload.reshape(d, m))


def save_hybrid_dictionaries(path, bases_d: Dictionary, bases_r: Dictionary) -> None:
    if bases_d.d != bases_r.d:
        raise ArgumentError(
            f"dictionary pair row counts differ: {bases_d.d} vs {bases_r.d}"
        )
    fvio.write_model_file(
        path, fvio.TAG_HYBRID_DICTIONARY,
        (bases_d.d, bases_d.m, bases_r.m),
        [bases_d.bases, bases_r.bases],
    )


def load_hybrid_dictionaries(path):
    def payload_len(dims):
        d, m1, m2 = dims
        return d * (m1 + m2)

    dims, payload = fvio.read_model_file(path, fvio.TAG_HYBRID_DICTIONARY, 3, payload_len)
    d, m1, m2 = dims
    b_d = payload[:d * m1].reshape(d, m1)
    b_r = payload[d * m1:].reshape(d, m2)
    return Dictionary(bases=b_d), Dictionary(bases=b_r)


class DictionaryLearner(BaseEstimator):
    """Estimator wrapper over :func:`learn_dictionary`.

    After fit: dictionary_ and error_trace_.
    """

    def __init__(self, m: int = 64, k: int = 10, iters: int = 20,
                 seed: int = 0, ridge: float = 1e-8):
        self.m = m
        self.k = k
        self.iters = iters
        self.seed = seed
        self.ridge = ridge

    def fit(self, X, y=None):
        self.dictionary_, self.error_trace_ = learn_dictionary(
            X, self.m, self.k, iters=self.iters, seed=self.seed, ridge=self.ridge
        )
        return self

    def transform(self, X):
        if not hasattr(self, "dictionary_"):
            raise NotFittedError("DictionaryLearner is not fitted; call fit first")
        codes, _ = mp_encode_batch(self.dictionary_, as_matrix(X, "X"), self.k)
        return codes


class HybridDictionaryLearner(BaseEstimator):
    """Estimator wrapper over :func:`learn_hybrid_dictionaries`.

    fit takes the feature matrix and the matching (N, m1) guidance codes.
    After fit: dictionary_d_, dictionary_r_, objective_trace_.
    """

    def __init__(self, m1: int = 32, m2: int = 32, k1: int = 10, k2: int = 10,
                 fidelity_weight: float = 0.5, iters: int = 20,
                 seed: int = 0, ridge: float = 1e-8):
        self.m1 = m1
        self.m2 = m2
        self.k1 = k1
        self.k2 = k2
        self.fidelity_weight = fidelity_weight
        self.iters = iters
        self.seed = seed
        self.ridge = ridge

    def _config(self) -> MpConfig:
        return MpConfig(k1=self.k1, k2=self.k2, fidelity_weight=self.fidelity_weight)

    def fit(self, X, guidance_codes):
        self.dictionary_d_, self.dictionary_r_, self.objective_trace_ = (
            learn_hybrid_dictionaries(
                X, guidance_codes, self.m1, self.m2, self._config(),
                iters=self.iters, seed=self.seed, ridge=self.ridge,
            )
        )
        return self

    def transform(self, X, guidance_codes):
        if not hasattr(self, "dictionary_d_"):
            raise NotFittedError("HybridDictionaryLearner is not fitted; call fit first")
        u_d, u_r, _ = hybrid_mp_encode_batch(
            self.dictionary_d_, self.dictionary_r_,
            as_matrix(X, "X"), guidance_codes, self._config(),
        )
        return u_d, u_r