"""Matching-pursuit inference for the sparse and hybrid coding models.

Plain pursuit greedily picks, for each of k iterations, the (index,
coefficient) pair that most reduces the residual norm; with unit-norm
columns the optimal coefficient for column j is r^T b_j.  The zero update is
always a candidate, so the residual norm never increases and the iteration
budget is an upper bound, not a guarantee of k updates.  Repeated selection
of an index accumulates into one coefficient.  Ties go to the lower index.

Hybrid pursuit (Algorithm below) spends k1 iterations on the discriminative
dictionary against the objective

    |x - B_d u_d - B_r u_r|^2 + fidelity_weight * |u_d - c|^2

using the closed-form per-candidate coefficient
(r^T b_j + fidelity_weight * (c_j - u_dj)) / (1 + fidelity_weight), then k2
plain pursuit iterations on the residual dictionary.  Phase 2 runs the exact
same routine as plain pursuit, so a k1 = 0 hybrid call reproduces
``mp_encode`` on the residual dictionary bit for bit.

All coefficient denominators treat column norms as exactly 1; validation
rejects dictionaries whose column norms are off by more than 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .validation import as_vector, check_count, check_positive, check_unit_columns, frozen_array


def _bases_of(b) -> np.ndarray:
    """Accept either a raw (D, M) array or an object with a .bases array."""
    arr = getattr(b, "bases", b)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ArgumentError(f"bases must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class MpConfig:
    """Inference budgets and weights shared by the encoders.

    k is the plain-pursuit budget; k1/k2 the hybrid budgets; fidelity_weight
    the prior-attachment weight (lambda); noise_var the sigma^2 of the
    observation model.
    """

    k: int = 10
    k1: int = 10
    k2: int = 10
    fidelity_weight: float = 0.5
    noise_var: float = 1.0

    def __post_init__(self):
        check_count(self.k, "k", minimum=0)
        check_count(self.k1, "k1", minimum=0)
        check_count(self.k2, "k2", minimum=0)
        check_positive(self.fidelity_weight, "fidelity_weight", strict=False)
        check_positive(self.noise_var, "noise_var")


@dataclass(frozen=True)
class SparseCode:
    """A pursuit result: coefficients, their active index set, the residual."""

    values: np.ndarray
    support: tuple
    residual: np.ndarray

    def __post_init__(self):
        values = frozen_array(np.asarray(self.values, dtype=np.float64))
        residual = frozen_array(np.asarray(self.residual, dtype=np.float64))
        support = tuple(int(j) for j in self.support)
        if any(j < 0 or j >= values.shape[0] for j in support):
            raise ArgumentError("support index out of range")
        if list(support) != sorted(set(support)):
            raise ArgumentError("support must be sorted and duplicate-free")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "residual", residual)
        object.__setattr__(self, "support", support)

    @property
    def l0(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class HybridCode:
    """A hybrid pursuit result: both code vectors and the final residual."""

    values_d: np.ndarray
    support_d: tuple
    values_r: np.ndarray
    support_r: tuple
    residual: np.ndarray

    def __post_init__(self):
        values_d = frozen_array(np.asarray(self.values_d, dtype=np.float64))
        values_r = frozen_array(np.asarray(self.values_r, dtype=np.float64))
        residual = frozen_array(np.asarray(self.residual, dtype=np.float64))
        for name, support, size in (
            ("support_d", self.support_d, values_d.shape[0]),
            ("support_r", self.support_r, values_r.shape[0]),
        ):
            support = tuple(int(j) for j in support)
            if any(j < 0 or j >= size for j in support):
                raise ArgumentError(f"{name} index out of range")
            if list(support) != sorted(set(support)):
                raise ArgumentError(f"{name} must be sorted and duplicate-free")
            object.__setattr__(self, name, support)
        object.__setattr__(self, "values_d", values_d)
        object.__setattr__(self, "values_r", values_r)
        object.__setattr__(self, "residual", residual)


def _support_of(values: np.ndarray) -> tuple:
    return tuple(int(j) for j in np.flatnonzero(values))


def _greedy_steps(bases: np.ndarray, r: np.ndarray, k: int, values: np.ndarray) -> np.ndarray:
    """Up to k plain pursuit steps; mutates values, returns the residual."""
    if bases.shape[1] == 0:
        return r
    for _ in range(k):
        corr = bases.T @ r
        j = int(np.argmax(np.abs(corr)))
        coef = corr[j]
        r_new = r - coef * bases[:, j]
        # the zero update is a candidate: stop unless the step strictly helps
        if r_new @ r_new >= r @ r:
            break
        values[j] += coef
        r = r_new
    return r


def _greedy_batch_steps(bases: np.ndarray, resid: np.ndarray, k: int,
                        values: np.ndarray) -> None:
    """Row-parallel form of :func:`_greedy_steps`; mutates values and resid."""
    if bases.shape[1] == 0:
        return
    active = np.arange(resid.shape[0])
    for _ in range(k):
        if active.size == 0:
            break
        r = resid[active]
        corr = r @ bases
        j = np.argmax(np.abs(corr), axis=1)
        coef = corr[np.arange(active.size), j]
        r_new = r - coef[:, None] * bases[:, j].T
        improved = np.einsum("ij,ij->i", r_new, r_new) < np.einsum("ij,ij->i", r, r)
        rows = active[improved]
        values[rows, j[improved]] += coef[improved]
        resid[rows] = r_new[improved]
        active = rows


def mp_encode(bases, x, k: int) -> SparseCode:
    """Greedy matching pursuit of x over unit-norm bases with budget k."""
    b = _bases_of(bases)
    check_unit_columns(b, "bases")
    x = as_vector(x, "x", dim=b.shape[0])
    check_count(k, "k", minimum=0)
    values = np.zeros(b.shape[1])
    r = _greedy_steps(b, x.copy(), k, values)
    return SparseCode(values=values, support=_support_of(values), residual=r)


def mp_encode_batch(bases, x_rows, k: int):
    """Pursuit of every row of (N, D) x_rows.  Returns (codes (N, M), residuals).

    Same algorithm as :func:`mp_encode` run over all rows at once; results
    agree with the single-feature routine up to floating-point associativity
    of the underlying matrix products.
    """
    b = _bases_of(bases)
    check_unit_columns(b, "bases")
    x_rows = np.asarray(x_rows, dtype=np.float64)
    if x_rows.ndim != 2 or x_rows.shape[1] != b.shape[0]:
        raise ArgumentError(
            f"x_rows must be (N, {b.shape[0]}), got shape {x_rows.shape}"
        )
    check_count(k, "k", minimum=0)
    n = x_rows.shape[0]
    values = np.zeros((n, b.shape[1]))
    resid = x_rows.copy()
    _greedy_batch_steps(b, resid, k, values)
    return values, resid


def hybrid_mp_encode(bases_d, bases_r, x, code_prior, config: MpConfig) -> HybridCode:
    """Two-phase pursuit: k1 prior-guided steps on bases_d, k2 plain on bases_r."""
    b_d = _bases_of(bases_d)
    b_r = _bases_of(bases_r)
    check_unit_columns(b_d, "bases_d")
    check_unit_columns(b_r, "bases_r")
    if b_d.shape[0] != b_r.shape[0]:
        raise ArgumentError(
            f"bases_d and bases_r row counts differ: {b_d.shape[0]} vs {b_r.shape[0]}"
        )
    x = as_vector(x, "x", dim=b_d.shape[0])
    c = as_vector(code_prior, "code_prior", dim=b_d.shape[1])
    lam = config.fidelity_weight

    values_d = np.zeros(b_d.shape[1])
    r = x.copy()
    if lam == 0.0:
        # zero fidelity weight makes phase 1 plain pursuit over bases_d
        r = _greedy_steps(b_d, r, config.k1, values_d)
    elif b_d.shape[1] > 0:
        for _ in range(config.k1):
            corr = b_d.T @ r
            dev = values_d - c
            ubar = (corr - lam * dev) / (1.0 + lam)
            # objective change of each candidate update relative to no update
            delta = -2.0 * ubar * corr + ubar**2 + lam * ((dev + ubar) ** 2 - dev**2)
            j = int(np.argmin(delta))
            ub = ubar[j]
            r_new = r - ub * b_d[:, j]
            change = (r_new @ r_new - r @ r) + lam * ((dev[j] + ub) ** 2 - dev[j] ** 2)
            if change >= 0.0:
                break
            values_d[j] += ub
            r = r_new

    values_r = np.zeros(b_r.shape[1])
    r = _greedy_steps(b_r, r, config.k2, values_r)
    return HybridCode(
        values_d=values_d,
        support_d=_support_of(values_d),
        values_r=values_r,
        support_r=_support_of(values_r),
        residual=r,
    )


def hybrid_mp_encode_batch(bases_d, bases_r, x_rows, code_priors, config: MpConfig):
    """Hybrid pursuit of every row of x_rows against per-row priors.

    Returns (codes_d (N, M1), codes_r (N, M2), residuals (N, D)).
    """
    b_d = _bases_of(bases_d)
    b_r = _bases_of(bases_r)
    check_unit_columns(b_d, "bases_d")
    check_unit_columns(b_r, "bases_r")
    x_rows = np.asarray(x_rows, dtype=np.float64)
    priors = np.asarray(code_priors, dtype=np.float64)
    if x_rows.ndim != 2 or x_rows.shape[1] != b_d.shape[0]:
        raise ArgumentError(
            f"x_rows must be (N, {b_d.shape[0]}), got shape {x_rows.shape}"
        )
    if priors.shape != (x_rows.shape[0], b_d.shape[1]):
        raise ArgumentError(
            f"code_priors must be {(x_rows.shape[0], b_d.shape[1])}, got {priors.shape}"
        )
    lam = config.fidelity_weight
    n = x_rows.shape[0]
    values_d = np.zeros((n, b_d.shape[1]))
    resid = x_rows.copy()
    if lam == 0.0:
        _greedy_batch_steps(b_d, resid, config.k1, values_d)
    elif b_d.shape[1] > 0:
        active = np.arange(n)
        for _ in range(config.k1):
            if active.size == 0:
                break
            r = resid[active]
            corr = r @ b_d
            dev = values_d[active] - priors[active]
            ubar = (corr - lam * dev) / (1.0 + lam)
            delta = -2.0 * ubar * corr + ubar**2 + lam * ((dev + ubar) ** 2 - dev**2)
            j = np.argmin(delta, axis=1)
            rows_idx = np.arange(active.size)
            ub = ubar[rows_idx, j]
            dev_j = dev[rows_idx, j]
            r_new = r - ub[:, None] * b_d[:, j].T
            change = (
                np.einsum("ij,ij->i", r_new, r_new)
                - np.einsum("ij,ij->i", r, r)
                + lam * ((dev_j + ub) ** 2 - dev_j**2)
            )
            improved = change < 0.0
            rows = active[improved]
            values_d[rows, j[improved]] += ub[improved]
            resid[rows] = r_new[improved]
            active = rows
    values_r = np.zeros((n, b_r.shape[1]))
    _greedy_batch_steps(b_r, resid, config.k2, values_r)
    return values_d, values_r, resid


def objective_i(bases, x, values, l1_scale: float, noise_var: float = 1.0) -> float:
    """Sparse-coding objective |x - B u|^2 / noise_var + l1_scale * |u|_1."""
    b = _bases_of(bases)
    x = as_vector(x, "x", dim=b.shape[0])
    u = as_vector(values, "values", dim=b.shape[1])
    check_positive(noise_var, "noise_var")
    check_positive(l1_scale, "l1_scale", strict=False)
    r = x - b @ u
    return float(r @ r) / noise_var + l1_scale * float(np.abs(u).sum())


def objective_ii(bases_d, bases_r, x, values_d, values_r, code_prior,
                 fidelity_weight: float, noise_var: float = 1.0) -> float:
    """Hybrid surrogate |x - B_d u_d - B_r u_r|^2 / noise_var + w |u_d - c|^2."""
    b_d = _bases_of(bases_d)
    b_r = _bases_of(bases_r)
    x = as_vector(x, "x", dim=b_d.shape[0])
    u_d = as_vector(values_d, "values_d", dim=b_d.shape[1])
    u_r = as_vector(values_r, "values_r", dim=b_r.shape[1])
    c = as_vector(code_prior, "code_prior", dim=b_d.shape[1])
    check_positive(noise_var, "noise_var")
    check_positive(fidelity_weight, "fidelity_weight", strict=False)
    r = x - b_d @ u_d - b_r @ u_r
    dev = u_d - c
    return float(r @ r) / noise_var + fidelity_weight * float(dev @ dev)
