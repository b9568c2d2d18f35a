"""Synthetic generators with known ground truth.

Model I draws a sparse-coding feature: u with i.i.d. Laplace entries,
x = B u + sigma * eps.  Model II draws a two-part feature: a discriminative
code u_d from the prior P(u_d | c) proportional to
exp(-|u_d|_1 / lambda2 - |u_d - c|_2 / lambda3) (unsquared l2, sampled by a
short Metropolis chain), an i.i.d. Laplace residual code u_r, and
x = B_d u_d + B_r u_r + sigma * eps.

Both samplers accept an optional sparse-support mode: a fixed number of
support indices is chosen per draw and the remaining coefficients are zeroed
after drawing a full coefficient vector.  That mode is a test convenience for
recovery checks; the generative stories above are the defaults.

All randomness flows through one numpy Generator per call; batch samplers
consume draws in a documented order (codes, then supports, then noise) so a
single draw equals row zero of a size-1 batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .io import FeatureSet
from .validation import (
    as_matrix,
    as_vector,
    check_count,
    check_positive,
    check_unit_columns,
    frozen_array,
)


@dataclass(frozen=True)
class GenModelI:
    """x = bases @ u + noise_std * eps with u ~ Laplace(laplace_scale)."""

    bases: np.ndarray
    laplace_scale: float
    noise_std: float

    def __post_init__(self):
        bases = frozen_array(as_matrix(self.bases, "bases"))
        check_unit_columns(bases, "bases", tol=1e-10)
        object.__setattr__(self, "bases", bases)
        check_positive(self.laplace_scale, "laplace_scale")
        # noise_std 0 is the noiseless model used by recovery checks
        check_positive(self.noise_std, "noise_std", strict=False)

    @property
    def d(self) -> int:
        return self.bases.shape[0]

    @property
    def m(self) -> int:
        return self.bases.shape[1]


@dataclass(frozen=True)
class GenModelII:
    """Two-dictionary feature model with a class-specific code prior."""

    bases_d: np.ndarray
    bases_r: np.ndarray
    code_prior: np.ndarray
    residual_scale: float
    sparsity_scale: float
    fidelity_scale: float
    noise_std: float

    def __post_init__(self):
        bases_d = frozen_array(as_matrix(self.bases_d, "bases_d"))
        bases_r = frozen_array(as_matrix(self.bases_r, "bases_r"))
        check_unit_columns(bases_d, "bases_d", tol=1e-10)
        check_unit_columns(bases_r, "bases_r", tol=1e-10)
        if bases_d.shape[0] != bases_r.shape[0]:
            raise ArgumentError(
                f"bases_d and bases_r row counts differ: "
                f"{bases_d.shape[0]} vs {bases_r.shape[0]}"
            )
        prior = frozen_array(as_vector(self.code_prior, "code_prior", dim=bases_d.shape[1]))
        object.__setattr__(self, "bases_d", bases_d)
        object.__setattr__(self, "bases_r", bases_r)
        object.__setattr__(self, "code_prior", prior)
        check_positive(self.residual_scale, "residual_scale")
        check_positive(self.sparsity_scale, "sparsity_scale")
        check_positive(self.fidelity_scale, "fidelity_scale")
        check_positive(self.noise_std, "noise_std", strict=False)

    @property
    def d(self) -> int:
        return self.bases_d.shape[0]

    @property
    def m_d(self) -> int:
        return self.bases_d.shape[1]

    @property
    def m_r(self) -> int:
        return self.bases_r.shape[1]


def random_unit_bases(d: int, m: int, rng) -> np.ndarray:
    """A (d, m) dictionary with i.i.d. Gaussian columns scaled to unit norm."""
    check_count(d, "d", minimum=1)
    check_count(m, "m", minimum=1)
    rng = np.random.default_rng(rng)
    b = rng.standard_normal((d, m))
    norms = np.linalg.norm(b, axis=0)
    if np.any(norms == 0):
        raise ArgumentError("degenerate zero column drawn for dictionary")
    return b / norms


def sample_laplace(rng, scale: float, size) -> np.ndarray:
    """Laplace(0, scale) via the inverse CDF u = -scale*sign(v)*ln(1-2|v|)."""
    check_positive(scale, "scale")
    rng = np.random.default_rng(rng)
    v = rng.random(size) - 0.5
    inner = np.maximum(1.0 - 2.0 * np.abs(v), np.finfo(np.float64).tiny)
    return -scale * np.sign(v) * np.log(inner)


def _sparse_mask(rng, n: int, m: int, k: int) -> np.ndarray:
    """Boolean (n, m) mask with exactly k True per row, uniform supports."""
    keys = rng.random((n, m))
    order = np.argsort(keys, axis=1)
    mask = np.zeros((n, m), dtype=bool)
    np.put_along_axis(mask, order[:, :k], True, axis=1)
    return mask


def sample_features_i(model: GenModelI, n: int, rng, sparsity: int | None = None):
    """Draw n features from Model I.  Returns (X (n, D), U (n, M)).

    Draw order: full Laplace code matrix, then (sparse mode only) one uniform
    key matrix for the supports, then the Gaussian noise matrix.
    """
    check_count(n, "n", minimum=1)
    rng = np.random.default_rng(rng)
    u = sample_laplace(rng, model.laplace_scale, (n, model.m))
    if sparsity is not None:
        k = check_count(sparsity, "sparsity", minimum=1)
        if k > model.m:
            raise ArgumentError(f"sparsity {k} exceeds dictionary size {model.m}")
        u = np.where(_sparse_mask(rng, n, model.m, k), u, 0.0)
    x = u @ model.bases.T
    if model.noise_std > 0:
        x = x + model.noise_std * rng.standard_normal((n, model.d))
    return x, u


def sample_feature_i(model: GenModelI, seed, sparsity: int | None = None):
    x, u = sample_features_i(model, 1, seed, sparsity=sparsity)
    return x[0], u[0]


def prior_log_density(model: GenModelII, u: np.ndarray) -> np.ndarray:
    """Unnormalized log P(u_d | c) for one code or a batch of rows."""
    u = np.asarray(u, dtype=np.float64)
    batch = np.atleast_2d(u)
    dev = batch - model.code_prior
    logp = (
        -np.abs(batch).sum(axis=1) / model.sparsity_scale
        - np.linalg.norm(dev, axis=1) / model.fidelity_scale
    )
    return logp if u.ndim == 2 else logp[0]


def metropolis_code_samples(model: GenModelII, n: int, rng, steps: int = 200):
    """Run n independent Metropolis chains targeting P(u_d | c).

    Chains start at the prior mean c; proposals are isotropic Gaussian steps
    with scale sparsity_scale / 2.  Per step the draw order is one proposal
    matrix then one uniform acceptance vector.  Returns (U_d (n, M1),
    mean acceptance rate).
    """
    check_count(n, "n", minimum=1)
    check_count(steps, "steps", minimum=0)
    rng = np.random.default_rng(rng)
    m = model.m_d
    states = np.tile(model.code_prior, (n, 1))
    logp = prior_log_density(model, states)
    step_scale = model.sparsity_scale / 2.0
    accepted = 0
    for _ in range(steps):
        proposals = states + step_scale * rng.standard_normal((n, m))
        logp_new = prior_log_density(model, proposals)
        accept = np.log(np.maximum(rng.random(n), np.finfo(np.float64).tiny)) < logp_new - logp
        states = np.where(accept[:, None], proposals, states)
        logp = np.where(accept, logp_new, logp)
        accepted += int(accept.sum())
    rate = accepted / (n * steps) if steps else 0.0
    return states, rate


def sample_features_ii(model: GenModelII, n: int, rng, mh_steps: int = 200,
                       residual_sparsity: int | None = None):
    """Draw n features from Model II.  Returns (X, U_d, U_r).

    Draw order: the Metropolis chains for U_d, then the Laplace residual
    codes (plus support keys in sparse mode), then the Gaussian noise.
    """
    check_count(n, "n", minimum=1)
    rng = np.random.default_rng(rng)
    u_d, _ = metropolis_code_samples(model, n, rng, steps=mh_steps)
    u_r = sample_laplace(rng, model.residual_scale, (n, model.m_r))
    if residual_sparsity is not None:
        k = check_count(residual_sparsity, "residual_sparsity", minimum=1)
        if k > model.m_r:
            raise ArgumentError(f"residual_sparsity {k} exceeds dictionary size {model.m_r}")
        u_r = np.where(_sparse_mask(rng, n, model.m_r, k), u_r, 0.0)
    x = u_d @ model.bases_d.T + u_r @ model.bases_r.T
    if model.noise_std > 0:
        x = x + model.noise_std * rng.standard_normal((n, model.d))
    return x, u_d, u_r


def sample_feature_ii(model: GenModelII, seed, mh_steps: int = 200,
                      residual_sparsity: int | None = None):
    x, u_d, u_r = sample_features_ii(
        model, 1, seed, mh_steps=mh_steps, residual_sparsity=residual_sparsity
    )
    return x[0], u_d[0], u_r[0]


def make_classification_set_i(
    d: int,
    m: int,
    n_classes: int,
    images_per_class: int,
    features_per_image: int,
    seed,
    laplace_scale: float = 1.0,
    noise_std: float = 0.1,
    sparsity: int | None = None,
) -> list[FeatureSet]:
    """Labeled Model-I images; each class owns its own random dictionary."""
    check_count(n_classes, "n_classes", minimum=1)
    check_count(images_per_class, "images_per_class", minimum=1)
    check_count(features_per_image, "features_per_image", minimum=1)
    rng = np.random.default_rng(seed)
    models = [
        GenModelI(random_unit_bases(d, m, rng), laplace_scale, noise_std)
        for _ in range(n_classes)
    ]
    sets = []
    for c, model in enumerate(models):
        for i in range(images_per_class):
            x, _ = sample_features_i(model, features_per_image, rng, sparsity=sparsity)
            sets.append(FeatureSet(features=x, image_id=f"class{c}_img{i:04d}", label=c))
    return sets


def make_classification_set_ii(
    d: int,
    m_d: int,
    m_r: int,
    n_classes: int,
    images_per_class: int,
    features_per_image: int,
    seed,
    prior_sparsity: int | None = None,
    prior_low: float = 0.5,
    prior_high: float = 1.5,
    residual_scale: float = 1.0,
    sparsity_scale: float = 1.0,
    fidelity_scale: float = 0.05,
    noise_std: float = 0.05,
    mh_steps: int = 200,
    residual_sparsity: int | None = None,
) -> list[FeatureSet]:
    """Labeled Model-II images: shared dictionaries, class-specific priors c.

    Each class's prior is a non-negative sparse vector (prior_sparsity
    nonzeros drawn uniform in [prior_low, prior_high]; default m_d // 10).
    """
    check_count(n_classes, "n_classes", minimum=1)
    check_count(images_per_class, "images_per_class", minimum=1)
    check_count(features_per_image, "features_per_image", minimum=1)
    rng = np.random.default_rng(seed)
    bases_d = random_unit_bases(d, m_d, rng)
    bases_r = random_unit_bases(d, m_r, rng)
    if prior_sparsity is None:
        prior_sparsity = max(1, m_d // 10)
    prior_sparsity = check_count(prior_sparsity, "prior_sparsity", minimum=1)
    if prior_sparsity > m_d:
        raise ArgumentError(f"prior_sparsity {prior_sparsity} exceeds m_d {m_d}")
    sets = []
    for c in range(n_classes):
        prior = np.zeros(m_d)
        support = rng.choice(m_d, size=prior_sparsity, replace=False)
        prior[support] = rng.uniform(prior_low, prior_high, size=prior_sparsity)
        model = GenModelII(
            bases_d=bases_d,
            bases_r=bases_r,
            code_prior=prior,
            residual_scale=residual_scale,
            sparsity_scale=sparsity_scale,
            fidelity_scale=fidelity_scale,
            noise_std=noise_std,
        )
        for i in range(images_per_class):
            x, _, _ = sample_features_ii(
                model, features_per_image, rng,
                mh_steps=mh_steps, residual_sparsity=residual_sparsity,
            )
            sets.append(FeatureSet(features=x, image_id=f"class{c}_img{i:04d}", label=c))
    return sets
