"""Encoding-resolution benchmark on synthetic sparse-coding data.

For each feature dimensionality the benchmark draws a ground-truth sparse
model, fits Gaussian mixtures of several sizes and pursuit dictionaries of
several sizes on one training sample, and reports how closely each fitted
model resolves fresh test features: the mean distance to the closest
mixture mean for a GMM, the mean pursuit reconstruction error |x - B u*|
for a dictionary.  In high dimensions a modest dictionary keeps the
distance low where same-size (and larger) mixtures do not, which is the
point of the comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import learn_dictionary
from .gmm import fit_gmm, nearest_prototype_distance
from .pursuit import mp_encode_batch
from .synth import GenModelI, random_unit_bases, sample_features_i
from .validation import check_count, check_positive

CSV_HEADER = "model,size,feature_dim,mean_distance"


@dataclass(frozen=True)
class BenchRow:
    model: str
    size: int
    feature_dim: int
    mean_distance: float


def bench_resolution(
    dims,
    gmm_sizes,
    dict_sizes,
    n_train: int = 10000,
    n_test: int = 500,
    true_m: int = 64,
    true_sparsity: int = 5,
    laplace_scale: float = 1.0,
    noise_std: float = 0.05,
    mp_k: int = 10,
    em_iters: int = 15,
    em_tol: float = 1e-5,
    var_floor: float = 1e-6,
    dict_iters: int = 8,
    dict_k: int = 10,
    seed=0,
) -> list[BenchRow]:
    """Run the comparison.  Rows come out grouped by dimension, GMM first."""
    dims = [check_count(int(d), "dims entry", minimum=1) for d in dims]
    gmm_sizes = [check_count(int(k), "gmm_sizes entry", minimum=1) for k in gmm_sizes]
    dict_sizes = [check_count(int(m), "dict_sizes entry", minimum=1) for m in dict_sizes]
    check_count(n_train, "n_train", minimum=1)
    check_count(n_test, "n_test", minimum=1)
    check_positive(noise_std, "noise_std", strict=False)
    rng = np.random.default_rng(seed)
    rows = []
    for d in dims:
        truth = GenModelI(
            bases=random_unit_bases(d, true_m, rng),
            laplace_scale=laplace_scale,
            noise_std=noise_std,
        )
        x_train, _ = sample_features_i(truth, n_train, rng, sparsity=true_sparsity)
        x_test, _ = sample_features_i(truth, n_test, rng, sparsity=true_sparsity)
        for k in gmm_sizes:
            child = int(rng.integers(2**63))
            model, _ = fit_gmm(
                x_train, k, max_iters=em_iters, tol=em_tol,
                seed=child, var_floor=var_floor,
            )
            dist = float(np.mean(nearest_prototype_distance(model, x_test)))
            rows.append(BenchRow(model="gmm", size=k, feature_dim=d, mean_distance=dist))
        for m in dict_sizes:
            child = int(rng.integers(2**63))
            dictionary, _ = learn_dictionary(
                x_train, m, dict_k, iters=dict_iters, seed=child
            )
            _, resid = mp_encode_batch(dictionary, x_test, mp_k)
            dist = float(np.mean(np.linalg.norm(resid, axis=1)))
            rows.append(BenchRow(model="sc", size=m, feature_dim=d, mean_distance=dist))
    return rows


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(
            f"{row.model},{row.size},{row.feature_dim},{format(row.mean_distance, '.17g')}"
        )
    return "\n".join(lines) + "\n"
