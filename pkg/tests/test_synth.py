"""Synthetic generator tests: distributions, determinism, composition."""

import numpy as np
import pytest
from scipy import stats

from fvcoding.errors import ArgumentError
from fvcoding.synth import (
    GenModelI,
    GenModelII,
    make_classification_set_i,
    make_classification_set_ii,
    metropolis_code_samples,
    prior_log_density,
    random_unit_bases,
    sample_feature_i,
    sample_feature_ii,
    sample_features_i,
    sample_features_ii,
    sample_laplace,
)


def _model_i(seed=0, d=10, m=6, noise=0.1):
    rng = np.random.default_rng(seed)
    return GenModelI(bases=random_unit_bases(d, m, rng),
                     laplace_scale=1.0, noise_std=noise)


def _model_ii(seed=0, d=10, m_d=5, m_r=4, fidelity_scale=0.05):
    rng = np.random.default_rng(seed)
    prior = np.zeros(m_d)
    prior[:2] = [1.0, 0.8]
    return GenModelII(
        bases_d=random_unit_bases(d, m_d, rng),
        bases_r=random_unit_bases(d, m_r, rng),
        code_prior=prior,
        residual_scale=0.5,
        sparsity_scale=1.0,
        fidelity_scale=fidelity_scale,
        noise_std=0.05,
    )


class TestLaplaceSampler:
    def test_matches_reference_distribution(self):
        draws = sample_laplace(np.random.default_rng(0), 1.0, 200_000)
        # Kolmogorov-Smirnov against the closed-form CDF
        result = stats.kstest(draws, stats.laplace(scale=1.0).cdf)
        assert result.pvalue > 0.01

    def test_moments(self):
        scale = 0.7
        draws = sample_laplace(np.random.default_rng(1), scale, 400_000)
        assert abs(draws.mean()) < 0.01
        # Laplace variance is 2 * scale^2
        np.testing.assert_allclose(draws.var(), 2 * scale**2, rtol=0.02)

    def test_scale_must_be_positive(self):
        with pytest.raises(ArgumentError):
            sample_laplace(np.random.default_rng(0), 0.0, 5)

    def test_deterministic_for_seeded_generator(self):
        a = sample_laplace(np.random.default_rng(5), 1.0, 100)
        b = sample_laplace(np.random.default_rng(5), 1.0, 100)
        np.testing.assert_array_equal(a, b)


class TestGenModelI:
    def test_rejects_non_unit_bases(self):
        with pytest.raises(ArgumentError):
            GenModelI(bases=np.ones((4, 2)), laplace_scale=1.0, noise_std=0.1)

    def test_noiseless_sample_is_exact_combination(self):
        model = _model_i(noise=0.0)
        x, u = sample_feature_i(model, 123)
        np.testing.assert_allclose(x, model.bases @ u, atol=1e-12)

    def test_single_equals_batch_row_zero(self):
        model = _model_i()
        x1, u1 = sample_feature_i(model, 77)
        xb, ub = sample_features_i(model, 1, 77)
        np.testing.assert_array_equal(x1, xb[0])
        np.testing.assert_array_equal(u1, ub[0])

    def test_sparsity_controls_support(self):
        model = _model_i(m=12)
        _, u = sample_features_i(model, 50, 3, sparsity=4)
        assert np.all((u != 0).sum(axis=1) == 4)

    def test_sparsity_supports_vary(self):
        model = _model_i(m=12)
        _, u = sample_features_i(model, 50, 3, sparsity=4)
        patterns = {tuple(np.flatnonzero(row)) for row in u}
        assert len(patterns) > 1

    def test_sparsity_larger_than_m_rejected(self):
        with pytest.raises(ArgumentError):
            sample_features_i(_model_i(m=6), 5, 0, sparsity=7)

    def test_noise_level_scales_residual(self):
        model = _model_i(noise=0.2, d=20)
        x, u = sample_features_i(model, 2000, 9)
        resid = x - u @ model.bases.T
        np.testing.assert_allclose(resid.std(), 0.2, rtol=0.05)

    def test_zero_noise_allowed_by_model(self):
        model = _model_i(noise=0.0)
        assert model.noise_std == 0.0


class TestMetropolis:
    def test_chain_mixes_when_scales_match_proposal(self):
        model = _model_ii(fidelity_scale=1.0)
        samples, rate = metropolis_code_samples(model, 400, np.random.default_rng(0), steps=300)
        assert 0.02 < rate < 0.98
        moved = np.linalg.norm(samples - model.code_prior, axis=1) > 0
        assert moved.mean() > 0.9

    def test_looser_fidelity_spreads_samples(self):
        tight = _model_ii(fidelity_scale=0.05)
        loose = _model_ii(fidelity_scale=5.0)
        s_tight, _ = metropolis_code_samples(tight, 300, np.random.default_rng(1), steps=300)
        s_loose, _ = metropolis_code_samples(loose, 300, np.random.default_rng(1), steps=300)
        d_tight = np.linalg.norm(s_tight - tight.code_prior, axis=1).mean()
        d_loose = np.linalg.norm(s_loose - loose.code_prior, axis=1).mean()
        assert d_tight < d_loose

    def test_log_density_shape(self):
        model = _model_ii()
        one = prior_log_density(model, model.code_prior)
        many = prior_log_density(model, np.tile(model.code_prior, (3, 1)))
        assert np.isscalar(one) or np.ndim(one) == 0
        np.testing.assert_allclose(many, one)

    def test_zero_steps_returns_prior_mean(self):
        model = _model_ii()
        samples, rate = metropolis_code_samples(model, 5, np.random.default_rng(0), steps=0)
        np.testing.assert_array_equal(samples, np.tile(model.code_prior, (5, 1)))
        assert rate == 0.0


class TestGenModelII:
    def test_composition_noiseless(self):
        model = GenModelII(
            bases_d=_model_ii().bases_d,
            bases_r=_model_ii().bases_r,
            code_prior=_model_ii().code_prior,
            residual_scale=0.5,
            sparsity_scale=1.0,
            fidelity_scale=0.05,
            noise_std=0.0,
        )
        x, u_d, u_r = sample_feature_ii(model, 5, mh_steps=50)
        np.testing.assert_allclose(
            x, model.bases_d @ u_d + model.bases_r @ u_r, atol=1e-12
        )

    def test_single_equals_batch_row_zero(self):
        model = _model_ii()
        x1, ud1, ur1 = sample_feature_ii(model, 9, mh_steps=40)
        xb, udb, urb = sample_features_ii(model, 1, 9, mh_steps=40)
        np.testing.assert_array_equal(x1, xb[0])
        np.testing.assert_array_equal(ud1, udb[0])
        np.testing.assert_array_equal(ur1, urb[0])

    def test_mismatched_dictionary_rows_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ArgumentError):
            GenModelII(
                bases_d=random_unit_bases(5, 3, rng),
                bases_r=random_unit_bases(6, 3, rng),
                code_prior=np.zeros(3),
                residual_scale=1.0, sparsity_scale=1.0,
                fidelity_scale=1.0, noise_std=0.1,
            )

    def test_residual_sparsity(self):
        model = _model_ii(m_r=8)
        _, _, u_r = sample_features_ii(model, 30, 4, mh_steps=20, residual_sparsity=2)
        assert np.all((u_r != 0).sum(axis=1) == 2)


class TestClassificationSets:
    def test_model_i_set_shapes_and_labels(self):
        sets = make_classification_set_i(
            d=6, m=4, n_classes=3, images_per_class=4, features_per_image=7, seed=0
        )
        assert len(sets) == 12
        labels = [fs.label for fs in sets]
        assert sorted(set(labels)) == [0, 1, 2]
        assert all(fs.features.shape == (7, 6) for fs in sets)
        ids = [fs.image_id for fs in sets]
        assert len(set(ids)) == len(ids)

    def test_model_i_set_deterministic(self):
        a = make_classification_set_i(d=5, m=3, n_classes=2, images_per_class=2,
                                      features_per_image=4, seed=9)
        b = make_classification_set_i(d=5, m=3, n_classes=2, images_per_class=2,
                                      features_per_image=4, seed=9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.features, fb.features)

    def test_model_ii_set_class_priors_differ(self):
        sets = make_classification_set_ii(
            d=8, m_d=10, m_r=4, n_classes=2, images_per_class=2,
            features_per_image=5, seed=1, mh_steps=20,
        )
        assert len(sets) == 4
        assert {fs.label for fs in sets} == {0, 1}
