import dataclasses

import numpy as np
import pytest

from conftest import make_samples, two_class_data
from liveprint.errors import BadFeatureName, DegenerateTraining, MixedSensors, ZeroVariance
from liveprint.modules.classification import (
    GaussianClassModel,
    Label,
    ScatterStatistics,
    SubsetMask,
    all_subsets,
    compute_ace,
    fit_lda,
    fit_lda_arrays,
    loo_decisions,
    loo_evaluate,
    naive_loo_decisions,
    predict,
)


class TestSubsetMask:
    def test_from_names(self):
        assert SubsetMask.from_names("Q_E,Q_STD").bitstring == "0100010000"
        assert SubsetMask.from_names(" q_ocl , Q_VAR").indices == (0, 9)

    def test_unknown_name(self):
        with pytest.raises(BadFeatureName):
            SubsetMask.from_names("Q_FOO")

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            SubsetMask.from_bitstring("0000000000")

    def test_enumeration(self):
        subsets = list(all_subsets(10))
        assert len(subsets) == 1023
        assert len({s.bits for s in subsets}) == 1023
        assert subsets[0].indices == (0,)
        assert subsets[10].indices == (0, 1)
        assert [s.cardinality for s in subsets] == sorted(s.cardinality for s in subsets)


class TestFit:
    def test_one_dimensional_hand_example(self):
        samples = make_samples([[0], [0], [1], [1], [2], [2], [3], [3]],
                               [True] * 4 + [False] * 4)
        model = fit_lda(samples, SubsetMask((True,)))
        assert model.mu_real == pytest.approx([0.5])
        assert model.mu_fake == pytest.approx([2.5])
        assert model.sigma_pooled[0, 0] == pytest.approx(1 / 3)
        assert model.prior_real == 0.5

    def test_single_sample_class(self):
        samples = make_samples([[0], [1], [2]], [True, False, False])
        with pytest.raises(DegenerateTraining):
            fit_lda(samples, SubsetMask((True,)))

    def test_matches_reference_computation(self, rng):
        X, is_real = two_class_data(rng, n_per_class=25, d=6)
        model = fit_lda_arrays(X, is_real)
        real, fake = X[is_real], X[~is_real]
        mu_r = real.sum(axis=0) / len(real)
        mu_f = fake.sum(axis=0) / len(fake)
        scatter = np.zeros((6, 6))
        for x in real:
            scatter += np.outer(x - mu_r, x - mu_r)
        for x in fake:
            scatter += np.outer(x - mu_f, x - mu_f)
        np.testing.assert_allclose(model.mu_real, mu_r, atol=1e-9)
        np.testing.assert_allclose(model.mu_fake, mu_f, atol=1e-9)
        np.testing.assert_allclose(model.sigma_pooled, scatter / (len(X) - 2), atol=1e-9)

    def test_constant_features(self):
        X = np.ones((8, 2))
        with pytest.raises(ZeroVariance):
            fit_lda_arrays(X, np.array([True] * 4 + [False] * 4))

    def test_collinear_features_regularized(self, rng):
        x = rng.normal(size=20)
        X = np.column_stack([x, 2 * x])
        model = fit_lda_arrays(X, np.array([True] * 10 + [False] * 10))
        assert np.all(np.linalg.eigvalsh(model.sigma_pooled) > 0)


class TestPredict:
    @staticmethod
    def symmetric_model():
        return GaussianClassModel(
            mu_real=np.array([0.0, 0.0]), mu_fake=np.array([2.0, 2.0]),
            sigma_pooled=np.eye(2), prior_real=0.5, prior_fake=0.5,
        )

    def test_point_at_real_mean(self):
        p = predict(self.symmetric_model(), [0.0, 0.0])
        assert p.label is Label.REAL
        assert p.posterior_real > 0.5

    def test_midpoint_tie_goes_to_fake(self):
        p = predict(self.symmetric_model(), [1.0, 1.0])
        assert p.posterior_real == 0.5
        assert p.label is Label.FAKE

    def test_posteriors_sum_to_one(self):
        p = predict(self.symmetric_model(), [0.3, 1.7])
        assert p.posterior_real + p.posterior_fake == pytest.approx(1.0, abs=1e-12)

    def test_full_vector_with_subset(self):
        model = GaussianClassModel(
            mu_real=np.array([0.0]), mu_fake=np.array([1.0]),
            sigma_pooled=np.eye(1), prior_real=0.5, prior_fake=0.5,
        )
        subset = SubsetMask.from_names("Q_E")
        assert predict(model, [9, 0.1, 9, 9, 9, 9, 9, 9, 9, 9], subset).label is Label.REAL

    def test_bayes_grid(self):
        mu_r, mu_f = np.array([0.0, 0.0]), np.array([1.3, 0.7])
        sigma = np.array([[1.0, 0.3], [0.3, 0.8]])
        model = GaussianClassModel(mu_real=mu_r, mu_fake=mu_f, sigma_pooled=sigma,
                                   prior_real=0.5, prior_fake=0.5)
        w = np.linalg.solve(sigma, mu_r - mu_f)
        b = -0.5 * (mu_r @ np.linalg.solve(sigma, mu_r) - mu_f @ np.linalg.solve(sigma, mu_f))
        for x in np.linspace(-3, 3, 50):
            for y in np.linspace(-3, 3, 50):
                point = np.array([x, y])
                expected = Label.REAL if w @ point + b > 0 else Label.FAKE
                assert predict(model, point).label is expected


class TestLeaveOneOut:
    def test_separated_classes(self, rng):
        X, is_real = two_class_data(rng, n_per_class=15, d=2, shift=50.0)
        result = loo_evaluate(make_samples(X, is_real), SubsetMask.full(2))
        assert (result.far, result.frr, result.ace) == (0.0, 0.0, 0.0)

    def test_chance_level(self):
        aces = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(200, 2))
            is_real = rng.permutation(np.array([True] * 100 + [False] * 100))
            aces.append(loo_evaluate(make_samples(X, is_real), SubsetMask.full(2)).ace)
        assert 40.0 <= float(np.median(aces)) <= 60.0

    def test_order_invariance(self, rng):
        X, is_real = two_class_data(rng, n_per_class=20, d=3, shift=0.8)
        samples = make_samples(X, is_real)
        order = rng.permutation(len(samples))
        subset = SubsetMask.full(3)
        assert loo_evaluate(samples, subset) == loo_evaluate([samples[i] for i in order], subset)

    def test_fast_path_matches_naive_refit(self):
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            d = int(rng.integers(1, 11))
            X, is_real = two_class_data(rng, n_per_class=30, d=d, shift=0.5)
            subset = SubsetMask.full(d)
            fast = loo_decisions(ScatterStatistics.from_arrays(X, is_real), subset)
            np.testing.assert_array_equal(fast, naive_loo_decisions(X, is_real, subset))

    def test_fast_path_on_sub_masks(self, rng):
        X, is_real = two_class_data(rng, n_per_class=20, d=4, shift=0.6)
        stats = ScatterStatistics.from_arrays(X, is_real)
        for subset in all_subsets(4):
            np.testing.assert_array_equal(loo_decisions(stats, subset),
                                          naive_loo_decisions(X, is_real, subset))

    def test_affine_rescaling_keeps_decisions(self, rng):
        X, is_real = two_class_data(rng, n_per_class=25, d=4, shift=0.7)
        scale = rng.uniform(0.5, 3.0, size=4)
        offset = rng.uniform(-2.0, 2.0, size=4)
        subset = SubsetMask.full(4)
        before = naive_loo_decisions(X, is_real, subset)
        after = naive_loo_decisions(X * scale + offset, is_real, subset)
        np.testing.assert_array_equal(before, after)

    def test_material_ignored(self, rng):
        X, is_real = two_class_data(rng, n_per_class=10, d=2)
        samples = make_samples(X, is_real)
        relabeled = [dataclasses.replace(s, material=m)
                     for s, m in zip(samples, rng.choice(["silicone", "gelatin", "playdoh"], len(samples)))]
        subset = SubsetMask.full(2)
        assert loo_evaluate(samples, subset) == loo_evaluate(relabeled, subset)

    def test_mixed_sensors(self, rng):
        X, is_real = two_class_data(rng, n_per_class=5, d=2)
        samples = make_samples(X[:5], is_real[:5], sensor="a") + make_samples(X[5:], is_real[5:], sensor="b")
        with pytest.raises(MixedSensors):
            loo_evaluate(samples, SubsetMask.full(2))

    def test_too_few_for_leave_one_out(self, rng):
        X = rng.normal(size=(5, 1))
        samples = make_samples(X, [True, True, False, False, False])
        with pytest.raises(DegenerateTraining):
            loo_evaluate(samples, SubsetMask.full(1))

    def test_naive_method_agrees(self, rng):
        X, is_real = two_class_data(rng, n_per_class=12, d=3, shift=0.9)
        samples = make_samples(X, is_real)
        subset = SubsetMask.full(3)
        assert loo_evaluate(samples, subset) == loo_evaluate(samples, subset, method="naive")


class TestAce:
    @pytest.mark.parametrize("far, frr, ace", [(2.12, 1.54, 1.83), (0, 0, 0), (100, 0, 50)])
    def test_mean(self, far, frr, ace):
        assert compute_ace(far, frr) == pytest.approx(ace, abs=1e-12)

    def test_range(self):
        with pytest.raises(ValueError):
            compute_ace(101.0, 0.0)

    def test_counts_and_rates(self, rng):
        X, is_real = two_class_data(rng, n_per_class=20, d=2, shift=1.0)
        result = loo_evaluate(make_samples(X, is_real), SubsetMask.full(2))
        assert result.far == 100.0 * result.false_accepts / 20
        assert result.ace == (result.far + result.frr) / 2
        assert result.correct_rate == 100.0 - result.ace
