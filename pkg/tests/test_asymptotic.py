# tests/test_asymptotic.py
import numpy as np
import pytest
from scipy import stats

from calibration.asymptotic import (
    P_VALUE_FLOOR,
    chi2_local_test,
    chi2_local_tests,
    chi2_upper_tail,
    sigma_sq_general,
    sigma_sq_knn,
)
from calibration.multitest import CorrectionMethod
from calibration.permutation import PermutationPlan, local_replicates
from regressors.base import EstimatorConfig, KernelType, SmootherWeights
from regressors.kernel import fit_kernel
from regressors.knn import default_knn_k, fit_knn
from regressors.lda import fit_lda
from samples.dataset import LabeledDataset
from samples.scenarios import MIXTURE_MEANS_0, MIXTURE_MEANS_1, MIXTURE_SD, generate, lattice_grid, mixture_2d_regression, scenario
from utils.errors import ConditionViolatedError, DegenerateDataError, UnsupportedOperationError


def test_sigma_uniform_weights_is_zero():
    assert sigma_sq_general(SmootherWeights(np.full(5, 0.2)), 0.4) == pytest.approx(0.0, abs=1e-18)


def test_sigma_hand_value():
    assert sigma_sq_general(SmootherWeights(np.array([0.5, 0.5, 0.0, 0.0])), 0.5, 4) == pytest.approx(1 / 12)


def test_sigma_degenerate_class_probability():
    with pytest.raises(DegenerateDataError):
        sigma_sq_general(SmootherWeights(np.array([0.5, 0.5, 0.0])), 1.0)


def test_sigma_knn_closed_form():
    assert sigma_sq_knn(8, 2, 0.5) == 42 / 512 == 0.08203125


def test_sigma_knn_needs_two_k_below_n():
    with pytest.raises(ConditionViolatedError):
        sigma_sq_knn(4, 2, 0.5)


@pytest.mark.parametrize("n, k", [(9, 2), (20, 3), (101, 10)])
def test_knn_closed_form_against_general_formula(n, k):
    weights = np.zeros(n)
    weights[:k] = 1.0 / k
    general = sigma_sq_general(SmootherWeights(weights), 0.3, n)
    assert sigma_sq_knn(n, k, 0.3) == pytest.approx(general * ((n - 1) / n) ** 2, rel=1e-12)


def test_chi2_tail_values():
    assert chi2_upper_tail(0.0) == 1.0
    assert chi2_upper_tail(3.841458820694124) == pytest.approx(0.05, rel=1e-9)
    assert chi2_upper_tail(6.634896601021214) == pytest.approx(0.01, rel=1e-9)


def test_chi2_tail_negative_argument():
    with pytest.raises(ValueError):
        chi2_upper_tail(-0.1)


def test_point_at_class_probability(small_data):
    # Neighbours of 3.0 are 2.0 and 4.0, one of each label.
    result = chi2_local_test(fit_knn(small_data, 2), [3.0], small_data)
    assert result.normalized_stat == 0.0
    assert result.p_value == 1.0
    assert result.sigma_sq == pytest.approx(1 / 12)
    assert not result.reject


def test_non_smoother_is_unsupported(small_data):
    with pytest.raises(UnsupportedOperationError):
        chi2_local_test(fit_lda(small_data), [1.0], small_data)
    with pytest.raises(UnsupportedOperationError):
        chi2_local_tests(fit_lda(small_data), [[1.0]], small_data)


def test_grid_report_flags(shifted_data):
    model = fit_knn(shifted_data, 3)
    report = chi2_local_tests(model, np.array([[0.0, 0.0], [4.0, 4.0]]), shifted_data, 0.05, CorrectionMethod.BONFERRONI)
    assert report.calibration == "asymptotic"
    assert report.valid is not None and report.valid.shape == (2,)
    # k=3 of n=30 puts a third of the weight on one point: too concentrated to trust.
    assert not report.valid.any()
    assert np.all(report.p_values >= P_VALUE_FLOOR)
    assert "valid" in report.to_frame().columns


def test_grid_matches_single_point(shifted_data):
    model = fit_kernel(shifted_data, 1.0)
    point = np.array([1.5, 2.0])
    single = chi2_local_test(model, point, shifted_data)
    grid = chi2_local_tests(model, point[None, :], shifted_data)
    assert grid.p_values[0] == pytest.approx(single.p_value, rel=1e-9)
    assert bool(grid.valid[0]) == single.valid


def test_empty_box_window_is_invalid():
    data = LabeledDataset(np.array([[0.0], [0.5], [1.0], [1.5]]), np.array([0, 1, 0, 1]))
    model = fit_kernel(data, 1.0, KernelType.BOX)
    report = chi2_local_tests(model, [[50.0]], data)
    assert report.p_values[0] == 1.0
    assert not report.valid[0]


def test_normalized_permutation_replicates_have_unit_mean():
    rng = np.random.default_rng(0)
    data = LabeledDataset(rng.standard_normal((400, 2)), np.repeat([0, 1], 200))
    point = np.array([[0.3, -0.2]])
    plan = PermutationPlan(n_permutations=3000, seed=5)
    _, _, replicates = local_replicates(data, point, EstimatorConfig(kind="knn", k=40), plan)
    sigma_sq = sigma_sq_general(fit_knn(data, 40).weights(point), data.pi1_hat, data.n)
    assert replicates[0].mean() / sigma_sq == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
def test_knn_closed_form_identity_over_all_small_n():
    for n in range(3, 201):
        for k in range(1, (n - 1) // 2 + 1):
            weights = np.zeros(n)
            weights[:k] = 1.0 / k
            general = sigma_sq_general(SmootherWeights(weights), 0.4, n)
            assert sigma_sq_knn(n, k, 0.4) == pytest.approx(general * ((n - 1) / n) ** 2, rel=1e-12, abs=0)


@pytest.mark.slow
def test_normalized_kernel_replicates_follow_chi2():
    # Gaussian-kernel weights are all distinct, so the permutation law is close to continuous.
    rng = np.random.default_rng(21)
    data = LabeledDataset(rng.standard_normal((2000, 1)), np.repeat([0, 1], 1000))
    point = np.array([[0.0]])
    estimator = EstimatorConfig(kind="kernel", bandwidth=0.05)
    _, _, replicates = local_replicates(data, point, estimator, PermutationPlan(n_permutations=2000, seed=3))
    sigma_sq = sigma_sq_general(fit_kernel(data, 0.05).weights(point), data.pi1_hat, data.n)
    assert stats.kstest(replicates[0] / sigma_sq, "chi2", args=(1,)).statistic < 0.07


@pytest.mark.slow
def test_normalized_knn_replicates_have_chi2_tail():
    # With k = 100 the statistic has atoms of mass ~0.08, so only the tail rate is compared.
    rng = np.random.default_rng(22)
    data = LabeledDataset(rng.standard_normal((2000, 2)), np.repeat([0, 1], 1000))
    point = np.array([[0.1, -0.3]])
    _, _, replicates = local_replicates(data, point, EstimatorConfig(kind="knn", k=100), PermutationPlan(n_permutations=2000, seed=4))
    sigma_sq = sigma_sq_general(fit_knn(data, 100).weights(point), data.pi1_hat, data.n)
    tail = np.mean(replicates[0] / sigma_sq > stats.chi2.ppf(0.95, 1))
    assert 0.025 <= tail <= 0.075


@pytest.mark.slow
def test_mixture_grid_flags_components_with_correct_color():
    data = generate(scenario("normal-mixture-2d", seed=17))
    grid = lattice_grid((50, 50), (-4.0, 4.0, -4.0, 4.0))
    model = fit_knn(data, default_knn_k(data.n, data.dim))
    report = chi2_local_tests(model, grid, data, alpha=0.05, correction=CorrectionMethod.HOCHBERG)

    for means, sign in [(MIXTURE_MEANS_1, 1), (MIXTURE_MEANS_0, -1)]:
        near = np.min(np.linalg.norm(grid[:, None, :] - means[None, :, :], axis=2), axis=1) <= MIXTURE_SD
        hits = report.reject[near] & (report.signs[near] == sign)
        assert near.sum() > 50
        assert hits.mean() >= 0.9

    truth = np.sign(mixture_2d_regression(grid) - 0.5)
    wrong = report.reject & (report.signs != truth)
    assert wrong.mean() <= 0.02
