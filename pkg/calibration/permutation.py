# calibration/permutation.py
"""
Permutation calibration. Replicate b always uses the label permutation drawn
from make_rng(plan.seed, "permutation", b), whichever code path evaluates it,
so outcomes do not depend on the worker count.
"""
import itertools
import math
import sys
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.spatial.distance import cdist
from tqdm import tqdm

from calibration.multitest import CorrectionMethod, adjust
from calibration.outcome import LocalTestReport, TestOutcome
from metrics.discrepancy import gaussian_gram, median_heuristic, signed_label_vector
from metrics.regression_stats import ACCURACY_THRESHOLD, split_halves, split_statistic
from metrics.statistic import StatisticKind, StatisticSpec, compute_statistic
from regressors.base import EstimatorConfig, as_points
from regressors.factory import fit_estimator
from samples.dataset import LabeledDataset
from utils.errors import RefitError
from utils.rng import make_rng

# Replicates evaluated per matrix product on the linear-smoother path.
REPLICATE_BLOCK = 64
# Largest number of relabellings the exact test will enumerate.
MAX_EXACT_RELABELINGS = 200_000


class PermutationScope(str, Enum):
    ALL_LABELS = "all"
    FIRST_HALF_LABELS = "first-half"


class PermutationPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_permutations: int = Field(100, ge=1, description="Number of random permutations B.")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Base seed of the permutation streams.")
    scope: PermutationScope = Field(PermutationScope.ALL_LABELS, description="Which labels are permuted.")
    n_jobs: int = Field(1, ge=1, description="Workers for replicates that need a refit.")
    progress: bool = Field(False, description="Show a progress bar over replicates.")


def permutation_p_value(observed: float, replicates) -> float:
    """(1 + #{b : replicate_b > observed}) / (B + 1)."""
    replicates = np.asarray(replicates, dtype=np.float64)
    if replicates.size == 0:
        raise ValueError("no replicates")
    return (1 + int(np.sum(replicates > observed))) / (replicates.size + 1)


def permutation_quantile(replicates, alpha: float) -> float:
    """
    Upper-alpha critical value: the ceil((1 - alpha)(B + 1))-th smallest replicate
    (+inf when that index exceeds B, i.e. the test can never reject).
    """
    ordered = np.sort(np.asarray(replicates, dtype=np.float64))
    if ordered.size == 0:
        raise ValueError("no replicates")
    index = math.ceil((1.0 - alpha) * (ordered.size + 1) - 1e-9)
    if index > ordered.size:
        return math.inf
    return float(ordered[max(index, 1) - 1])


def permuted_labels(labels: np.ndarray, plan: PermutationPlan, b: int, index: Optional[np.ndarray] = None) -> np.ndarray:
    """Labels for replicate b; with `index` only those positions are shuffled among themselves."""
    rng = make_rng(plan.seed, "permutation", b)
    out = np.array(labels, copy=True)
    if index is None:
        return out[rng.permutation(out.size)]
    out[index] = out[index][rng.permutation(index.size)]
    return out


def permutation_matrix(labels: np.ndarray, plan: PermutationPlan, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """(n, stop - start) float matrix whose columns are replicates start..stop-1."""
    stop = plan.n_permutations if stop is None else stop
    return np.column_stack([permuted_labels(labels, plan, b) for b in range(start, stop)]).astype(np.float64)


def _blocks(plan: PermutationPlan, desc: str):
    starts = range(0, plan.n_permutations, REPLICATE_BLOCK)
    bar = tqdm(total=plan.n_permutations, desc=desc, unit="perm", disable=not plan.progress)
    for start in starts:
        stop = min(start + REPLICATE_BLOCK, plan.n_permutations)
        yield start, stop
        bar.update(stop - start)
    bar.close()


def _parallel_replicates(func, plan: PermutationPlan, desc: str, *args):
    """Runs func(*args, b) for every replicate on the worker pool, in replicate order."""
    jobs = Parallel(n_jobs=plan.n_jobs, return_as="generator")(
        delayed(func)(*args, b) for b in range(plan.n_permutations)
    )
    return list(tqdm(jobs, total=plan.n_permutations, desc=desc, unit="perm", disable=not plan.progress))


# --- Replicate evaluators ---
def _smoother_values(kind: StatisticKind, fitted: np.ndarray, labels: np.ndarray, pi1: float) -> np.ndarray:
    if kind == StatisticKind.GLOBAL_REG:
        return np.mean((fitted - pi1) ** 2, axis=0)
    return np.mean((fitted > ACCURACY_THRESHOLD) == (labels > 0.5), axis=0)


def _smoother_test(data: LabeledDataset, stat: StatisticSpec, plan: PermutationPlan) -> Tuple[float, np.ndarray]:
    """
    In-sample regression or accuracy statistic of a linear smoother: the weight
    matrix depends only on the features, so every replicate is one column of W @ Y.
    """
    model = fit_estimator(data, stat.estimator)
    weights = model.smoother_matrix(data.features)
    labels = data.labels.astype(np.float64)
    observed = float(_smoother_values(stat.kind, np.asarray(weights @ labels[:, None]), labels[:, None], data.pi1_hat)[0])
    replicates = np.empty(plan.n_permutations)
    for start, stop in _blocks(plan, stat.name):
        permuted = permutation_matrix(data.labels, plan, start, stop)
        replicates[start:stop] = _smoother_values(stat.kind, np.asarray(weights @ permuted), permuted, data.pi1_hat)
    return observed, replicates


def _quadratic_form_test(data: LabeledDataset, stat: StatisticSpec, plan: PermutationPlan) -> Tuple[float, np.ndarray]:
    """MMD and energy: the pooled matrix is fixed, only the signed label vector moves."""
    if stat.kind == StatisticKind.MMD:
        matrix = gaussian_gram(data.features, median_heuristic(data.features))
        sign = 1.0
    else:
        matrix = cdist(data.features, data.features, "euclidean")
        sign = -1.0
    a = signed_label_vector(data.labels)
    observed = float(sign * (a @ matrix @ a))
    replicates = np.empty(plan.n_permutations)
    for start, stop in _blocks(plan, stat.name):
        permuted = permutation_matrix(data.labels, plan, start, stop)
        signed = permuted / data.n1 - (1.0 - permuted) / data.n0
        replicates[start:stop] = sign * np.einsum("ib,ij,jb->b", signed, matrix, signed)
    return observed, replicates


def _split_replicate(data: LabeledDataset, estimator: EstimatorConfig, first, second, plan: PermutationPlan, b: int) -> float:
    permuted = data.with_labels(permuted_labels(data.labels, plan, b, index=first))
    try:
        return split_statistic(permuted, estimator, first, second)
    except ValueError as err:
        raise RefitError(f"replicate {b}: {err}", replicate=b) from err


def _refit_replicate(data: LabeledDataset, stat: StatisticSpec, plan: PermutationPlan, b: int) -> float:
    permuted = data.with_labels(permuted_labels(data.labels, plan, b))
    try:
        return compute_statistic(stat, permuted, seed=plan.seed)
    except ValueError as err:
        raise RefitError(f"replicate {b}: {err}", replicate=b) from err


def _outcome(stat: StatisticSpec, observed: float, replicates: np.ndarray, plan: PermutationPlan, alpha: float) -> TestOutcome:
    p_value = permutation_p_value(observed, replicates)
    return TestOutcome(
        statistic=stat.name,
        observed=observed,
        replicates=replicates.tolist(),
        n_permutations=plan.n_permutations,
        p_value=p_value,
        alpha=alpha,
        reject=p_value < alpha,
        seed=plan.seed,
    )


def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def global_test(data: LabeledDataset, stat: StatisticSpec, plan: PermutationPlan, alpha: float = 0.05) -> TestOutcome:
    """
    Permutation test of one statistic: observed value on the original labels,
    B replicates on uniformly permuted labels with the features fixed, the
    estimator refit on each.
    """
    _check_alpha(alpha)
    split_scope = plan.scope == PermutationScope.FIRST_HALF_LABELS
    if split_scope and stat.kind != StatisticKind.GLOBAL_REG_SPLIT:
        raise ValueError("first-half permutation only applies to the split-sample statistic")

    if stat.kind == StatisticKind.LOCAL_REG:
        observed, _, replicates = local_replicates(data, [stat.point], stat.estimator, plan)
        return _outcome(stat, float(observed[0]), replicates[0], plan, alpha)

    data.require_both_classes()
    if split_scope:
        first, second = split_halves(data, plan.seed)
        observed = split_statistic(data, stat.estimator, first, second)
        replicates = np.array(_parallel_replicates(_split_replicate, plan, stat.name, data, stat.estimator, first, second, plan))
    elif stat.kind in (StatisticKind.GLOBAL_REG, StatisticKind.ACCURACY_IN_SAMPLE) and stat.estimator.is_linear_smoother:
        observed, replicates = _smoother_test(data, stat, plan)
    elif stat.kind in (StatisticKind.MMD, StatisticKind.ENERGY):
        observed, replicates = _quadratic_form_test(data, stat, plan)
    else:
        observed = compute_statistic(stat, data, seed=plan.seed)
        replicates = np.array(_parallel_replicates(_refit_replicate, plan, stat.name, data, stat, plan))
    return _outcome(stat, float(observed), replicates, plan, alpha)


def all_relabelings(labels: np.ndarray) -> np.ndarray:
    """Every distinct assignment of n1 ones among n positions, one per row."""
    labels = np.asarray(labels)
    n, n1 = labels.size, int(np.sum(labels))
    count = math.comb(n, n1)
    if count > MAX_EXACT_RELABELINGS:
        raise ValueError(f"{count} relabelings exceed the exact-test limit of {MAX_EXACT_RELABELINGS}")
    out = np.zeros((count, n), dtype=np.int8)
    for row, ones in enumerate(itertools.combinations(range(n), n1)):
        out[row, list(ones)] = 1
    return out


def exact_global_test(data: LabeledDataset, stat: StatisticSpec, alpha: float = 0.05, seed: int = 0) -> TestOutcome:
    """
    Global test calibrated on the full permutation distribution: the statistic
    is evaluated on every distinct relabeling (the observed one included), so
    B = C(n, n1) and the p-value is exact up to the +1 convention.
    """
    _check_alpha(alpha)
    if stat.kind in (StatisticKind.LOCAL_REG, StatisticKind.GLOBAL_REG_SPLIT):
        raise ValueError(f"exact enumeration does not support the {stat.kind.value} statistic")
    data.require_both_classes()
    relabelings = all_relabelings(data.labels)
    observed = compute_statistic(stat, data, seed=seed)
    replicates = np.array([compute_statistic(stat, data.with_labels(row), seed=seed) for row in relabelings])
    p_value = permutation_p_value(observed, replicates)
    return TestOutcome(
        statistic=stat.name,
        observed=float(observed),
        replicates=replicates.tolist(),
        n_permutations=int(replicates.size),
        p_value=p_value,
        alpha=alpha,
        reject=p_value < alpha,
        seed=seed,
    )


# --- Local tests ---
def _local_refit_replicate(data: LabeledDataset, points: np.ndarray, estimator: EstimatorConfig, plan: PermutationPlan, b: int) -> np.ndarray:
    permuted = data.with_labels(permuted_labels(data.labels, plan, b))
    try:
        model = fit_estimator(permuted, estimator)
    except ValueError as err:
        raise RefitError(f"replicate {b}: {err}", replicate=b) from err
    return (model.predict(points) - data.pi1_hat) ** 2


def local_replicates(
    data: LabeledDataset,
    points,
    estimator: EstimatorConfig,
    plan: PermutationPlan,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Observed local statistics, fitted values and the (m, B) replicate matrix.
    One permutation (and one refit) per replicate serves every test point.
    """
    points = as_points(points, data.dim)
    model = fit_estimator(data, estimator)
    pi1 = data.pi1_hat
    if not model.is_linear_smoother:
        fitted = model.predict(points)
        columns = _parallel_replicates(_local_refit_replicate, plan, "local", data, points, estimator, plan)
        return (fitted - pi1) ** 2, fitted, np.column_stack(columns)

    weights = model.smoother_matrix(points)
    if sparse.issparse(weights):
        weights = weights.tocsr()
    fitted = np.asarray(weights @ data.labels.astype(np.float64)).ravel()
    replicates = np.empty((points.shape[0], plan.n_permutations))
    for start, stop in _blocks(plan, "local"):
        replicates[:, start:stop] = (np.asarray(weights @ permutation_matrix(data.labels, plan, start, stop)) - pi1) ** 2
    return (fitted - pi1) ** 2, fitted, replicates


def local_test(
    data: LabeledDataset,
    points,
    estimator: EstimatorConfig,
    plan: PermutationPlan,
    alpha: float = 0.05,
    correction: CorrectionMethod = CorrectionMethod.NONE,
) -> LocalTestReport:
    """
    Local permutation tests at every test point, followed by the multiplicity
    correction. With one class only, every replicate equals the observed value
    and the p-values are set to 1.
    """
    _check_alpha(alpha)
    points = as_points(points, data.dim)
    if points.shape[0] == 0:
        raise ValueError("no test points")
    if plan.scope != PermutationScope.ALL_LABELS:
        raise ValueError("local tests permute all labels")

    observed, fitted, replicates = local_replicates(data, points, estimator, plan)
    if data.n0 == 0 or data.n1 == 0:
        print("Warning: only one class present; local p-values set to 1.", file=sys.stderr)
        p_values = np.ones(points.shape[0])
    else:
        p_values = (1 + np.sum(replicates > observed[:, None], axis=1)) / (plan.n_permutations + 1)

    decisions = adjust(p_values, alpha, correction)
    return LocalTestReport(
        fitted=fitted,
        observed=observed,
        signs=np.sign(fitted - data.pi1_hat).astype(np.int8),
        p_values=p_values,
        reject=decisions.reject,
        correction=decisions.method.value,
        alpha=alpha,
        pi1_hat=data.pi1_hat,
        seed=plan.seed,
        n_permutations=plan.n_permutations,
    )
