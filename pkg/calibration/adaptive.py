# calibration/adaptive.py
"""
Dimension-adaptive local kNN tests. The intrinsic dimension of the data is
unknown, so the local test is run once per candidate dimension i = 1..D with
k_n(i) neighbours and the D p-values are merged by Bonferroni:
p = min(1, D * min_i p_i).
"""
from typing import Any, Dict, List

import numpy as np
from pydantic import Field

from calibration.multitest import CorrectionMethod, adaptive_k, adjust
from calibration.outcome import LocalTestReport, TestOutcome
from calibration.permutation import PermutationPlan, local_test
from regressors.base import EstimatorConfig, EstimatorKind, as_points
from samples.dataset import LabeledDataset


class DimensionAdaptiveOutcome(TestOutcome):
    """
    Bonferroni aggregate over candidate dimensions i = 1..D. `p_value` is
    min(1, D * min_i p_i), so `reject` matches "some component rejects at alpha/D".
    """
    components: List[Dict[str, Any]] = Field(default_factory=list, description="Per-dimension k, p-value and decision.")


def candidate_neighbors(n: int, dim: int) -> List[int]:
    """k_n(i) for i = 1..dim, one entry per candidate dimension."""
    return [adaptive_k(n, i) for i in range(1, dim + 1)]


def _reports_by_k(data: LabeledDataset, points: np.ndarray, plan: PermutationPlan) -> Dict[int, LocalTestReport]:
    reports = {}
    for k in candidate_neighbors(data.n, data.dim):
        if k not in reports:
            reports[k] = local_test(data, points, EstimatorConfig(kind=EstimatorKind.KNN, k=k), plan)
    return reports


def dimension_adaptive_knn(data: LabeledDataset, x, alpha: float, plan: PermutationPlan) -> DimensionAdaptiveOutcome:
    """
    Runs the local kNN test at x once per candidate intrinsic dimension
    i = 1..D with k_n(i) neighbours, each at level alpha / D, and rejects if
    any of them does.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    point = as_points(x, data.dim)
    dims = data.dim
    level = alpha / dims
    reports = _reports_by_k(data, point, plan)
    components = []
    for i, k in enumerate(candidate_neighbors(data.n, dims), start=1):
        p_i = float(reports[k].p_values[0])
        components.append({"dim": i, "k": k, "statistic": float(reports[k].observed[0]), "p_value": p_i, "reject": p_i < level})

    best = min(components, key=lambda c: c["p_value"])
    p_value = min(1.0, dims * best["p_value"])
    return DimensionAdaptiveOutcome(
        statistic="knn-dimension-adaptive",
        observed=best["statistic"],
        replicates=[],
        n_permutations=plan.n_permutations,
        p_value=p_value,
        alpha=alpha,
        reject=p_value < alpha,
        seed=plan.seed,
        components=components,
    )


def dimension_adaptive_local(
    data: LabeledDataset,
    points,
    plan: PermutationPlan,
    alpha: float = 0.05,
    correction: CorrectionMethod = CorrectionMethod.NONE,
) -> LocalTestReport:
    """
    Dimension-adaptive kNN test at every test point, then the multiplicity
    correction across points. Each row reports the neighbour count of its
    smallest component p-value.
    """
    points = as_points(points, data.dim)
    if points.shape[0] == 0:
        raise ValueError("no test points")
    reports = _reports_by_k(data, points, plan)
    ks = np.array(sorted(reports))
    # (candidates, m) raw p-values; one row per distinct k
    p_matrix = np.vstack([reports[k].p_values for k in ks])
    best = np.argmin(p_matrix, axis=0)
    columns = np.arange(points.shape[0])
    p_values = np.minimum(1.0, data.dim * p_matrix[best, columns])
    fitted = np.vstack([reports[k].fitted for k in ks])[best, columns]
    observed = np.vstack([reports[k].observed for k in ks])[best, columns]

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
        neighbors=ks[best],
    )
