# calibration/asymptotic.py
"""
Large-sample calibration of the local test for linear smoothers: under
permutation, (m_hat(x) - pi1_hat)^2 / sigma_n^2 is approximately chi-square
with one degree of freedom.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import erfc

from calibration.multitest import CorrectionMethod, adjust
from calibration.outcome import LocalTestReport
from regressors.base import RegressionModel, SmootherWeights, as_points
from samples.dataset import LabeledDataset
from utils.errors import ConditionViolatedError, DegenerateDataError, UnsupportedOperationError

# max_i |w_i - 1/n| / sqrt(sum_i (w_i - 1/n)^2) above this marks the limit as unreliable.
VALIDITY_RATIO_THRESHOLD = 0.2
WEIGHT_CHUNK = 512
# Tail probabilities that underflow are reported as the smallest positive double.
P_VALUE_FLOOR = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class AsymptoticLocalResult:
    normalized_stat: float
    sigma_sq: float
    p_value: float
    valid: bool
    ratio: float
    reject: bool


def _check_pi(pi_hat: float):
    if not 0 < pi_hat < 1:
        raise DegenerateDataError(f"class probability must lie strictly between 0 and 1, got {pi_hat}")


def sigma_sq_general(weights: SmootherWeights, pi_hat: float, n: int = None) -> float:
    """sigma_n^2 = n/(n-1) * pi(1-pi) * sum_i (w_i - 1/n)^2."""
    _check_pi(pi_hat)
    w = weights.weights if isinstance(weights, SmootherWeights) else SmootherWeights(weights).weights
    n = w.size if n is None else n
    if n != w.size:
        raise ValueError(f"{w.size} weights for n={n}")
    return n / (n - 1) * pi_hat * (1.0 - pi_hat) * float(np.sum((w - 1.0 / n) ** 2))


def sigma_sq_knn(n: int, k: int, pi_hat: float) -> float:
    """Closed form for kNN weights: pi(1-pi)(n-1)(n-k)/(n^2 k), valid for 2k < n."""
    if not 2 * k < n:
        raise ConditionViolatedError(f"the kNN closed form needs 2k < n (n={n}, k={k})")
    _check_pi(pi_hat)
    return pi_hat * (1.0 - pi_hat) * (n - 1) * (n - k) / (n ** 2 * k)


def chi2_upper_tail(t: float, df: int = 1) -> float:
    """P(chi2_1 > t) = erfc(sqrt(t / 2))."""
    if df != 1:
        raise ValueError("only df=1 is supported")
    if t < 0 or math.isnan(t):
        raise ValueError(f"chi-square tail needs t >= 0, got {t}")
    return float(erfc(math.sqrt(t / 2.0)))


def _weight_moments(model: RegressionModel, points: np.ndarray):
    """sum_i (w_i - 1/n)^2 and max_i |w_i - 1/n| at every point, in row blocks."""
    ss = np.empty(points.shape[0])
    dev = np.empty(points.shape[0])
    for start in range(0, points.shape[0], WEIGHT_CHUNK):
        block = model.smoother_matrix(points[start:start + WEIGHT_CHUNK])
        if sparse.issparse(block):
            block = block.toarray()
        centred = block - 1.0 / model.n
        # Rows without any weight (empty box kernel window) carry no information.
        defined = block.sum(axis=1) > 0
        ss[start:start + len(block)] = np.where(defined, np.sum(centred ** 2, axis=1), 0.0)
        dev[start:start + len(block)] = np.max(np.abs(centred), axis=1)
    return ss, dev


def _require_smoother(model: RegressionModel):
    if not model.is_linear_smoother:
        raise UnsupportedOperationError(f"the chi-square limit needs a linear smoother, not {model.kind.value}")


def chi2_local_tests(
    model: RegressionModel,
    points,
    data: LabeledDataset,
    alpha: float = 0.05,
    correction: CorrectionMethod = CorrectionMethod.NONE,
) -> LocalTestReport:
    """
    Asymptotic local tests at every point. Points where sigma_n^2 vanishes
    (uniform or undefined weights) get normalized statistic 0, p-value 1 and
    are flagged invalid.
    """
    _require_smoother(model)
    _check_pi(data.pi1_hat)
    points = as_points(points, data.dim)
    if points.shape[0] == 0:
        raise ValueError("no test points")
    n, pi1 = data.n, data.pi1_hat

    fitted = model.predict(points)
    ss, dev = _weight_moments(model, points)
    sigma_sq = n / (n - 1) * pi1 * (1.0 - pi1) * ss
    positive = sigma_sq > 0
    normalized = np.zeros(points.shape[0])
    normalized[positive] = (fitted[positive] - pi1) ** 2 / sigma_sq[positive]
    p_values = np.maximum(erfc(np.sqrt(normalized / 2.0)), P_VALUE_FLOOR)
    ratio = np.full(points.shape[0], np.inf)
    ratio[positive] = dev[positive] / np.sqrt(ss[positive])

    decisions = adjust(p_values, alpha, correction)
    return LocalTestReport(
        fitted=fitted,
        observed=(fitted - pi1) ** 2,
        signs=np.sign(fitted - pi1).astype(np.int8),
        p_values=p_values,
        reject=decisions.reject,
        correction=decisions.method.value,
        alpha=alpha,
        pi1_hat=pi1,
        seed=0,
        calibration="asymptotic",
        valid=positive & (ratio <= VALIDITY_RATIO_THRESHOLD),
    )


def chi2_local_test(model: RegressionModel, x, data: LabeledDataset, alpha: float = 0.05) -> AsymptoticLocalResult:
    _require_smoother(model)
    weights = model.weights(x)
    sigma_sq = sigma_sq_general(weights, data.pi1_hat, data.n)
    deviation = float(model.predict(x)[0]) - data.pi1_hat
    if sigma_sq <= 0:
        return AsymptoticLocalResult(0.0, 0.0, 1.0, False, math.inf, False)
    centred = weights.weights - 1.0 / data.n
    ratio = float(np.max(np.abs(centred)) / np.sqrt(np.sum(centred ** 2)))
    normalized = deviation ** 2 / sigma_sq
    p_value = max(chi2_upper_tail(normalized), P_VALUE_FLOOR)
    return AsymptoticLocalResult(
        normalized_stat=normalized,
        sigma_sq=sigma_sq,
        p_value=p_value,
        valid=ratio <= VALIDITY_RATIO_THRESHOLD,
        ratio=ratio,
        reject=p_value < alpha,
    )
