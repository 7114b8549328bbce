# metrics/regression_stats.py
import math
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from regressors.base import EstimatorConfig, EstimatorKind, RegressionModel, as_points
from regressors.factory import fit_estimator
from regressors.lda import fit_lda
from samples.dataset import LabeledDataset, SamplingScheme
from utils.errors import DegenerateDataError, RefitError, UnsupportedOperationError
from utils.rng import make_rng

# Classifiers dichotomise m_hat at this value; m_hat == 1/2 is classified as 0.
ACCURACY_THRESHOLD = 0.5


class AccuracyMode(str, Enum):
    IN_SAMPLE = "in-sample"
    OOB = "oob"
    CROSS_VAL_2FOLD = "cv2"


def global_reg_stat(model: RegressionModel, data: LabeledDataset) -> float:
    """(1/n) sum_i (m_hat(X_i) - pi1_hat)^2, evaluated in-sample."""
    fitted = model.predict(data.features)
    return float(np.mean((fitted - data.pi1_hat) ** 2))


def local_reg_stats(model: RegressionModel, points, data: LabeledDataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    (m_hat(x) - pi1_hat)^2 at every point, with sign(m_hat(x) - pi1_hat):
    +1 where group 1 is locally over-represented, -1 where group 0 is.
    """
    deviation = model.predict(as_points(points, data.dim)) - data.pi1_hat
    return deviation ** 2, np.sign(deviation).astype(np.int8)


def local_reg_stat(model: RegressionModel, x, data: LabeledDataset) -> Tuple[float, int]:
    values, signs = local_reg_stats(model, x, data)
    return float(values[0]), int(signs[0])


def split_halves(data: LabeledDataset, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random split into a fitting half of ceil(n/2) rows and an evaluation half.
    Under separate sampling each class is split in proportion, so both halves
    keep the class probability.
    """
    rng = make_rng(seed, "split")
    first_size = math.ceil(data.n / 2)
    if data.scheme == SamplingScheme.IID:
        order = rng.permutation(data.n)
        return np.sort(order[:first_size]), np.sort(order[first_size:])

    class0 = rng.permutation(np.flatnonzero(data.labels == 0))
    class1 = rng.permutation(np.flatnonzero(data.labels == 1))
    take0 = int(round(class0.size * first_size / data.n))
    take1 = first_size - take0
    first = np.concatenate([class0[:take0], class1[:take1]])
    second = np.concatenate([class0[take0:], class1[take1:]])
    return np.sort(first), np.sort(second)


def split_statistic(
    data: LabeledDataset,
    estimator: EstimatorConfig,
    first: np.ndarray,
    second: np.ndarray,
) -> float:
    """
    Fits m_hat and pi1_hat on the `first` rows and averages (m_hat(X_i) - pi1_hat)^2
    over the `second` rows.
    """
    train = data.subset(first)
    if train.n0 == 0 or train.n1 == 0:
        raise RefitError(f"fitting half has only one class (n0={train.n0}, n1={train.n1})")
    model = fit_estimator(train, estimator)
    fitted = model.predict(data.features[second])
    return float(np.mean((fitted - train.pi1_hat) ** 2))


def global_reg_stat_split(data: LabeledDataset, estimator: EstimatorConfig, seed: int) -> float:
    first, second = split_halves(data, seed)
    return split_statistic(data, estimator, first, second)


def lda_stat(data: LabeledDataset) -> float:
    """Global regression statistic of Fisher's LDA estimator with pi1 = n1/n."""
    return global_reg_stat(fit_lda(data), data)


def _correct(fitted: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return (fitted > ACCURACY_THRESHOLD).astype(np.int8) == labels


def accuracy_stat(
    model: RegressionModel,
    data: LabeledDataset,
    mode: AccuracyMode = AccuracyMode.IN_SAMPLE,
    seed: int = 0,
) -> float:
    """
    Fraction of points with I(m_hat(X_i) > 1/2) == Y_i.

    in-sample: m_hat fitted on all of `data`;
    oob:       out-of-bag predictions of a forest;
    cv2:       two balanced folds, each predicted by the model refit on the other.
    """
    mode = AccuracyMode(mode)
    if mode == AccuracyMode.IN_SAMPLE:
        return float(np.mean(_correct(model.predict(data.features), data.labels)))

    if mode == AccuracyMode.OOB:
        if model.kind != EstimatorKind.RANDOM_FOREST:
            raise UnsupportedOperationError("out-of-bag accuracy needs a random forest")
        if not np.isfinite(model.oob_accuracy):
            raise DegenerateDataError("no out-of-bag predictions (forest grown without bootstrap?)")
        return model.oob_accuracy

    fold_a, fold_b = split_halves(data, seed)
    correct = 0
    for train_rows, test_rows in ((fold_a, fold_b), (fold_b, fold_a)):
        train = data.subset(train_rows)
        if train.n0 == 0 or train.n1 == 0:
            raise RefitError("a cross-validation fold has only one class")
        refit = fit_estimator(train, model.config)
        correct += int(_correct(refit.predict(data.features[test_rows]), data.labels[test_rows]).sum())
    return correct / data.n


def local_point(point: Optional[list], dim: int) -> np.ndarray:
    if point is None:
        raise ValueError("a local statistic needs a test point")
    return as_points(point, dim)
