# metrics/discrepancy.py
"""
Classical benchmark statistics: Hotelling's T^2, the biased (V-statistic) MMD
with a median-heuristic Gaussian kernel, and the energy distance.

MMD and energy are quadratic forms a^T M a in the signed label vector
a_i = Y_i / n1 - (1 - Y_i) / n0, so the pooled matrix M can be computed once
and reused for every relabelling.
"""
import numpy as np
from scipy.spatial.distance import cdist, pdist

from regressors.lda import invert_covariance
from samples.dataset import LabeledDataset
from utils.errors import DegenerateDataError


def signed_label_vector(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    n1 = labels.sum()
    n0 = labels.size - n1
    if n0 < 1 or n1 < 1:
        raise DegenerateDataError("both groups need at least one point")
    return labels / n1 - (1.0 - labels) / n0


def median_heuristic(features: np.ndarray) -> float:
    """
    Median of the pairwise squared Euclidean distances (i < j) over the pooled sample.
    """
    if features.shape[0] < 2:
        raise DegenerateDataError("the median heuristic needs at least two points")
    sigma = float(np.median(pdist(features, "sqeuclidean")))
    if sigma <= 0:
        raise DegenerateDataError("median pairwise distance is zero (points are identical)")
    return sigma


def gaussian_gram(features: np.ndarray, sigma: float) -> np.ndarray:
    """k(x, y) = exp(-||x - y||^2 / sigma) over all pooled pairs."""
    return np.exp(-cdist(features, features, "sqeuclidean") / sigma)


def mmd_from_gram(gram: np.ndarray, labels: np.ndarray) -> float:
    a = signed_label_vector(labels)
    return float(a @ gram @ a)


def energy_from_distances(distances: np.ndarray, labels: np.ndarray) -> float:
    a = signed_label_vector(labels)
    return float(-(a @ distances @ a))


def mmd_stat(data: LabeledDataset) -> float:
    """
    Biased MMD^2: within-group kernel means (diagonal included) minus twice the
    cross-group kernel mean.
    """
    sigma = median_heuristic(data.features)
    return mmd_from_gram(gaussian_gram(data.features, sigma), data.labels)


def energy_stat(data: LabeledDataset) -> float:
    """
    2/(n0 n1) sum ||X0 - X1|| - 1/n0^2 sum ||X0 - X0'|| - 1/n1^2 sum ||X1 - X1'||.
    """
    return energy_from_distances(cdist(data.features, data.features, "euclidean"), data.labels)


def hotelling_stat(data: LabeledDataset) -> float:
    """
    Two-sample Hotelling T^2 with the pooled covariance S_p (divisor n0 + n1 - 2).
    """
    n0, n1 = data.n0, data.n1
    if n0 < 1 or n1 < 1 or n0 + n1 <= 2:
        raise DegenerateDataError(f"Hotelling's T^2 needs n0 + n1 > 2 with both groups present (n0={n0}, n1={n1})")
    x0, x1 = data.group(0), data.group(1)
    diff = x0.mean(axis=0) - x1.mean(axis=0)
    scatter = (x0 - x0.mean(axis=0)).T @ (x0 - x0.mean(axis=0)) + (x1 - x1.mean(axis=0)).T @ (x1 - x1.mean(axis=0))
    pooled = np.atleast_2d(scatter / (n0 + n1 - 2))
    precision = invert_covariance(pooled, "pooled covariance S_p")
    return float(n0 * n1 / (n0 + n1) * diff @ precision @ diff)
