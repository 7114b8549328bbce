# regressors/knn.py
import math

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from regressors.base import EstimatorConfig, EstimatorKind, LinearSmoother, as_points
from samples.dataset import LabeledDataset

# Rows of the distance matrix processed at once when searching neighbours.
NEIGHBOR_CHUNK = 512


def nearest_neighbors(train: np.ndarray, points: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of the k nearest training rows (Euclidean) for every point, closest
    first. Distance ties go to the lowest training index.
    """
    out = np.empty((points.shape[0], k), dtype=np.int64)
    for start in range(0, points.shape[0], NEIGHBOR_CHUNK):
        block = points[start:start + NEIGHBOR_CHUNK]
        dist = cdist(block, train, "euclidean")
        out[start:start + len(block)] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return out


def default_knn_k(n: int, dim: int) -> int:
    """k_n = ceil(n^{2/(2+D)}), clipped to [1, n - 1]."""
    return int(min(max(math.ceil(n ** (2.0 / (2.0 + dim))), 1), max(n - 1, 1)))


class KnnModel(LinearSmoother):
    """kNN regression: the average label over the k nearest training points."""
    kind = EstimatorKind.KNN

    def __init__(self, config: EstimatorConfig, data: LabeledDataset):
        super().__init__(config, data.features, data.labels)
        self.k = config.k

    def neighbors(self, x) -> np.ndarray:
        return nearest_neighbors(self.features, as_points(x, self.dim), self.k)

    def smoother_matrix(self, x) -> sparse.csr_matrix:
        idx = self.neighbors(x)
        m = idx.shape[0]
        indptr = np.arange(0, m * self.k + 1, self.k)
        values = np.full(m * self.k, 1.0 / self.k)
        return sparse.csr_matrix((values, idx.ravel(), indptr), shape=(m, self.n))

    def predict(self, x) -> np.ndarray:
        return self.labels[self.neighbors(x)].mean(axis=1)


def fit_knn(data: LabeledDataset, k: int) -> KnnModel:
    if not 1 <= k <= data.n:
        raise ValueError(f"k must lie in [1, n={data.n}], got {k}")
    return KnnModel(EstimatorConfig(kind=EstimatorKind.KNN, k=k), data)
