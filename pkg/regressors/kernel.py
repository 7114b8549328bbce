# regressors/kernel.py
import numpy as np
from scipy.spatial.distance import cdist

from regressors.base import EstimatorConfig, EstimatorKind, KernelType, LinearSmoother, SmootherWeights, as_points
from samples.dataset import LabeledDataset
from utils.errors import DegenerateDataError

KERNEL_CHUNK = 512


class KernelModel(LinearSmoother):
    """
    Nadaraya-Watson regression with one scalar bandwidth h for every coordinate:
        m(x) = sum Y_i K((x - X_i)/h) / sum K((x - X_i)/h).
    Where the denominator is zero (box kernel, no training point within h) the
    estimate is 0 and the point is flagged.
    """
    kind = EstimatorKind.KERNEL

    def __init__(self, config: EstimatorConfig, data: LabeledDataset):
        super().__init__(config, data.features, data.labels)
        self.bandwidth = float(config.bandwidth)
        self.kernel = KernelType(config.kernel)

    def _raw_weights(self, points: np.ndarray) -> np.ndarray:
        sq = cdist(points, self.features, "sqeuclidean") / self.bandwidth ** 2
        if self.kernel == KernelType.BOX:
            return (sq <= 1.0).astype(np.float64)
        # Shifting by the row minimum leaves the ratio unchanged and keeps the
        # largest weight at 1, so the Gaussian denominator never underflows.
        return np.exp(-0.5 * (sq - sq.min(axis=1, keepdims=True)))

    def smoother_matrix(self, x) -> np.ndarray:
        points = as_points(x, self.dim)
        out = np.zeros((points.shape[0], self.n))
        for start in range(0, points.shape[0], KERNEL_CHUNK):
            raw = self._raw_weights(points[start:start + KERNEL_CHUNK])
            total = raw.sum(axis=1, keepdims=True)
            np.divide(raw, total, out=out[start:start + len(raw)], where=total > 0)
        return out

    def zero_denominator(self, x) -> np.ndarray:
        """Boolean mask of the points where no training point carries weight."""
        points = as_points(x, self.dim)
        mask = np.zeros(points.shape[0], dtype=bool)
        for start in range(0, points.shape[0], KERNEL_CHUNK):
            mask[start:start + KERNEL_CHUNK] = self._raw_weights(points[start:start + KERNEL_CHUNK]).sum(axis=1) == 0
        return mask

    def weights(self, x) -> SmootherWeights:
        if self.zero_denominator(x).any():
            raise DegenerateDataError("kernel weights are undefined: zero denominator at this point")
        return super().weights(x)


def fit_kernel(data: LabeledDataset, bandwidth: float, kernel: KernelType = KernelType.GAUSSIAN) -> KernelModel:
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return KernelModel(EstimatorConfig(kind=EstimatorKind.KERNEL, bandwidth=bandwidth, kernel=kernel), data)
