# regressors/base.py
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from utils.errors import UnsupportedOperationError

# Linear-smoother weights must sum to one within this tolerance.
WEIGHT_SUM_TOLERANCE = 1e-12


class EstimatorKind(str, Enum):
    LDA = "lda"
    KNN = "knn"
    KERNEL = "kernel"
    RANDOM_FOREST = "rf"


class KernelType(str, Enum):
    GAUSSIAN = "gaussian"
    BOX = "box"


class ForestConfig(BaseModel):
    """
    Bagged CART regression trees. Defaults follow the usual regression-forest
    defaults: 500 trees, mtry = max(1, floor(D/3)), terminal nodes of size <= 5.
    """
    model_config = ConfigDict(frozen=True)

    n_trees: int = Field(500, ge=1, description="Number of trees.")
    mtry: Optional[int] = Field(None, ge=1, description="Features tried per split; None means max(1, floor(D/3)).")
    min_node: int = Field(5, ge=1, description="Nodes with at most this many samples are not split.")
    bootstrap: bool = Field(True, description="Grow each tree on a bootstrap sample of size n; False uses every row.")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Seed for bootstrap samples and feature draws.")
    n_jobs: int = Field(1, ge=1, description="Workers for growing trees; does not change results.")

    def resolve_mtry(self, dim: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, dim // 3)
        if mtry > dim:
            raise ValueError(f"mtry={mtry} exceeds the dimension D={dim}")
        return mtry


class EstimatorConfig(BaseModel):
    """Which regression estimator to fit, with its tuning parameters."""
    model_config = ConfigDict(frozen=True)

    kind: EstimatorKind = Field(..., description="Estimator family.")
    k: Optional[int] = Field(None, ge=1, description="Neighbours for kNN.")
    bandwidth: Optional[float] = Field(None, gt=0, description="Scalar bandwidth h for kernel regression.")
    kernel: KernelType = Field(KernelType.GAUSSIAN, description="Kernel shape for kernel regression.")
    forest: Optional[ForestConfig] = Field(None, description="Forest settings for kind=rf.")

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.kind == EstimatorKind.KNN and self.k is None:
            raise ValueError("kNN needs k")
        if self.kind == EstimatorKind.KERNEL and self.bandwidth is None:
            raise ValueError("kernel regression needs a bandwidth")
        if self.kind != EstimatorKind.KERNEL and self.bandwidth is not None:
            raise ValueError("bandwidth only applies to kernel regression")
        if self.kind != EstimatorKind.KNN and self.k is not None:
            raise ValueError("k only applies to kNN")
        if self.kind != EstimatorKind.RANDOM_FOREST and self.forest is not None:
            raise ValueError("forest settings only apply to kind=rf")
        return self

    @property
    def forest_config(self) -> ForestConfig:
        return self.forest if self.forest is not None else ForestConfig()

    @property
    def is_linear_smoother(self) -> bool:
        return self.kind in (EstimatorKind.KNN, EstimatorKind.KERNEL)


@dataclass(frozen=True)
class SmootherWeights:
    """Weights w_i(x) >= 0 summing to one, depending only on the features."""
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("smoother weights must be a vector")
        if np.any(w < 0):
            raise ValueError("smoother weights must be non-negative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"smoother weights sum to {w.sum():.17g}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.weights.size


def as_points(x, dim: int) -> np.ndarray:
    """Coerces a single point or a matrix of points to shape (m, dim)."""
    points = np.asarray(x, dtype=np.float64)
    if points.ndim <= 1:
        points = points.reshape(1, -1)
    if points.shape[1] != dim:
        raise ValueError(f"points have dimension {points.shape[1]}, model expects {dim}")
    return points


class RegressionModel(ABC):
    """
    A fitted estimate of m(x) = P(Y=1 | X=x). Models are not mutated after fit.
    """
    kind: ClassVar[EstimatorKind]

    def __init__(self, config: EstimatorConfig, features: np.ndarray, labels: np.ndarray):
        self.config = config
        self.dim = features.shape[1]
        self.n = features.shape[0]
        self.pi1_hat = float(np.mean(labels))

    @abstractmethod
    def predict(self, x) -> np.ndarray:
        """m_hat at one point (returns shape (1,)) or at each row of a matrix."""

    def weights(self, x) -> SmootherWeights:
        raise UnsupportedOperationError(f"{self.kind.value} is not a linear smoother; weights are undefined")

    @property
    def is_linear_smoother(self) -> bool:
        return False


class LinearSmoother(RegressionModel):
    """
    m_hat(x) = sum_i w_i(x) Y_i. The weight matrix at a set of points depends only
    on the training features, so it can be reused for any relabelling.
    """

    def __init__(self, config: EstimatorConfig, features: np.ndarray, labels: np.ndarray):
        super().__init__(config, features, labels)
        self.features = features
        self.labels = np.asarray(labels, dtype=np.float64)

    @abstractmethod
    def smoother_matrix(self, x) -> Union[np.ndarray, sparse.csr_matrix]:
        """(m, n) matrix whose row j holds w_i(x_j); zero rows where weights are undefined."""

    def predict(self, x) -> np.ndarray:
        return np.asarray(self.smoother_matrix(x) @ self.labels).ravel()

    def weights(self, x) -> SmootherWeights:
        row = self.smoother_matrix(x)
        if sparse.issparse(row):
            row = row.toarray()
        if row.shape[0] != 1:
            raise ValueError("weights() takes a single point")
        return SmootherWeights(row[0])

    @property
    def is_linear_smoother(self) -> bool:
        return True
