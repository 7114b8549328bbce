# regressors/lda.py
import numpy as np
from scipy import linalg
from scipy.special import expit

from regressors.base import EstimatorConfig, EstimatorKind, RegressionModel, as_points
from samples.dataset import LabeledDataset
from utils.errors import SingularMatrixError

# Reciprocal condition number below which a covariance matrix counts as singular.
SINGULAR_RCOND = 1e-12


def invert_covariance(cov: np.ndarray, name: str) -> np.ndarray:
    """
    Inverts a symmetric covariance matrix, refusing (rather than pseudo-inverting)
    when it is singular or numerically close to it.
    """
    cov = np.atleast_2d(cov)
    eigenvalues = np.linalg.eigvalsh(cov)
    top = eigenvalues.max()
    if top <= 0 or eigenvalues.min() <= SINGULAR_RCOND * top:
        raise SingularMatrixError(
            f"{name} is singular (eigenvalues in [{eigenvalues.min():.3g}, {top:.3g}])"
        )
    return linalg.inv(cov)


class LdaModel(RegressionModel):
    """
    Fisher's LDA regression estimator
        m(x) = pi1 phi_1(x) / (pi0 phi_0(x) + pi1 phi_1(x)),
    with Gaussian kernels centred at the group means and sharing the combined-sample
    covariance S = n^-1 sum (X_i - mu)(X_i - mu)^T.
    """
    kind = EstimatorKind.LDA

    def __init__(self, config: EstimatorConfig, data: LabeledDataset):
        super().__init__(config, data.features, data.labels)
        self.mean0 = data.group(0).mean(axis=0)
        self.mean1 = data.group(1).mean(axis=0)
        combined = np.atleast_2d(np.cov(data.features, rowvar=False, bias=True))
        self.precision = invert_covariance(combined, "combined covariance S")
        self.log_prior_ratio = np.log(self.pi1_hat) - np.log(1.0 - self.pi1_hat)

    def _mahalanobis(self, points: np.ndarray, mean: np.ndarray) -> np.ndarray:
        diff = points - mean
        return np.einsum("ij,jk,ik->i", diff, self.precision, diff)

    def predict(self, x) -> np.ndarray:
        points = as_points(x, self.dim)
        log_odds = self.log_prior_ratio + 0.5 * (
            self._mahalanobis(points, self.mean0) - self._mahalanobis(points, self.mean1)
        )
        return expit(log_odds)


def fit_lda(data: LabeledDataset) -> LdaModel:
    data.require_both_classes()
    return LdaModel(EstimatorConfig(kind=EstimatorKind.LDA), data)
