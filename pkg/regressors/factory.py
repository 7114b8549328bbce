# regressors/factory.py
from regressors.base import EstimatorConfig, EstimatorKind, RegressionModel
from regressors.forest import fit_forest
from regressors.kernel import fit_kernel
from regressors.knn import fit_knn
from regressors.lda import fit_lda
from samples.dataset import LabeledDataset


def fit_estimator(data: LabeledDataset, cfg: EstimatorConfig) -> RegressionModel:
    """Fits the estimator described by `cfg` on `data`."""
    if cfg.kind == EstimatorKind.LDA:
        return fit_lda(data)
    if cfg.kind == EstimatorKind.KNN:
        return fit_knn(data, cfg.k)
    if cfg.kind == EstimatorKind.KERNEL:
        return fit_kernel(data, cfg.bandwidth, cfg.kernel)
    if cfg.kind == EstimatorKind.RANDOM_FOREST:
        return fit_forest(data, cfg.forest_config)
    raise ValueError(f"Unknown estimator kind: {cfg.kind}")
