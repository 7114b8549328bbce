# metrics/statistic.py
from enum import Enum
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from metrics.discrepancy import energy_stat, hotelling_stat, mmd_stat
from metrics.regression_stats import (
    AccuracyMode,
    accuracy_stat,
    global_reg_stat,
    global_reg_stat_split,
    lda_stat,
    local_point,
    local_reg_stat,
)
from regressors.base import EstimatorConfig, EstimatorKind, ForestConfig, KernelType
from regressors.factory import fit_estimator
from samples.dataset import LabeledDataset


class StatisticKind(str, Enum):
    GLOBAL_REG = "global-reg"
    GLOBAL_REG_SPLIT = "global-reg-split"
    LOCAL_REG = "local-reg"
    LDA_REG = "lda-reg"
    ACCURACY_IN_SAMPLE = "accuracy-in-sample"
    ACCURACY_OOB = "accuracy-oob"
    ACCURACY_CV2 = "accuracy-cv2"
    HOTELLING = "hotelling"
    MMD = "mmd"
    ENERGY = "energy"


# Kinds whose computation goes through a fitted regression estimator.
ESTIMATOR_KINDS = {
    StatisticKind.GLOBAL_REG,
    StatisticKind.GLOBAL_REG_SPLIT,
    StatisticKind.LOCAL_REG,
    StatisticKind.ACCURACY_IN_SAMPLE,
    StatisticKind.ACCURACY_OOB,
    StatisticKind.ACCURACY_CV2,
}


class StatisticSpec(BaseModel):
    """A test statistic: its kind fully determines the computation."""
    model_config = ConfigDict(frozen=True)

    kind: StatisticKind = Field(..., description="Which statistic to compute.")
    estimator: Optional[EstimatorConfig] = Field(None, description="Regression estimator for regression/accuracy kinds.")
    point: Optional[List[float]] = Field(None, description="Test point x for the local statistic.")
    label: Optional[str] = Field(None, description="Display name used in reports.")

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind in ESTIMATOR_KINDS and self.estimator is None:
            raise ValueError(f"{self.kind.value} needs an estimator")
        if self.kind not in ESTIMATOR_KINDS and self.estimator is not None:
            raise ValueError(f"{self.kind.value} does not take an estimator")
        if self.kind == StatisticKind.ACCURACY_OOB and self.estimator.kind != EstimatorKind.RANDOM_FOREST:
            raise ValueError("out-of-bag accuracy needs a random forest estimator")
        if self.kind == StatisticKind.LOCAL_REG and self.point is None:
            raise ValueError("local-reg needs a test point")
        if self.kind != StatisticKind.LOCAL_REG and self.point is not None:
            raise ValueError("only local-reg takes a test point")
        return self

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    @property
    def is_global(self) -> bool:
        return self.kind != StatisticKind.LOCAL_REG


def compute_statistic(spec: StatisticSpec, data: LabeledDataset, seed: int = 0) -> float:
    """
    Evaluates the statistic on `data`. `seed` drives the random split of the
    split-sample and cross-validated kinds and is ignored by the others.
    """
    kind = spec.kind
    if kind == StatisticKind.HOTELLING:
        return hotelling_stat(data)
    if kind == StatisticKind.MMD:
        return mmd_stat(data)
    if kind == StatisticKind.ENERGY:
        return energy_stat(data)
    if kind == StatisticKind.LDA_REG:
        return lda_stat(data)
    if kind == StatisticKind.GLOBAL_REG_SPLIT:
        return global_reg_stat_split(data, spec.estimator, seed)

    model = fit_estimator(data, spec.estimator)
    if kind == StatisticKind.GLOBAL_REG:
        return global_reg_stat(model, data)
    if kind == StatisticKind.LOCAL_REG:
        value, _ = local_reg_stat(model, local_point(spec.point, data.dim), data)
        return value
    if kind == StatisticKind.ACCURACY_IN_SAMPLE:
        return accuracy_stat(model, data, AccuracyMode.IN_SAMPLE)
    if kind == StatisticKind.ACCURACY_OOB:
        return accuracy_stat(model, data, AccuracyMode.OOB)
    if kind == StatisticKind.ACCURACY_CV2:
        return accuracy_stat(model, data, AccuracyMode.CROSS_VAL_2FOLD, seed=seed)
    raise ValueError(f"Unknown statistic kind: {kind}")


# --- Named presets (CLI --stat values) ---
STATISTIC_PRESETS = {
    "rf": (StatisticKind.GLOBAL_REG, EstimatorKind.RANDOM_FOREST),
    "rf-acc": (StatisticKind.ACCURACY_OOB, EstimatorKind.RANDOM_FOREST),
    "rf-split": (StatisticKind.GLOBAL_REG_SPLIT, EstimatorKind.RANDOM_FOREST),
    "knn": (StatisticKind.GLOBAL_REG, EstimatorKind.KNN),
    "knn-acc": (StatisticKind.ACCURACY_IN_SAMPLE, EstimatorKind.KNN),
    "knn-cv2": (StatisticKind.ACCURACY_CV2, EstimatorKind.KNN),
    "knn-split": (StatisticKind.GLOBAL_REG_SPLIT, EstimatorKind.KNN),
    "kernel": (StatisticKind.GLOBAL_REG, EstimatorKind.KERNEL),
    "kernel-acc": (StatisticKind.ACCURACY_IN_SAMPLE, EstimatorKind.KERNEL),
    "kernel-split": (StatisticKind.GLOBAL_REG_SPLIT, EstimatorKind.KERNEL),
    "lda": (StatisticKind.LDA_REG, None),
    "lda-acc": (StatisticKind.ACCURACY_IN_SAMPLE, EstimatorKind.LDA),
    "lda-cv2": (StatisticKind.ACCURACY_CV2, EstimatorKind.LDA),
    "hotelling": (StatisticKind.HOTELLING, None),
    "mmd": (StatisticKind.MMD, None),
    "energy": (StatisticKind.ENERGY, None),
}


def build_statistic(
    name: str,
    k: Optional[int] = None,
    bandwidth: Optional[float] = None,
    kernel: KernelType = KernelType.GAUSSIAN,
    forest: Optional[ForestConfig] = None,
) -> StatisticSpec:
    """
    Builds a StatisticSpec from a preset name and estimator parameters.
    Raises ValueError when the parameters do not fit the preset
    (e.g. `kernel` without a bandwidth, or a bandwidth given to `knn`).
    """
    if name not in STATISTIC_PRESETS:
        raise ValueError(f"Unknown statistic '{name}'. Choose from: {', '.join(STATISTIC_PRESETS)}")
    kind, estimator_kind = STATISTIC_PRESETS[name]
    if estimator_kind is None:
        if k is not None or bandwidth is not None:
            raise ValueError(f"'{name}' takes no estimator parameters")
        return StatisticSpec(kind=kind, label=name)

    params = {"kind": estimator_kind}
    if estimator_kind == EstimatorKind.KNN:
        params["k"] = k
    elif k is not None:
        raise ValueError(f"--k only applies to kNN statistics, not '{name}'")
    if estimator_kind == EstimatorKind.KERNEL:
        params.update(bandwidth=bandwidth, kernel=kernel)
    elif bandwidth is not None:
        raise ValueError(f"--bandwidth only applies to kernel statistics, not '{name}'")
    if estimator_kind == EstimatorKind.RANDOM_FOREST:
        params["forest"] = forest
    return StatisticSpec(kind=kind, estimator=EstimatorConfig(**params), label=name)


def local_statistic(estimator: EstimatorConfig, point) -> StatisticSpec:
    return StatisticSpec(
        kind=StatisticKind.LOCAL_REG, estimator=estimator, point=np.asarray(point, dtype=np.float64).ravel().tolist()
    )
