# calibration/outcome.py
from dataclasses import dataclass
from typing import ClassVar, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

# Colours of the local-test map: group 1 denser, group 0 denser, not significant.
RED, BLUE, GRAY = "red", "blue", "gray"


class TestOutcome(BaseModel):
    """Result of a permutation test of one global statistic."""
    __test__: ClassVar[bool] = False

    statistic: str = Field(..., description="Statistic name.")
    observed: float = Field(..., description="Statistic on the original labels.")
    replicates: List[float] = Field(default_factory=list, description="Statistic under each label permutation, in replicate order.")
    n_permutations: int = Field(..., ge=1, description="Number of permutations B.")
    p_value: float = Field(..., gt=0, le=1, description="(1 + #{replicate > observed}) / (B + 1).")
    alpha: float = Field(..., gt=0, lt=1, description="Significance level.")
    reject: bool = Field(..., description="True iff p_value < alpha.")
    seed: int = Field(..., description="Permutation seed.")
    wall_time_sec: Optional[float] = Field(None, description="Run time, filled in by the CLI.")
    variable_importance: Optional[List[float]] = Field(None, description="Random forest impurity decrease per feature, when requested.")

    @model_validator(mode="after")
    def _check_decision(self):
        if self.reject != (self.p_value < self.alpha):
            raise ValueError("reject must equal p_value < alpha")
        if self.replicates and len(self.replicates) != self.n_permutations:
            raise ValueError("replicate count does not match n_permutations")
        return self


class LocalSummary(BaseModel):
    """Counts of the local-test map: red/blue are rejections by sign, gray the rest."""
    n_points: int
    n_rejected: int
    red: int
    blue: int
    gray: int
    correction: str
    alpha: float
    pi1_hat: float
    calibration: str
    n_permutations: int
    seed: int


@dataclass(frozen=True)
class LocalTestReport:
    """
    Per-point results of a grid of local tests. `signs` is sign(m_hat(x) - pi1_hat);
    `valid` is only set for the asymptotic calibration, `neighbors` only for
    the dimension-adaptive kNN test.
    """
    fitted: np.ndarray
    observed: np.ndarray
    signs: np.ndarray
    p_values: np.ndarray
    reject: np.ndarray
    correction: str
    alpha: float
    pi1_hat: float
    seed: int
    n_permutations: int = 0
    calibration: str = "permutation"
    valid: Optional[np.ndarray] = None
    neighbors: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.observed.size

    def colors(self) -> np.ndarray:
        out = np.full(self.observed.size, GRAY, dtype=object)
        out[self.reject & (self.signs > 0)] = RED
        out[self.reject & (self.signs < 0)] = BLUE
        return out

    def summary(self) -> LocalSummary:
        colors = self.colors()
        return LocalSummary(
            n_points=len(self),
            n_rejected=int(self.reject.sum()),
            red=int(np.sum(colors == RED)),
            blue=int(np.sum(colors == BLUE)),
            gray=int(np.sum(colors == GRAY)),
            correction=self.correction,
            alpha=self.alpha,
            pi1_hat=self.pi1_hat,
            calibration=self.calibration,
            n_permutations=self.n_permutations,
            seed=self.seed,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "point_id": np.arange(len(self)),
            "statistic": self.observed,
            "m_hat": self.fitted,
            "sign": self.signs.astype(int),
            "p_value": self.p_values,
            "reject": self.reject.astype(bool),
            "color": self.colors(),
        })
        if self.valid is not None:
            frame["valid"] = self.valid.astype(bool)
        if self.neighbors is not None:
            frame["k"] = self.neighbors.astype(int)
        return frame
