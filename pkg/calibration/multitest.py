# calibration/multitest.py
"""
Multiplicity control for grids of local tests. Every procedure returns
decisions only (no adjusted p-values). Sorting is stable by original index,
so tied p-values are ordered by position and the step rules handle them.
"""
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class CorrectionMethod(str, Enum):
    HOCHBERG = "hochberg"
    BONFERRONI = "bonferroni"
    BH = "bh"
    NONE = "none"


@dataclass(frozen=True)
class AdjustedDecisions:
    raw_p: np.ndarray
    method: CorrectionMethod
    alpha: float
    reject: np.ndarray

    @property
    def n_rejected(self) -> int:
        return int(self.reject.sum())

    def __len__(self) -> int:
        return self.raw_p.size


def _check_p_values(p, alpha: float) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("no p-values to adjust")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return p


def _step_up(p: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """
    Rejects the hypotheses with the j* smallest p-values, where
    j* = max{j : p_(j) <= thresholds[j-1]}; nothing if no j qualifies.
    """
    order = np.argsort(p, kind="stable")
    passed = np.flatnonzero(p[order] <= thresholds)
    reject = np.zeros(p.size, dtype=bool)
    if passed.size:
        reject[order[:passed[-1] + 1]] = True
    return reject


def hochberg(p, alpha: float) -> AdjustedDecisions:
    """Hochberg step-up (FWER): p_(j) <= alpha / (k - j + 1)."""
    p = _check_p_values(p, alpha)
    k = p.size
    thresholds = alpha / (k - np.arange(1, k + 1) + 1)
    return AdjustedDecisions(p, CorrectionMethod.HOCHBERG, alpha, _step_up(p, thresholds))


def bonferroni(p, alpha: float) -> AdjustedDecisions:
    p = _check_p_values(p, alpha)
    return AdjustedDecisions(p, CorrectionMethod.BONFERRONI, alpha, p <= alpha / p.size)


def benjamini_hochberg(p, alpha: float) -> AdjustedDecisions:
    """Benjamini-Hochberg step-up (FDR): p_(j) <= j alpha / k."""
    p = _check_p_values(p, alpha)
    k = p.size
    thresholds = np.arange(1, k + 1) * alpha / k
    return AdjustedDecisions(p, CorrectionMethod.BH, alpha, _step_up(p, thresholds))


def uncorrected(p, alpha: float) -> AdjustedDecisions:
    """Raw decisions p < alpha, the single-test rule."""
    p = _check_p_values(p, alpha)
    return AdjustedDecisions(p, CorrectionMethod.NONE, alpha, p < alpha)


def adjust(p, alpha: float, method: CorrectionMethod = CorrectionMethod.NONE) -> AdjustedDecisions:
    method = CorrectionMethod(method)
    if method == CorrectionMethod.HOCHBERG:
        return hochberg(p, alpha)
    if method == CorrectionMethod.BONFERRONI:
        return bonferroni(p, alpha)
    if method == CorrectionMethod.BH:
        return benjamini_hochberg(p, alpha)
    return uncorrected(p, alpha)


# --- Neighbour counts for the dimension-adaptive kNN test ---
def adaptive_k(n: int, i: int) -> int:
    """k_n(i) = ceil(n^{2/(i+2)}) clipped to [1, n - 1]."""
    return int(min(max(math.ceil(n ** (2.0 / (i + 2.0))), 1), max(n - 1, 1)))
