# embed/diffusion.py
"""
Averaged diffusion map with local scaling, used to place high-dimensional
test points (e.g. edge images) in two plotting coordinates.
"""
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.spatial.distance import cdist

from utils.errors import DegenerateDataError, EmbeddingError, SchemaError

DEFAULT_NEIGHBOR_K = 50
DEFAULT_COMPONENTS = 2
# The weight matrix is symmetric by construction; more asymmetry than this is an error.
SYMMETRY_TOLERANCE = 1e-8
# Eigenvalues this close to 1 after removing the stationary pair mean a disconnected graph.
UNIT_EIGENVALUE_GAP = 1e-12
# Columns of a local-test report carried onto the coordinates.
REPORT_COLUMNS = ("statistic", "p_value", "reject", "sign", "color")


@dataclass(frozen=True)
class EmbeddingResult:
    """Leading diffusion pairs; `eigenvalues` are descending and lie in (0, 1)."""
    coordinates: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    neighbor_k: int

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size


def local_scaling_weights(points: np.ndarray, k: int) -> np.ndarray:
    """
    w(i, j) = exp(-||x_i - x_j||^2 / (sigma_i sigma_j)), where sigma_i is the
    distance from x_i to its k-th nearest neighbour (itself excluded).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"neighbour index k must lie in [1, n-1={n - 1}], got {k}")
    distances = cdist(points, points, "euclidean")
    # Column 0 of each sorted row is the point itself (distance 0).
    sigma = np.sort(distances, axis=1)[:, k]
    if np.any(sigma <= 0):
        bad = int(np.flatnonzero(sigma <= 0)[0])
        raise DegenerateDataError(
            f"point {bad} has {k} or more duplicates; its local scale is zero (increase k)"
        )
    return np.exp(-distances ** 2 / np.outer(sigma, sigma))


def markov_matrix(weights: np.ndarray) -> np.ndarray:
    """Row-normalised random walk P(i, j) = w(i, j) / sum_l w(i, l)."""
    weights = np.asarray(weights, dtype=np.float64)
    degree = weights.sum(axis=1)
    if np.any(degree <= 0):
        raise DegenerateDataError(f"row {int(np.flatnonzero(degree <= 0)[0])} of the weight matrix sums to zero")
    return weights / degree[:, None]


def _fix_sign(vectors: np.ndarray) -> np.ndarray:
    """Flips each column so its largest-magnitude entry is positive."""
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def averaged_diffusion_map(points, k: int = DEFAULT_NEIGHBOR_K, m: int = DEFAULT_COMPONENTS) -> EmbeddingResult:
    """
    Coordinates lambda_i / (1 - lambda_i) * psi_i(x) for the m leading
    non-trivial right eigenpairs of the Markov matrix P = D^-1 W.

    P is similar to the symmetric S = D^-1/2 W D^-1/2, so the eigenproblem is
    solved on S (after projecting out its stationary direction sqrt(d)) and
    the eigenvectors are mapped back by D^-1/2 and normalised to unit length.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be an (n, D) matrix")
    n = points.shape[0]
    if m < 1 or n < m + 1:
        raise ValueError(f"need n >= m + 1 points for m={m} components, got n={n}")
    if k > n - 1:
        print(f"Warning: neighbour index k={k} exceeds n-1; using k={n - 1}.", file=sys.stderr)
        k = n - 1

    weights = local_scaling_weights(points, k)
    degree = weights.sum(axis=1)
    root = np.sqrt(degree)
    symmetric = weights / np.outer(root, root)
    if np.max(np.abs(symmetric - symmetric.T)) > SYMMETRY_TOLERANCE:
        raise EmbeddingError("normalised weight matrix is not symmetric")
    stationary = root / np.linalg.norm(root)
    deflated = symmetric - np.outer(stationary, stationary)
    deflated = 0.5 * (deflated + deflated.T)

    try:
        values, vectors = linalg.eigh(deflated, subset_by_index=[n - m, n - 1])
    except linalg.LinAlgError as err:
        raise EmbeddingError(f"eigendecomposition failed: {err}") from err
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    if np.any(values >= 1.0 - UNIT_EIGENVALUE_GAP):
        raise EmbeddingError("the neighbour graph is disconnected (eigenvalue 1 repeated); increase k")
    if np.any(values <= 0.0):
        count = int(np.sum(values > 0.0))
        raise DegenerateDataError(
            f"only {count} of the {m} leading eigenvalues are positive; "
            f"coordinates lambda / (1 - lambda) would flip sign (use m <= {count} or more points)"
        )

    psi = vectors / root[:, None]
    psi = _fix_sign(psi / np.linalg.norm(psi, axis=0))
    coordinates = psi * (values / (1.0 - values))
    return EmbeddingResult(coordinates=coordinates, eigenvalues=values, eigenvectors=psi, neighbor_k=k)


def embedding_frame(result: EmbeddingResult, report: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    One row per point: point_id, psi1..psim and, when a local-test report
    (one row per point, with point_id) is given, its decision columns.
    """
    frame = pd.DataFrame(
        result.coordinates, columns=[f"psi{j + 1}" for j in range(result.n_components)]
    )
    frame.insert(0, "point_id", np.arange(len(frame)))
    if report is None:
        return frame
    if len(report) != len(frame):
        raise SchemaError(f"report has {len(report)} rows but the embedding has {len(frame)} points")
    if "point_id" in report.columns and not np.array_equal(np.sort(report["point_id"].to_numpy()), frame["point_id"].to_numpy()):
        raise SchemaError("report point ids do not match 0..n-1")
    if "point_id" not in report.columns:
        report = report.assign(point_id=np.arange(len(report)))
    carried = ["point_id"] + [c for c in REPORT_COLUMNS if c in report.columns]
    return frame.merge(report[carried], on="point_id", how="left", validate="one_to_one")
