# samples/scenarios.py
"""
Synthetic two-sample scenarios used by the simulation studies: dense/sparse
location and scale alternatives (normal and Cauchy), the mixed location-scale
example, the normal-means LDA setting, the 2-D normal mixture and edge images.
"""
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from samples.dataset import LabeledDataset, SamplingScheme
from utils.rng import make_rng

# --- Frozen scenario parameters ---
DENSE_NORMAL_SHIFT = 0.2
DENSE_CAUCHY_SHIFT = 0.3
DENSE_NORMAL_SCALE = 0.6
DENSE_CAUCHY_SCALE = 0.5
SPARSE_NORMAL_SHIFT = 2.0
SPARSE_CAUCHY_SHIFT = 3.0
SPARSE_SCALE_FIRST = 0.01
MIXED_SHIFT = 0.2
MIXED_VARIANCE_1 = 1.2

MIXTURE_MEANS_0 = np.array(
    [[-3, -3], [-3, 1], [-1, -1], [-1, 3], [1, -3], [1, 1], [3, -1], [3, 3]], dtype=np.float64
)
MIXTURE_MEANS_1 = np.array(
    [[-3, -1], [-3, 3], [-1, -3], [-1, 1], [1, -1], [1, 3], [3, -3], [3, 1]], dtype=np.float64
)
MIXTURE_SD = 0.3

# 16 evenly spaced coordinates from -30 to 30 (step 4) give 16x16 = 256 pixels.
EDGE_GRID = np.linspace(-30.0, 30.0, 16)
EDGE_IMAGE_DIM = EDGE_GRID.size ** 2
EDGE_MINOR_WEIGHT = 0.1
EDGE_RHO_MAX = 5.0

# Dimensions used by the power tables.
DENSE_DIMS = (5, 20, 50, 100, 150, 200)
SPARSE_DIMS = (20, 50, 100, 200, 300, 400)
MIXED_DIMS = tuple(range(5, 76, 10))


class ScenarioFamily(str, Enum):
    DENSE_NORMAL_LOC = "dense-normal-loc"
    DENSE_CAUCHY_LOC = "dense-cauchy-loc"
    DENSE_NORMAL_SCALE = "dense-normal-scale"
    DENSE_CAUCHY_SCALE = "dense-cauchy-scale"
    SPARSE_NORMAL_LOC = "sparse-normal-loc"
    SPARSE_CAUCHY_LOC = "sparse-cauchy-loc"
    SPARSE_NORMAL_SCALE = "sparse-normal-scale"
    SPARSE_CAUCHY_SCALE = "sparse-cauchy-scale"
    LDA_NORMAL_MEANS = "lda-normal-means"
    MIXED_LOC_SCALE = "mixed-loc-scale"
    NORMAL_MIXTURE_2D = "normal-mixture-2d"
    EDGE_IMAGES = "edge-images"
    NULL_NORMAL = "null-normal"


class ScenarioSpec(BaseModel):
    """
    A scenario family plus its size and seed. Family parameters are fixed
    constants of this module; only `shift` (LdaNormalMeans) is adjustable.
    """
    model_config = ConfigDict(frozen=True)

    family: ScenarioFamily = Field(..., description="Which pair of distributions P0, P1 to draw from.")
    dim: int = Field(..., ge=1, description="Feature dimension D.")
    n0: int = Field(..., ge=1, description="Group 0 sample size.")
    n1: int = Field(..., ge=1, description="Group 1 sample size.")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="64-bit seed.")
    shift: float = Field(0.0, description="Common mean shift of group 1 (LdaNormalMeans only).")

    @model_validator(mode="after")
    def _check_dimension(self):
        if self.family == ScenarioFamily.NORMAL_MIXTURE_2D and self.dim != 2:
            raise ValueError("normal-mixture-2d is defined in D=2")
        if self.family == ScenarioFamily.EDGE_IMAGES and self.dim != EDGE_IMAGE_DIM:
            raise ValueError(f"edge-images have D={EDGE_IMAGE_DIM}")
        return self

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return self.model_copy(update={"seed": seed})

    def with_dim(self, dim: int) -> "ScenarioSpec":
        return ScenarioSpec(**{**self.model_dump(), "dim": dim})


def load_scenario_config(path: Union[str, Path]) -> ScenarioSpec:
    """Reads a ScenarioSpec from a YAML file (key: value pairs)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Scenario config not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        payload = yaml.safe_load(f) or {}
    return ScenarioSpec.model_validate(payload)


def save_scenario_config(spec: ScenarioSpec, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(spec.model_dump(mode="json"), f, sort_keys=False)


# --- Location/scale families ---
def _location_scale(family: ScenarioFamily, dim: int, shift: float) -> Tuple[str, np.ndarray, np.ndarray]:
    """
    Returns (distribution, mean of group 1, diagonal covariance of group 1).
    Group 0 is always centred at 0 with identity scale.
    """
    zero = np.zeros(dim)
    ones = np.ones(dim)
    first_only = np.zeros(dim)
    first_only[0] = 1.0
    sparse_scale = ones.copy()
    sparse_scale[0] = SPARSE_SCALE_FIRST

    table = {
        ScenarioFamily.DENSE_NORMAL_LOC: ("normal", DENSE_NORMAL_SHIFT * ones, ones),
        ScenarioFamily.DENSE_CAUCHY_LOC: ("cauchy", DENSE_CAUCHY_SHIFT * ones, ones),
        ScenarioFamily.DENSE_NORMAL_SCALE: ("normal", zero, DENSE_NORMAL_SCALE * ones),
        ScenarioFamily.DENSE_CAUCHY_SCALE: ("cauchy", zero, DENSE_CAUCHY_SCALE * ones),
        ScenarioFamily.SPARSE_NORMAL_LOC: ("normal", SPARSE_NORMAL_SHIFT * first_only, ones),
        ScenarioFamily.SPARSE_CAUCHY_LOC: ("cauchy", SPARSE_CAUCHY_SHIFT * first_only, ones),
        ScenarioFamily.SPARSE_NORMAL_SCALE: ("normal", zero, sparse_scale),
        ScenarioFamily.SPARSE_CAUCHY_SCALE: ("cauchy", zero, sparse_scale),
        ScenarioFamily.LDA_NORMAL_MEANS: ("normal", shift * ones, ones),
        ScenarioFamily.MIXED_LOC_SCALE: ("normal", MIXED_SHIFT * ones, MIXED_VARIANCE_1 * ones),
        ScenarioFamily.NULL_NORMAL: ("normal", zero, ones),
    }
    if family not in table:
        raise ValueError(f"Unknown location/scale family: {family}")
    return table[family]


def group_parameters(spec: ScenarioSpec, label: int) -> Tuple[str, np.ndarray, np.ndarray]:
    """(distribution, mean, covariance diagonal) of group `label` for location/scale families."""
    distribution, mean1, diag1 = _location_scale(spec.family, spec.dim, spec.shift)
    if label == 0:
        return distribution, np.zeros(spec.dim), np.ones(spec.dim)
    return distribution, mean1, diag1


def sample_normal(rng: np.random.Generator, n: int, mean: np.ndarray, diag: np.ndarray) -> np.ndarray:
    return mean + rng.standard_normal((n, mean.size)) * np.sqrt(diag)


def sample_cauchy(rng: np.random.Generator, n: int, mean: np.ndarray, diag: np.ndarray) -> np.ndarray:
    """
    Multivariate Cauchy C(mean, diag(diag)) as a t distribution with one degree of
    freedom: mean + A Z / |W| with A A^T = Sigma.
    """
    z = rng.standard_normal((n, mean.size)) * np.sqrt(diag)
    w = np.abs(rng.standard_normal((n, 1)))
    return mean + z / w


def _draw_group(spec: ScenarioSpec, label: int, n: int) -> np.ndarray:
    distribution, mean, diag = group_parameters(spec, label)
    rng = make_rng(spec.seed, "group", label)
    if distribution == "normal":
        return sample_normal(rng, n, mean, diag)
    return sample_cauchy(rng, n, mean, diag)


def _stack_groups(x0: np.ndarray, x1: np.ndarray) -> LabeledDataset:
    labels = np.concatenate([np.zeros(len(x0), dtype=np.int8), np.ones(len(x1), dtype=np.int8)])
    return LabeledDataset(np.vstack([x0, x1]), labels, SamplingScheme.SEPARATE)


def generate(spec: ScenarioSpec) -> LabeledDataset:
    """
    Draws n0 rows from P0 followed by n1 rows from P1. Deterministic given the seed.
    """
    family = ScenarioFamily(spec.family)
    if family == ScenarioFamily.NORMAL_MIXTURE_2D:
        return generate_mixture_2d(spec.n0, spec.n1, spec.seed)
    if family == ScenarioFamily.EDGE_IMAGES:
        return generate_edge_images(spec.n0, spec.n1, spec.seed)
    return _stack_groups(_draw_group(spec, 0, spec.n0), _draw_group(spec, 1, spec.n1))


# --- 2-D normal mixture ---
def generate_mixture_2d(n0: int, n1: int, seed: int) -> LabeledDataset:
    """
    Group 0: equal-weight mixture of N(mu_i, 0.3^2 I) over MIXTURE_MEANS_0;
    group 1: the same over MIXTURE_MEANS_1.
    """
    if n0 < 1 or n1 < 1:
        raise ValueError("n0 and n1 must be at least 1")
    groups = []
    for label, (n, means) in enumerate([(n0, MIXTURE_MEANS_0), (n1, MIXTURE_MEANS_1)]):
        rng = make_rng(seed, "mixture", label)
        component = rng.integers(0, len(means), size=n)
        groups.append(means[component] + MIXTURE_SD * rng.standard_normal((n, 2)))
    return _stack_groups(*groups)


def mixture_2d_density(points: np.ndarray, label: int) -> np.ndarray:
    """Density f0 (label 0) or f1 (label 1) of the 2-D mixture at each point."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    means = MIXTURE_MEANS_0 if label == 0 else MIXTURE_MEANS_1
    sq = ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    norm = 1.0 / (2.0 * np.pi * MIXTURE_SD ** 2)
    return norm * np.exp(-sq / (2.0 * MIXTURE_SD ** 2)).mean(axis=1)


def mixture_2d_regression(points: np.ndarray, pi1: float = 0.5) -> np.ndarray:
    """
    True regression function m(x) = pi1 f1 / (pi0 f0 + pi1 f1), evaluated on the
    log scale so far-field points do not divide 0 by 0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))

    def log_density(means):
        sq = ((points[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        a = -sq / (2.0 * MIXTURE_SD ** 2)
        top = a.max(axis=1)
        return top + np.log(np.exp(a - top[:, None]).mean(axis=1))

    log_ratio = (np.log(pi1) + log_density(MIXTURE_MEANS_1)) - (np.log(1 - pi1) + log_density(MIXTURE_MEANS_0))
    return expit(log_ratio)


# --- Edge images ---
def edge_image(theta: float, rho: float) -> np.ndarray:
    """
    256-dim binary image I(x cos(theta) + y sin(theta) - rho > 0) on the 16x16
    grid, flattened row-major with rows indexed by y and columns by x.
    """
    x, y = np.meshgrid(EDGE_GRID, EDGE_GRID)
    return (x * np.cos(theta) + y * np.sin(theta) - rho > 0).astype(np.float64).ravel()


def edge_images(thetas: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    x, y = np.meshgrid(EDGE_GRID, EDGE_GRID)
    x, y = x.ravel(), y.ravel()
    thetas = np.asarray(thetas, dtype=np.float64)[:, None]
    rhos = np.asarray(rhos, dtype=np.float64)[:, None]
    return (x[None, :] * np.cos(thetas) + y[None, :] * np.sin(thetas) - rhos > 0).astype(np.float64)


def _draw_edge_parameters(rng: np.random.Generator, n: int, upper_weight: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mixture of Unif([0, pi] x [0, 5]) with weight `upper_weight` and
    Unif([-pi, 0] x [-5, 0]) with the remaining weight.
    """
    upper = rng.random(n) < upper_weight
    theta = rng.uniform(0.0, np.pi, size=n)
    rho = rng.uniform(0.0, EDGE_RHO_MAX, size=n)
    theta = np.where(upper, theta, -theta)
    rho = np.where(upper, rho, -rho)
    return theta, rho


def generate_edge_images(n0: int, n1: int, seed: int) -> LabeledDataset:
    """
    Group 0 puts weight 1/10 on the upper parameter box, group 1 puts 9/10 there.
    """
    if n0 < 1 or n1 < 1:
        raise ValueError("n0 and n1 must be at least 1")
    groups = []
    for label, (n, weight) in enumerate([(n0, EDGE_MINOR_WEIGHT), (n1, 1.0 - EDGE_MINOR_WEIGHT)]):
        theta, rho = _draw_edge_parameters(make_rng(seed, "edge", label), n, weight)
        groups.append(edge_images(theta, rho))
    return _stack_groups(*groups)


def edge_image_grid(n_theta: int = 200, n_rho: int = 200) -> Tuple[np.ndarray, np.ndarray]:
    """
    Test images on a uniform (theta, rho) grid over [-pi, pi] x [-5, 5].
    Returns (images, parameters) with parameters[:, 0] = theta, parameters[:, 1] = rho.
    """
    theta, rho = np.meshgrid(
        np.linspace(-np.pi, np.pi, n_theta), np.linspace(-EDGE_RHO_MAX, EDGE_RHO_MAX, n_rho), indexing="ij"
    )
    parameters = np.column_stack([theta.ravel(), rho.ravel()])
    return edge_images(parameters[:, 0], parameters[:, 1]), parameters


def lattice_grid(shape: Tuple[int, int], bounds: Tuple[float, float, float, float]) -> np.ndarray:
    """Axis-aligned 2-D lattice of shape[0] x shape[1] points over [xmin,xmax] x [ymin,ymax]."""
    nx, ny = shape
    xmin, xmax, ymin, ymax = bounds
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, nx), np.linspace(ymin, ymax, ny), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def default_dims(family: ScenarioFamily) -> Tuple[int, ...]:
    """Dimensions swept by the power tables for each family."""
    family = ScenarioFamily(family)
    if family.value.startswith("dense") or family == ScenarioFamily.NULL_NORMAL:
        return DENSE_DIMS
    if family.value.startswith("sparse"):
        return SPARSE_DIMS
    if family == ScenarioFamily.MIXED_LOC_SCALE:
        return MIXED_DIMS
    if family == ScenarioFamily.NORMAL_MIXTURE_2D:
        return (2,)
    if family == ScenarioFamily.EDGE_IMAGES:
        return (EDGE_IMAGE_DIM,)
    return (5,)


def default_sizes(family: ScenarioFamily) -> Tuple[int, int]:
    family = ScenarioFamily(family)
    if family == ScenarioFamily.MIXED_LOC_SCALE:
        return 50, 50
    if family == ScenarioFamily.NORMAL_MIXTURE_2D:
        return 2000, 2000
    if family in (ScenarioFamily.EDGE_IMAGES, ScenarioFamily.LDA_NORMAL_MEANS):
        return 100, 100
    return 20, 20


def scenario(family: Union[str, ScenarioFamily], dim: Optional[int] = None, seed: int = 0, **kwargs) -> ScenarioSpec:
    """Convenience constructor filling in the family's default sizes and dimension."""
    family = ScenarioFamily(family)
    n0, n1 = default_sizes(family)
    params = {"family": family, "dim": dim or default_dims(family)[0], "n0": n0, "n1": n1, "seed": seed}
    params.update(kwargs)
    return ScenarioSpec(**params)
