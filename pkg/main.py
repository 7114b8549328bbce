# main.py
import argparse
import re
import sys
import time
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

# Utilities
from utils.errors import EmbeddingError, UnsupportedOperationError
from utils.saving import dump_json, save_json, save_parameters_to_json
from utils.setup import resolve_workers, setup_experiment

# Pipeline Modules
from calibration.adaptive import dimension_adaptive_local
from calibration.asymptotic import chi2_local_tests
from calibration.multitest import CorrectionMethod
from calibration.permutation import PermutationPlan, PermutationScope, exact_global_test, global_test, local_test
from embed.diffusion import DEFAULT_COMPONENTS, DEFAULT_NEIGHBOR_K, averaged_diffusion_map, embedding_frame
from metrics.statistic import STATISTIC_PRESETS, build_statistic
from regressors.base import EstimatorConfig, EstimatorKind, ForestConfig, KernelType
from regressors.factory import fit_estimator
from regressors.knn import default_knn_k
from samples.dataset import LabeledDataset, load_csv, load_points, write_points
from samples.scenarios import (
    ScenarioFamily,
    default_dims,
    default_sizes,
    edge_image_grid,
    generate,
    lattice_grid,
    load_scenario_config,
    scenario,
)
from simulation.power import DEFAULT_PERMUTATIONS, DEFAULT_REPETITIONS, run_power_table
from simulation.reporting import power_table_frame

GRID_PATTERN = re.compile(r"^(\d+)x(\d+):([^,]+),([^,]+),([^,]+),([^,]+)$")
EDGE_GRID_PATTERN = re.compile(r"^(\d+)x(\d+)$")
DEFAULT_SIMULATION_STATS = ["rf", "rf-acc", "mmd", "energy"]


class Subcommand(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"
    SIMULATE = "simulate"
    EMBED = "embed"


class Calibration(str, Enum):
    PERMUTATION = "permutation"
    ASYMPTOTIC = "asymptotic"


def parse_grid(text: str) -> Tuple[Tuple[int, int], Tuple[float, float, float, float]]:
    """'AxB:xmin,xmax,ymin,ymax' -> ((A, B), (xmin, xmax, ymin, ymax))."""
    match = GRID_PATTERN.match(text.strip())
    if not match:
        raise ValueError(f"grid must look like AxB:xmin,xmax,ymin,ymax, got {text!r}")
    shape = (int(match.group(1)), int(match.group(2)))
    bounds = tuple(float(v) for v in match.groups()[2:])
    if shape[0] < 1 or shape[1] < 1:
        raise ValueError("zero test points: grid sides must be >= 1")
    if bounds[0] > bounds[1] or bounds[2] > bounds[3]:
        raise ValueError(f"grid bounds must be increasing, got {bounds}")
    return shape, bounds


def parse_edge_grid(text: str) -> Tuple[int, int]:
    match = EDGE_GRID_PATTERN.match(text.strip())
    if not match:
        raise ValueError(f"edge grid must look like THETAxRHO, got {text!r}")
    shape = (int(match.group(1)), int(match.group(2)))
    if shape[0] < 1 or shape[1] < 1:
        raise ValueError("zero test points: edge grid sides must be >= 1")
    return shape


class RunConfig(BaseModel):
    """Validated command-line parameters of one run."""
    model_config = ConfigDict(frozen=True)

    subcommand: Subcommand
    input: Optional[Path] = Field(None, description="Labeled CSV (global/local) or points CSV (embed).")
    scenario_config: Optional[Path] = Field(None, description="YAML scenario used instead of an input CSV.")
    label_column: str = "label"
    stat: Optional[str] = Field(None, description="Statistic preset for `global`.")
    stats: List[str] = Field(default_factory=list, description="Statistic presets for `simulate`.")
    estimator: Optional[EstimatorKind] = Field(None, description="Regression estimator for `local`.")
    k: Optional[int] = Field(None, ge=1)
    bandwidth: Optional[float] = Field(None, gt=0)
    kernel: KernelType = KernelType.GAUSSIAN
    trees: Optional[int] = Field(None, ge=1)
    mtry: Optional[int] = Field(None, ge=1)
    min_node: Optional[int] = Field(None, ge=1)
    n_permutations: int = Field(DEFAULT_PERMUTATIONS, ge=1)
    alpha: float = Field(0.05, gt=0, lt=1)
    correction: CorrectionMethod = CorrectionMethod.NONE
    calibration: Calibration = Calibration.PERMUTATION
    permute_first_half: bool = False
    exact: bool = False
    importance: bool = False
    adaptive: bool = False
    seed: int = Field(0, ge=0, lt=2 ** 64)
    jobs: int = Field(1, ge=1)
    points: Optional[Path] = None
    grid: Optional[str] = None
    edge_grid: Optional[str] = None
    points_out: Optional[Path] = None
    report: Optional[Path] = None
    output: Optional[Path] = None
    summary: Optional[Path] = None
    scenario: Optional[ScenarioFamily] = None
    dims: Optional[List[int]] = None
    n0: Optional[int] = Field(None, ge=1)
    n1: Optional[int] = Field(None, ge=1)
    reps: int = Field(DEFAULT_REPETITIONS, ge=1)
    embed_k: int = Field(DEFAULT_NEIGHBOR_K, ge=1)
    components: int = Field(DEFAULT_COMPONENTS, ge=1)
    outdir_base: Optional[Path] = None
    quiet: bool = False

    def _estimator_kinds(self) -> List[EstimatorKind]:
        names = [self.stat] if self.subcommand == Subcommand.GLOBAL else self.stats
        kinds = [STATISTIC_PRESETS[name][1] for name in names if name in STATISTIC_PRESETS]
        if self.estimator is not None:
            kinds.append(self.estimator)
        return [kind for kind in kinds if kind is not None]

    @model_validator(mode="after")
    def _check_consistency(self):
        cmd = self.subcommand
        if cmd in (Subcommand.GLOBAL, Subcommand.LOCAL) and (self.input is None) == (self.scenario_config is None):
            raise ValueError("give exactly one of an input CSV or --scenario-config")
        if cmd == Subcommand.EMBED and self.input is None:
            raise ValueError("embed needs an input CSV of points")
        if cmd == Subcommand.SIMULATE and (self.scenario is None) == (self.scenario_config is None):
            raise ValueError("give exactly one of --scenario or --scenario-config")
        for name in ([self.stat] if self.stat else []) + self.stats:
            if name not in STATISTIC_PRESETS:
                raise ValueError(f"unknown statistic '{name}'; choose from {', '.join(STATISTIC_PRESETS)}")
        if cmd == Subcommand.LOCAL:
            if self.estimator is None:
                raise ValueError("local needs --estimator")
            sources = [s for s in (self.points, self.grid, self.edge_grid) if s is not None]
            if len(sources) != 1:
                raise ValueError("give exactly one of --points, --grid or --edge-grid")
            if self.grid is not None:
                parse_grid(self.grid)
            if self.edge_grid is not None:
                parse_edge_grid(self.edge_grid)
            if self.calibration == Calibration.ASYMPTOTIC and self.estimator not in (EstimatorKind.KNN, EstimatorKind.KERNEL):
                raise ValueError("asymptotic calibration needs a linear smoother (knn or kernel)")
        if self.permute_first_half and not (self.stat or "").endswith("-split"):
            raise ValueError("--permute-first-half only applies to the split statistics")
        if self.exact and (self.stat or "").endswith("-split"):
            raise ValueError("--exact does not apply to the split statistics")
        if self.importance and STATISTIC_PRESETS.get(self.stat or "", (None, None))[1] != EstimatorKind.RANDOM_FOREST:
            raise ValueError("--importance only applies to random forest statistics")
        if self.adaptive:
            if self.estimator != EstimatorKind.KNN or self.k is not None:
                raise ValueError("--adaptive needs --estimator knn and chooses k itself (drop --k)")
            if self.calibration != Calibration.PERMUTATION:
                raise ValueError("--adaptive is calibrated by permutation only")

        kinds = self._estimator_kinds()
        if EstimatorKind.KERNEL in kinds and self.bandwidth is None:
            raise ValueError("kernel statistics need --bandwidth")
        if EstimatorKind.KERNEL not in kinds and self.bandwidth is not None:
            raise ValueError("--bandwidth only applies to kernel statistics")
        if EstimatorKind.KNN not in kinds and self.k is not None:
            raise ValueError("--k only applies to kNN statistics")
        forest_flags = (self.trees, self.mtry, self.min_node)
        if EstimatorKind.RANDOM_FOREST not in kinds and any(v is not None for v in forest_flags):
            raise ValueError("--trees/--mtry/--min-node only apply to random forest statistics")
        return self

    # --- Derived settings ---
    @property
    def forest(self) -> ForestConfig:
        params = {"seed": self.seed, "n_jobs": self.jobs}
        if self.trees is not None:
            params["n_trees"] = self.trees
        if self.mtry is not None:
            params["mtry"] = self.mtry
        if self.min_node is not None:
            params["min_node"] = self.min_node
        return ForestConfig(**params)

    def plan(self) -> PermutationPlan:
        scope = PermutationScope.FIRST_HALF_LABELS if self.permute_first_half else PermutationScope.ALL_LABELS
        return PermutationPlan(
            n_permutations=self.n_permutations, seed=self.seed, scope=scope, n_jobs=self.jobs, progress=not self.quiet
        )

    def statistic(self, name: str, n: int, dim: int):
        k = self.k
        if STATISTIC_PRESETS[name][1] == EstimatorKind.KNN and k is None:
            k = default_knn_k(n, dim)
        forest = self.forest if STATISTIC_PRESETS[name][1] == EstimatorKind.RANDOM_FOREST else None
        return build_statistic(
            name,
            k=k if STATISTIC_PRESETS[name][1] == EstimatorKind.KNN else None,
            bandwidth=self.bandwidth if STATISTIC_PRESETS[name][1] == EstimatorKind.KERNEL else None,
            kernel=self.kernel,
            forest=forest,
        )

    def estimator_config(self, n: int, dim: int) -> EstimatorConfig:
        kind = self.estimator
        if kind == EstimatorKind.KNN:
            return EstimatorConfig(kind=kind, k=self.k if self.k is not None else default_knn_k(n, dim))
        if kind == EstimatorKind.KERNEL:
            return EstimatorConfig(kind=kind, bandwidth=self.bandwidth, kernel=self.kernel)
        if kind == EstimatorKind.RANDOM_FOREST:
            return EstimatorConfig(kind=kind, forest=self.forest)
        return EstimatorConfig(kind=kind)


# --- Console ---
def say(cfg: RunConfig, message: str):
    if not cfg.quiet:
        print(message, file=sys.stderr)


def emit_json(payload, path: Optional[Path] = None):
    print(dump_json(payload))
    if path is not None:
        save_json(payload, path)


def load_data(cfg: RunConfig) -> LabeledDataset:
    if cfg.scenario_config is not None:
        spec = load_scenario_config(cfg.scenario_config)
        say(cfg, f"   → Generating {spec.family.value} (D={spec.dim}, n0={spec.n0}, n1={spec.n1}, seed={spec.seed})")
        return generate(spec)
    data = load_csv(cfg.input, label_column=cfg.label_column)
    say(cfg, f"   → Loaded {cfg.input}: n={data.n} (n0={data.n0}, n1={data.n1}), D={data.dim}")
    return data


def resolve_points(cfg: RunConfig, dim: int):
    if cfg.points is not None:
        return load_points(cfg.points)
    if cfg.grid is not None:
        if dim != 2:
            raise ValueError(f"--grid builds 2-D points but the data have D={dim}; pass --points instead")
        shape, bounds = parse_grid(cfg.grid)
        return lattice_grid(shape, bounds)
    images, _ = edge_image_grid(*parse_edge_grid(cfg.edge_grid))
    return images


def record_run(cfg: RunConfig, args) -> Optional[Path]:
    if cfg.outdir_base is None:
        return None
    output_dir = setup_experiment(cfg.outdir_base)
    save_parameters_to_json(output_dir, args)
    say(cfg, f"   → Run directory: {output_dir}")
    return output_dir


# --- Subcommands ---
def run_global(cfg: RunConfig, output_dir: Optional[Path] = None):
    say(cfg, "--- 1/2: Loading data ---")
    data = load_data(cfg)
    stat = cfg.statistic(cfg.stat, data.n, data.dim)

    start = time.time()
    if cfg.exact:
        say(cfg, f"\n--- 2/2: Exact permutation test ({stat.name}, all relabelings) ---")
        outcome = exact_global_test(data, stat, cfg.alpha, seed=cfg.seed)
    else:
        say(cfg, f"\n--- 2/2: Permutation test ({stat.name}, B={cfg.n_permutations}) ---")
        outcome = global_test(data, stat, cfg.plan(), cfg.alpha)
    update = {"wall_time_sec": time.time() - start}
    if cfg.importance:
        update["variable_importance"] = fit_estimator(data, stat.estimator).impurity_importance().tolist()
    outcome = outcome.model_copy(update=update)
    say(cfg, f"   → observed={outcome.observed:.6g}, p={outcome.p_value:.4f}, reject={outcome.reject}")

    emit_json(outcome, cfg.output)
    if output_dir is not None:
        save_json(outcome, output_dir / "test_outcome.json")
    return outcome


def run_local(cfg: RunConfig, output_dir: Optional[Path] = None):
    say(cfg, "--- 1/3: Loading data and test points ---")
    data = load_data(cfg)
    points = resolve_points(cfg, data.dim)
    if points.shape[0] == 0:
        raise ValueError("no test points")
    say(cfg, f"   → {points.shape[0]} test points")
    if cfg.points_out is not None:
        write_points(points, cfg.points_out)

    estimator = cfg.estimator_config(data.n, data.dim)
    say(cfg, f"\n--- 2/3: Local tests ({estimator.kind.value}, {cfg.calibration.value}) ---")
    if cfg.adaptive:
        say(cfg, f"   → Dimension-adaptive k over candidate dimensions 1..{data.dim}")
        report = dimension_adaptive_local(data, points, cfg.plan(), cfg.alpha, cfg.correction)
    elif cfg.calibration == Calibration.ASYMPTOTIC:
        report = chi2_local_tests(fit_estimator(data, estimator), points, data, cfg.alpha, cfg.correction)
    else:
        report = local_test(data, points, estimator, cfg.plan(), cfg.alpha, cfg.correction)

    say(cfg, "\n--- 3/3: Writing report ---")
    frame = report.to_frame()
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(cfg.output, index=False, float_format="%.17g")
    summary = report.summary()
    say(cfg, f"   → red={summary.red}, blue={summary.blue}, gray={summary.gray}; rows saved to {cfg.output}")
    emit_json(summary, cfg.summary)
    if output_dir is not None:
        save_json(summary, output_dir / "local_summary.json")
    return report


def run_simulate(cfg: RunConfig, output_dir: Optional[Path] = None):
    if cfg.scenario_config is not None:
        base = load_scenario_config(cfg.scenario_config)
    else:
        n0, n1 = default_sizes(cfg.scenario)
        base = scenario(cfg.scenario, seed=cfg.seed, n0=cfg.n0 or n0, n1=cfg.n1 or n1)
    dims = cfg.dims or list(default_dims(base.family))
    names = cfg.stats or DEFAULT_SIMULATION_STATS

    say(cfg, f"--- Power study: {base.family.value}, D in {dims}, R={cfg.reps}, B={cfg.n_permutations} ---")
    reports = run_power_table(
        base,
        dims,
        lambda spec: [cfg.statistic(name, spec.n0 + spec.n1, spec.dim) for name in names],
        n_reps=cfg.reps,
        plan=PermutationPlan(n_permutations=cfg.n_permutations, seed=cfg.seed),
        alpha=cfg.alpha,
        n_jobs=cfg.jobs,
        output_dir=output_dir,
        verbose=not cfg.quiet,
    )
    table = power_table_frame(reports)
    if cfg.output is not None:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(cfg.output, index=False)
    if output_dir is not None:
        table.to_csv(output_dir / "power_table.csv", index=False)
        save_json({"reports": [r.model_dump(mode="json") for r in reports]}, output_dir / "simulation_report.json")
    print(dump_json({"reports": [r.model_dump(mode="json") for r in reports]}))
    return reports


def run_embed(cfg: RunConfig, output_dir: Optional[Path] = None):
    say(cfg, "--- 1/2: Loading points ---")
    points = load_points(cfg.input)
    report = pd.read_csv(cfg.report) if cfg.report is not None else None

    say(cfg, f"\n--- 2/2: Diffusion map (n={points.shape[0]}, k={cfg.embed_k}, m={cfg.components}) ---")
    result = averaged_diffusion_map(points, k=cfg.embed_k, m=cfg.components)
    frame = embedding_frame(result, report)
    if cfg.output is None:
        frame.to_csv(sys.stdout, index=False, float_format="%.17g")
    else:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(cfg.output, index=False, float_format="%.17g")
        say(cfg, f"   → Coordinates saved to {cfg.output}")
    if output_dir is not None:
        frame.to_csv(output_dir / "embedding.csv", index=False, float_format="%.17g")
    return result


HANDLERS = {
    Subcommand.GLOBAL: run_global,
    Subcommand.LOCAL: run_local,
    Subcommand.SIMULATE: run_simulate,
    Subcommand.EMBED: run_embed,
}


# --- Argument parsing ---
def _add_estimator_args(parser: argparse.ArgumentParser):
    parser.add_argument("--k", type=int, default=None, help="kNN neighbours (default ceil(n^{2/(2+D)})).")
    parser.add_argument("--bandwidth", type=float, default=None, help="Kernel bandwidth h.")
    parser.add_argument("--kernel", choices=[k.value for k in KernelType], default=KernelType.GAUSSIAN.value, help="Kernel shape.")
    parser.add_argument("--trees", type=int, default=None, help="Random forest: number of trees (default 500).")
    parser.add_argument("--mtry", type=int, default=None, help="Random forest: features per split (default D/3).")
    parser.add_argument("--min-node", type=int, default=None, help="Random forest: minimum node size (default 5).")


def _add_common_args(parser: argparse.ArgumentParser):
    parser.add_argument("--permutations", dest="n_permutations", type=int, default=DEFAULT_PERMUTATIONS, help="Number of permutations B.")
    parser.add_argument("--alpha", type=float, default=0.05, help="Significance level.")
    parser.add_argument("--seed", type=int, default=0, help="Master seed.")
    parser.add_argument("--jobs", type=int, default=1, help="Worker count (overridden by REGTEST_WORKERS).")
    parser.add_argument("--outdir-base", type=Path, default=None, help="Record parameters and outputs in a timestamped directory here.")
    parser.add_argument("--quiet", action="store_true", help="No banners or progress bars.")


def _add_data_args(parser: argparse.ArgumentParser):
    parser.add_argument("input", type=Path, nargs="?", default=None, help="Labeled CSV file.")
    parser.add_argument("--scenario-config", type=Path, default=None, help="YAML scenario to generate instead of reading a CSV.")
    parser.add_argument("--label-column", default="label", help="Name of the 0/1 label column.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Regression-based two-sample testing")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_global = sub.add_parser("global", help="Global permutation test on one dataset.")
    _add_data_args(p_global)
    p_global.add_argument("--stat", default="rf", help=f"Statistic: {', '.join(STATISTIC_PRESETS)}.")
    p_global.add_argument("--permute-first-half", action="store_true", help="Split statistics: permute only the fitting half.")
    p_global.add_argument("--exact", action="store_true", help="Enumerate every relabeling instead of B random permutations (tiny n only).")
    p_global.add_argument("--importance", action="store_true", help="Random forest statistics: add the impurity importance of each feature.")
    p_global.add_argument("--output", type=Path, default=None, help="Also write the JSON outcome here.")
    _add_estimator_args(p_global)
    _add_common_args(p_global)

    p_local = sub.add_parser("local", help="Local tests at a set of test points.")
    _add_data_args(p_local)
    p_local.add_argument("--estimator", choices=[k.value for k in EstimatorKind], required=True, help="Regression estimator.")
    p_local.add_argument("--points", type=Path, default=None, help="CSV of test points.")
    p_local.add_argument("--grid", default=None, help="2-D lattice AxB:xmin,xmax,ymin,ymax.")
    p_local.add_argument("--edge-grid", default=None, help="Edge-image test points on a THETAxRHO parameter grid, e.g. 200x200.")
    p_local.add_argument("--points-out", type=Path, default=None, help="Write the test points to this CSV.")
    p_local.add_argument("--correction", choices=[c.value for c in CorrectionMethod], default=CorrectionMethod.NONE.value)
    p_local.add_argument("--calibration", choices=[c.value for c in Calibration], default=Calibration.PERMUTATION.value)
    p_local.add_argument("--adaptive", action="store_true", help="kNN only: dimension-adaptive k, Bonferroni over candidate dimensions.")
    p_local.add_argument("--output", type=Path, required=True, help="Per-point CSV report.")
    p_local.add_argument("--summary", type=Path, default=None, help="Also write the JSON summary here.")
    _add_estimator_args(p_local)
    _add_common_args(p_local)

    p_sim = sub.add_parser("simulate", help="Power study over a scenario family.")
    p_sim.add_argument("--scenario", choices=[f.value for f in ScenarioFamily], default=None)
    p_sim.add_argument("--scenario-config", type=Path, default=None, help="YAML scenario (family, n0, n1, seed).")
    p_sim.add_argument("--dims", default=None, help="Comma-separated dimensions (default: the family's table columns).")
    p_sim.add_argument("--n0", type=int, default=None)
    p_sim.add_argument("--n1", type=int, default=None)
    p_sim.add_argument("--stats", default=",".join(DEFAULT_SIMULATION_STATS), help="Comma-separated statistic presets.")
    p_sim.add_argument("--reps", type=int, default=DEFAULT_REPETITIONS, help="Simulated datasets R per cell.")
    p_sim.add_argument("--output", type=Path, default=None, help="Power table CSV.")
    _add_estimator_args(p_sim)
    _add_common_args(p_sim)

    p_embed = sub.add_parser("embed", help="Averaged diffusion map of a set of points.")
    p_embed.add_argument("input", type=Path, help="CSV of points (label/point_id columns are ignored).")
    p_embed.add_argument("--k", dest="embed_k", type=int, default=DEFAULT_NEIGHBOR_K, help="Neighbour index for local scaling.")
    p_embed.add_argument("--components", type=int, default=DEFAULT_COMPONENTS, help="Number of diffusion coordinates m.")
    p_embed.add_argument("--report", type=Path, default=None, help="Local-test CSV to join onto the coordinates.")
    p_embed.add_argument("--output", type=Path, default=None, help="Coordinates CSV (default: stdout).")
    p_embed.add_argument("--outdir-base", type=Path, default=None)
    p_embed.add_argument("--quiet", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items() if value is not None}
    if "stats" in values:
        values["stats"] = [s.strip() for s in values["stats"].split(",") if s.strip()]
    if "dims" in values:
        values["dims"] = [int(d) for d in values["dims"].split(",") if d.strip()]
    values["jobs"] = resolve_workers(values.get("jobs"))
    return RunConfig(**values)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ValidationError, ValueError) as e:
        parser.error(str(e))

    total_start_time = time.time()
    try:
        output_dir = record_run(cfg, args)
        HANDLERS[cfg.subcommand](cfg, output_dir)
    except (ValueError, UnsupportedOperationError, EmbeddingError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    say(cfg, f"\n--- ✅ Process Complete ({time.time() - total_start_time:.2f}s) ---")
    return 0


if __name__ == "__main__":
    sys.exit(main())
