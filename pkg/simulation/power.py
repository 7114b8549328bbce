# simulation/power.py
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from joblib import Parallel, delayed
from pydantic import BaseModel, Field
from tqdm import tqdm

from calibration.permutation import PermutationPlan, global_test
from metrics.statistic import StatisticSpec
from samples.scenarios import ScenarioSpec, generate
from simulation.reporting import format_power_row, get_power_stats
from utils.rng import derive_seed
from utils.saving import append_power_to_csv

# --- Defaults of the published power study ---
DEFAULT_REPETITIONS = 300
DEFAULT_PERMUTATIONS = 100
DEFAULT_ALPHA = 0.05


class SimulationReport(BaseModel):
    """Empirical power of each statistic on one scenario."""
    scenario: ScenarioSpec = Field(..., description="Scenario family, dimension, sizes and base seed.")
    powers: Dict[str, float] = Field(..., description="Rejection rate per statistic, in [0, 1].")
    std_errors: Dict[str, float] = Field(default_factory=dict, description="Monte-Carlo standard error per statistic.")
    n_reps: int = Field(..., ge=1, description="Number of simulated datasets R.")
    n_permutations: int = Field(..., ge=1, description="Permutations B per test.")
    alpha: float = Field(..., gt=0, lt=1)
    seed: int = Field(..., description="Master seed of the study.")
    wall_time_sec: Optional[float] = Field(None, description="Run time of this scenario.")


def _one_repetition(spec: ScenarioSpec, stats: Sequence[StatisticSpec], plan: PermutationPlan, alpha: float, r: int) -> List[bool]:
    """Draws dataset r and tests it with every statistic (shared permutation seed)."""
    data = generate(spec.with_seed(derive_seed(spec.seed, "repetition", r)))
    rep_plan = plan.model_copy(update={"seed": derive_seed(plan.seed, "repetition", r), "n_jobs": 1, "progress": False})
    return [global_test(data, stat, rep_plan, alpha).reject for stat in stats]


def estimate_power(
    spec: ScenarioSpec,
    stats: Sequence[StatisticSpec],
    n_reps: int = DEFAULT_REPETITIONS,
    plan: Optional[PermutationPlan] = None,
    alpha: float = DEFAULT_ALPHA,
    n_jobs: int = 1,
    progress: bool = False,
) -> SimulationReport:
    """
    Rejection rate of each statistic over `n_reps` datasets drawn from `spec`.
    Dataset r uses seed derive_seed(spec.seed, "repetition", r), so the result
    does not depend on `n_jobs`.
    """
    if not stats:
        raise ValueError("no statistics to simulate")
    if n_reps < 1:
        raise ValueError(f"n_reps must be >= 1, got {n_reps}")
    plan = plan or PermutationPlan(n_permutations=DEFAULT_PERMUTATIONS, seed=spec.seed)
    start = time.time()

    jobs = Parallel(n_jobs=n_jobs, return_as="generator")(
        delayed(_one_repetition)(spec, stats, plan, alpha, r) for r in range(n_reps)
    )
    rows = list(tqdm(jobs, total=n_reps, desc=f"{spec.family.value} D={spec.dim}", unit="rep", disable=not progress))

    powers, errors = {}, {}
    for j, stat in enumerate(stats):
        summary = get_power_stats([row[j] for row in rows])
        powers[stat.name] = summary["power"]
        errors[stat.name] = summary["std_error"]
    return SimulationReport(
        scenario=spec,
        powers=powers,
        std_errors=errors,
        n_reps=n_reps,
        n_permutations=plan.n_permutations,
        alpha=alpha,
        seed=spec.seed,
        wall_time_sec=time.time() - start,
    )


def run_power_table(
    base: ScenarioSpec,
    dims: Sequence[int],
    stats: Union[Sequence[StatisticSpec], Callable[[ScenarioSpec], Sequence[StatisticSpec]]],
    n_reps: int = DEFAULT_REPETITIONS,
    plan: Optional[PermutationPlan] = None,
    alpha: float = DEFAULT_ALPHA,
    n_jobs: int = 1,
    output_dir: Optional[Path] = None,
    verbose: bool = False,
) -> List[SimulationReport]:
    """
    One power estimate per dimension, the rows of a power table. `stats` may be
    a function of the scenario when a tuning parameter depends on n or D. When
    `output_dir` is given each row is appended to power_log.csv as it finishes.
    """
    reports = []
    for i, dim in enumerate(dims, start=1):
        if verbose:
            print(f"\n--- Scenario {i}/{len(dims)}: {base.family.value}, D={dim} ---", file=sys.stderr)
        spec = base.with_dim(dim)
        report = estimate_power(spec, stats(spec) if callable(stats) else stats, n_reps, plan, alpha, n_jobs, progress=verbose)
        reports.append(report)
        if output_dir is not None:
            append_power_to_csv(output_dir, report)
        if verbose:
            print(format_power_row(report), file=sys.stderr)
    return reports
