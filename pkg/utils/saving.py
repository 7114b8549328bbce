# utils/saving.py
import csv
import json
import sys
from pathlib import Path
from typing import Any, Union

from pydantic import BaseModel


def to_jsonable(payload: Union[BaseModel, dict]) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    return payload


def dump_json(payload: Union[BaseModel, dict]) -> str:
    return json.dumps(to_jsonable(payload), indent=2, ensure_ascii=False)


def save_json(payload: Union[BaseModel, dict], file_path: Path):
    """
    Saves a pydantic model (or plain dict) as indented JSON.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(payload), f, indent=2, ensure_ascii=False)


def append_power_to_csv(output_dir: Path, report):
    """
    Appends one row per statistic of a SimulationReport to power_log.csv.
    """
    csv_path = Path(output_dir) / "power_log.csv"
    file_exists = csv_path.exists()
    csv_path.parent.mkdir(parents=True, exist_ok=True)

    with open(csv_path, "a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)

        # Write header only if the file is new
        if not file_exists:
            writer.writerow([
                "scenario", "dim", "n0", "n1", "statistic", "power", "std_error",
                "n_reps", "n_permutations", "alpha", "seed", "duration_sec"
            ])

        spec = report.scenario
        for name, power in report.powers.items():
            writer.writerow([
                spec.family.value, spec.dim, spec.n0, spec.n1, name,
                f"{power:.6f}", f"{report.std_errors.get(name, 0.0):.6f}",
                report.n_reps, report.n_permutations, report.alpha, report.seed,
                f"{report.wall_time_sec or 0.0:.6f}"
            ])


def save_parameters_to_json(output_dir: Path, args):
    """
    Save the execution arguments (parameters) to a JSON file
    inside the output directory.
    """
    params_path = Path(output_dir) / "parameters.json"

    # vars() works for argparse namespaces; dicts are copied as they are.
    try:
        params_data = vars(args).copy()
    except TypeError:
        params_data = dict(args)

    params_data.pop("handler", None)
    params_data = {key: str(value) if isinstance(value, Path) else value for key, value in params_data.items()}

    try:
        with open(params_path, "w", encoding="utf-8") as f:
            json.dump(params_data, f, indent=4, ensure_ascii=False, default=str)
    except OSError as e:
        print(f"Warning: parameters.json couldn't be saved: {e}", file=sys.stderr)
