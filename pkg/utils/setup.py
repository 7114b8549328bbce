# utils/setup.py
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional

# Environment variable that overrides --jobs.
WORKERS_ENV = "REGTEST_WORKERS"


def setup_experiment(base_dir: Path) -> Path:
    """
    Creates a unique timestamped run directory inside 'base_dir'.
    A numeric suffix is added if two runs start within the same second.
    """
    timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    output_dir = Path(base_dir) / timestamp
    suffix = 1
    while output_dir.exists():
        output_dir = Path(base_dir) / f"{timestamp}_{suffix}"
        suffix += 1
    output_dir.mkdir(parents=True)
    return output_dir


def resolve_workers(jobs: Optional[int] = None) -> int:
    """
    Worker count: REGTEST_WORKERS if set, else `jobs`, else 1. Results never
    depend on it.
    """
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            print(f"Warning: ignoring non-integer {WORKERS_ENV}={raw!r}.", file=sys.stderr)
        else:
            if value >= 1:
                return value
            print(f"Warning: ignoring {WORKERS_ENV}={raw!r}; it must be >= 1.", file=sys.stderr)
    return max(1, jobs or 1)
