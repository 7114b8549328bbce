# simulation/reporting.py
import math
from typing import Any, Dict, List, Sequence

import pandas as pd


def get_power_stats(rejections: Sequence[bool]) -> Dict[str, Any]:
    """
    Empirical rejection rate over repetitions with its Monte-Carlo standard error.
    """
    count = len(rejections)
    if count == 0:
        return {"count": 0, "rejections": 0, "power": 0.0, "std_error": 0.0}
    hits = int(sum(bool(r) for r in rejections))
    power = hits / count
    return {
        "count": count,
        "rejections": hits,
        "power": power,
        "std_error": math.sqrt(power * (1.0 - power) / count),
    }


def power_table_frame(reports: List["SimulationReport"]) -> pd.DataFrame:
    """
    Power tables laid out like the published ones: one row per statistic,
    one column per dimension D, one block per scenario family.
    """
    rows = []
    for report in reports:
        for name, power in report.powers.items():
            rows.append({"scenario": report.scenario.family.value, "statistic": name, "dim": report.scenario.dim, "power": power})
    if not rows:
        return pd.DataFrame(columns=["scenario", "statistic"])
    # sort=False keeps scenarios and statistics in the order they were run.
    table = pd.DataFrame(rows).pivot_table(index=["scenario", "statistic"], columns="dim", values="power", sort=False)
    table = table.reindex(sorted(table.columns), axis=1)
    table.columns = [f"D={d}" for d in table.columns]
    return table.reset_index()


def format_power_row(report: "SimulationReport") -> str:
    cells = " | ".join(f"{name}: {power:.3f}" for name, power in report.powers.items())
    return f"   → D={report.scenario.dim}: {cells}"
