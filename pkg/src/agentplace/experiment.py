"""Experiment orchestration and metric export."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .policies import POLICY_NAMES, make_policy
from .refine import Refiner
from .scenario import Scenario
from .sim import METRIC_COLUMNS, MetricsRecord, simulate

CSV_COLUMNS = ("policy", "task_id") + METRIC_COLUMNS
AGGREGATE_ID = "__all__"


def render(columns: Sequence[str], rows: Iterable[dict], fmt: str = "csv") -> str:
    """Deterministic text for a table; floats keep full repr precision."""
    rows = [{c: r[c] for c in columns} for r in rows]
    if fmt == "json":
        return json.dumps({"columns": list(columns), "rows": rows}, indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def write_table(columns, rows, out_path: str | Path | None, fmt: str = "csv") -> str:
    text = render(columns, rows, fmt)
    if out_path is not None:
        Path(out_path).write_text(text)
    return text


def metric_rows(policy: str, record: MetricsRecord) -> list[dict]:
    rows = []
    for m in record.rows:
        row = {"policy": policy, "task_id": m.task_id}
        row.update({c: getattr(m, c) for c in METRIC_COLUMNS})
        rows.append(row)
    if rows:
        totals = record.totals
        agg = {"policy": policy, "task_id": AGGREGATE_ID}
        agg.update({c: totals[c] for c in METRIC_COLUMNS})
        rows.append(agg)
    return rows


@dataclass
class ExperimentResult:
    records: dict[str, MetricsRecord]
    rows: list[dict]
    text: str


def run_policy(scenario: Scenario, policy: str, refiner: Refiner | str | None = "local") -> MetricsRecord:
    system = scenario.build_system()
    pol = make_policy(policy, scenario.aco, refiner, seed=scenario.seed)
    return simulate(system, scenario.tasks, pol, scenario.sim)


def run_experiment(
    scenario: Scenario,
    policies: Sequence[str] = POLICY_NAMES,
    out_path: str | Path | None = None,
    fmt: str = "csv",
    refiner: Refiner | str | None = "local",
) -> ExperimentResult:
    """Simulate every policy on the same scenario and seeds; one writer, fixed order."""
    records, rows = {}, []
    for name in policies:
        records[name] = run_policy(scenario, name, refiner)
        rows.extend(metric_rows(name, records[name]))
    text = write_table(CSV_COLUMNS, rows, out_path, fmt)
    return ExperimentResult(records, rows, text)
