"""Behavioural metrics over a set of trajectories, and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..engine import TrajectoryResult
from ..errors import FormatViolation
from ..trace import Role
from ..workflow import MENU, parse_workflow, plan_class, plan_label

WORKFLOW_COLUMNS = tuple(f"wf_{plan_label(p)}" for p in MENU)
CSV_COLUMNS = ("step", "f1", "mean_rounds", "mean_retrievals", "ds_ratio", "gold_rate") + WORKFLOW_COLUMNS


@dataclass
class BehaviorMetrics:
    n: int = 0
    f1: float = 0.0
    mean_rounds: float = 0.0
    mean_retrievals: float = 0.0
    ds_ratio: float = 0.0
    gold_rate: Optional[float] = None
    # fraction of planner decisions per menu entry, keyed by plan label
    workflow: dict[str, float] = field(default_factory=dict)

    def row(self, step: int) -> dict:
        out = {
            "step": step,
            "f1": self.f1,
            "mean_rounds": self.mean_rounds,
            "mean_retrievals": self.mean_retrievals,
            "ds_ratio": self.ds_ratio,
            "gold_rate": "" if self.gold_rate is None else self.gold_rate,
        }
        for plan, column in zip(MENU, WORKFLOW_COLUMNS):
            out[column] = self.workflow.get(plan_label(plan), 0.0)
        return out


def _planner_choice(action: str):
    try:
        return parse_workflow(action)
    except FormatViolation:
        return None


def root_plan_class(result: TrajectoryResult) -> Optional[str]:
    """Coarse class of the planner's first decision, or None if it was malformed."""
    for step in result.steps:
        if step.role is Role.PLANNER:
            plan = _planner_choice(step.action)
            if plan is None or step.format_violation:
                return None
            return plan_class(plan)
    return None


def behavior_metrics(
    trajectories: Sequence[TrajectoryResult],
    f1_scores: Optional[Sequence[float]] = None,
    gold_classes: Optional[Sequence[str]] = None,
) -> BehaviorMetrics:
    n = len(trajectories)
    counts = {plan_label(p): 0 for p in MENU}
    decisions = rounds = retrievals = ds_calls = 0
    for result in trajectories:
        rounds += result.rounds_used
        retrievals += result.retrievals_used
        ds_calls += result.count(Role.DS)
        for step in result.steps:
            if step.role is not Role.PLANNER or step.format_violation:
                continue
            plan = _planner_choice(step.action)
            if plan is not None and plan in MENU:
                counts[plan_label(plan)] += 1
                decisions += 1
    metrics = BehaviorMetrics(n=n)
    if n == 0:
        return metrics
    metrics.mean_rounds = rounds / n
    metrics.mean_retrievals = retrievals / n
    metrics.ds_ratio = ds_calls / rounds if rounds else 0.0
    metrics.workflow = {k: (v / decisions if decisions else 0.0) for k, v in counts.items()}
    if f1_scores is not None:
        metrics.f1 = float(sum(f1_scores) / n)
    if gold_classes is not None:
        hits = sum(1 for r, g in zip(trajectories, gold_classes) if root_plan_class(r) == str(g))
        metrics.gold_rate = hits / n
    return metrics


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def metrics_csv(rows: Iterable[dict], extra_columns: Sequence[str] = ()) -> str:
    """Render metric rows with fixed column order and fixed float formatting."""
    columns = tuple(extra_columns) + CSV_COLUMNS
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k, "")) for k in columns})
    return buf.getvalue()
