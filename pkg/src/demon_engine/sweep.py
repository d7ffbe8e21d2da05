"""Mass verification over random two-engine scenarios.

Item ``i`` is built from ``SeedSequence([seed, i])`` so rows are the same
whatever the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .report import ENGINE_CHECKS, TWO_ENGINE_CHECKS, write_csv
from .scenarios import random_scenario_pair
from .uncertainty import two_engine_bounds, two_engine_checks

ITEM_COLUMNS = ["index", "d_S", "d_R", "d_A", "d_B", "temperature", "c", "violations"]
SWEEP_COLUMNS = ITEM_COLUMNS + [f"margin_{c}" for c in ENGINE_CHECKS + TWO_ENGINE_CHECKS]


@dataclass
class SweepSummary:
    count: int
    violations: int
    worst_margin: float
    worst_check: str
    conditional_failures: dict

    def line(self) -> str:
        cond = ", ".join(f"{k}={v}" for k, v in self.conditional_failures.items()) or "none"
        return (f"sweep: {self.count} scenarios, {self.violations} violations, "
                f"worst margin {self.worst_margin:.3e} ({self.worst_check}); "
                f"conditional relations failing: {cond}")


def sweep_item(seed: int, index: int, dims=(2, 2, 2, 2), u2: str = "haar") -> tuple[dict, list]:
    """One row of margins plus the raw checks of both engines and the pair."""
    k, m = random_scenario_pair(seed, index, dims, u2)
    pair = two_engine_bounds(k, m)
    checks = list(pair.report_k.checks) + list(pair.report_m.checks) + two_engine_checks(pair)
    margins: dict[str, float] = {}
    for c in checks:
        margins[c.name] = min(margins.get(c.name, math.inf), c.margin)
    row = {
        "index": index, "d_S": k.h_s_initial.dim, "d_R": k.reservoirs[0].dim if k.reservoirs else 0,
        "d_A": k.dim_a, "d_B": k.rho_ab_initial.layout.dim_of("B"), "temperature": k.system_temperature,
        "c": pair.c, "violations": sum(1 for c in checks if c.theorem and not c.ok),
    }
    row.update({f"margin_{name}": v for name, v in margins.items()})
    summary_checks = [(c.name, c.margin, c.tol, c.theorem, c.ok) for c in checks]
    return row, summary_checks


def _item(args):
    return sweep_item(*args)


def run_sweep(count: int, seed: int, dims=(2, 2, 2, 2), jobs: int = 1,
              u2: str = "haar") -> tuple[list[dict], SweepSummary]:
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    tasks = [(seed, i, tuple(dims), u2) for i in range(count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_item, tasks, chunksize=max(1, count // (4 * jobs))))
    else:
        outcomes = [_item(t) for t in tasks]
    outcomes.sort(key=lambda o: o[0]["index"])

    violations, worst, worst_name, conditional = 0, math.inf, "", {}
    for _, checks in outcomes:
        for name, margin, tol, theorem, ok in checks:
            if theorem:
                violations += not ok
                if margin < worst:
                    worst, worst_name = margin, name
            elif not ok:
                conditional[name] = conditional.get(name, 0) + 1
    rows = [row for row, _ in outcomes]
    return rows, SweepSummary(count, violations, worst, worst_name, dict(sorted(conditional.items())))


def sweep_csv(rows: list[dict]) -> str:
    return write_csv(rows, SWEEP_COLUMNS)
