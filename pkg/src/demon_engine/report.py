"""Flat run reports and their JSON/CSV serialization.

A report is a plain dict ``{"metadata": ..., "results": ..., "checks": [...]}``
that validates against ``schemas/report.schema.json``. JSON output uses sorted
keys and shortest round-trip floats, so dump(load(dump(r))) == dump(r).
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable

import numpy as np

from .engine import BoundReport, Check, DiscordForm, EngineScenario

SCHEMA_VERSION = "1"

ENGINE_CHECKS = (
    "stage1_entropy_invariant", "measurement_entropy_increase", "post_measurement_decomposition",
    "stage4_entropy_invariant", "branch_entropy_bound", "feedback_concavity", "marginal_entropy_A",
    "marginal_entropy_B", "memory_decomposition", "entropy_chain", "memory_entropy_identity",
    "klein_nonnegativity", "weighted_work_bound", "branch_identity", "work_bound",
)
CARNOT_CHECKS = ("carnot_work_bound", "efficiency_bound")
TWO_ENGINE_CHECKS = ("eur", "joint_entropy_uncertainty", "two_engine_work_bound")

BOUND_FIELDS = (
    "E_S_i", "E_S_f", "dU_S", "F_S_i", "F_S_f", "dF_S", "Q_total", "W_ext", "lhs_17",
    "dS_A", "dS_B", "dS", "I_i", "I_2", "dI", "rhs_17", "rhs_18", "branch_identity_residual",
)
CARNOT_FIELDS = ("Q_H", "Q_L", "T_H", "T_L", "rhs_19", "eta", "eta_carnot", "eta_bound")
DISCORD_FIELDS = ("C", "dJ", "J_i", "J_2", "delta_i", "delta_2")
TWO_ENGINE_FIELDS = (
    "c", "S_K_given_B", "S_M_given_B", "S_A_given_B", "eur_lhs", "eur_rhs", "s25_lhs", "s25_rhs",
    "w_upper_k", "w_upper_m", "lower_bound_28", "W_ext_k", "W_ext_m", "saturation_gap_k",
    "saturation_gap_m", "achieved_minus_lower_bound",
)
OPTIMIZE_FIELDS = (
    "achieved_work", "realized_work", "bound", "gap", "baseline_work", "evaluations", "converged",
    "best_restart", "bound_violations",
)
METADATA_COLUMNS = ("name", "mode", "seed", "kB", "dims", "wall_time_s", "status")


def check_dict(check: Check, prefix: str = "") -> dict:
    # + 0.0 folds -0.0 into 0.0
    return {"name": prefix + check.name, "margin": check.margin + 0.0, "tol": check.tol,
            "theorem": check.theorem, "ok": check.ok}


def bound_results(report: BoundReport, scenario: EngineScenario) -> dict:
    en = report.energetics
    out = {
        "E_S_i": en.E_S_i, "E_S_f": en.E_S_f, "dU_S": en.dU_S, "F_S_i": en.F_S_i, "F_S_f": en.F_S_f,
        "dF_S": en.dF_S, "Q_total": float(sum(en.Q)), "W_ext": en.W_ext, "lhs_17": en.lhs_17,
        "dS_A": report.dS_A, "dS_B": report.dS_B, "dS": report.dS, "I_i": report.I_i, "I_2": report.I_2,
        "dI": report.dI, "rhs_17": report.rhs_17, "rhs_18": report.rhs_18,
        "branch_identity_residual": report.branch_identity_residual,
    }
    for r, q in zip(scenario.reservoirs, en.Q):
        out[f"Q_{r.name}"] = q
    if report.T_H is not None:
        out.update({f: getattr(report, f) for f in CARNOT_FIELDS})
    return out


def discord_results(form: DiscordForm) -> dict:
    return {f: getattr(form, f) for f in DISCORD_FIELDS}


def scenario_dims(scenario: EngineScenario) -> dict:
    return dict(zip(scenario.layout.names, scenario.layout.dims))


def make_report(mode: str, name: str, seed: int, kB: float, dims: dict, wall_time: float,
                results: dict, checks: Iterable[dict]) -> dict:
    checks = list(checks)
    failed = any(c["theorem"] and not c["ok"] for c in checks)
    return {
        "metadata": {
            "schema_version": SCHEMA_VERSION, "mode": mode, "name": name, "seed": int(seed),
            "kB": float(kB), "dims": dims, "wall_time_s": float(wall_time),
            "status": "check_failed" if failed else "ok",
        },
        "results": results,
        "checks": checks,
    }


def report_failed(report: dict) -> bool:
    return report["metadata"]["status"] != "ok"


# --- JSON --------------------------------------------------------------------

def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays to JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def to_json(report: dict) -> str:
    return json.dumps(_plain(report), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def from_json(text: str) -> dict:
    return json.loads(text)


# --- CSV ---------------------------------------------------------------------

def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g") if math.isfinite(value) else ""
    if isinstance(value, dict):
        return ";".join(f"{k}:{v}" for k, v in value.items())
    return str(value)


def csv_columns(mode: str) -> list[str]:
    """Fixed CSV column order for a report mode."""
    if mode in ("single", "carnot"):
        fields = list(BOUND_FIELDS) + list(DISCORD_FIELDS)
        checks = list(ENGINE_CHECKS) + ["discord_form"]
        if mode == "carnot":
            fields = list(BOUND_FIELDS) + list(CARNOT_FIELDS)
            checks = list(ENGINE_CHECKS) + list(CARNOT_CHECKS)
    elif mode == "two-engine":
        fields = list(TWO_ENGINE_FIELDS)
        checks = list(TWO_ENGINE_CHECKS) + [f"{e}:{c}" for e in "KM" for c in ENGINE_CHECKS]
    elif mode == "optimize":
        fields = list(OPTIMIZE_FIELDS)
        checks = ["optimizer_bound"]
    else:
        raise ValueError(f"no CSV layout for mode {mode!r}")
    return list(METADATA_COLUMNS) + fields + [f"margin_{c}" for c in checks]


def report_row(report: dict) -> dict:
    meta, results = report["metadata"], report["results"]
    row = {k: meta[k] for k in METADATA_COLUMNS}
    row.update(results)
    for c in report["checks"]:
        row[f"margin_{c['name']}"] = c["margin"]
    return row


def write_csv(rows: Iterable[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def to_csv(report: dict) -> str:
    return write_csv([report_row(report)], csv_columns(report["metadata"]["mode"]))
