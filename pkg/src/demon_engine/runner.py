"""Execute a parsed scenario file in its declared mode and build the report."""

from __future__ import annotations

import logging
import time

from .engine import EngineScenario, INEQ_TOL, Check, discord_form, evaluate
from .optimize import optimize_feedback, realized_work
from .report import bound_results, check_dict, discord_results, make_report, scenario_dims
from .scenarios import ScenarioFile
from .uncertainty import two_engine_bounds, two_engine_checks

log = logging.getLogger(__name__)


def _engine_checks(report, prefix: str = "") -> list[dict]:
    return [check_dict(c, prefix) for c in report.checks]


def run_single(scenario: EngineScenario, carnot: bool = False) -> tuple[dict, list[dict]]:
    trace, report = evaluate(scenario, carnot=carnot)
    results = bound_results(report, scenario)
    checks = _engine_checks(report)
    if not carnot and scenario.n_reservoirs <= 1:
        # basis optimization for the discord only exists for a qubit ancilla
        form = discord_form(trace, scenario, report, optimize=scenario.dim_a == 2)
        results.update(discord_results(form))
        results["discord_optimized"] = form.optimized
        checks.append(check_dict(form.consistency))
    return results, checks


def run_two_engine(k: EngineScenario, m: EngineScenario) -> tuple[dict, list[dict]]:
    rep = two_engine_bounds(k, m)
    eur = rep.eur
    results = {
        "c": eur.c, "S_K_given_B": eur.S_K_given_B, "S_M_given_B": eur.S_M_given_B,
        "S_A_given_B": eur.S_A_given_B, "eur_lhs": eur.eur_lhs, "eur_rhs": eur.eur_rhs,
        "s25_lhs": rep.s25_lhs, "s25_rhs": rep.s25_rhs, "w_upper_k": rep.w_upper_k,
        "w_upper_m": rep.w_upper_m, "lower_bound_28": rep.lower_bound_28, "W_ext_k": rep.W_ext_k,
        "W_ext_m": rep.W_ext_m, "saturation_gap_k": rep.saturation_gap_k,
        "saturation_gap_m": rep.saturation_gap_m, "achieved_minus_lower_bound": rep.achieved_minus_lower_bound,
    }
    for tag, sub, sc in (("k", rep.report_k, k), ("m", rep.report_m, m)):
        results[f"engine_{tag}"] = bound_results(sub, sc)
    checks = [check_dict(c) for c in two_engine_checks(rep)]
    checks += _engine_checks(rep.report_k, "K:") + _engine_checks(rep.report_m, "M:")
    return results, checks


def run_optimize(scenario: EngineScenario, budget: int = 5000, restarts: int = 8, seed: int = 0,
                 optimize_u2: bool = False, jobs: int = 1) -> tuple[dict, list[dict]]:
    res = optimize_feedback(scenario, budget=budget, restarts=restarts, seed=seed,
                            optimize_u2=optimize_u2, jobs=jobs)
    realized = realized_work(scenario, res)
    results = {
        "achieved_work": res.achieved_work, "realized_work": realized, "bound": res.bound, "gap": res.gap,
        "baseline_work": res.baseline_work, "evaluations": res.evaluations, "converged": res.converged,
        "best_restart": res.best_restart, "bound_violations": res.bound_violations,
        "best_parameters": [p.tolist() for p in res.best_parameters],
        "u2_parameters": None if res.u2_parameters is None else res.u2_parameters.tolist(),
        "restarts": [{"index": r.index, "achieved_work": r.achieved_work, "evaluations": r.evaluations,
                      "converged": r.converged} for r in res.restarts],
    }
    margin = res.bound - res.achieved_work
    if res.bound_violations:
        margin = min(margin, -abs(margin) - INEQ_TOL)
    checks = [check_dict(Check("optimizer_bound", margin, INEQ_TOL))]
    return results, checks


def run_file(sf: ScenarioFile) -> dict:
    """Run a non-sweep scenario file and return its report."""
    start = time.perf_counter()
    if sf.mode in ("single", "carnot"):
        results, checks = run_single(sf.scenario, carnot=sf.mode == "carnot")
    elif sf.mode == "two-engine":
        results, checks = run_two_engine(sf.scenario, sf.second)
    elif sf.mode == "optimize":
        opts = {"seed": sf.seed, **sf.optimize}
        results, checks = run_optimize(sf.scenario, **opts)
    else:
        raise ValueError(f"run_file does not handle mode {sf.mode!r}")
    wall = time.perf_counter() - start
    log.info("%s (%s) finished in %.3f s", sf.name, sf.mode, wall)
    return make_report(sf.mode, sf.name, sf.seed, sf.kB, scenario_dims(sf.scenario), wall, results, checks)
