"""Entropic uncertainty with quantum memory and the two-engine work bounds.

Everything is in nats: the incompatibility term is ln(1/c). Divide by
ln 2 for bits.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .engine import EngineScenario, INEQ_TOL, BoundReport, StageTrace, evaluate
from .entropy import MeasurementBasis, conditional_entropy, measured_conditional_entropy, vn_entropy
from .states import DensityMatrix


def overlap_c(k_basis: MeasurementBasis, m_basis: MeasurementBasis) -> float:
    """max_{k,m} |⟨k|α_m⟩|²."""
    if k_basis.dim != m_basis.dim:
        raise ValueError(f"bases have different dimensions: {k_basis.dim} vs {m_basis.dim}")
    if k_basis.factor != m_basis.factor:
        raise ValueError(f"bases act on different factors: {k_basis.factor!r} vs {m_basis.factor!r}")
    overlaps = np.abs(k_basis.vectors.conj().T @ m_basis.vectors) ** 2
    return float(min(np.max(overlaps), 1.0))


@dataclass(frozen=True)
class EURReport:
    c: float
    S_K_given_B: float
    S_M_given_B: float
    S_A_given_B: float
    eur_lhs: float
    eur_rhs: float

    @property
    def margin(self) -> float:
        return self.eur_lhs - self.eur_rhs


def eur_check(rho_ab: DensityMatrix, k_basis: MeasurementBasis, m_basis: MeasurementBasis) -> EURReport:
    """S(K|B) + S(M|B) against ln(1/c) + S(A|B); the measured factor is the bases' factor."""
    c = overlap_c(k_basis, m_basis)
    factor = k_basis.factor
    memory = [name for name in rho_ab.layout.names if name != factor]
    s_k = measured_conditional_entropy(rho_ab, k_basis)
    s_m = measured_conditional_entropy(rho_ab, m_basis)
    s_ab = conditional_entropy(rho_ab, [factor], memory)
    return EURReport(c=c, S_K_given_B=s_k, S_M_given_B=s_m, S_A_given_B=s_ab,
                     eur_lhs=s_k + s_m, eur_rhs=-np.log(c) + s_ab)


@dataclass(frozen=True, eq=False)
class TwoEngineReport:
    eur: EURReport
    s25_lhs: float
    s25_rhs: float
    w_upper_k: float
    w_upper_m: float
    lower_bound_28: float
    W_ext_k: float
    W_ext_m: float
    saturation_gap_k: float
    saturation_gap_m: float
    report_k: BoundReport
    report_m: BoundReport
    trace_k: StageTrace
    trace_m: StageTrace

    @property
    def c(self) -> float:
        return self.eur.c

    @property
    def s25_margin(self) -> float:
        return self.s25_lhs - self.s25_rhs

    @property
    def bound28_margin(self) -> float:
        """(W_upper^K + W_upper^M) − lower_bound_28; equals k_B T × s25_margin."""
        return self.w_upper_k + self.w_upper_m - self.lower_bound_28

    @property
    def achieved_minus_lower_bound(self) -> float:
        """Achieved W_ext^K + W_ext^M − lower_bound_28; descriptive only, may be negative."""
        return self.W_ext_k + self.W_ext_m - self.lower_bound_28


_SHARED_FIELDS = ("h_s_initial", "system_temperature", "reservoirs", "rho_ab_initial", "u1", "u2", "kB")


def _check_pair(a: EngineScenario, b: EngineScenario) -> None:
    for name in ("h_s_initial", "reservoirs"):
        x, y = getattr(a, name), getattr(b, name)
        if name == "reservoirs":
            same = len(x) == len(y) and all(
                r.name == s.name and r.temperature == s.temperature and np.array_equal(r.matrix, s.matrix)
                for r, s in zip(x, y))
        else:
            same = np.array_equal(x.matrix, y.matrix)
        if not same:
            raise ValueError(f"two-engine scenarios differ in {name}")
    for name in ("system_temperature", "kB"):
        if getattr(a, name) != getattr(b, name):
            raise ValueError(f"two-engine scenarios differ in {name}")
    for name in ("u1", "u2"):
        if not np.array_equal(getattr(a, name), getattr(b, name)):
            raise ValueError(f"two-engine scenarios differ in {name}")
    if not np.array_equal(a.rho_ab_initial.matrix, b.rho_ab_initial.matrix):
        raise ValueError("two-engine scenarios differ in rho_ab_initial")
    if a.n_reservoirs > 1:
        raise ValueError(f"two-engine bounds need single-reservoir engines, got {a.n_reservoirs} reservoirs")


def two_engine_bounds(scenario_k: EngineScenario, scenario_m: EngineScenario,
                      parallel: bool = False) -> TwoEngineReport:
    """Run both engines and evaluate the two-engine uncertainty and work bounds.

    The engines may differ in measurement basis, feedback and final system
    Hamiltonian; everything else must match.
    """
    _check_pair(scenario_k, scenario_m)
    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            (trace_k, rep_k), (trace_m, rep_m) = pool.map(evaluate, [scenario_k, scenario_m])
    else:
        trace_k, rep_k = evaluate(scenario_k)
        trace_m, rep_m = evaluate(scenario_m)

    rho_ab_i = trace_k.rho_ab_i
    eur = eur_check(rho_ab_i, scenario_k.basis, scenario_m.basis)
    s_ab_i = vn_entropy(rho_ab_i)
    s_b_i = vn_entropy(trace_k.rho_b_i)
    s_ab_k = vn_entropy(trace_k.rho_ab_2)
    s_ab_m = vn_entropy(trace_m.rho_ab_2)
    kt = scenario_k.kB * scenario_k.system_temperature
    df_k, df_m = rep_k.energetics.dF_S, rep_m.energetics.dF_S

    w_k = -df_k + kt * (s_ab_k - s_ab_i)
    w_m = -df_m + kt * (s_ab_m - s_ab_i)
    lower = -df_k - df_m + kt * (-np.log(eur.c) - eur.S_A_given_B)
    return TwoEngineReport(
        eur=eur, s25_lhs=s_ab_k + s_ab_m, s25_rhs=-np.log(eur.c) + s_ab_i + s_b_i,
        w_upper_k=w_k, w_upper_m=w_m, lower_bound_28=lower,
        W_ext_k=rep_k.energetics.W_ext, W_ext_m=rep_m.energetics.W_ext,
        saturation_gap_k=w_k - rep_k.energetics.W_ext, saturation_gap_m=w_m - rep_m.energetics.W_ext,
        report_k=rep_k, report_m=rep_m, trace_k=trace_k, trace_m=trace_m,
    )


def two_engine_checks(report: TwoEngineReport) -> list:
    from .engine import Check
    return [
        Check("eur", report.eur.margin, INEQ_TOL),
        Check("joint_entropy_uncertainty", report.s25_margin, INEQ_TOL, theorem=False),
        Check("two_engine_work_bound", report.bound28_margin, INEQ_TOL, theorem=False),
    ]
