"""Four-stage measurement-feedback engine and its thermodynamic accounting.

Register layout is always S, R1..Rn, A, B. Stages:

1. thermal S and reservoirs, arbitrary ρ_AB;
2. a unitary on S⊗R;
3. a unitary on S⊗A followed by a rank-1 projective measurement of A;
4. feedback U^k on S⊗R conditioned on the outcome k.

Final equilibration is taken to be the identity; only entropies and the
declared final Hamiltonian enter the bounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .entropy import (
    MeasurementBasis,
    discord_decomposition,
    measurement_branches,
    mutual_information,
    post_measurement_state,
    shannon,
    vn_entropy,
)
from .linalg import SubsystemLayout, as_matrix, dagger, embed, is_unitary
from .states import DensityMatrix, HamiltonianTerm, build_initial_state, log_partition

log = logging.getLogger(__name__)

UNITARY_TOL = 1e-9
BRANCH_CUTOFF = 1e-12
EQ_TOL = 1e-9
INEQ_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EngineScenario:
    """Declarative description of one engine run.

    ``u1`` acts on S⊗R1⊗…⊗Rn, ``u2`` on S⊗A (S first), ``feedback[k]`` on
    S⊗R. ``system_temperature`` must equal the first reservoir's temperature
    when reservoirs are present. Temperatures and energies share one unit;
    ``kB`` converts temperature to energy.
    """

    h_s_initial: HamiltonianTerm
    h_s_final: HamiltonianTerm
    system_temperature: float
    reservoirs: tuple[HamiltonianTerm, ...]
    rho_ab_initial: DensityMatrix
    u1: np.ndarray
    u2: np.ndarray
    basis: MeasurementBasis
    feedback: tuple[np.ndarray, ...]
    seed: int = 0
    kB: float = 1.0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        object.__setattr__(self, "feedback", tuple(as_matrix(u) for u in self.feedback))
        object.__setattr__(self, "u1", as_matrix(self.u1))
        object.__setattr__(self, "u2", as_matrix(self.u2))
        self.validate()

    # --- structure -------------------------------------------------------
    @property
    def n_reservoirs(self) -> int:
        return len(self.reservoirs)

    @property
    def reservoir_names(self) -> list[str]:
        return [r.name for r in self.reservoirs]

    @property
    def sr_names(self) -> list[str]:
        return ["S"] + self.reservoir_names

    @property
    def layout(self) -> SubsystemLayout:
        ab = self.rho_ab_initial.layout
        return SubsystemLayout([("S", self.h_s_initial.dim)]
                               + [(r.name, r.dim) for r in self.reservoirs]
                               + list(ab.factors))

    @property
    def dim_sr(self) -> int:
        return self.h_s_initial.dim * int(np.prod([r.dim for r in self.reservoirs]))

    @property
    def dim_a(self) -> int:
        return self.rho_ab_initial.layout.dim_of("A")

    @property
    def beta(self) -> float:
        return 1.0 / (self.kB * self.system_temperature)

    @property
    def reservoir_betas(self) -> list[float]:
        return [1.0 / (self.kB * r.temperature) for r in self.reservoirs]

    def validate(self) -> None:
        d_s = self.h_s_initial.dim
        if self.h_s_final.dim != d_s:
            raise ValueError(f"h_s_final has dimension {self.h_s_final.dim}, h_s_initial has {d_s}")
        if not self.system_temperature > 0:
            raise ValueError(f"system_temperature must be positive, got {self.system_temperature}")
        if not self.kB > 0:
            raise ValueError(f"kB must be positive, got {self.kB}")
        names = self.reservoir_names
        if len(set(names)) != len(names) or set(names) & {"S", "A", "B"}:
            raise ValueError(f"reservoir names must be unique and distinct from S, A, B: {names}")
        for r in self.reservoirs:
            if r.temperature is None:
                raise ValueError(f"reservoir {r.name!r} has no temperature")
        if self.reservoirs and abs(self.reservoirs[0].temperature - self.system_temperature) > 1e-12:
            raise ValueError(f"system temperature {self.system_temperature} must equal the first "
                             f"reservoir temperature {self.reservoirs[0].temperature}")
        if self.rho_ab_initial.layout.names != ("A", "B"):
            raise ValueError(f"rho_ab_initial must have layout (A, B), got {self.rho_ab_initial.layout}")
        d_a = self.dim_a
        checks = [("u1", self.u1, self.dim_sr), ("u2", self.u2, d_s * d_a)]
        checks += [(f"feedback[{k}]", u, self.dim_sr) for k, u in enumerate(self.feedback)]
        for label, u, dim in checks:
            if u.shape != (dim, dim):
                raise ValueError(f"{label} has shape {u.shape}, expected ({dim}, {dim})")
            if not is_unitary(u, UNITARY_TOL):
                raise ValueError(f"{label} is not unitary within {UNITARY_TOL:g}")
        if self.basis.factor != "A" or self.basis.dim != d_a:
            raise ValueError(f"measurement basis must act on A (dim {d_a}), got {self.basis.factor!r} "
                             f"(dim {self.basis.dim})")
        if len(self.feedback) != d_a:
            raise ValueError(f"feedback needs one unitary per outcome ({d_a}), got {len(self.feedback)}")

    def replace(self, **changes) -> "EngineScenario":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return EngineScenario(**fields)


@dataclass(frozen=True, eq=False)
class Branch:
    k: int
    p: float
    # normalized post-measurement state of S, R, B (canonical order)
    rho_srb: DensityMatrix


@dataclass(frozen=True, eq=False)
class StageTrace:
    rho_i: DensityMatrix
    rho_1: DensityMatrix
    rho_1_prime: DensityMatrix
    rho_2: DensityMatrix
    rho_f: DensityMatrix
    probabilities: np.ndarray
    branches: tuple[Branch, ...]
    rho_sr_i: DensityMatrix
    rho_sr_f: DensityMatrix
    rho_ab_i: DensityMatrix
    rho_ab_2: DensityMatrix
    rho_a_i: DensityMatrix
    rho_a_2: DensityMatrix
    rho_a_f: DensityMatrix
    rho_b_i: DensityMatrix
    rho_b_2: DensityMatrix
    rho_b_f: DensityMatrix


def _conjugate(u: np.ndarray, rho: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(u @ rho.matrix @ dagger(u), rho.layout)


def feedback_unitary(scenario: EngineScenario, feedback: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """U3 = I_B ⊗ Σ_k |k⟩⟨k|_A ⊗ U^k_SR on the full register."""
    feedback = scenario.feedback if feedback is None else feedback
    layout = scenario.layout
    u3 = np.zeros((layout.dim, layout.dim), dtype=complex)
    for k, uk in enumerate(feedback):
        u3 += embed(np.kron(scenario.basis.projector(k), uk), layout, ["A"] + scenario.sr_names)
    return u3


def run_engine(scenario: EngineScenario) -> StageTrace:
    layout = scenario.layout
    sr = scenario.sr_names
    rho_i = build_initial_state(scenario)
    rho_1 = _conjugate(embed(scenario.u1, layout, sr), rho_i)
    rho_1p = _conjugate(embed(scenario.u2, layout, ["S", "A"]), rho_1)

    probs, raw, rest = measurement_branches(rho_1p, scenario.basis)
    probs = np.clip(probs, 0.0, None)
    branches = []
    for k, (p, sigma) in enumerate(zip(probs, raw)):
        if p < BRANCH_CUTOFF:
            continue
        branches.append(Branch(k, float(p), DensityMatrix(sigma / p, rest)))

    rho_2 = post_measurement_state(rho_1p, scenario.basis)
    rho_f = _conjugate(feedback_unitary(scenario), rho_2)
    log.debug("run_engine %s: p_k = %s", scenario.name, probs)

    return StageTrace(
        rho_i=rho_i, rho_1=rho_1, rho_1_prime=rho_1p, rho_2=rho_2, rho_f=rho_f,
        probabilities=probs, branches=tuple(branches),
        rho_sr_i=rho_i.reduce(sr), rho_sr_f=rho_f.reduce(sr),
        rho_ab_i=rho_i.reduce(["A", "B"]), rho_ab_2=rho_2.reduce(["A", "B"]),
        rho_a_i=rho_i.reduce("A"), rho_a_2=rho_2.reduce("A"), rho_a_f=rho_f.reduce("A"),
        rho_b_i=rho_i.reduce("B"), rho_b_2=rho_2.reduce("B"), rho_b_f=rho_f.reduce("B"),
    )


# --- energetics --------------------------------------------------------------

@dataclass(frozen=True)
class Energetics:
    E_S_i: float
    E_S_f: float
    E_R_i: tuple[float, ...]
    E_R_f: tuple[float, ...]
    Q: tuple[float, ...]
    dU_S: float
    F_S_i: float
    F_S_f: float
    dF_S: float
    W_ext: float
    lhs_17: float


def energy_accounting(trace: StageTrace, scenario: EngineScenario) -> Energetics:
    """Energies, heats, free energies and extracted work of one run.

    W_ext = -ΔU_S + Σ_m Q_m for any number of reservoirs; the weighted
    left-hand side -ΔU_S + Σ_m (T/T_m) Q_m is returned as ``lhs_17``.
    """
    rho_s_i = trace.rho_i.reduce("S")
    rho_s_f = trace.rho_f.reduce("S")
    e_s_i = rho_s_i.expect(scenario.h_s_initial.matrix)
    e_s_f = rho_s_f.expect(scenario.h_s_final.matrix)
    e_r_i = tuple(trace.rho_i.reduce(r.name).expect(r.matrix) for r in scenario.reservoirs)
    e_r_f = tuple(trace.rho_f.reduce(r.name).expect(r.matrix) for r in scenario.reservoirs)
    q = tuple(a - b for a, b in zip(e_r_i, e_r_f))
    kt = scenario.kB * scenario.system_temperature
    f_i = -kt * log_partition(scenario.h_s_initial, scenario.beta)
    f_f = -kt * log_partition(scenario.h_s_final, scenario.beta)
    du = e_s_f - e_s_i
    t = scenario.system_temperature
    lhs = -du + sum(t / r.temperature * qm for r, qm in zip(scenario.reservoirs, q))
    return Energetics(E_S_i=e_s_i, E_S_f=e_s_f, E_R_i=e_r_i, E_R_f=e_r_f, Q=q, dU_S=du,
                      F_S_i=f_i, F_S_f=f_f, dF_S=f_f - f_i, W_ext=-du + sum(q), lhs_17=lhs)


# --- bounds ------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    """A numerical check that passes when ``margin >= -tol``.

    Inequalities use margin = rhs - lhs; equalities use -|lhs - rhs|.
    ``theorem`` is False for relations that hold only under extra
    assumptions and are reported for diagnosis.
    """

    name: str
    margin: float
    tol: float
    theorem: bool = True

    @property
    def ok(self) -> bool:
        return self.margin >= -self.tol


def _eq(name, a, b, tol=EQ_TOL, theorem=True) -> Check:
    return Check(name, -abs(a - b), tol, theorem)


def _le(name, lhs, rhs, tol=INEQ_TOL, theorem=True) -> Check:
    return Check(name, rhs - lhs, tol, theorem)


@dataclass(frozen=True)
class BoundReport:
    energetics: Energetics
    dS_A: float
    dS_B: float
    dS: float
    I_i: float
    I_2: float
    dI: float
    rhs_17: float
    # single-reservoir (n <= 1) figures
    rhs_18: float | None
    # Carnot (n == 2) figures
    Q_H: float | None = None
    Q_L: float | None = None
    T_H: float | None = None
    T_L: float | None = None
    rhs_19: float | None = None
    eta: float | None = None
    eta_carnot: float | None = None
    eta_bound: float | None = None
    branch_identity_residual: float = 0.0
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.theorem and not c.ok]


def reference_log_expectation(rho_sr: DensityMatrix, scenario: EngineScenario) -> float:
    """tr[ρ_SR ln ρ_ref] with ρ_ref = Gibbs(H_S^f, β) ⊗ Gibbs(H_Rm, β_m), evaluated in closed form."""
    total = -scenario.beta * rho_sr.reduce("S").expect(scenario.h_s_final.matrix)
    total -= log_partition(scenario.h_s_final, scenario.beta)
    for r, beta in zip(scenario.reservoirs, scenario.reservoir_betas):
        total -= beta * rho_sr.reduce(r.name).expect(r.matrix) + log_partition(r, beta)
    return total


def branch_identity_residual(trace: StageTrace, scenario: EngineScenario) -> float:
    """max_k ‖tr_A(Π_k ρ_AB^i Π_k) − tr_A(Π_k ρ_AB^(2) Π_k)‖ over unnormalized memory branches."""
    _, before, _ = measurement_branches(trace.rho_ab_i, scenario.basis)
    _, after, _ = measurement_branches(trace.rho_ab_2, scenario.basis)
    return float(np.max(np.abs(before - after)))


def bound_evaluation(trace: StageTrace, scenario: EngineScenario, carnot: bool = False) -> BoundReport:
    en = energy_accounting(trace, scenario)
    kt = scenario.kB * scenario.system_temperature
    s = vn_entropy

    dS_A = s(trace.rho_a_f) - s(trace.rho_a_i)
    dS_B = s(trace.rho_b_f) - s(trace.rho_b_i)
    I_i = mutual_information(trace.rho_ab_i, "A", "B")
    I_2 = mutual_information(trace.rho_ab_2, "A", "B")
    dS, dI = dS_A + dS_B, I_2 - I_i
    rhs_17 = -en.dF_S + kt * (dS - dI)
    rhs_18 = rhs_17 if scenario.n_reservoirs <= 1 else None

    S_i, S_1, S_2, S_f = s(trace.rho_i), s(trace.rho_1), s(trace.rho_2), s(trace.rho_f)
    S_sr_i, S_sr_f = s(trace.rho_sr_i), s(trace.rho_sr_f)
    S_ab_i, S_ab_2 = s(trace.rho_ab_i), s(trace.rho_ab_2)
    H_p = shannon(trace.probabilities)
    sr = scenario.sr_names
    avg_srb = sum(b.p * s(b.rho_srb) for b in trace.branches)
    avg_sr = sum(b.p * s(b.rho_srb.reduce(sr)) for b in trace.branches)
    avg_b = sum(b.p * s(b.rho_srb.reduce("B")) for b in trace.branches)
    klein = -S_sr_f - reference_log_expectation(trace.rho_sr_f, scenario)
    residual = branch_identity_residual(trace, scenario)

    checks = [
        _eq("stage1_entropy_invariant", S_1, S_i),
        _le("measurement_entropy_increase", S_i, S_2, tol=EQ_TOL),
        _eq("post_measurement_decomposition", S_2, H_p + avg_srb, tol=INEQ_TOL),
        _eq("stage4_entropy_invariant", S_f, S_2),
        _le("branch_entropy_bound", S_sr_i - avg_sr, H_p + avg_b - S_ab_i),
        _le("feedback_concavity", avg_sr, S_sr_f, tol=EQ_TOL),
        _eq("marginal_entropy_A", s(trace.rho_a_f), s(trace.rho_a_2)),
        _eq("marginal_entropy_B", s(trace.rho_b_f), s(trace.rho_b_2)),
        _eq("memory_decomposition", S_ab_2, H_p + avg_b, tol=INEQ_TOL),
        _le("entropy_chain", S_sr_i - S_sr_f, S_ab_2 - S_ab_i),
        _eq("memory_entropy_identity", S_ab_2 - S_ab_i, dS - dI, tol=INEQ_TOL),
        Check("klein_nonnegativity", klein, EQ_TOL),
        _le("weighted_work_bound", en.lhs_17, rhs_17),
        _eq("branch_identity", residual, 0.0, theorem=False),
    ]
    if rhs_18 is not None:
        checks.append(_le("work_bound", en.W_ext, rhs_18))

    report = dict(energetics=en, dS_A=dS_A, dS_B=dS_B, dS=dS, I_i=I_i, I_2=I_2, dI=dI,
                  rhs_17=rhs_17, rhs_18=rhs_18, branch_identity_residual=residual)
    if carnot:
        report.update(_carnot_fields(en, scenario, dS - dI, checks))
    return BoundReport(**report, checks=tuple(checks))


def _carnot_fields(en: Energetics, scenario: EngineScenario, entropy_term: float, checks: list) -> dict:
    if scenario.n_reservoirs != 2:
        raise ValueError(f"Carnot analysis needs exactly 2 reservoirs, scenario has {scenario.n_reservoirs}")
    cold, hot = scenario.reservoirs
    if not cold.temperature < hot.temperature:
        raise ValueError("Carnot analysis expects R1 to be the cold bath (T = T_L) and R2 the hot bath")
    if not np.allclose(scenario.h_s_initial.matrix, scenario.h_s_final.matrix, atol=1e-12, rtol=0):
        raise ValueError("Carnot analysis requires h_s_initial == h_s_final")
    if abs(en.dU_S) >= 1e-6:
        log.warning("Carnot assumption ΔU_S = 0 violated: ΔU_S = %.3g; Carnot work checks skipped", en.dU_S)
    t_l, t_h = cold.temperature, hot.temperature
    q_l, q_h = en.Q
    kt_l = scenario.kB * t_l
    eta_carnot = 1 - t_l / t_h
    rhs_19 = eta_carnot * q_h + kt_l * entropy_term
    out = dict(Q_H=q_h, Q_L=q_l, T_H=t_h, T_L=t_l, rhs_19=rhs_19, eta_carnot=eta_carnot)
    if abs(en.dU_S) < 1e-6:
        checks.append(_le("carnot_work_bound", en.W_ext, rhs_19))
    if q_h > 1e-9:
        eta = en.W_ext / q_h
        eta_bound = eta_carnot + kt_l * entropy_term / q_h
        out.update(eta=eta, eta_bound=eta_bound)
        if abs(en.dU_S) < 1e-6:
            checks.append(_le("efficiency_bound", eta, eta_bound))
    return out


# --- discord form --------------------------------------------------------------

@dataclass(frozen=True)
class DiscordForm:
    C: float
    dJ: float
    J_i: float
    J_2: float
    delta_i: float
    delta_2: float
    # True when δ(B^i|A^i) was minimized over qubit bases
    optimized: bool
    consistency: Check


def discord_form(trace: StageTrace, scenario: EngineScenario, report: BoundReport | None = None,
                 optimize: bool = True) -> DiscordForm:
    """C = ΔS − ΔJ + δ(B^i|A^i) and the check −ΔF_S + k_B T·C = rhs_18."""
    if scenario.n_reservoirs > 1:
        raise ValueError("the discord form applies to single-reservoir scenarios")
    if optimize and scenario.dim_a != 2:
        raise ValueError(f"discord optimization needs a qubit ancilla, A has dimension {scenario.dim_a}")
    report = report or bound_evaluation(trace, scenario)
    initial = discord_decomposition(trace.rho_ab_i, optimize=optimize, basis_hint=scenario.basis)
    final = discord_decomposition(trace.rho_ab_2, optimize=False, basis_hint=scenario.basis)
    dJ = final.classical_corr - initial.classical_corr
    c = report.dS - dJ + initial.discord
    kt = scenario.kB * scenario.system_temperature
    consistency = _eq("discord_form", -report.energetics.dF_S + kt * c, report.rhs_18, tol=INEQ_TOL)
    return DiscordForm(C=c, dJ=dJ, J_i=initial.classical_corr, J_2=final.classical_corr,
                       delta_i=initial.discord, delta_2=final.discord,
                       optimized=optimize, consistency=consistency)


def evaluate(scenario: EngineScenario, carnot: bool = False) -> tuple[StageTrace, BoundReport]:
    trace = run_engine(scenario)
    return trace, bound_evaluation(trace, scenario, carnot=carnot)
