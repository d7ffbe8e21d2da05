"""Derivative-free search over feedback unitaries to probe how close the
single-reservoir work bound can be pushed.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .engine import EngineScenario, INEQ_TOL, evaluate
from .linalg import dagger, embed, expm_hermitian
from .simplex import nelder_mead

log = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def hermitian_basis(dim: int) -> np.ndarray:
    """Orthonormal Hermitian basis of shape (dim², dim, dim).

    Order: diagonal units, then (E_jk + E_kj)/√2, then −i(E_jk − E_kj)/√2, j < k.
    """
    basis = []
    for j in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[j, j] = 1
        basis.append(e)
    pairs = [(j, k) for j in range(dim) for k in range(j + 1, dim)]
    for j, k in pairs:
        e = np.zeros((dim, dim), dtype=complex)
        e[j, k] = e[k, j] = 1 / np.sqrt(2)
        basis.append(e)
    for j, k in pairs:
        e = np.zeros((dim, dim), dtype=complex)
        e[j, k] = -1j / np.sqrt(2)
        e[k, j] = 1j / np.sqrt(2)
        basis.append(e)
    out = np.array(basis)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ParameterizedUnitary:
    """U(θ) = exp(i G(θ)) with G = Σ_j θ_j B_j over :func:`hermitian_basis`."""

    dim: int
    parameters: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.parameters, dtype=float).ravel()
        if p.size != self.dim ** 2:
            raise ValueError(f"need {self.dim ** 2} parameters for dim {self.dim}, got {p.size}")
        object.__setattr__(self, "parameters", p)

    @property
    def generator(self) -> np.ndarray:
        return np.tensordot(self.parameters, hermitian_basis(self.dim), axes=1)

    @property
    def matrix(self) -> np.ndarray:
        return expm_hermitian(self.generator, 1j)

    @classmethod
    def identity(cls, dim: int) -> "ParameterizedUnitary":
        return cls(dim, np.zeros(dim ** 2))


def unitaries_from_vector(theta: np.ndarray, dim: int, count: int) -> list[np.ndarray]:
    chunks = np.asarray(theta, dtype=float).reshape(count, dim ** 2)
    return [ParameterizedUnitary(dim, c).matrix for c in chunks]


class FeedbackObjective:
    """Extracted work as a function of the concatenated generator coordinates.

    Only the feedback stage depends on θ (unless ``optimize_u2``), so the
    post-measurement S⊗R branches and the bound are computed once.
    """

    def __init__(self, scenario: EngineScenario, optimize_u2: bool = False):
        if scenario.n_reservoirs > 1:
            raise ValueError(f"feedback optimization needs a single-reservoir scenario, got {scenario.n_reservoirs}")
        self.scenario = scenario
        self.optimize_u2 = optimize_u2
        self.dim = scenario.dim_sr
        self.n_branches = scenario.dim_a
        self.dim_u2 = scenario.h_s_initial.dim * scenario.dim_a
        self.size = self.n_branches * self.dim ** 2 + (self.dim_u2 ** 2 if optimize_u2 else 0)
        self.bound_violations = 0
        self.worst_margin = np.inf

        trace, report = evaluate(scenario)
        self.bound = report.rhs_18
        sr = scenario.sr_names
        layout = scenario.layout.sub(sr)
        h = embed(scenario.h_s_final.matrix, layout, ["S"])
        for r in scenario.reservoirs:
            h = h + embed(r.matrix, layout, [r.name])
        self._h_final = h
        e_i = report.energetics.E_S_i + sum(report.energetics.E_R_i)
        self._e_initial = e_i
        self._sigma = self._branches(trace)

    def _branches(self, trace) -> np.ndarray:
        sigma = np.zeros((self.n_branches, self.dim, self.dim), dtype=complex)
        sr = self.scenario.sr_names
        for b in trace.branches:
            sigma[b.k] = b.p * b.rho_srb.reduce(sr).matrix
        return sigma

    def split(self, theta) -> tuple[list[np.ndarray], np.ndarray | None]:
        theta = np.asarray(theta, dtype=float)
        n_fb = self.n_branches * self.dim ** 2
        feedback = unitaries_from_vector(theta[:n_fb], self.dim, self.n_branches)
        u2 = ParameterizedUnitary(self.dim_u2, theta[n_fb:]).matrix if self.optimize_u2 else None
        return feedback, u2

    def realize(self, theta) -> EngineScenario:
        """The scenario with θ's feedback (and U2) substituted."""
        feedback, u2 = self.split(theta)
        changes = {"feedback": tuple(feedback)}
        if u2 is not None:
            changes["u2"] = u2
        return self.scenario.replace(**changes)

    def work(self, theta) -> float:
        if self.optimize_u2:
            _, report = evaluate(self.realize(theta))
            w, bound = report.energetics.W_ext, report.rhs_18
        else:
            feedback, _ = self.split(theta)
            e_f = sum(np.real(np.trace(u @ s @ dagger(u) @ self._h_final)) for u, s in zip(feedback, self._sigma))
            w, bound = self._e_initial - float(e_f), self.bound
        margin = bound - w
        self.worst_margin = min(self.worst_margin, margin)
        if margin < -INEQ_TOL:
            self.bound_violations += 1
            log.error("work %.12g exceeds bound %.12g", w, bound)
        return w

    def __call__(self, theta) -> float:
        return -self.work(theta)


@dataclass
class RestartResult:
    index: int
    parameters: np.ndarray
    achieved_work: float
    evaluations: int
    converged: bool
    history: list[float] = field(default_factory=list)


@dataclass
class OptimizationResult:
    best_parameters: list[np.ndarray]
    u2_parameters: np.ndarray | None
    achieved_work: float
    bound: float
    gap: float
    baseline_work: float
    evaluations: int
    converged: bool
    best_restart: int
    restarts: list[RestartResult]
    bound_violations: int

    @property
    def history(self) -> list[float]:
        """Best-so-far work per evaluation of the winning restart."""
        return self.restarts[self.best_restart].history


def restart_start(objective: FeedbackObjective, index: int, seed: int) -> np.ndarray:
    """Identity feedback for restart 0; uniform random generator coordinates otherwise."""
    if index == 0:
        return np.zeros(objective.size)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    return rng.uniform(-np.pi, np.pi, objective.size)


def run_restart(objective: FeedbackObjective, index: int, seed: int, budget: int) -> RestartResult:
    res = nelder_mead(objective, restart_start(objective, index, seed), step=0.1,
                      budget=budget, xtol=1e-6, ftol=1e-9)
    log.info("restart %d: work %.10g after %d evaluations (converged=%s)",
             index, -res.fun, res.evaluations, res.converged)
    return RestartResult(index=index, parameters=res.x, achieved_work=-res.fun,
                         evaluations=res.evaluations, converged=res.converged,
                         history=[-v for v in res.history])


def optimize_feedback(scenario: EngineScenario, budget: int = 5000, restarts: int = 8,
                      seed: int = 0, optimize_u2: bool = False, jobs: int = 1) -> OptimizationResult:
    """Maximize extracted work over feedback unitaries with restarted Nelder-Mead.

    ``budget`` caps objective evaluations per restart. Restart ``i`` is
    seeded from ``(seed, i)``, so the result is the max over independent
    single-restart runs whatever the scheduling.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")

    def one(index):
        objective = FeedbackObjective(scenario, optimize_u2)
        return run_restart(objective, index, seed, budget), objective

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, range(restarts)))
    else:
        outcomes = [one(i) for i in range(restarts)]
    results = [r for r, _ in outcomes]
    violations = sum(obj.bound_violations for _, obj in outcomes)

    best = max(results, key=lambda r: (r.achieved_work, -r.index))
    objective = outcomes[best.index][1]
    n_fb = objective.n_branches * objective.dim ** 2
    params = list(best.parameters[:n_fb].reshape(objective.n_branches, objective.dim ** 2))
    u2_params = best.parameters[n_fb:] if optimize_u2 else None
    bound = objective.bound
    if optimize_u2:
        _, report = evaluate(objective.realize(best.parameters))
        bound = report.rhs_18
    gap = bound - best.achieved_work
    identity = tuple(np.eye(objective.dim, dtype=complex) for _ in range(objective.n_branches))
    baseline = evaluate(scenario.replace(feedback=identity))[1].energetics.W_ext
    return OptimizationResult(
        best_parameters=params, u2_parameters=u2_params, achieved_work=best.achieved_work,
        bound=bound, gap=gap if gap > 0 else 0.0, baseline_work=baseline,
        evaluations=sum(r.evaluations for r in results), converged=best.converged,
        best_restart=best.index, restarts=results, bound_violations=violations,
    )


def realized_work(scenario: EngineScenario, result: OptimizationResult) -> float:
    """Re-run the full engine with the optimized feedback and return W_ext."""
    objective = FeedbackObjective(scenario, result.u2_parameters is not None)
    theta = np.concatenate(list(result.best_parameters)
                           + ([result.u2_parameters] if result.u2_parameters is not None else []))
    return evaluate(objective.realize(theta))[1].energetics.W_ext
