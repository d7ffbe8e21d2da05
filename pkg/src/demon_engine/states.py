"""Physical states: density matrices, Gibbs states and random ensembles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .linalg import (
    HERMITIAN_TOL,
    SubsystemLayout,
    as_matrix,
    dagger,
    herm_eig,
    is_hermitian,
    kron_all,
    partial_trace,
)

TRACE_TOL = 1e-9
PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated density operator tagged with its subsystem layout."""

    matrix: np.ndarray
    layout: SubsystemLayout

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape != (self.layout.dim, self.layout.dim):
            raise ValueError(f"matrix shape {m.shape} does not match layout {self.layout}")
        if not is_hermitian(m, HERMITIAN_TOL):
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > TRACE_TOL:
            raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
        m = 0.5 * (m + dagger(m))
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min < -PSD_TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lam_min:.3g}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def single(cls, matrix, name: str) -> "DensityMatrix":
        matrix = as_matrix(matrix)
        return cls(matrix, SubsystemLayout([(name, matrix.shape[0])]))

    @property
    def dim(self) -> int:
        return self.layout.dim

    def reduce(self, keep) -> "DensityMatrix":
        if isinstance(keep, str):
            keep = [keep]
        return DensityMatrix(partial_trace(self.matrix, self.layout, keep), self.layout.sub(keep))

    def relabel(self, names: Sequence[str]) -> "DensityMatrix":
        if len(names) != len(self.layout.factors):
            raise ValueError("relabel needs one name per factor")
        return DensityMatrix(self.matrix, SubsystemLayout(zip(names, self.layout.dims)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def expect(self, op) -> float:
        return float(np.real(np.trace(self.matrix @ as_matrix(op))))

    def __matmul__(self, other: "DensityMatrix") -> "DensityMatrix":
        """Tensor product; factor names must stay unique."""
        return tensor(self, other)


def tensor(*states: DensityMatrix) -> DensityMatrix:
    factors = [f for s in states for f in s.layout.factors]
    return DensityMatrix(kron_all([s.matrix for s in states]), SubsystemLayout(factors))


@dataclass(frozen=True, eq=False)
class HamiltonianTerm:
    """Hermitian energy operator, optionally labelled with a bath temperature (k_B = 1)."""

    name: str
    matrix: np.ndarray
    temperature: float | None = None

    def __post_init__(self):
        m = as_matrix(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"Hamiltonian {self.name!r} is not square: {m.shape}")
        if not is_hermitian(m, HERMITIAN_TOL):
            raise ValueError(f"Hamiltonian {self.name!r} is not Hermitian")
        if self.temperature is not None and not self.temperature > 0:
            raise ValueError(f"temperature of {self.name!r} must be positive, got {self.temperature}")
        m = 0.5 * (m + dagger(m))
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def beta(self) -> float:
        if self.temperature is None:
            raise ValueError(f"Hamiltonian {self.name!r} carries no temperature")
        return 1.0 / self.temperature


def log_partition(h, beta: float) -> float:
    """ln tr exp(-beta h), computed without overflow."""
    h = h.matrix if isinstance(h, HamiltonianTerm) else h
    evals, _ = herm_eig(h)
    return float(logsumexp(-beta * evals))


def gibbs_state(h: HamiltonianTerm, beta: float) -> tuple[DensityMatrix, float]:
    """Thermal state exp(-beta h)/Z and its partition function Z.

    Z may overflow or underflow for extreme ``beta``; use :func:`log_partition`
    when the free energy is what you need.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    evals, evecs = herm_eig(h.matrix)
    log_z = logsumexp(-beta * evals)
    pops = np.exp(-beta * evals - log_z)
    rho = (evecs * pops) @ dagger(evecs)
    return DensityMatrix.single(rho, h.name), float(np.exp(log_z))


def pure_state(psi, layout: SubsystemLayout | None = None, name: str = "X") -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("zero vector is not a state")
    psi = psi / norm
    layout = layout or SubsystemLayout([(name, psi.size)])
    return DensityMatrix(np.outer(psi, psi.conj()), layout)


def basis_state(index: int, dim: int, name: str = "X") -> DensityMatrix:
    psi = np.zeros(dim, dtype=complex)
    psi[index] = 1
    return pure_state(psi, name=name)


def maximally_mixed(dim: int, name: str = "X") -> DensityMatrix:
    return DensityMatrix.single(np.eye(dim, dtype=complex) / dim, name)


def bell_state() -> DensityMatrix:
    """|Φ+⟩⟨Φ+| on layout (A:2, B:2)."""
    psi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return pure_state(psi, SubsystemLayout([("A", 2), ("B", 2)]))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def ginibre(rows: int, cols: int, seed) -> np.ndarray:
    rng = _rng(seed)
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def haar_random_unitary(dim: int, seed) -> np.ndarray:
    """Haar-distributed unitary from the phase-corrected QR of a Ginibre matrix.

    ``seed`` may be an integer, a ``SeedSequence`` or a ``numpy`` Generator.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    q, r = np.linalg.qr(ginibre(dim, dim, seed))
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rank: int | None = None, seed=None,
                          layout: SubsystemLayout | None = None) -> DensityMatrix:
    """Induced-measure random state G G† / tr(G G†) with G of shape (dim, rank)."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ValueError(f"rank must be in [1, {dim}], got {rank}")
    g = ginibre(dim, rank, seed)
    rho = g @ dagger(g)
    rho /= np.trace(rho).real
    layout = layout or SubsystemLayout([("X", dim)])
    if layout.dim != dim:
        raise ValueError(f"layout {layout} does not have dimension {dim}")
    return DensityMatrix(rho, layout)


def random_hermitian(dim: int, seed, scale: float = 1.0) -> np.ndarray:
    g = ginibre(dim, dim, seed)
    return scale * 0.5 * (g + dagger(g))


def build_initial_state(scenario) -> DensityMatrix:
    """Gibbs(S) ⊗ Gibbs(R_1) ⊗ … ⊗ Gibbs(R_n) ⊗ ρ_AB on the layout S, R_1..R_n, A, B."""
    parts = [gibbs_state(scenario.h_s_initial, scenario.beta)[0].relabel(["S"])]
    for res, beta in zip(scenario.reservoirs, scenario.reservoir_betas):
        parts.append(gibbs_state(res, beta)[0])
    parts.append(scenario.rho_ab_initial)
    state = tensor(*parts)
    if state.layout != scenario.layout:
        raise ValueError(f"initial state layout {state.layout} does not match scenario layout {scenario.layout}")
    return state
