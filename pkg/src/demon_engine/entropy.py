"""Entropy functionals in nats: von Neumann, Shannon, relative, mutual,
conditional and measured-conditional entropies, plus quantum discord.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .linalg import SubsystemLayout, as_matrix, herm_eig
from .simplex import nelder_mead
from .states import DensityMatrix

EIG_CLIP = 1e-12
NONNEG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MeasurementBasis:
    """Complete rank-1 projective measurement on one named factor.

    ``vectors`` holds the orthonormal basis vectors as columns.
    """

    label: str
    factor: str
    vectors: np.ndarray

    def __post_init__(self):
        v = as_matrix(self.vectors)
        if v.shape[0] != v.shape[1]:
            raise ValueError(f"basis {self.label!r} must have as many vectors as the factor dimension, got {v.shape}")
        gram = v.conj().T @ v
        if np.max(np.abs(gram - np.eye(v.shape[0]))) > 1e-9:
            raise ValueError(f"basis {self.label!r} vectors are not orthonormal")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def projector(self, k: int) -> np.ndarray:
        v = self.vectors[:, k]
        return np.outer(v, v.conj())

    @property
    def projectors(self) -> list[np.ndarray]:
        return [self.projector(k) for k in range(self.dim)]

    @classmethod
    def computational(cls, dim: int, factor: str = "A") -> "MeasurementBasis":
        return cls("computational", factor, np.eye(dim, dtype=complex))

    @classmethod
    def fourier(cls, dim: int, factor: str = "A") -> "MeasurementBasis":
        """Discrete Fourier basis; the Hadamard basis for a qubit."""
        j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
        label = "hadamard" if dim == 2 else "fourier"
        return cls(label, factor, np.exp(2j * np.pi * j * k / dim) / np.sqrt(dim))

    @classmethod
    def bloch(cls, theta: float, phi: float, factor: str = "A") -> "MeasurementBasis":
        return cls(f"bloch({theta:.6g},{phi:.6g})", factor, _bloch_vectors(theta, phi))


def _bloch_vectors(theta, phi) -> np.ndarray:
    """Qubit basis {|n⟩, |−n⟩} for Bloch direction (theta, phi); batched over leading axes."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.exp(1j * phi)
    v = np.empty(theta.shape + (2, 2), dtype=complex)
    v[..., 0, 0] = c
    v[..., 1, 0] = e * s
    v[..., 0, 1] = -np.conj(e) * s
    v[..., 1, 1] = c
    return v


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else as_matrix(rho)


def entropy_of_eigenvalues(evals) -> float:
    """-Σ λ ln λ, with λ < EIG_CLIP contributing nothing."""
    lam = np.asarray(evals, dtype=float)
    lam = lam[lam >= EIG_CLIP]
    return float(-np.sum(lam * np.log(lam)))


def _batched_entropy(evals: np.ndarray) -> np.ndarray:
    safe = np.where(evals >= EIG_CLIP, evals, 1.0)
    return -np.sum(np.where(evals >= EIG_CLIP, evals * np.log(safe), 0.0), axis=-1)


def vn_entropy(rho) -> float:
    m = _matrix(rho)
    value = entropy_of_eigenvalues(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))
    return value if value > 0 else 0.0


def shannon(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise ValueError(f"probabilities must be non-negative, got min {p.min():.3g}")
    if abs(p.sum() - 1) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum():.12g}, expected 1")
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    value = entropy_of_eigenvalues(p)
    return value if value > 0 else 0.0


def clip_nonnegative(value: float, what: str, tol: float = NONNEG_TOL) -> float:
    """Clip tiny negative round-off to zero; larger negatives are errors."""
    if value < -tol:
        raise ArithmeticError(f"{what} = {value:.3g} is negative beyond tolerance {tol:g}")
    return value if value > 0 else 0.0


def relative_entropy(rho, sigma) -> float:
    """S(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ; ``inf`` when supp ρ ⊄ supp σ."""
    r, s = _matrix(rho), _matrix(sigma)
    if r.shape != s.shape:
        raise ValueError(f"dimension mismatch: {r.shape} vs {s.shape}")
    s_evals, s_vecs = herm_eig(s)
    # weight of ρ on each σ eigenvector
    weights = np.real(np.einsum("ik,ij,jk->k", s_vecs.conj(), r, s_vecs))
    null = s_evals < EIG_CLIP
    if np.any(weights[null] > 1e-9):
        return float("inf")
    log_s = np.log(np.where(null, 1.0, s_evals))
    cross = float(np.sum(weights[~null] * log_s[~null]))
    value = -vn_entropy(r) - cross
    return clip_nonnegative(value, "relative entropy")


def _split(layout: SubsystemLayout, part_x: Iterable[str], part_y: Iterable[str]) -> tuple[list[str], list[str]]:
    x, y = _as_names(part_x), _as_names(part_y)
    if set(x) & set(y):
        raise ValueError(f"partition parts overlap: {sorted(set(x) & set(y))}")
    if set(x) | set(y) != set(layout.names) or not x or not y:
        raise ValueError(f"parts {x} and {y} do not partition the layout factors {layout.names}")
    return x, y


def _as_names(part) -> list[str]:
    return [part] if isinstance(part, str) else list(part)


def mutual_information(rho: DensityMatrix, part_x, part_y) -> float:
    x, y = _split(rho.layout, part_x, part_y)
    value = vn_entropy(rho.reduce(x)) + vn_entropy(rho.reduce(y)) - vn_entropy(rho)
    return clip_nonnegative(value, "mutual information")


def conditional_entropy(rho: DensityMatrix, of, given) -> float:
    """S(of|given) = S(ρ) − S(ρ_given); may be negative for entangled states."""
    _, y = _split(rho.layout, of, given)
    return vn_entropy(rho) - vn_entropy(rho.reduce(y))


def measurement_branches(rho, basis: MeasurementBasis) -> tuple[np.ndarray, np.ndarray, SubsystemLayout]:
    """Unnormalized conditional states ⟨k|_A ρ |k⟩_A of the unmeasured factors.

    Returns ``(probabilities, branches, rest_layout)`` with ``branches`` of
    shape (d_A, d_rest, d_rest). Works for any number of unmeasured factors.
    """
    layout = rho.layout
    if basis.factor not in layout.names:
        raise ValueError(f"basis acts on {basis.factor!r}, state layout is {layout}")
    if basis.dim != layout.dim_of(basis.factor):
        raise ValueError(f"basis dimension {basis.dim} does not match factor {basis.factor!r} "
                         f"of dimension {layout.dim_of(basis.factor)}")
    blocks, rest = _factor_blocks(rho.matrix, layout, basis.factor)
    v = basis.vectors
    branches = np.einsum("ik,jk,ijab->kab", v.conj(), v, blocks)
    probs = np.real(np.einsum("kaa->k", branches))
    return probs, branches, rest


def _factor_blocks(m: np.ndarray, layout: SubsystemLayout, factor: str) -> tuple[np.ndarray, SubsystemLayout]:
    """Reshape ``m`` to blocks[i, j] = ⟨i|_factor m |j⟩_factor acting on the other factors."""
    n = len(layout.factors)
    a = layout.index(factor)
    d_a = layout.dims[a]
    rest_names = [name for name in layout.names if name != factor]
    if not rest_names:
        raise ValueError("measured state must have at least one unmeasured factor")
    rest = layout.sub(rest_names)
    t = m.reshape(layout.dims + layout.dims)
    t = np.moveaxis(t, [a, n + a], [0, 1])
    return t.reshape(d_a, d_a, rest.dim, rest.dim), rest


def post_measurement_state(rho: DensityMatrix, basis: MeasurementBasis) -> DensityMatrix:
    """Σ_k (Π_k ⊗ I) ρ (Π_k ⊗ I) with Π_k acting on ``basis.factor``."""
    layout = rho.layout
    n = len(layout.factors)
    a = layout.index(basis.factor)
    v = basis.vectors
    t = rho.matrix.reshape(layout.dims + layout.dims)
    t = np.moveaxis(t, [a, n + a], [0, 1])
    # rotate A into the measurement basis, drop coherences, rotate back
    t = np.einsum("ik,jl,ij...->kl...", v.conj(), v, t)
    t = t * np.eye(basis.dim)[(...,) + (None,) * (2 * n - 2)]
    t = np.einsum("ik,jl,kl...->ij...", v, v.conj(), t)
    t = np.moveaxis(t, [0, 1], [a, n + a])
    return DensityMatrix(t.reshape(layout.dim, layout.dim), layout)


def _branch_entropy_sum(branches: np.ndarray) -> float:
    """Σ_k p_k S(σ_k / p_k) for unnormalized branches σ_k with tr σ_k = p_k."""
    total = 0.0
    for sigma in branches:
        p = float(np.real(np.trace(sigma)))
        if p < EIG_CLIP:
            continue
        total += p * vn_entropy(sigma / p)
    return total


def measured_conditional_entropy(rho: DensityMatrix, basis: MeasurementBasis) -> float:
    """S(K|B) of the state after measuring ``basis`` on its factor; B is every other factor."""
    probs, branches, _ = measurement_branches(rho, basis)
    memory = [name for name in rho.layout.names if name != basis.factor]
    return shannon(probs) + _branch_entropy_sum(branches) - vn_entropy(rho.reduce(memory))


@dataclass(frozen=True)
class DiscordResult:
    mutual_info: float
    classical_corr: float
    discord: float
    basis: MeasurementBasis
    # False when J was only evaluated at a supplied basis (so J is a lower bound)
    optimized: bool


def _conditional_cost(blocks: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Σ_k p_k S(ρ_B^k) for bases batched along the leading axes of ``vectors``."""
    branches = np.einsum("...ik,...jk,ijab->...kab", vectors.conj(), vectors, blocks)
    evals = np.linalg.eigvalsh(branches)
    probs = np.real(np.einsum("...kaa->...k", branches))
    # p S(σ/p) = -Σ μ ln μ + p ln p
    plogp = np.where(probs >= EIG_CLIP, probs * np.log(np.where(probs >= EIG_CLIP, probs, 1.0)), 0.0)
    return np.sum(_batched_entropy(evals) + plogp, axis=-1)


def discord_decomposition(rho: DensityMatrix, optimize: bool = True,
                          basis_hint: MeasurementBasis | None = None,
                          factor: str = "A", grid: int = 64) -> DiscordResult:
    """Split I(A:B) into classical correlation J(B|A) and discord δ(B|A).

    The measurement acts on ``factor``; everything else is the memory. With
    ``optimize`` the minimum over projective qubit bases is found by a Bloch
    sphere grid search refined by Nelder-Mead. Otherwise J is evaluated at
    ``basis_hint`` only and is a lower bound on the true value.
    """
    layout = rho.layout
    d_a = layout.dim_of(factor)
    memory = [name for name in layout.names if name != factor]
    mutual = mutual_information(rho, [factor], memory)
    s_b = vn_entropy(rho.reduce(memory))
    blocks, _ = _factor_blocks(rho.matrix, layout, factor)

    if optimize:
        if d_a != 2:
            raise ValueError(f"discord optimization is only available for a qubit measured factor, "
                             f"{factor!r} has dimension {d_a}")
        thetas = np.linspace(0.0, np.pi, grid)
        phis = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        tt, pp = np.meshgrid(thetas, phis, indexing="ij")
        costs = _conditional_cost(blocks, _bloch_vectors(tt, pp))
        i, j = np.unravel_index(np.argmin(costs), costs.shape)
        start = np.array([tt[i, j], pp[i, j]])
        res = nelder_mead(lambda x: float(_conditional_cost(blocks, _bloch_vectors(x[0], x[1]))),
                          start, step=np.pi / grid, budget=2000, xtol=1e-10, ftol=1e-12)
        cost = min(res.fun, float(costs[i, j]))
        theta, phi = (res.x if res.fun <= costs[i, j] else start)
        basis = MeasurementBasis.bloch(theta, phi, factor)
    else:
        if basis_hint is None:
            basis_hint = MeasurementBasis.computational(d_a, factor)
        if basis_hint.factor != factor or basis_hint.dim != d_a:
            raise ValueError(f"basis hint acts on {basis_hint.factor!r} (dim {basis_hint.dim}), expected {factor!r} (dim {d_a})")
        basis = basis_hint
        cost = float(_conditional_cost(blocks, basis.vectors))

    classical = clip_nonnegative(s_b - cost, "classical correlation")
    discord = clip_nonnegative(mutual - classical, "discord", tol=1e-8)
    return DiscordResult(mutual, classical, discord, basis, optimize)
