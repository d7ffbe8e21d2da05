"""Dense complex-matrix primitives on small composite Hilbert spaces.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Composite
structure is carried separately by :class:`SubsystemLayout`.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-9

# Pauli and Hadamard matrices used throughout tests and builtins.
IDENTITY2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered named tensor factors, e.g. ``(("S", 2), ("R1", 2), ("A", 2))``."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        factors = tuple((str(name), int(dim)) for name, dim in factors)
        names = [name for name, _ in factors]
        if not factors:
            raise ValueError("layout needs at least one factor")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate factor names in layout: {names}")
        for name, dim in factors:
            if dim < 1:
                raise ValueError(f"factor {name!r} has non-positive dimension {dim}")
        object.__setattr__(self, "factors", factors)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def dim_of(self, name: str) -> int:
        return self.dims[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown factor {name!r}; layout has {self.names}") from None

    def sub(self, keep: Iterable[str]) -> "SubsystemLayout":
        """Layout restricted to ``keep``, in this layout's order."""
        keep = set(keep)
        unknown = keep - set(self.names)
        if unknown:
            raise KeyError(f"unknown factor(s) {sorted(unknown)}; layout has {self.names}")
        return SubsystemLayout([(n, d) for n, d in self.factors if n in keep])

    def __str__(self) -> str:
        return "⊗".join(f"{n}:{d}" for n, d in self.factors)


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def _require_square(m: np.ndarray) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def kron_all(mats: Sequence) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, as_matrix(m))
    return out


def partial_trace(m, layout: SubsystemLayout, keep: Iterable[str]) -> np.ndarray:
    """Trace out every factor of ``layout`` not named in ``keep``.

    The kept factors stay in their original order.
    """
    m = as_matrix(m)
    _require_square(m)
    if m.shape[0] != layout.dim:
        raise ValueError(f"matrix dimension {m.shape[0]} does not match layout {layout} ({layout.dim})")
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one factor")
    unknown = keep - set(layout.names)
    if unknown:
        raise KeyError(f"unknown factor(s) {sorted(unknown)}; layout has {layout.names}")

    n = len(layout.factors)
    if len(keep) == n:
        return m.copy()
    letters = string.ascii_letters
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    out_row, out_col = [], []
    for i, name in enumerate(layout.names):
        if name in keep:
            out_row.append(row[i])
            out_col.append(col[i])
        else:
            col[i] = row[i]
    spec = "".join(row) + "".join(col) + "->" + "".join(out_row) + "".join(out_col)
    kept_dim = int(np.prod([d for name, d in layout.factors if name in keep]))
    tensor = m.reshape(layout.dims + layout.dims)
    return np.einsum(spec, tensor).reshape(kept_dim, kept_dim)


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m, tol: float = 1e-9) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0])), initial=0.0) <= tol)


def is_psd(m, tol: float = 1e-10) -> bool:
    m = as_matrix(m)
    if not is_hermitian(m):
        return False
    return bool(np.linalg.eigvalsh(_symmetrize(m))[0] >= -tol)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


def herm_eig(h, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix."""
    h = as_matrix(h)
    _require_square(h)
    err = np.max(np.abs(h - dagger(h)), initial=0.0)
    if err > tol:
        raise ValueError(f"matrix is not Hermitian (max |m - m†| = {err:.3g} > {tol:g})")
    return np.linalg.eigh(_symmetrize(h))


def herm_func(h, f: Callable[[np.ndarray], np.ndarray], tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Apply the scalar function ``f`` to ``h`` through its spectral decomposition.

    ``f`` receives the real eigenvalue vector and may return real or complex values.
    """
    evals, evecs = herm_eig(h, tol)
    fvals = np.asarray(f(evals))
    return (evecs * fvals) @ dagger(evecs)


def expm_hermitian(h, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * h) for Hermitian ``h``."""
    return herm_func(h, lambda x: np.exp(scale * x))


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    return a @ b - b @ a


def embed(op, layout: SubsystemLayout, acts_on: Sequence[str]) -> np.ndarray:
    """Lift an operator on the listed factors to the full ``layout`` space.

    ``acts_on`` gives the factor order the operator is written in; it need
    not match the layout order. Identity acts on the remaining factors.
    """
    op = as_matrix(op)
    acts_on = list(acts_on)
    idx = [layout.index(name) for name in acts_on]
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated factor in {acts_on}")
    sub_dims = [layout.dims[i] for i in idx]
    sub_dim = int(np.prod(sub_dims))
    if op.shape != (sub_dim, sub_dim):
        raise ValueError(f"operator shape {op.shape} does not match factors {acts_on} (dim {sub_dim})")

    rest = [i for i in range(len(layout.factors)) if i not in idx]
    rest_dim = int(np.prod([layout.dims[i] for i in rest]))
    full = np.kron(op, np.eye(rest_dim, dtype=complex))
    # ``full`` is ordered as acts_on + rest; permute tensor legs to the layout order.
    order = idx + rest
    n = len(order)
    dims_in_order = [layout.dims[i] for i in order]
    perm = np.argsort(order)
    tensor = full.reshape(dims_in_order + dims_in_order)
    tensor = tensor.transpose(list(perm) + [n + p for p in perm])
    return tensor.reshape(layout.dim, layout.dim)
