"""Scenario files, named gates, the builtin suite and random scenarios.

A scenario file is UTF-8 JSON validated against ``schemas/scenario.schema.json``.
Matrices are nested lists whose entries are reals or ``[re, im]`` pairs.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
from scipy.linalg import block_diag

from .engine import EngineScenario
from .entropy import MeasurementBasis
from .linalg import PAULI_X, PAULI_Y, PAULI_Z, SubsystemLayout, embed, herm_eig, kron_all
from .optimize import ParameterizedUnitary
from .states import (
    DensityMatrix,
    HamiltonianTerm,
    bell_state,
    haar_random_unitary,
    pure_state,
    random_density_matrix,
    random_hermitian,
)

MAX_TOTAL_DIM = 4096
MODES = ("single", "carnot", "two-engine", "sweep", "optimize")


class ScenarioError(ValueError):
    """Invalid scenario input; ``field`` names the offending location."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


def load_schema(name: str = "scenario") -> dict:
    text = resources.files("demon_engine").joinpath(f"schemas/{name}.schema.json").read_text("utf-8")
    return json.loads(text)


# --- value decoding ----------------------------------------------------------

def _complex(entry, where: str) -> complex:
    if isinstance(entry, (int, float)) and not isinstance(entry, bool):
        return complex(entry)
    if isinstance(entry, list) and len(entry) == 2:
        return complex(entry[0], entry[1])
    raise ScenarioError(where, f"expected a number or [re, im] pair, got {entry!r}")


def decode_vector(data, where: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ScenarioError(where, "expected a non-empty list")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(data)], dtype=complex)


def decode_matrix(data, where: str, square: bool = True) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ScenarioError(where, "expected a non-empty list of rows")
    rows = [decode_vector(row, f"{where}[{i}]") for i, row in enumerate(data)]
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise ScenarioError(where, f"rows have different lengths {sorted(widths)}")
    m = np.array(rows)
    if square and m.shape[0] != m.shape[1]:
        raise ScenarioError(where, f"matrix must be square, got {m.shape[0]}x{m.shape[1]}")
    return m


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def decode_hamiltonian(data, where: str) -> np.ndarray:
    if isinstance(data, dict):
        return np.diag(np.asarray(data["diag"], dtype=float)).astype(complex)
    return decode_matrix(data, where)


# --- named gates -------------------------------------------------------------

_ARROWS = {"→": "->", "↔": "<->"}


def _gate_matrix(spec: str, factors: list[tuple[str, int]], where: str) -> np.ndarray:
    text = spec.strip()
    for a, b in _ARROWS.items():
        text = text.replace(a, b)
    layout = SubsystemLayout(factors)
    words = text.lower().split()
    if text.lower() == "identity":
        return np.eye(layout.dim, dtype=complex)

    def factor(name):
        for n, _ in factors:
            if n.lower() == name.lower():
                return n
        raise ScenarioError(where, f"gate {spec!r} names unknown factor {name!r}; acts on {[n for n, _ in factors]}")

    m = re.fullmatch(r"cnot\s+(\w+)\s*->\s*(\w+)", text, flags=re.I)
    if m:
        c, t = factor(m.group(1)), factor(m.group(2))
        if c == t:
            raise ScenarioError(where, f"gate {spec!r}: control and target coincide")
        dc, dt = layout.dim_of(c), layout.dim_of(t)
        # |c, t⟩ → |c, t + c mod d_t⟩
        u = np.zeros((dc * dt, dc * dt), dtype=complex)
        for i in range(dc):
            for j in range(dt):
                u[i * dt + (j + i) % dt, i * dt + j] = 1
        return embed(u, layout, [c, t])
    m = re.fullmatch(r"swap\s+(\w+)\s*<->\s*(\w+)", text, flags=re.I)
    if m:
        a, b = factor(m.group(1)), factor(m.group(2))
        d = layout.dim_of(a)
        if a == b or layout.dim_of(b) != d:
            raise ScenarioError(where, f"gate {spec!r}: swap needs two distinct factors of equal dimension")
        u = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                u[j * d + i, i * d + j] = 1
        return embed(u, layout, [a, b])
    single = {"hadamard": None, "x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}
    if len(words) == 3 and words[0] in single and words[1] == "on":
        target = factor(text.split()[2])
        d = layout.dim_of(target)
        if words[0] == "hadamard":
            op = MeasurementBasis.fourier(d).vectors
        elif d == 2:
            op = single[words[0]]
        else:
            raise ScenarioError(where, f"gate {spec!r}: Pauli gates need a qubit factor")
        return embed(op, layout, [target])
    raise ScenarioError(where, f"unrecognized gate {spec!r}; expected identity, 'cnot C->T', "
                               f"'swap A<->B', 'hadamard on X', 'x|y|z on X'")


def energy_conserving_haar(hamiltonian: np.ndarray, rng, tol: float = 1e-9) -> np.ndarray:
    """Haar-random unitary within each degenerate eigenspace of ``hamiltonian``."""
    evals, vecs = herm_eig(hamiltonian)
    blocks, start = [], 0
    for i in range(1, len(evals) + 1):
        if i == len(evals) or evals[i] - evals[start] > tol:
            blocks.append(haar_random_unitary(i - start, rng))
            start = i
    return vecs @ block_diag(*blocks) @ vecs.conj().T


def decode_unitary(data, factors: list[tuple[str, int]], where: str,
                   hamiltonian: np.ndarray | None = None) -> np.ndarray:
    """``hamiltonian`` is the free Hamiltonian on ``factors``, needed for energy-conserving draws."""
    dim = int(np.prod([d for _, d in factors]))
    if isinstance(data, str):
        return _gate_matrix(data, factors, where)
    if isinstance(data, list):
        u = np.eye(dim, dtype=complex)
        for i, gate in enumerate(data):
            # gates apply in list order
            u = _gate_matrix(gate, factors, f"{where}[{i}]") @ u
        return u
    if "matrix" in data:
        u = decode_matrix(data["matrix"], f"{where}.matrix")
    elif "generator" in data:
        theta = np.asarray(data["generator"], dtype=float)
        if theta.size != dim ** 2:
            raise ScenarioError(f"{where}.generator", f"expected {dim ** 2} parameters for dimension {dim}, got {theta.size}")
        u = ParameterizedUnitary(dim, theta).matrix
    else:
        seed = data["haar"]
        entropy = np.random.SeedSequence(seed if isinstance(seed, int) else list(seed))
        if data.get("conserve_energy", False):
            if hamiltonian is None:
                raise ScenarioError(f"{where}.conserve_energy", "no free Hamiltonian is defined on these factors")
            u = energy_conserving_haar(hamiltonian, np.random.default_rng(entropy))
        else:
            u = haar_random_unitary(dim, entropy)
    if u.shape != (dim, dim):
        raise ScenarioError(where, f"unitary has shape {u.shape}, expected ({dim}, {dim})")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > 1e-9:
        raise ScenarioError(where, "matrix is not unitary within 1e-9")
    return u


def decode_basis(data, dim: int, where: str) -> MeasurementBasis:
    if isinstance(data, str):
        if data == "computational":
            return MeasurementBasis.computational(dim)
        if data == "hadamard" and dim != 2:
            raise ScenarioError(where, "hadamard basis needs a qubit ancilla; use 'fourier'")
        return MeasurementBasis.fourier(dim)
    if "bloch" in data:
        if dim != 2:
            raise ScenarioError(where, "bloch basis needs a qubit ancilla")
        return MeasurementBasis.bloch(*data["bloch"])
    vectors = [decode_vector(v, f"{where}.vectors[{i}]") for i, v in enumerate(data["vectors"])]
    if len(vectors) != dim or any(v.size != dim for v in vectors):
        raise ScenarioError(where, f"expected {dim} vectors of length {dim}")
    try:
        return MeasurementBasis("custom", "A", np.column_stack(vectors))
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None


def decode_rho_ab(data, dims: dict, where: str) -> DensityMatrix:
    d_a, d_b = dims.get("A"), dims.get("B")
    if isinstance(data, list):
        m = decode_matrix(data, where)
        if d_a is None and d_b is None:
            d_a = d_b = int(round(np.sqrt(m.shape[0])))
        elif d_a is None:
            d_a = m.shape[0] // d_b
        elif d_b is None:
            d_b = m.shape[0] // d_a
        if d_a * d_b != m.shape[0]:
            raise ScenarioError(where, f"{m.shape[0]}x{m.shape[0]} matrix does not factor as A:{d_a} ⊗ B:{d_b}; "
                                       f"set scenario.dims")
        try:
            return DensityMatrix(m, SubsystemLayout([("A", d_a), ("B", d_b)]))
        except ValueError as exc:
            raise ScenarioError(where, str(exc)) from None
    d_a, d_b = d_a or 2, d_b or 2
    layout = SubsystemLayout([("A", d_a), ("B", d_b)])
    if data == "bell":
        if (d_a, d_b) != (2, 2):
            raise ScenarioError(where, "bell state needs A:2, B:2")
        return bell_state()
    if data == "maximally_mixed":
        return DensityMatrix(np.eye(d_a * d_b, dtype=complex) / (d_a * d_b), layout)
    if "ket" in data:
        psi = decode_vector(data["ket"], f"{where}.ket")
        if psi.size != d_a * d_b:
            raise ScenarioError(f"{where}.ket", f"expected {d_a * d_b} amplitudes, got {psi.size}")
        return pure_state(psi, layout)
    i, j = data["basis_state"]
    if i >= d_a or j >= d_b:
        raise ScenarioError(f"{where}.basis_state", f"index out of range for A:{d_a}, B:{d_b}")
    psi = np.zeros(d_a * d_b, dtype=complex)
    psi[i * d_b + j] = 1
    return pure_state(psi, layout)


def _hterm(name, data, where, temperature=None) -> HamiltonianTerm:
    try:
        return HamiltonianTerm(name, decode_hamiltonian(data, where), temperature)
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(where, str(exc)) from None


def decode_scenario(data: dict, kB: float = 1.0, seed: int = 0, name: str = "scenario",
                    where: str = "scenario") -> EngineScenario:
    sys_ = data["system"]
    temperature = float(sys_["temperature"])
    h_i = _hterm("S", sys_["h_initial"], f"{where}.system.h_initial")
    h_f = _hterm("S", sys_.get("h_final", sys_["h_initial"]), f"{where}.system.h_final")
    if h_f.dim != h_i.dim:
        raise ScenarioError(f"{where}.system.h_final", f"dimension {h_f.dim} differs from h_initial ({h_i.dim})")
    reservoirs = []
    for m, res in enumerate(data.get("reservoirs", [])):
        rname = res.get("name", f"R{m + 1}")
        reservoirs.append(_hterm(rname, res["hamiltonian"], f"{where}.reservoirs[{m}].hamiltonian",
                                 float(res["temperature"])))
    if reservoirs and abs(reservoirs[0].temperature - temperature) > 1e-12:
        raise ScenarioError(f"{where}.reservoirs[0].temperature",
                            f"must equal system temperature {temperature} (the system equilibrates with R1)")
    if len({r.name for r in reservoirs}) != len(reservoirs):
        raise ScenarioError(f"{where}.reservoirs", "reservoir names must be unique")

    rho_ab = decode_rho_ab(data["rho_ab"], data.get("dims", {}), f"{where}.rho_ab")
    d_a, d_b = rho_ab.layout.dims
    total = h_i.dim * int(np.prod([r.dim for r in reservoirs])) * d_a * d_b
    if total > MAX_TOTAL_DIM:
        raise ScenarioError(where, f"total Hilbert dimension {total} exceeds the limit {MAX_TOTAL_DIM}")

    sr = [("S", h_i.dim)] + [(r.name, r.dim) for r in reservoirs]
    h_sr = free_hamiltonian(h_i, reservoirs)
    u1 = decode_unitary(data["u1"], sr, f"{where}.u1", h_sr)
    u2 = decode_unitary(data["u2"], [("S", h_i.dim), ("A", d_a)], f"{where}.u2")
    basis = decode_basis(data["basis"], d_a, f"{where}.basis")
    feedback = decode_feedback(data["feedback"], sr, d_a, f"{where}.feedback", h_sr)
    try:
        return EngineScenario(h_s_initial=h_i, h_s_final=h_f, system_temperature=temperature,
                              reservoirs=tuple(reservoirs), rho_ab_initial=rho_ab, u1=u1, u2=u2,
                              basis=basis, feedback=tuple(feedback), seed=seed, kB=kB, name=name)
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None


def free_hamiltonian(h_s: HamiltonianTerm, reservoirs) -> np.ndarray:
    """H_S ⊗ I + Σ_m I ⊗ H_Rm on the S, R1..Rn factors."""
    mats = [h_s.matrix] + [r.matrix for r in reservoirs]
    dims = [m.shape[0] for m in mats]
    total = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
    for i, m in enumerate(mats):
        total += kron_all([m if j == i else np.eye(d) for j, d in enumerate(dims)])
    return total


def decode_feedback(data, sr, d_a: int, where: str, hamiltonian=None) -> list[np.ndarray]:
    if isinstance(data, dict) and "per_outcome" in data:
        items = data["per_outcome"]
        if len(items) != d_a:
            raise ScenarioError(f"{where}.per_outcome", f"expected {d_a} unitaries (one per outcome), got {len(items)}")
        return [decode_unitary(u, sr, f"{where}.per_outcome[{k}]", hamiltonian) for k, u in enumerate(items)]
    u = decode_unitary(data, sr, where, hamiltonian)
    return [u] * d_a


# --- scenario file -------------------------------------------------------------

@dataclass
class ScenarioFile:
    mode: str
    name: str
    kB: float
    seed: int
    scenario: EngineScenario | None
    second: EngineScenario | None = None
    sweep: dict = field(default_factory=dict)
    optimize: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _json_path(parts) -> str:
    """Render a jsonschema path as ``a.b[0].c``."""
    out = ""
    for part in parts:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def parse_config(data: Any) -> ScenarioFile:
    """Validate and decode an already-parsed JSON document."""
    validator = jsonschema.Draft202012Validator(load_schema("scenario"))
    error = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if error is not None:
        raise ScenarioError(_json_path(error.absolute_path), error.message)
    mode = data["mode"]
    name = data.get("name", mode)
    kB = float(data.get("kB", 1.0))
    seed = int(data.get("seed", 0))
    scenario = second = None
    if mode != "sweep":
        if "scenario" not in data:
            raise ScenarioError("scenario", f"required for mode {mode!r}")
        scenario = decode_scenario(data["scenario"], kB, seed, name)
    if mode == "two-engine":
        if "second_engine" not in data:
            raise ScenarioError("second_engine", "required for mode 'two-engine'")
        sec = data["second_engine"]
        sr = [("S", scenario.h_s_initial.dim)] + [(r.name, r.dim) for r in scenario.reservoirs]
        changes = {"basis": decode_basis(sec["basis"], scenario.dim_a, "second_engine.basis"), "name": f"{name}/M"}
        if "feedback" in sec:
            changes["feedback"] = tuple(decode_feedback(sec["feedback"], sr, scenario.dim_a, "second_engine.feedback",
                                                        free_hamiltonian(scenario.h_s_initial, scenario.reservoirs)))
        if "h_final" in sec:
            changes["h_s_final"] = _hterm("S", sec["h_final"], "second_engine.h_final")
        try:
            second = scenario.replace(**changes)
        except ValueError as exc:
            raise ScenarioError("second_engine", str(exc)) from None
        if scenario.n_reservoirs > 1:
            raise ScenarioError("scenario.reservoirs", "two-engine mode needs at most one reservoir")
    if mode == "carnot" and scenario.n_reservoirs != 2:
        raise ScenarioError("scenario.reservoirs", f"carnot mode needs exactly 2 reservoirs, got {scenario.n_reservoirs}")
    if mode == "optimize" and scenario.n_reservoirs > 1:
        raise ScenarioError("scenario.reservoirs", "optimize mode needs at most one reservoir")
    if mode == "sweep" and "sweep" not in data:
        raise ScenarioError("sweep", "required for mode 'sweep'")
    return ScenarioFile(mode=mode, name=name, kB=kB, seed=seed, scenario=scenario, second=second,
                        sweep=dict(data.get("sweep", {})), optimize=dict(data.get("optimize", {})),
                        output=dict(data.get("output", {})), raw=data)


def load_scenario_file(path: str | Path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None
    return parse_config(data)


# --- builtins ----------------------------------------------------------------

ZERO2 = [[0, 0], [0, 0]]


def _szilard(seed: int) -> dict:
    return {
        "schema_version": "1", "mode": "single", "name": "szilard", "seed": seed,
        "scenario": {
            "system": {"h_initial": ZERO2, "temperature": 1.0},
            "rho_ab": {"basis_state": [0, 0]},
            "u1": "identity",
            "u2": "cnot S->A",
            "basis": "computational",
            "feedback": {"per_outcome": ["identity", "x on S"]},
        },
    }


def _do_nothing(seed: int) -> dict:
    return {
        "schema_version": "1", "mode": "single", "name": "do-nothing", "seed": seed,
        "scenario": {
            "system": {"h_initial": {"diag": [0.0, 1.0]}, "temperature": 1.0},
            "rho_ab": {"basis_state": [0, 0]},
            "u1": "identity", "u2": "identity", "basis": "computational", "feedback": "identity",
        },
    }


def _carnot2(seed: int) -> dict:
    gap = {"diag": [0.0, 1.0]}
    return {
        "schema_version": "1", "mode": "carnot", "name": "carnot2", "seed": seed,
        "scenario": {
            # H_S = 0 keeps ΔU_S = ΔF_S = 0 for any protocol
            "system": {"h_initial": ZERO2, "temperature": 1.0},
            "reservoirs": [
                {"name": "R1", "hamiltonian": gap, "temperature": 1.0},
                {"name": "R2", "hamiltonian": gap, "temperature": 2.0},
            ],
            "rho_ab": {"basis_state": [0, 0]},
            # energy-conserving draws let heat flow from R2 to R1 instead of heating both
            "u1": {"haar": [seed, 1], "conserve_energy": True},
            "u2": "cnot S->A",
            "basis": "computational",
            "feedback": {"per_outcome": [{"haar": [seed, 2], "conserve_energy": True},
                                         {"haar": [seed, 3], "conserve_energy": True}]},
        },
    }


def _eur_bell(seed: int) -> dict:
    gap = {"diag": [0.0, 1.0]}
    return {
        "schema_version": "1", "mode": "two-engine", "name": "eur-bell", "seed": seed,
        "scenario": {
            "system": {"h_initial": gap, "temperature": 1.0},
            "reservoirs": [{"name": "R1", "hamiltonian": gap, "temperature": 1.0}],
            "rho_ab": "bell",
            "u1": "identity", "u2": "identity", "basis": "computational", "feedback": "identity",
        },
        "second_engine": {"basis": "hadamard"},
    }


BUILTINS = {"szilard": _szilard, "carnot2": _carnot2, "eur-bell": _eur_bell, "do-nothing": _do_nothing}


def builtin_names() -> list[str]:
    return list(BUILTINS)


def builtin_config(name: str, seed: int = 0) -> dict:
    if name not in BUILTINS:
        raise ScenarioError("builtin", f"unknown builtin {name!r}; available: {', '.join(BUILTINS)}")
    return copy.deepcopy(BUILTINS[name](seed))


def builtin(name: str, seed: int = 0) -> ScenarioFile:
    return parse_config(builtin_config(name, seed))


def szilard_with_reservoir(seed: int = 0) -> EngineScenario:
    """The Szilard builtin plus one qubit reservoir (gap 1, T = 1) and identity feedback."""
    config = builtin_config("szilard", seed)
    sc = config["scenario"]
    sc["reservoirs"] = [{"name": "R1", "hamiltonian": {"diag": [0.0, 1.0]}, "temperature": 1.0}]
    sc["feedback"] = "identity"
    config["mode"] = "optimize"
    config["name"] = "szilard+R"
    return parse_config(config).scenario


# --- random scenarios ----------------------------------------------------------

def _rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _draw_dim(rng, cap: int, low: int = 2) -> int:
    return int(rng.integers(min(low, cap), cap + 1)) if cap > 0 else 0


def random_basis(dim: int, rng) -> MeasurementBasis:
    return MeasurementBasis("haar", "A", haar_random_unitary(dim, rng))


def controlled_u2(d_s: int, basis: MeasurementBasis, rng) -> np.ndarray:
    """Σ_k V_k ⊗ Π_k on S⊗A: A (in the measured basis) controls a Haar unitary on S."""
    return sum(np.kron(haar_random_unitary(d_s, rng), basis.projector(k)) for k in range(basis.dim))


def random_scenario_pair(seed: int, index: int = 0, dims=(2, 2, 2, 2),
                         u2: str = "haar") -> tuple[EngineScenario, EngineScenario]:
    """Two random engines sharing everything except measurement basis and feedback.

    ``dims`` are caps on (S, R, A, B); a reservoir cap of 0 means no reservoir.
    Deterministic in (seed, index).
    """
    rng = _rng_for(seed, index)
    cap_s, cap_r, cap_a, cap_b = dims
    d_s, d_r, d_a, d_b = (_draw_dim(rng, cap_s), _draw_dim(rng, cap_r), _draw_dim(rng, cap_a), _draw_dim(rng, cap_b))
    if min(d_s, d_a, d_b) < 1:
        raise ValueError(f"S, A and B caps must be >= 1, got {dims}")
    temperature = float(rng.uniform(0.2, 5.0))
    h_i = HamiltonianTerm("S", random_hermitian(d_s, rng))
    h_f = HamiltonianTerm("S", random_hermitian(d_s, rng))
    reservoirs = (HamiltonianTerm("R1", random_hermitian(d_r, rng), temperature),) if d_r else ()
    d_sr = d_s * (d_r or 1)
    rank = int(rng.integers(1, d_a * d_b + 1))
    rho_ab = random_density_matrix(d_a * d_b, rank, rng, SubsystemLayout([("A", d_a), ("B", d_b)]))
    basis_k, basis_m = random_basis(d_a, rng), random_basis(d_a, rng)
    u1 = haar_random_unitary(d_sr, rng)
    u2_matrix = haar_random_unitary(d_s * d_a, rng) if u2 == "haar" else controlled_u2(d_s, basis_k, rng)
    fb_k = tuple(haar_random_unitary(d_sr, rng) for _ in range(d_a))
    fb_m = tuple(haar_random_unitary(d_sr, rng) for _ in range(d_a))
    k = EngineScenario(h_s_initial=h_i, h_s_final=h_f, system_temperature=temperature, reservoirs=reservoirs,
                       rho_ab_initial=rho_ab, u1=u1, u2=u2_matrix, basis=basis_k, feedback=fb_k,
                       seed=seed, name=f"random[{index}]/K")
    m = k.replace(basis=basis_m, feedback=fb_m, name=f"random[{index}]/M")
    return k, m
