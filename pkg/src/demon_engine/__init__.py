"""Quantum measurement-feedback engines with a quantum memory: stage-by-stage
simulation, thermodynamic work bounds, discord and entropic-uncertainty checks."""

from .engine import (
    BoundReport,
    Check,
    EngineScenario,
    Energetics,
    StageTrace,
    bound_evaluation,
    discord_form,
    evaluate,
    run_engine,
)
from .entropy import (
    MeasurementBasis,
    conditional_entropy,
    discord_decomposition,
    mutual_information,
    vn_entropy,
)
from .linalg import SubsystemLayout, herm_eig, herm_func, partial_trace
from .optimize import optimize_feedback, realized_work
from .scenarios import ScenarioError, builtin, builtin_names, load_scenario_file, parse_config
from .states import DensityMatrix, HamiltonianTerm, bell_state, gibbs_state
from .uncertainty import eur_check, two_engine_bounds

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "Check", "DensityMatrix", "EngineScenario", "Energetics", "HamiltonianTerm",
    "MeasurementBasis", "ScenarioError", "StageTrace", "SubsystemLayout", "bell_state", "bound_evaluation",
    "builtin", "builtin_names", "conditional_entropy", "discord_decomposition", "discord_form", "eur_check",
    "evaluate", "gibbs_state", "herm_eig", "herm_func", "load_scenario_file", "mutual_information",
    "optimize_feedback", "parse_config", "partial_trace", "realized_work", "run_engine", "two_engine_bounds",
    "vn_entropy",
]
