import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from demon_engine.engine import evaluate
from demon_engine.linalg import is_unitary
from demon_engine.optimize import (
    FeedbackObjective,
    ParameterizedUnitary,
    hermitian_basis,
    optimize_feedback,
    realized_work,
    restart_start,
)
from demon_engine.scenarios import builtin, parse_config, szilard_with_reservoir
from demon_engine.simplex import nelder_mead
from oracles import EXCITED_POP_BETA1


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_nelder_mead_quadratic():
    res = nelder_mead(lambda x: float(np.sum((x - [1.0, -2.0, 0.5]) ** 2)), np.zeros(3), budget=5000,
                      xtol=1e-10, ftol=1e-14)
    assert res.converged
    assert_allclose(res.x, [1.0, -2.0, 0.5], atol=1e-5)


def test_nelder_mead_rosenbrock():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], step=0.5, budget=10000, xtol=1e-10, ftol=1e-16)
    assert_allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_nelder_mead_budget_and_history():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], budget=37)
    assert res.evaluations <= 37
    assert len(res.history) == res.evaluations
    assert all(a >= b for a, b in zip(res.history, res.history[1:]))
    assert res.fun == res.history[-1]
    with pytest.raises(ValueError):
        nelder_mead(rosenbrock, [0, 0], budget=0)


def test_nelder_mead_deterministic():
    a = nelder_mead(rosenbrock, [0.3, -0.2], budget=300)
    b = nelder_mead(rosenbrock, [0.3, -0.2], budget=300)
    assert_array_equal(a.x, b.x)
    assert a.history == b.history


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_hermitian_basis_orthonormal(dim):
    basis = hermitian_basis(dim)
    assert basis.shape == (dim ** 2, dim, dim)
    gram = np.einsum("iab,jba->ij", basis, basis)
    assert_allclose(gram, np.eye(dim ** 2), atol=1e-14)
    for b in basis:
        assert_allclose(b, b.conj().T)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4))
def test_parameterized_unitary_is_unitary(seed, dim):
    theta = np.random.default_rng(seed).uniform(-10, 10, dim ** 2)
    assert is_unitary(ParameterizedUnitary(dim, theta).matrix, 1e-9)


def test_identity_parameters():
    assert_allclose(ParameterizedUnitary.identity(3).matrix, np.eye(3), atol=1e-15)
    with pytest.raises(ValueError):
        ParameterizedUnitary(2, np.zeros(3))


def test_fast_objective_matches_full_engine():
    sc = szilard_with_reservoir()
    obj = FeedbackObjective(sc)
    theta = np.random.default_rng(3).uniform(-np.pi, np.pi, obj.size)
    fast = obj.work(theta)
    full = evaluate(obj.realize(theta))[1].energetics.W_ext
    assert fast == pytest.approx(full, abs=1e-12)


def test_restart_starts():
    obj = FeedbackObjective(szilard_with_reservoir())
    assert_array_equal(restart_start(obj, 0, 5), np.zeros(obj.size))
    assert_array_equal(restart_start(obj, 2, 5), restart_start(obj, 2, 5))
    assert not np.array_equal(restart_start(obj, 1, 5), restart_start(obj, 2, 5))


def test_nothing_to_extract_without_energy():
    config = flat_scenario_config()
    res = optimize_feedback(parse_config(config).scenario, budget=200, restarts=2)
    assert res.achieved_work == pytest.approx(0.0, abs=1e-12)
    assert res.bound == pytest.approx(0.0, abs=1e-12)
    assert res.gap == pytest.approx(0.0, abs=1e-12)


def flat_scenario_config():
    return {
        "schema_version": "1", "mode": "optimize",
        "scenario": {
            "system": {"h_initial": [[0, 0], [0, 0]], "temperature": 1.0},
            "rho_ab": {"basis_state": [0, 0]},
            "u1": "identity", "u2": "identity", "basis": "computational", "feedback": "identity",
        },
    }


@pytest.fixture(scope="module")
def short_run():
    return optimize_feedback(szilard_with_reservoir(), budget=400, restarts=3, seed=11)


def test_short_optimization_properties(short_run):
    res = short_run
    assert res.bound_violations == 0
    assert res.achieved_work <= res.bound + 1e-8
    assert res.gap == pytest.approx(res.bound - res.achieved_work)
    assert res.baseline_work == pytest.approx(0.0, abs=1e-14)
    assert res.achieved_work > res.baseline_work
    assert all(a <= b for a, b in zip(res.history, res.history[1:]))
    assert res.evaluations == sum(r.evaluations for r in res.restarts)
    assert all(r.evaluations <= 400 for r in res.restarts)
    assert res.achieved_work <= EXCITED_POP_BETA1 + 1e-9


def test_short_optimization_reproducible(short_run):
    again = optimize_feedback(szilard_with_reservoir(), budget=400, restarts=3, seed=11, jobs=3)
    assert again.achieved_work == short_run.achieved_work
    for a, b in zip(again.best_parameters, short_run.best_parameters):
        assert_array_equal(a, b)


def test_realized_work_matches(short_run):
    assert realized_work(szilard_with_reservoir(), short_run) == pytest.approx(short_run.achieved_work, abs=1e-12)


def test_optimize_u2_option():
    res = optimize_feedback(szilard_with_reservoir(), budget=150, restarts=1, optimize_u2=True)
    assert res.u2_parameters is not None and res.u2_parameters.size == 16
    assert res.bound_violations == 0
    assert realized_work(szilard_with_reservoir(), res) == pytest.approx(res.achieved_work, abs=1e-12)


def test_rejects_multi_reservoir():
    with pytest.raises(ValueError, match="single-reservoir"):
        FeedbackObjective(builtin("carnot2").scenario)
