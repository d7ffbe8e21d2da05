import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from demon_engine.entropy import (
    MeasurementBasis,
    clip_nonnegative,
    conditional_entropy,
    discord_decomposition,
    measured_conditional_entropy,
    measurement_branches,
    mutual_information,
    post_measurement_state,
    relative_entropy,
    shannon,
    vn_entropy,
)
from demon_engine.linalg import SubsystemLayout
from demon_engine.states import (
    DensityMatrix,
    basis_state,
    bell_state,
    haar_random_unitary,
    maximally_mixed,
    pure_state,
    random_density_matrix,
)
from oracles import LN2, ENTROPY_TWO_THIRDS, REL_ENTROPY_HALF_VS_TWO_THIRDS, entropy_from_spectrum

AB = SubsystemLayout([("A", 2), ("B", 2)])


def ab_state(matrix):
    return DensityMatrix(np.asarray(matrix, dtype=complex), AB)


def product_state(seed):
    ra = random_density_matrix(2, seed=seed).matrix
    rb = random_density_matrix(2, seed=seed + 1).matrix
    return ab_state(np.kron(ra, rb))


def classical_pair():
    return ab_state(np.diag([0.5, 0, 0, 0.5]))


@pytest.mark.parametrize("rho, expected", [
    (basis_state(1, 3), 0.0),
    (maximally_mixed(3), np.log(3)),
    (DensityMatrix.single(np.diag([2 / 3, 1 / 3]), "X"), ENTROPY_TWO_THIRDS),
])
def test_vn_entropy_values(rho, expected):
    assert vn_entropy(rho) == pytest.approx(expected, abs=1e-14)


def test_vn_entropy_matches_spectrum_oracle(rng):
    for _ in range(10):
        rho = random_density_matrix(5, int(rng.integers(1, 6)), seed=rng)
        assert vn_entropy(rho) == pytest.approx(entropy_from_spectrum(rho.matrix), abs=1e-12)


@pytest.mark.parametrize("p, expected", [
    ([1, 0], 0.0),
    ([0.5, 0.5], LN2),
    ([2 / 3, 1 / 3], ENTROPY_TWO_THIRDS),
])
def test_shannon(p, expected):
    assert shannon(p) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("p", [[0.5, 0.6], [1.1, -0.1]])
def test_shannon_rejects_non_distributions(p):
    with pytest.raises(ValueError):
        shannon(p)


def test_clip_nonnegative():
    assert clip_nonnegative(-1e-12, "x") == 0.0
    assert clip_nonnegative(0.3, "x") == 0.3
    with pytest.raises(ArithmeticError):
        clip_nonnegative(-1e-6, "x")


def test_relative_entropy_values():
    half = maximally_mixed(2)
    thirds = DensityMatrix.single(np.diag([2 / 3, 1 / 3]), "X")
    assert relative_entropy(half, half) == pytest.approx(0.0, abs=1e-14)
    assert relative_entropy(half, thirds) == pytest.approx(REL_ENTROPY_HALF_VS_TWO_THIRDS, abs=1e-14)
    assert relative_entropy(basis_state(0, 2), basis_state(1, 2)) == np.inf


def test_mutual_information_cases():
    assert mutual_information(product_state(3), "A", "B") == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(bell_state(), "A", "B") == pytest.approx(2 * LN2, abs=1e-12)
    rho0 = random_density_matrix(2, seed=11).matrix
    cq = np.kron(np.diag([0.3, 0.7]), rho0)
    assert mutual_information(ab_state(cq), "A", "B") == pytest.approx(0.0, abs=1e-12)


def test_conditional_entropy_cases():
    assert conditional_entropy(bell_state(), "A", "B") == pytest.approx(-LN2, abs=1e-10)
    prod = product_state(5)
    assert conditional_entropy(prod, "A", "B") == pytest.approx(vn_entropy(prod.reduce("A")), abs=1e-12)
    assert conditional_entropy(classical_pair(), "A", "B") == pytest.approx(0.0, abs=1e-12)


def test_partition_validation():
    with pytest.raises(ValueError):
        mutual_information(bell_state(), "A", "A")


@pytest.mark.parametrize("basis", [MeasurementBasis.computational(2), MeasurementBasis.fourier(2)])
def test_measured_conditional_entropy_bell(basis):
    assert measured_conditional_entropy(bell_state(), basis) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("basis", [MeasurementBasis.computational(2), MeasurementBasis.bloch(0.7, 2.1)])
def test_measured_conditional_entropy_uncorrelated(basis):
    rho_b = random_density_matrix(2, seed=2).matrix
    rho = ab_state(np.kron(np.eye(2) / 2, rho_b))
    assert measured_conditional_entropy(rho, basis) == pytest.approx(LN2, abs=1e-12)


def test_measurement_basis_validation():
    with pytest.raises(ValueError, match="orthonormal"):
        MeasurementBasis("bad", "A", np.array([[1, 1], [0, 1]]))
    assert MeasurementBasis.fourier(2).label == "hadamard"
    v = MeasurementBasis.bloch(1.1, 0.4).vectors
    assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-14)


def test_post_measurement_state_matches_projector_sum(rng):
    layout = SubsystemLayout([("S", 2), ("A", 3), ("B", 2)])
    rho = random_density_matrix(12, seed=rng, layout=layout)
    basis = MeasurementBasis("haar", "A", haar_random_unitary(3, rng))
    expected = sum(
        np.kron(np.kron(np.eye(2), p), np.eye(2)) @ rho.matrix @ np.kron(np.kron(np.eye(2), p), np.eye(2))
        for p in basis.projectors
    )
    assert_allclose(post_measurement_state(rho, basis).matrix, expected, atol=1e-13)
    probs, branches, rest = measurement_branches(rho, basis)
    assert rest.names == ("S", "B")
    assert probs.sum() == pytest.approx(1.0)
    assert branches.shape == (3, 4, 4)


def test_discord_bell_values():
    res = discord_decomposition(bell_state())
    assert res.mutual_info == pytest.approx(2 * LN2, abs=1e-6)
    assert res.classical_corr == pytest.approx(LN2, abs=1e-6)
    assert res.discord == pytest.approx(LN2, abs=1e-6)


def test_discord_product_state_zero():
    res = discord_decomposition(product_state(7))
    assert res.mutual_info == pytest.approx(0.0, abs=1e-10)
    assert res.classical_corr == pytest.approx(0.0, abs=1e-10)
    assert res.discord == pytest.approx(0.0, abs=1e-10)


def test_discord_zero_for_cq_state_in_pointer_basis(rng):
    basis = MeasurementBasis("haar", "A", haar_random_unitary(2, rng))
    cq = sum(p * np.kron(basis.projector(k), random_density_matrix(2, seed=rng).matrix)
             for k, p in enumerate([0.35, 0.65]))
    res = discord_decomposition(ab_state(cq), optimize=False, basis_hint=basis)
    assert res.discord == pytest.approx(0.0, abs=1e-12)
    # the optimized value cannot exceed the pointer-basis value
    assert discord_decomposition(ab_state(cq)).discord <= 1e-8


def test_discord_optimization_requires_qubit():
    layout = SubsystemLayout([("A", 3), ("B", 2)])
    with pytest.raises(ValueError, match="qubit"):
        discord_decomposition(random_density_matrix(6, seed=1, layout=layout))


def test_werner_state_discord_is_basis_independent():
    # Werner states are unitarily symmetric, so every qubit basis is optimal
    w = 0.6 * bell_state().matrix + 0.4 * np.eye(4) / 4
    opt = discord_decomposition(ab_state(w))
    fixed = discord_decomposition(ab_state(w), optimize=False)
    assert opt.discord == pytest.approx(fixed.discord, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_entropy_inequalities_random_states(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(4, int(rng.integers(1, 5)), seed=rng, layout=AB)
    s_ab, s_a, s_b = vn_entropy(rho), vn_entropy(rho.reduce("A")), vn_entropy(rho.reduce("B"))
    # subadditivity and Araki-Lieb
    assert s_ab <= s_a + s_b + 1e-10
    assert s_ab >= abs(s_a - s_b) - 1e-10
    assert conditional_entropy(rho, "A", "B") >= -np.log(2) - 1e-10
    basis = MeasurementBasis("haar", "A", haar_random_unitary(2, rng))
    # measuring A cannot lower S(A|B)
    assert measured_conditional_entropy(rho, basis) >= conditional_entropy(rho, "A", "B") - 1e-10
    assert vn_entropy(post_measurement_state(rho, basis)) >= s_ab - 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_discord_bounds_random_states(seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(4, int(rng.integers(1, 5)), seed=rng, layout=AB)
    res = discord_decomposition(rho)
    assert 0 <= res.discord <= res.mutual_info + 1e-12
    assert res.classical_corr <= min(vn_entropy(rho.reduce("A")), vn_entropy(rho.reduce("B"))) + 1e-8
    # the optimized basis beats the computational one
    fixed = discord_decomposition(rho, optimize=False)
    assert res.classical_corr >= fixed.classical_corr - 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_relative_entropy_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a = random_density_matrix(3, seed=rng)
    b = random_density_matrix(3, seed=rng)
    assert relative_entropy(a, b) >= -1e-12


def test_pure_state_helper_normalizes():
    rho = pure_state([1, 1j])
    assert rho.purity() == pytest.approx(1.0)
    assert vn_entropy(rho) < 1e-12
