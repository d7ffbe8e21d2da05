import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from demon_engine.linalg import (
    HADAMARD,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    SubsystemLayout,
    embed,
    expm_hermitian,
    herm_eig,
    herm_func,
    is_hermitian,
    is_psd,
    is_unitary,
    kron,
    kron_all,
    partial_trace,
)
from oracles import expm_taylor, partial_trace_bruteforce, random_hermitian, random_state


def test_layout_basics():
    layout = SubsystemLayout([("S", 2), ("R1", 3), ("A", 2)])
    assert layout.names == ("S", "R1", "A")
    assert layout.dim == 12
    assert layout.dim_of("R1") == 3
    assert layout.sub(["A", "S"]).names == ("S", "A")
    with pytest.raises(KeyError):
        layout.index("B")


@pytest.mark.parametrize("factors", [[("S", 2), ("S", 2)], [("S", 0)]])
def test_layout_rejects_bad_factors(factors):
    with pytest.raises(ValueError):
        SubsystemLayout(factors)


@pytest.mark.parametrize("a, b, expected", [
    (np.eye(2), np.eye(2), np.eye(4)),
    (np.diag([1, 2]), np.diag([3, 4]), np.diag([3, 4, 6, 8])),
    (np.array([[1.0]]), PAULI_Y, PAULI_Y),
])
def test_kron(a, b, expected):
    assert_allclose(kron(a, b), expected)


def test_kron_all_matches_nested():
    assert_allclose(kron_all([PAULI_X, PAULI_Z, HADAMARD]), np.kron(np.kron(PAULI_X, PAULI_Z), HADAMARD))


def test_partial_trace_product_state(rng):
    ra, rb = random_state(rng, 2), random_state(rng, 3)
    layout = SubsystemLayout([("A", 2), ("B", 3)])
    assert_allclose(partial_trace(np.kron(ra, rb), layout, ["A"]), ra, atol=1e-14)
    assert_allclose(partial_trace(np.kron(ra, rb), layout, ["B"]), rb, atol=1e-14)


def test_partial_trace_bell_marginal():
    psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    layout = SubsystemLayout([("A", 2), ("B", 2)])
    assert_allclose(partial_trace(np.outer(psi, psi), layout, ["A"]), np.eye(2) / 2)


def test_partial_trace_sequential_equals_joint(rng):
    rho = random_state(rng, 12)
    layout = SubsystemLayout([("A", 2), ("B", 2), ("C", 3)])
    ab = partial_trace(rho, layout, ["A", "B"])
    a = partial_trace(ab, layout.sub(["A", "B"]), ["A"])
    assert_allclose(a, partial_trace(rho, layout, ["A"]), atol=1e-12)


@pytest.mark.parametrize("keep", [["A"], ["B"], ["C"], ["A", "C"], ["B", "C"], ["A", "B"]])
def test_partial_trace_matches_bruteforce(rng, keep):
    dims = (2, 3, 2)
    layout = SubsystemLayout(zip("ABC", dims))
    rho = random_state(rng, 12)
    expected = partial_trace_bruteforce(rho, dims, ["ABC".index(k) for k in keep])
    assert_allclose(partial_trace(rho, layout, keep), expected, atol=1e-12)


def test_partial_trace_validation():
    layout = SubsystemLayout([("A", 2), ("B", 2)])
    with pytest.raises(ValueError):
        partial_trace(np.eye(3), layout, ["A"])
    with pytest.raises(KeyError):
        partial_trace(np.eye(4), layout, ["Z"])
    with pytest.raises(ValueError):
        partial_trace(np.eye(4), layout, [])


@pytest.mark.parametrize("h, expected", [
    (np.diag([3.0, 1.0, 2.0]), [1, 2, 3]),
    (PAULI_X, [-1, 1]),
])
def test_herm_eig_known_spectra(h, expected):
    evals, evecs = herm_eig(h)
    assert_allclose(evals, expected, atol=1e-14)
    assert is_unitary(evecs)


def test_herm_eig_reconstruction(rng):
    h = random_hermitian(rng, 6)
    evals, evecs = herm_eig(h)
    assert np.max(np.abs(evecs @ np.diag(evals) @ evecs.conj().T - h)) < 1e-10


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ValueError, match="not Hermitian"):
        herm_eig(np.array([[0, 1], [0, 0]]))


def test_herm_func_examples():
    assert_allclose(herm_func(np.diag([1.0, 2.0]), lambda x: x), np.diag([1, 2]))
    assert_allclose(herm_func(np.diag([0.0, np.log(2)]), lambda x: np.exp(-x)), np.diag([1, 0.5]), atol=1e-15)


def test_exp_i_h_is_unitary(rng):
    u = expm_hermitian(random_hermitian(rng, 5), 1j)
    assert np.max(np.abs(u.conj().T @ u - np.eye(5))) < 1e-10


def test_herm_func_exp_matches_taylor_oracle(rng):
    for _ in range(20):
        h = random_hermitian(rng, 4)
        assert_allclose(herm_func(h, np.exp), expm_taylor(h), atol=1e-9, rtol=1e-9)


def test_predicates():
    assert is_unitary(np.eye(3))
    assert not is_psd(np.diag([1, -0.5]))
    assert is_hermitian(PAULI_Y)
    assert not is_hermitian(np.array([[0, 1j], [1j, 0]]))
    assert not is_unitary(np.ones((2, 3)))


def test_embed_orders_factors():
    layout = SubsystemLayout([("S", 2), ("A", 2), ("B", 2)])
    # operator written as (B, S) must land on the right legs
    op = np.kron(PAULI_X, PAULI_Z)
    expected = np.kron(np.kron(PAULI_Z, np.eye(2)), PAULI_X)
    assert_allclose(embed(op, layout, ["B", "S"]), expected)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(2, 2), (2, 3), (3, 2, 2)]))
def test_partial_trace_preserves_trace_and_positivity(seed, dims):
    rng = np.random.default_rng(seed)
    names = "XYZ"[:len(dims)]
    layout = SubsystemLayout(zip(names, dims))
    rho = random_state(rng, layout.dim, rank=int(rng.integers(1, layout.dim + 1)))
    for keep in names:
        red = partial_trace(rho, layout, [keep])
        assert abs(np.trace(red) - 1) < 1e-12
        assert is_psd(red)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_herm_func_composes_like_exp(seed):
    h = random_hermitian(np.random.default_rng(seed), 3)
    assert_allclose(expm_hermitian(h, 0.5) @ expm_hermitian(h, 0.5), expm_hermitian(h), atol=1e-9, rtol=1e-9)
