import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import random_hermitian, random_unitary, taylor_expm
from qheat.errors import NonHermitianInput, NonUnitaryBasis
from qheat.linalg import eig_hermitian, overlap_stochastic, propagator, unitarity_defect
from qheat.model import spin1_operators


def test_pauli_x_spectrum():
    es = eig_hermitian([[0, 1], [1, 0]])
    np.testing.assert_allclose(es.values, [-1, 1], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_identity(n):
    es = eig_hermitian(np.eye(n))
    np.testing.assert_allclose(es.values, np.ones(n), atol=1e-12)
    np.testing.assert_allclose(es.reconstruct(), np.eye(n), atol=1e-10)


def test_spin1_tilted_field_spectrum():
    sz, sx = spin1_operators()
    es = eig_hermitian(sz + 0.5 * sx)
    # characteristic polynomial of n.S for spin 1 is lambda^3 - |n|^2 lambda
    expected = np.sort(np.roots([1.0, 0.0, -1.25, 0.0]).real)
    np.testing.assert_allclose(es.values, expected, atol=1e-10)
    np.testing.assert_allclose(es.values, [-np.sqrt(5) / 2, 0, np.sqrt(5) / 2], atol=1e-10)


def test_non_hermitian_rejected():
    with pytest.raises(NonHermitianInput, match="asymmetry"):
        eig_hermitian([[0, 1], [0, 0]])
    with pytest.raises(NonHermitianInput):
        eig_hermitian([[1.0]])


def test_eigensystem_invariants(rng):
    for n in range(2, 9):
        m = random_hermitian(rng, n)
        es = eig_hermitian(m)
        assert np.all(np.diff(es.values) >= 0)
        assert unitarity_defect(es.vectors) < 1e-10
        assert np.max(np.abs(es.reconstruct() - m)) < 1e-10
        assert abs(np.trace(m).real - es.values.sum()) < 1e-10


def test_propagator_at_zero_is_identity(rng):
    es = eig_hermitian(random_hermitian(rng, 3))
    np.testing.assert_allclose(propagator(es, 0.0), np.eye(3), atol=1e-14)


def test_propagator_phases():
    es = eig_hermitian(np.diag([-1.0, 1.0]))
    np.testing.assert_allclose(propagator(es, np.pi), -np.eye(2), atol=1e-12)


def test_propagator_against_taylor_series():
    sz, sx = spin1_operators()
    h = sz + 0.5 * sx
    u = propagator(eig_hermitian(h), 1.0)
    assert unitarity_defect(u) < 1e-10
    np.testing.assert_allclose(u, taylor_expm(-1j * h), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_propagator_group_property(t1, t2, seed):
    rng = np.random.default_rng(seed)
    es = eig_hermitian(random_hermitian(rng, 3))
    lhs = propagator(es, t1 + t2)
    rhs = propagator(es, t1) @ propagator(es, t2)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_overlap_of_equal_bases_is_identity(rng):
    u = random_unitary(rng, 4)
    np.testing.assert_allclose(overlap_stochastic(u, u), np.eye(4), atol=1e-12)


def test_mutually_unbiased_bases():
    hadamard = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    np.testing.assert_allclose(overlap_stochastic(np.eye(2), hadamard), np.full((2, 2), 0.5), atol=1e-15)


def test_overlap_is_doubly_stochastic(rng):
    for _ in range(100):
        t = overlap_stochastic(np.eye(3), random_unitary(rng, 3))
        assert np.max(np.abs(t.sum(axis=0) - 1)) < 1e-12
        assert np.max(np.abs(t.sum(axis=1) - 1)) < 1e-12


def test_non_unitary_basis_rejected():
    with pytest.raises(NonUnitaryBasis):
        overlap_stochastic(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))
