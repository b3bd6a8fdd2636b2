import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phononpump.errors import InvalidArgumentError
from phononpump.hilbert import (DensityMatrix, Operator, PureState, SpaceLayout, commutator,
                                destroy, embed, expectation, fock_state, identity,
                                pauli_lowering, single_layout, thermal_state)

cutoffs = st.integers(min_value=2, max_value=12)


def test_kronecker_index_convention():
    layout = SpaceLayout.of(cavity=3, matter=2, phonon=4)
    psi = fock_state(layout, (2, 1, 3))
    assert np.flatnonzero(psi.amplitudes) == [(2 * 2 + 1) * 4 + 3]
    assert layout.dim == 24
    assert layout.dim_of("phonon") == 4


@pytest.mark.parametrize("subs", [(), (("cavity", 2), ("cavity", 3)), (("foo", 2),),
                                  (("cavity", 0),)])
def test_layout_rejects_bad_subsystems(subs):
    with pytest.raises(InvalidArgumentError):
        SpaceLayout(subs)


def test_unknown_label_lookup():
    with pytest.raises(InvalidArgumentError):
        SpaceLayout.of(cavity=2).index("phonon")


@given(cutoffs)
def test_truncated_commutator(n):
    a = destroy(n)
    comm = commutator(a, a.dag()).dense()
    expected = np.eye(n)
    expected[-1, -1] = 1 - n
    np.testing.assert_allclose(comm, expected, atol=1e-12)


def test_qubit_lowering_is_destroy_two():
    np.testing.assert_array_equal(pauli_lowering().dense(), destroy(2, "matter").dense())


@pytest.mark.parametrize("bad", [1, 2.5, 0])
def test_destroy_rejects_bad_cutoff(bad):
    with pytest.raises(InvalidArgumentError):
        destroy(bad)


@settings(max_examples=25)
@given(cutoffs, cutoffs)
def test_embedded_operators_on_different_sites_commute(na, nb):
    layout = SpaceLayout.of(cavity=na, phonon=nb)
    a = embed(destroy(na, "cavity"), layout, "cavity")
    b = embed(destroy(nb, "phonon"), layout, "phonon")
    assert np.max(np.abs(commutator(a, b.dag()).dense())) == 0.0


def test_embed_dimension_mismatch():
    layout = SpaceLayout.of(cavity=3, phonon=4)
    with pytest.raises(InvalidArgumentError):
        embed(destroy(4, "cavity"), layout, "cavity")


def test_large_operators_become_sparse():
    layout = SpaceLayout.of(cavity=80, phonon=80)
    a = embed(destroy(80, "cavity"), layout, "cavity")
    assert a.is_sparse
    assert identity(layout).is_sparse
    assert a.hermiticity_error() > 0
    assert (a + a.dag()).hermiticity_error() == 0.0


def test_operator_is_immutable_and_checked():
    a = destroy(3)
    with pytest.raises(AttributeError):
        a.matrix = None
    with pytest.raises(ValueError):
        a.matrix[0, 1] = 2.0
    with pytest.raises(InvalidArgumentError):
        Operator(a.layout, a.matrix, hermitian=True)
    with pytest.raises(InvalidArgumentError):
        a @ destroy(3, "phonon")


def test_arithmetic():
    a = destroy(4)
    n = a.dag() @ a
    np.testing.assert_allclose(np.diag((2 * n - n * 0.5).dense()).real, 1.5 * np.arange(4))
    np.testing.assert_allclose((-n).dense(), -n.dense())


def test_pure_state_checks_norm():
    layout = single_layout("cavity", 3)
    with pytest.raises(InvalidArgumentError):
        PureState(layout, [1.0, 1.0, 0.0])
    psi = PureState.normalized(layout, [1.0, 1.0, 0.0])
    assert np.isclose(np.linalg.norm(psi.amplitudes), 1.0)
    rho = psi.to_density()
    assert np.isclose(np.trace(rho.matrix), 1.0)


def test_density_matrix_validation():
    layout = single_layout("phonon", 2)
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(layout, np.diag([0.5, 0.4]))
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(layout, np.diag([1.2, -0.2]))
    with pytest.raises(InvalidArgumentError):
        DensityMatrix(layout, np.array([[0.5, 0.1], [0.0, 0.5]]))


@given(st.floats(min_value=0.0, max_value=3.0))
def test_thermal_state_occupation(n_th):
    rho = thermal_state(200, n_th)
    n = destroy(200, "phonon")
    number = n.dag() @ n
    assert abs(expectation(number, rho).real - n_th) < 1e-9


def test_thermal_state_truncation_renormalizes():
    rho = thermal_state(3, 5.0)
    assert np.isclose(np.trace(rho.matrix).real, 1.0)
    with pytest.raises(InvalidArgumentError):
        thermal_state(3, -1.0)


def test_expectation_pure_matches_density(rng):
    layout = SpaceLayout.of(cavity=4, matter=2)
    amp = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi = PureState.normalized(layout, amp)
    x = embed(destroy(4) + destroy(4).dag(), layout, "cavity")
    assert np.isclose(expectation(x, psi), expectation(x, psi.to_density()))
    with pytest.raises(InvalidArgumentError):
        expectation(destroy(3), psi)


def test_fock_state_bounds():
    layout = SpaceLayout.of(cavity=2)
    with pytest.raises(InvalidArgumentError):
        fock_state(layout, (2,))
    with pytest.raises(InvalidArgumentError):
        fock_state(layout, (0, 0))
