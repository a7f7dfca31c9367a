import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambdatele.errors import CapacityError, DomainError, ShapeError, TruncationError
from lambdatele.fockspace import (
    Atom2,
    Atom3,
    CavityMode,
    CompositeState,
    PhysicalParams,
    atom_state,
    coherent_amplitudes,
    coherent_state,
    default_n_max,
    even_odd_state,
    fidelity,
    fock_state,
    insert,
    permute,
    reduced_density,
    split_product,
    tail_mass,
    tensor,
)

from conftest import random_state
from oracles import poisson_tail_above


def test_fock_state_vacuum_and_top():
    mode = CavityMode(4)
    np.testing.assert_array_equal(fock_state(0, mode).amps, [1, 0, 0, 0, 0])
    np.testing.assert_array_equal(fock_state(4, mode).amps, [0, 0, 0, 0, 1])


@pytest.mark.parametrize("n", [5, -1, 1.5])
def test_fock_state_out_of_range(n):
    with pytest.raises(DomainError):
        fock_state(n, CavityMode(4))


def test_cavity_mode_requires_two_levels():
    with pytest.raises(DomainError):
        CavityMode(0)


def test_coherent_zero_is_vacuum():
    s = coherent_state(0, CavityMode(10))
    assert fidelity(s, fock_state(0, CavityMode(10))) == 1.0
    assert s.amps[0] == 1.0


def test_coherent_mean_photon_number():
    s = coherent_state(2.0, CavityMode(32))
    p = np.abs(s.amps) ** 2
    assert abs(np.dot(np.arange(33), p) - 4.0) < 1e-8


def test_coherent_truncation_error_names_required_cutoff():
    # Poisson(16) mass above 8, summed directly
    tail = poisson_tail_above(16.0, 8)
    assert tail > 0.97
    with pytest.raises(TruncationError) as err:
        coherent_state(-4.0, CavityMode(8))
    assert err.value.required_n_max is not None and err.value.required_n_max > 8
    assert poisson_tail_above(16.0, err.value.required_n_max) <= 1e-10
    assert poisson_tail_above(16.0, err.value.required_n_max - 1) > 1e-10
    assert str(err.value.required_n_max) in str(err.value)


def test_coherent_renormalization_diagnostic():
    mode = CavityMode(6, tail_tolerance=1.0)
    s = coherent_state(2.0, mode)
    assert abs(s.norm2() - 1) < 1e-14
    assert abs(s.diagnostics["discarded_mass"] - poisson_tail_above(4.0, 6)) < 1e-12
    assert s.diagnostics["renormalization"] > 1.0


@given(
    re=st.floats(-3, 3), im=st.floats(-3, 3),
)
@settings(max_examples=50, deadline=None)
def test_coherent_recurrence(re, im):
    alpha = complex(re, im)
    c = coherent_amplitudes(alpha, 40)
    for n in range(40):
        expected = c[n] * alpha / math.sqrt(n + 1)
        if abs(expected) > 1e-280:
            assert abs(c[n + 1] - expected) <= 1e-12 * abs(expected)


def test_tensor_basis_product():
    s = tensor(atom_state(Atom3(), "b"), fock_state(0, CavityMode(3)))
    assert s.amplitude("b", 0) == 1.0
    assert s.norm2() == 1.0


def test_tensor_matches_initial_product():
    mode = CavityMode(32)
    s = tensor(atom_state(Atom3(), "b"), coherent_state(2.0, mode))
    coh = coherent_state(2.0, mode).amps
    t = s.tensor()
    np.testing.assert_allclose(t[1], coh, atol=1e-15)
    assert np.all(t[0] == 0) and np.all(t[2] == 0)
    # and the same ket written as (|+> + |->)/2 with the even/odd states
    half = 0.5 * (even_odd_state(2.0, 1, mode).amps + even_odd_state(2.0, -1, mode).amps)
    np.testing.assert_allclose(t[1], half, atol=1e-15)


def test_tensor_norm_of_normalized(rng):
    a = random_state((Atom3(), Atom2()), rng)
    b = random_state((CavityMode(5),), rng)
    assert abs(tensor(a, b).norm2() - 1.0) < 1e-12


def test_tensor_capacity():
    big = CompositeState((CavityMode(4095),), np.ones(4096))
    with pytest.raises(CapacityError):
        tensor(big, big, big)


def test_fidelity_basic(rng):
    psi = random_state((Atom3(), CavityMode(6)), rng)
    assert abs(fidelity(psi, psi) - 1) < 1e-12
    phased = psi.replace(amps=psi.amps * np.exp(0.73j))
    assert abs(fidelity(psi, phased) - 1) < 1e-12


def test_fidelity_even_odd_orthogonal():
    mode = CavityMode(30)
    plus = even_odd_state(1.3, 1, mode).normalized()
    minus = even_odd_state(1.3, -1, mode).normalized()
    assert fidelity(plus, minus) < 1e-30


def test_fidelity_shape_mismatch():
    with pytest.raises(ShapeError):
        fidelity(atom_state(Atom3(), "b"), atom_state(Atom2(), "f"))


def test_tail_mass_examples():
    assert tail_mass(fock_state(0, CavityMode(10)), 0) == 0.0
    assert tail_mass(coherent_state(2.0, CavityMode(32)), 0) < 1e-12
    loose = CavityMode(6, tail_tolerance=1.0)
    assert tail_mass(coherent_state(2.0, loose), 0) > 0.05


def test_tail_mass_rejects_atom():
    s = tensor(atom_state(Atom3(), "b"), fock_state(0, CavityMode(4)))
    with pytest.raises(ShapeError):
        tail_mass(s, 0)


def test_product_round_trip(rng):
    a = random_state((Atom3(),), rng)
    b = random_state((Atom2(),), rng)
    c = random_state((CavityMode(7),), rng)
    joint = tensor(a, b, c)
    for keep, factor in (([0], a), ([1], b), ([2], c)):
        left, _, w = split_product(joint, keep)
        assert abs(fidelity(left, factor) - 1) < 1e-12
        assert abs(w[0] - 1) < 1e-12


def test_permute_and_insert(rng):
    a = random_state((Atom3("x"),), rng)
    c = random_state((CavityMode(4),), rng)
    b = random_state((Atom2("p"),), rng)
    s = insert(tensor(a, c), 1, b)
    assert [type(x) for x in s.subsystems] == [Atom3, Atom2, CavityMode]
    assert abs(fidelity(s, tensor(a, b, c)) - 1) < 1e-12
    back = permute(s, [0, 2, 1])
    assert abs(fidelity(back, tensor(a, c, b)) - 1) < 1e-12


def test_reduced_density_trace(rng):
    s = random_state((Atom3(), Atom3(), CavityMode(4)), rng)
    rho = reduced_density(s, [0, 1])
    assert abs(np.trace(rho) - 1) < 1e-12
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)


def test_state_rejects_bad_amplitudes():
    with pytest.raises(ShapeError):
        CompositeState((Atom3(),), [1, 0])
    with pytest.raises(DomainError):
        CompositeState((Atom2(),), [np.nan, 0])


def test_state_is_immutable():
    s = atom_state(Atom3(), "b")
    with pytest.raises(ValueError):
        s.amps[0] = 1.0


def test_default_n_max_rule():
    assert default_n_max(2.0) == math.ceil(16 + 24 + 10)
    assert default_n_max(0) == 10
    assert default_n_max(0.5j) == math.ceil(1 + 6 + 10)


def test_physical_params_phase():
    p = PhysicalParams(g=2.0, tau=0.5, delta=4.0)
    assert p.phi == 2 * 4.0 * 0.5 / 4.0
    q = PhysicalParams.for_phase(math.pi, g=1e5, delta=1e7)
    assert abs(q.phi - math.pi) < 1e-12
    with pytest.raises(DomainError):
        PhysicalParams(g=1.0, tau=1.0, delta=0.0)


def test_physical_params_level_consistency():
    PhysicalParams(g=1, tau=1, delta=5, omega_a=100, omega_b=10, omega_c=10, omega=85)
    with pytest.raises(DomainError):
        PhysicalParams(g=1, tau=1, delta=5, omega_a=100, omega_b=10, omega_c=12, omega=85)
