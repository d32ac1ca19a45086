import math

import numpy as np
import pytest

from rydgrover.hilbert import (
    BlockadeCondition,
    InvalidLabelError,
    RegisterError,
    RegisterState,
    ShapeMismatchError,
    AtomSpec,
    ancilla_atom,
    apply_block_unitary,
    basis_state,
    fidelity_mod_phase,
    flat_index,
    inner,
    label_of,
    marginal_population,
    population_outside,
    three_level_atom,
    two_species_atom,
    uniform_qubit_state,
)
from rydgrover.pulses import rotation_block


def atoms3(k):
    return tuple(three_level_atom() for _ in range(k))


# --- atoms ------------------------------------------------------------------------------


def test_atom_roles():
    a = two_species_atom()
    assert a.num_levels == 4
    assert a.qubit_levels == (0, 1)
    assert a.rydberg_levels == (2, 3)
    assert a.role_of(3) == "ryd_r"
    assert ancilla_atom().level("logical2") == 2


@pytest.mark.parametrize(
    "levels, roles",
    [
        (3, {0: "ground0", 2: "ryd_r"}),  # ground1 missing
        (3, {0: "ground0", 1: "ground0", 2: "ryd_r"}),  # duplicate role
        (2, {0: "ground0", 1: "ground1", 2: "ryd_r"}),  # level out of range
        (1, {0: "ground0"}),
    ],
)
def test_atom_spec_rejects(levels, roles):
    with pytest.raises(RegisterError):
        AtomSpec(levels, roles)


# --- basis states -------------------------------------------------------------------------


def test_basis_state_two_atoms():
    s = basis_state(atoms3(2), (0, 1))
    assert np.flatnonzero(s.amplitudes).tolist() == [1]


def test_basis_state_single_atom():
    s = basis_state(atoms3(1), (2,))
    np.testing.assert_array_equal(s.amplitudes, [0, 0, 1])


def test_basis_state_mixed_radix():
    s = basis_state(atoms3(3), (1, 1, 1))
    assert s.amplitudes.size == 27
    assert np.flatnonzero(s.amplitudes).tolist() == [13]


def test_heterogeneous_strides():
    atoms = (three_level_atom(), two_species_atom(), ancilla_atom())
    label = (2, 3, 1)
    idx = flat_index(atoms, label)
    assert idx == 2 * 16 + 3 * 4 + 1
    assert label_of(atoms, idx) == label


@pytest.mark.parametrize("label", [(0, 3), (0,), (0, 0, 0), (-1, 0)])
def test_basis_state_invalid_label(label):
    with pytest.raises(InvalidLabelError):
        basis_state(atoms3(2), label)


def test_register_state_length_checked():
    with pytest.raises(ShapeMismatchError):
        RegisterState(atoms3(2), np.zeros(8))


# --- uniform state ------------------------------------------------------------------------


def test_uniform_k1():
    np.testing.assert_allclose(uniform_qubit_state(1).amplitudes, [2**-0.5, 2**-0.5, 0])


def test_uniform_k2():
    amps = uniform_qubit_state(2).amplitudes
    ground = [flat_index(atoms3(2), l) for l in [(0, 0), (0, 1), (1, 0), (1, 1)]]
    np.testing.assert_allclose(amps[ground], 0.5)
    assert np.count_nonzero(amps) == 4
    assert amps.size == 9


def test_uniform_k10_normalized():
    assert abs(uniform_qubit_state(10).norm_squared() - 1) < 1e-12


# --- inner products -----------------------------------------------------------------------


def test_inner_examples():
    atoms = atoms3(2)
    e0, e1 = basis_state(atoms, (0, 0)), basis_state(atoms, (0, 1))
    assert inner(e0, e0) == 1
    assert inner(e0, e1) == 0
    assert inner(uniform_qubit_state(2), e1) == pytest.approx(0.5)


def test_inner_structure_mismatch():
    with pytest.raises(ShapeMismatchError):
        inner(uniform_qubit_state(1), uniform_qubit_state(2))


def test_fidelity_mod_phase():
    psi = uniform_qubit_state(2)
    assert fidelity_mod_phase(psi, -psi) == pytest.approx(1)
    assert fidelity_mod_phase(psi, 1j * psi) == pytest.approx(1)
    atoms = atoms3(1)
    assert fidelity_mod_phase(basis_state(atoms, (0,)), basis_state(atoms, (1,))) == 0


# --- block unitaries ----------------------------------------------------------------------


def test_identity_block():
    psi = uniform_qubit_state(2)
    out = apply_block_unitary(psi, 0, np.eye(2), (0, 1))
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_not_block():
    atoms = atoms3(2)
    out = apply_block_unitary(basis_state(atoms, (0, 1)), 0, np.array([[0, 1], [1, 0]]), (0, 1))
    np.testing.assert_array_equal(out.amplitudes, basis_state(atoms, (1, 1)).amplitudes)


@pytest.mark.parametrize("levels", [(0, 1), (0, 2), (1, 2), (2, 0)])
def test_pi_rotation_twice_is_minus_one(levels):
    rng = np.random.default_rng(3)
    amps = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi = RegisterState(atoms3(2), amps / np.linalg.norm(amps))
    r = rotation_block(math.pi, 0.7)
    out = apply_block_unitary(apply_block_unitary(psi, 1, r, levels), 1, r, levels)
    touched = np.zeros(9, dtype=bool)
    for lbl in range(9):
        if label_of(psi.atoms, lbl)[1] in levels:
            touched[lbl] = True
    np.testing.assert_allclose(out.amplitudes[touched], -psi.amplitudes[touched], atol=1e-14)
    np.testing.assert_allclose(out.amplitudes[~touched], psi.amplitudes[~touched], atol=1e-14)


def test_block_conditioned_on_other_atom():
    atoms = atoms3(2)
    cond = BlockadeCondition({0}, {2})
    flip = np.array([[0, 1], [1, 0]])
    blocked = apply_block_unitary(basis_state(atoms, (2, 0)), 1, flip, (0, 2), cond)
    assert blocked.amplitude((2, 0)) == 1
    free = apply_block_unitary(basis_state(atoms, (1, 0)), 1, flip, (0, 2), cond)
    assert free.amplitude((1, 2)) == 1


@pytest.mark.parametrize(
    "kwargs",
    [
        {"block": np.array([[1, 1], [0, 1]]), "levels": (0, 1)},
        {"block": np.eye(3), "levels": (0, 1)},
        {"block": np.eye(2), "levels": (0, 0)},
        {"block": np.eye(2), "levels": (0, 3)},
    ],
)
def test_block_errors(kwargs):
    with pytest.raises(RegisterError):
        apply_block_unitary(uniform_qubit_state(2), 0, **kwargs)


def test_self_blockade_rejected():
    with pytest.raises(RegisterError):
        apply_block_unitary(uniform_qubit_state(2), 0, np.eye(2), (0, 1), BlockadeCondition({0}, {2}))


def test_apply_returns_new_state():
    psi = uniform_qubit_state(1)
    before = psi.amplitudes.copy()
    apply_block_unitary(psi, 0, rotation_block(math.pi, 0), (0, 2))
    np.testing.assert_array_equal(psi.amplitudes, before)


# --- populations --------------------------------------------------------------------------


def test_marginal_population_examples():
    assert marginal_population(basis_state(atoms3(2), (2, 0)), 0, 2) == 1
    u = uniform_qubit_state(2)
    assert marginal_population(u, 0, 2) == 0
    assert marginal_population(u, 1, 2) == 0
    half = RegisterState(atoms3(1), np.array([1, 0, 1]) / math.sqrt(2))
    assert marginal_population(half, 0, 2) == pytest.approx(0.5)


def test_population_outside():
    psi = RegisterState(atoms3(2), np.eye(9)[flat_index(atoms3(2), (0, 2))] * 0.6 + np.eye(9)[0] * 0.8)
    assert population_outside(psi, [(0, 1), (0, 1)]) == pytest.approx(0.36)


def test_blockade_condition_roundtrip():
    c = BlockadeCondition([2, 0], [3])
    assert BlockadeCondition.from_dict(c.to_dict()) == c
    assert hash(c) == hash(BlockadeCondition({0, 2}, {3}))
