"""Dense mixed-radix state vectors for registers of multi-level atoms.

Atom 0 is the most significant digit of the flat index, so a register of
atoms with dimensions ``(d0, d1, ..., d_{k-1})`` stores the amplitude of
label ``(l0, ..., l_{k-1})`` at ``l0*d1*...*d_{k-1} + ... + l_{k-1}``, the
same ordering as ``numpy.ravel_multi_index`` in C order.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

UNITARY_ATOL = 1e-12

ROLES = ("ground0", "ground1", "ryd_s", "ryd_r", "logical2")
RYDBERG_ROLES = ("ryd_s", "ryd_r")


class RegisterError(ValueError):
    """Raised for malformed registers, labels or operators."""


class InvalidLabelError(RegisterError):
    pass


class ShapeMismatchError(RegisterError):
    pass


@dataclass(frozen=True)
class AtomSpec:
    """Level structure of one atom.

    Args:
        num_levels: Number of internal levels kept in the simulation.
        roles: Mapping role tag -> level index. ``ground0`` and
            ``ground1`` are mandatory.
    """

    num_levels: int
    roles: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_levels < 2:
            raise RegisterError(f"an atom needs at least 2 levels, got {self.num_levels}")
        roles = dict(self.roles)
        for role, level in roles.items():
            if role not in ROLES:
                raise RegisterError(f"unknown level role {role!r}")
            if not 0 <= level < self.num_levels:
                raise RegisterError(f"role {role!r} points at level {level} outside 0..{self.num_levels - 1}")
        if "ground0" not in roles or "ground1" not in roles:
            raise RegisterError("roles ground0 and ground1 are required")
        if len(set(roles.values())) != len(roles):
            raise RegisterError("two roles share one level")
        # frozen dataclass: store an immutable, hashable copy
        object.__setattr__(self, "roles", _FrozenRoles(roles))

    def level(self, role: str) -> int:
        try:
            return self.roles[role]
        except KeyError:
            raise RegisterError(f"atom has no {role!r} level") from None

    def has(self, role: str) -> bool:
        return role in self.roles

    @property
    def rydberg_levels(self) -> tuple[int, ...]:
        return tuple(self.roles[r] for r in RYDBERG_ROLES if r in self.roles)

    @property
    def qubit_levels(self) -> tuple[int, int]:
        return self.roles["ground0"], self.roles["ground1"]

    def role_of(self, level: int) -> str | None:
        for role, idx in self.roles.items():
            if idx == level:
                return role
        return None


class _FrozenRoles(dict):
    def __hash__(self):
        return hash(tuple(sorted(self.items())))

    def _readonly(self, *args, **kwargs):
        raise TypeError("AtomSpec roles are read-only")

    __setitem__ = __delitem__ = update = pop = popitem = clear = setdefault = _readonly


def three_level_atom() -> AtomSpec:
    """Qubit atom with one Rydberg level: |0>, |1>, |r>."""
    return AtomSpec(3, {"ground0": 0, "ground1": 1, "ryd_r": 2})


def two_species_atom() -> AtomSpec:
    """Register atom with two Rydberg levels: |0>, |1>, |s>, |r>."""
    return AtomSpec(4, {"ground0": 0, "ground1": 1, "ryd_s": 2, "ryd_r": 3})


def s_level_atom() -> AtomSpec:
    """Sub-register qubit atom: |0>, |1>, |s>."""
    return AtomSpec(3, {"ground0": 0, "ground1": 1, "ryd_s": 2})


def ancilla_atom() -> AtomSpec:
    """Sub-register ancilla: |0>, |1>, |2>, |r>."""
    return AtomSpec(4, {"ground0": 0, "ground1": 1, "logical2": 2, "ryd_r": 3})


@dataclass
class RegisterState:
    """Complex amplitude vector over the tensor product of atom level spaces."""

    atoms: tuple[AtomSpec, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        self.atoms = tuple(self.atoms)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.ndim != 1 or self.amplitudes.size != dimension(self.atoms):
            raise ShapeMismatchError(
                f"amplitude vector of shape {self.amplitudes.shape} does not match "
                f"register dimension {dimension(self.atoms)}"
            )

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.num_levels for a in self.atoms)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per atom (a view)."""
        return self.amplitudes.reshape(self.dims)

    def copy(self) -> RegisterState:
        return RegisterState(self.atoms, self.amplitudes.copy())

    def with_amplitudes(self, amplitudes: np.ndarray) -> RegisterState:
        return RegisterState(self.atoms, amplitudes)

    def amplitude(self, label: Sequence[int]) -> complex:
        return complex(self.amplitudes[flat_index(self.atoms, label)])

    def __neg__(self) -> RegisterState:
        return RegisterState(self.atoms, -self.amplitudes)

    def __mul__(self, scalar: complex) -> RegisterState:
        return RegisterState(self.atoms, self.amplitudes * scalar)

    __rmul__ = __mul__


def dimension(atoms: Sequence[AtomSpec]) -> int:
    return int(np.prod([a.num_levels for a in atoms], dtype=np.int64)) if atoms else 1


def strides(atoms: Sequence[AtomSpec]) -> tuple[int, ...]:
    """Flat-index stride of each atom's digit."""
    out = []
    s = 1
    for a in reversed(atoms):
        out.append(s)
        s *= a.num_levels
    return tuple(reversed(out))


def flat_index(atoms: Sequence[AtomSpec], label: Sequence[int]) -> int:
    label = tuple(int(x) for x in label)
    if len(label) != len(atoms):
        raise InvalidLabelError(f"label has {len(label)} digits for {len(atoms)} atoms")
    for i, (digit, atom) in enumerate(zip(label, atoms)):
        if not 0 <= digit < atom.num_levels:
            raise InvalidLabelError(f"digit {digit} of atom {i} outside 0..{atom.num_levels - 1}")
    return sum(d * s for d, s in zip(label, strides(atoms)))


def label_of(atoms: Sequence[AtomSpec], index: int) -> tuple[int, ...]:
    return tuple(int(x) for x in np.unravel_index(index, [a.num_levels for a in atoms]))


def basis_state(atoms: Sequence[AtomSpec], label: Sequence[int]) -> RegisterState:
    atoms = tuple(atoms)
    amps = np.zeros(dimension(atoms), dtype=complex)
    amps[flat_index(atoms, label)] = 1.0
    return RegisterState(atoms, amps)


def uniform_qubit_state(k: int, atoms: Sequence[AtomSpec] | None = None) -> RegisterState:
    """Product of (|0> + |1>)/sqrt(2) on every atom.

    Defaults to ``k`` three-level atoms.
    """
    if k < 1:
        raise RegisterError("k must be >= 1")
    atoms = tuple(atoms) if atoms is not None else tuple(three_level_atom() for _ in range(k))
    if len(atoms) != k:
        raise RegisterError(f"expected {k} atoms, got {len(atoms)}")
    vec = np.full(2**k, 2.0 ** (-k / 2), dtype=complex)
    return embed_qubit_vector(atoms, range(k), vec)


def qubit_indices(atoms: Sequence[AtomSpec], qubit_atoms: Iterable[int], rest: Mapping[int, int] | None = None) -> np.ndarray:
    """Flat indices of the 2^m qubit labels of ``qubit_atoms``.

    Atoms not in ``qubit_atoms`` sit at the level given in ``rest``
    (default: their ground0 level). Output is ordered with the first listed
    qubit atom as the most significant bit.
    """
    atoms = tuple(atoms)
    qubit_atoms = list(qubit_atoms)
    rest = dict(rest or {})
    base = [rest.get(i, a.level("ground0")) for i, a in enumerate(atoms)]
    st = strides(atoms)
    m = len(qubit_atoms)
    bits = (np.arange(2**m)[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1
    idx = np.zeros(2**m, dtype=np.int64)
    for i, a in enumerate(atoms):
        if i in qubit_atoms:
            col = bits[:, qubit_atoms.index(i)]
            g0, g1 = a.qubit_levels
            idx += np.where(col == 1, g1, g0) * st[i]
        else:
            idx += base[i] * st[i]
    return idx


def embed_qubit_vector(
    atoms: Sequence[AtomSpec],
    qubit_atoms: Iterable[int],
    vec: np.ndarray,
    rest: Mapping[int, int] | None = None,
) -> RegisterState:
    atoms = tuple(atoms)
    idx = qubit_indices(atoms, qubit_atoms, rest)
    vec = np.asarray(vec, dtype=complex)
    if vec.shape != idx.shape:
        raise ShapeMismatchError(f"qubit vector has shape {vec.shape}, expected {idx.shape}")
    amps = np.zeros(dimension(atoms), dtype=complex)
    amps[idx] = vec
    return RegisterState(atoms, amps)


def extract_qubit_vector(state: RegisterState, qubit_atoms: Iterable[int], rest: Mapping[int, int] | None = None) -> np.ndarray:
    return state.amplitudes[qubit_indices(state.atoms, qubit_atoms, rest)].copy()


def _check_same_structure(a: RegisterState, b: RegisterState) -> None:
    if a.dims != b.dims:
        raise ShapeMismatchError(f"register dims differ: {a.dims} vs {b.dims}")


def inner(a: RegisterState, b: RegisterState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _check_same_structure(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity_mod_phase(a: RegisterState, b: RegisterState) -> float:
    return abs(inner(a, b)) ** 2


def marginal_population(state: RegisterState, atom: int, level: int) -> float:
    if not 0 <= atom < state.num_atoms:
        raise RegisterError(f"atom {atom} out of range")
    if not 0 <= level < state.atoms[atom].num_levels:
        raise RegisterError(f"level {level} out of range for atom {atom}")
    probs = np.abs(state.tensor()) ** 2
    return float(np.take(probs, level, axis=atom).sum())


def population_outside(state: RegisterState, allowed: Sequence[Sequence[int]]) -> float:
    """Total population on labels where some atom ``i`` sits outside ``allowed[i]``."""
    probs = np.abs(state.tensor()) ** 2
    mask = np.ones(state.dims, dtype=bool)
    for i, (atom, levels) in enumerate(zip(state.atoms, allowed)):
        ind = np.isin(np.arange(atom.num_levels), list(levels))
        shape = [1] * state.num_atoms
        shape[i] = atom.num_levels
        mask &= ind.reshape(shape)
    return float(probs[~mask].sum())


@dataclass(frozen=True)
class BlockadeCondition:
    """Ideal blockade: the pulse is skipped on any amplitude group where one of
    ``blocking_atoms`` occupies one of ``blocking_levels``."""

    blocking_atoms: frozenset[int]
    blocking_levels: frozenset[int]

    def __init__(self, blocking_atoms: Iterable[int], blocking_levels: Iterable[int]):
        object.__setattr__(self, "blocking_atoms", frozenset(int(a) for a in blocking_atoms))
        object.__setattr__(self, "blocking_levels", frozenset(int(l) for l in blocking_levels))

    def to_dict(self) -> dict:
        return {"blocking_atoms": sorted(self.blocking_atoms), "blocking_levels": sorted(self.blocking_levels)}

    @classmethod
    def from_dict(cls, d: Mapping) -> BlockadeCondition:
        return cls(d["blocking_atoms"], d["blocking_levels"])


@functools.lru_cache(maxsize=512)
def _allowed_mask(dims: tuple[int, ...], atom: int, condition: BlockadeCondition) -> np.ndarray:
    # mask over the register with the target axis removed
    rest = [d for i, d in enumerate(dims) if i != atom]
    mask = np.ones(rest, dtype=bool)
    for b in condition.blocking_atoms:
        axis = b if b < atom else b - 1
        ok = np.ones(dims[b], dtype=bool)
        for lvl in condition.blocking_levels:
            if lvl < dims[b]:
                ok[lvl] = False
        shape = [1] * len(rest)
        shape[axis] = dims[b]
        mask = mask & ok.reshape(shape)
    mask.setflags(write=False)
    return mask


def check_unitary(block: np.ndarray, atol: float = UNITARY_ATOL) -> None:
    block = np.asarray(block)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise RegisterError(f"block must be square, got shape {block.shape}")
    if not np.allclose(block.conj().T @ block, np.eye(block.shape[0]), atol=atol, rtol=0):
        raise RegisterError("block is not unitary")


def apply_block_unitary(
    state: RegisterState,
    atom: int,
    block: np.ndarray,
    levels: Sequence[int],
    condition: BlockadeCondition | None = None,
) -> RegisterState:
    """Multiply ``block`` onto the ``levels`` sub-space of one atom.

    Amplitude groups whose other-atom digits violate ``condition`` are left
    untouched. Returns a new state.
    """
    block = np.asarray(block, dtype=complex)
    if block.shape != (len(levels), len(levels)):
        raise RegisterError(f"block shape {block.shape} does not match {len(levels)} levels")
    check_unitary(block)
    return apply_local_map(state, atom, levels, lambda sub: np.tensordot(block, sub, axes=(1, 0)), condition)


def apply_local_map(
    state: RegisterState,
    atom: int,
    levels: Sequence[int],
    fn: Callable[[np.ndarray], np.ndarray],
    condition: BlockadeCondition | None = None,
) -> RegisterState:
    """Replace the ``levels`` slice of one atom by ``fn(slice)``.

    ``fn`` receives an array whose first axis runs over ``levels`` and must
    act unitarily on it. Blocked groups keep their old amplitudes.
    """
    if not 0 <= atom < state.num_atoms:
        raise RegisterError(f"atom {atom} out of range")
    levels = [int(l) for l in levels]
    d = state.atoms[atom].num_levels
    if len(set(levels)) != len(levels) or any(not 0 <= l < d for l in levels):
        raise RegisterError(f"invalid levels {levels} for a {d}-level atom")
    if condition is not None:
        if atom in condition.blocking_atoms:
            raise RegisterError("the target atom cannot block itself")
        if any(not 0 <= b < state.num_atoms for b in condition.blocking_atoms):
            raise RegisterError("blockade references an atom outside the register")
    out = state.amplitudes.copy()
    view = np.moveaxis(out.reshape(state.dims), atom, 0)
    sub = view[levels]
    new = fn(sub)
    if condition is not None and condition.blocking_atoms:
        new = np.where(_allowed_mask(state.dims, atom, condition), new, sub)
    view[levels] = new
    return RegisterState(state.atoms, out)
