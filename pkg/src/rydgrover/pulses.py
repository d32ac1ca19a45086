"""Rotation blocks for resonant pi / 2pi pulses and Lambda-scheme bright pulses.

Convention: a pulse of area ``theta`` and laser phase ``phi`` on the pair
(lower, upper) acts as

    [[cos(theta/2),               -1j*exp(1j*phi)*sin(theta/2)],
     [-1j*exp(-1j*phi)*sin(theta/2), cos(theta/2)]]

which is ``exp(-i H t)`` for ``H = (Omega/2)(e^{i phi}|lower><upper| + h.c.)``
at ``Omega t = theta``. A 2pi pulse is ``-I`` and the inverse of any pulse is
the same pulse with its phase advanced by pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .hilbert import BlockadeCondition, RegisterError, RegisterState, apply_block_unitary, apply_local_map

BARE = "bare"
BRIGHT = "bright"

_SQRT_HALF = 1.0 / math.sqrt(2.0)


_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def _cos_sin(x: float) -> tuple[float, float]:
    """cos and sin, exact at multiples of pi/2 so ideal pulses leave no residue."""
    q = x / (math.pi / 2)
    n = round(q)
    if abs(q - n) < 1e-12:
        return _QUARTER_TURNS[n % 4]
    return math.cos(x), math.sin(x)


def rotation_block(theta: float, phi: float) -> np.ndarray:
    c, s = _cos_sin(theta / 2)
    cp, sp = _cos_sin(phi)
    e = complex(cp, sp)
    return np.array(
        [[c, -1j * e * s], [-1j * e.conjugate() * s, c]],
        dtype=complex,
    )


def bright_block(theta: float, phi: float) -> np.ndarray:
    """3x3 block on (a, b, ryd): dark (a+b)/sqrt2 untouched, bright (a-b)/sqrt2 rotated."""
    # columns: dark, bright, ryd expressed in the (a, b, ryd) basis
    w = np.array(
        [[_SQRT_HALF, _SQRT_HALF, 0.0], [_SQRT_HALF, -_SQRT_HALF, 0.0], [0.0, 0.0, 1.0]],
        dtype=complex,
    )
    inner = np.eye(3, dtype=complex)
    inner[1:, 1:] = rotation_block(theta, phi)
    return w @ inner @ w.conj().T


def _bright_map(rot: np.ndarray, sub: np.ndarray) -> np.ndarray:
    # work with half-sums so a dark component (a == b, no Rydberg part)
    # passes through bit-for-bit
    a, b, r = sub
    dark = (a + b) / 2
    half = (a - b) / 2
    bright = half * math.sqrt(2.0)
    bright2 = rot[0, 0] * bright + rot[0, 1] * r
    r2 = rot[1, 0] * bright + rot[1, 1] * r
    half2 = bright2 * _SQRT_HALF
    return np.stack([dark + half2, dark - half2, r2])


@dataclass(frozen=True)
class PulseSpec:
    """One laser pulse on one atom.

    ``levels`` is ``(lower, upper)`` for a bare pulse and ``(a, b, upper)``
    for a bright pulse, where the driven superposition is (|a> - |b>)/sqrt2.
    """

    atom: int
    kind: str
    levels: tuple[int, ...]
    angle: float = math.pi
    phase: float = 0.0
    blockade: BlockadeCondition | None = None

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        if self.kind == BARE:
            if len(self.levels) != 2:
                raise RegisterError("a bare pulse addresses exactly two levels")
        elif self.kind == BRIGHT:
            if len(self.levels) != 3:
                raise RegisterError("a bright pulse addresses (a, b, upper)")
        else:
            raise RegisterError(f"unknown pulse kind {self.kind!r}")
        if not 0.0 <= self.angle <= 4 * math.pi + 1e-12:
            raise RegisterError(f"pulse area {self.angle} outside [0, 4pi]")
        if self.blockade is not None and self.atom in self.blockade.blocking_atoms:
            raise RegisterError("a pulse cannot be blockaded by its own atom")

    @property
    def upper(self) -> int:
        return self.levels[-1]

    @property
    def pi_durations(self) -> float:
        """Duration in units of a single-atom pi pulse."""
        return self.angle / math.pi

    def block(self) -> np.ndarray:
        if self.kind == BARE:
            return rotation_block(self.angle, self.phase)
        return bright_block(self.angle, self.phase)

    def apply(self, state: RegisterState) -> RegisterState:
        if self.kind == BARE:
            return apply_block_unitary(state, self.atom, self.block(), self.levels, self.blockade)
        rot = rotation_block(self.angle, self.phase)
        return apply_local_map(state, self.atom, self.levels, lambda sub: _bright_map(rot, sub), self.blockade)

    def inverse(self) -> PulseSpec:
        return replace(self, phase=_wrap(self.phase + math.pi))

    def lower_vector(self, num_levels: int) -> np.ndarray:
        """Normalized ground-manifold vector coupled to ``upper``."""
        v = np.zeros(num_levels, dtype=complex)
        if self.kind == BARE:
            v[self.levels[0]] = 1.0
        else:
            v[self.levels[0]] = _SQRT_HALF
            v[self.levels[1]] = -_SQRT_HALF
        return v

    def to_dict(self) -> dict:
        return {
            "atom": self.atom,
            "kind": self.kind,
            "levels": list(self.levels),
            "angle": self.angle,
            "phase": self.phase,
            "blockade": None if self.blockade is None else self.blockade.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PulseSpec:
        blk = d.get("blockade")
        return cls(
            atom=int(d["atom"]),
            kind=d["kind"],
            levels=tuple(d["levels"]),
            angle=float(d.get("angle", math.pi)),
            phase=float(d.get("phase", 0.0)),
            blockade=None if blk is None else BlockadeCondition.from_dict(blk),
        )


def _wrap(phi: float) -> float:
    return math.remainder(phi, 2 * math.pi)


def _default_rydberg(state: RegisterState, atom: int) -> int:
    levels = state.atoms[atom].rydberg_levels
    if not levels:
        raise RegisterError(f"atom {atom} has no Rydberg level")
    return levels[-1]


def pi_pulse(state, atom, from_level, ryd_level, phi=0.0, blockade=None) -> RegisterState:
    return PulseSpec(atom, BARE, (from_level, ryd_level), math.pi, phi, blockade).apply(state)


def two_pi_pulse(state, atom, from_level, ryd_level, phi=0.0, blockade=None) -> RegisterState:
    return PulseSpec(atom, BARE, (from_level, ryd_level), 2 * math.pi, phi, blockade).apply(state)


def bright_pulse(state, atom, theta=math.pi, phi=0.0, blockade=None, ryd_level=None, pair=None) -> RegisterState:
    """Drive the bright state (|a> - |b>)/sqrt2 of ``atom`` to a Rydberg level.

    ``pair`` defaults to the atom's qubit levels and ``ryd_level`` to its
    highest Rydberg level.
    """
    spec = state.atoms[atom]
    a, b = pair if pair is not None else spec.qubit_levels
    ryd = _default_rydberg(state, atom) if ryd_level is None else ryd_level
    return PulseSpec(atom, BRIGHT, (a, b, ryd), theta, phi, blockade).apply(state)
