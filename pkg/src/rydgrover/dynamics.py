"""Finite-blockade, lossy pulse dynamics.

The register evolves under

    H = sum_i (Omega/2)(e^{i phi}|u_i><r_i| + h.c.)
        + sum_{i<j} B_ij |r_i r_j><r_i r_j|
        - (i/2) sum_i gamma |r_i><r_i|

with ``|u_i>`` the driven ground-manifold vector of atom ``i`` (a bare level
or the bright superposition). Spontaneous emission shows up as norm loss.
Units are whatever the caller uses consistently (rad/s and s, or natural
units with B = 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .hilbert import (
    AtomSpec,
    RegisterState,
    basis_state,
    dimension,
    fidelity_mod_phase,
    three_level_atom,
)
from .pulses import BARE, PulseSpec

DENSE_LIMIT = 256

# (3 (7 pi)^{2/3} / 8) and (7 pi)^{1/3}
RABI_PREFACTOR = (7 * math.pi) ** (1 / 3)
ERROR_PREFACTOR = 3 * (7 * math.pi) ** (2 / 3) / 8


class WeakBlockadeWarning(RuntimeWarning):
    pass


@dataclass
class InteractionGraph:
    """Pairwise level shifts and per-role decay rates.

    ``shifts`` maps ``(i, j, level_i, level_j)`` with ``i < j`` to the energy
    shift (angular frequency) of the product state where atom ``i`` is in
    ``level_i`` and atom ``j`` in ``level_j``. ``decay`` maps a level role
    (``"ryd_r"``, ``"ryd_s"``) to its decay rate ``1/tau``.
    """

    shifts: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    decay: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j, li, lj), b in self.shifts.items():
            if i == j:
                raise ValueError("self-interaction is not allowed")
            if not math.isfinite(b):
                raise ValueError(f"non-finite shift for pair {(i, j)}")
            if i > j:
                i, j, li, lj = j, i, lj, li
            clean[(int(i), int(j), int(li), int(lj))] = float(b)
        self.shifts = clean
        for role, g in self.decay.items():
            if not math.isfinite(g) or g < 0:
                raise ValueError(f"decay rate for {role} must be finite and >= 0")

    @classmethod
    def all_pairs(
        cls,
        atoms: Sequence[AtomSpec],
        shift: float,
        gamma: float = 0.0,
        role: str = "ryd_r",
    ) -> InteractionGraph:
        """Uniform shift between every pair of atoms both in ``role``."""
        shifts = {}
        for i in range(len(atoms)):
            for j in range(i + 1, len(atoms)):
                if atoms[i].has(role) and atoms[j].has(role):
                    shifts[(i, j, atoms[i].level(role), atoms[j].level(role))] = shift
        return cls(shifts, {role: gamma} if gamma else {})

    def shift(self, i: int, j: int, li: int, lj: int) -> float:
        if i > j:
            i, j, li, lj = j, i, lj, li
        return self.shifts.get((i, j, li, lj), 0.0)

    def max_shift(self) -> float:
        return max((abs(b) for b in self.shifts.values()), default=0.0)

    def scaled(self, factor: float) -> InteractionGraph:
        return InteractionGraph({k: v * factor for k, v in self.shifts.items()}, dict(self.decay))

    def pair_values(self) -> list[float]:
        return sorted(self.shifts.values())


@dataclass(frozen=True)
class Transition:
    atom: int
    lower: tuple[complex, ...]  # normalized ground-manifold vector
    upper: int
    phase: float = 0.0

    @classmethod
    def from_pulse(cls, pulse: PulseSpec, num_levels: int) -> Transition:
        return cls(pulse.atom, tuple(pulse.lower_vector(num_levels)), pulse.upper, pulse.phase)


@dataclass(frozen=True)
class DriveSpec:
    transitions: tuple[Transition, ...]
    rabi: float
    phase: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rabi) and self.rabi >= 0):
            raise ValueError("Rabi frequency must be finite and >= 0")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ValueError("duration must be finite and >= 0")


@dataclass(frozen=True)
class Dwell:
    """Free evolution; ``duration`` defaults to pi / |shift| of the given pair."""

    atoms: tuple[int, int] | None = None
    levels: tuple[int, int] | None = None
    duration: float | None = None

    pi_durations = 0.0

    def apply(self, state: RegisterState) -> RegisterState:
        return state

    def inverse(self) -> Dwell:
        return self

    def resolve(self, graph: InteractionGraph) -> float:
        if self.duration is not None:
            return self.duration
        (i, j), (li, lj) = self.atoms, self.levels
        b = graph.shift(i, j, li, lj)
        if b == 0:
            raise ValueError(f"dwell needs a nonzero shift between atoms {i} and {j}")
        return math.pi / abs(b)


def _digits(dims: tuple[int, ...]) -> np.ndarray:
    return np.indices(dims).reshape(len(dims), -1)


def diagonal_terms(atoms: Sequence[AtomSpec], graph: InteractionGraph) -> np.ndarray:
    dims = tuple(a.num_levels for a in atoms)
    digits = _digits(dims)
    diag = np.zeros(digits.shape[1], dtype=complex)
    for (i, j, li, lj), b in graph.shifts.items():
        if i >= len(atoms) or j >= len(atoms) or li >= dims[i] or lj >= dims[j]:
            continue
        diag += b * ((digits[i] == li) & (digits[j] == lj))
    for role, g in graph.decay.items():
        if g == 0:
            continue
        for i, atom in enumerate(atoms):
            if atom.has(role):
                diag += -0.5j * g * (digits[i] == atom.level(role))
    return diag


def hamiltonian(atoms: Sequence[AtomSpec], drive: DriveSpec | None, graph: InteractionGraph) -> sp.csr_matrix:
    atoms = tuple(atoms)
    dim = dimension(atoms)
    h = sp.diags(diagonal_terms(atoms, graph), format="csr")
    if drive is None or drive.rabi == 0:
        return h
    for tr in drive.transitions:
        d = atoms[tr.atom].num_levels
        u = np.asarray(tr.lower, dtype=complex)
        r = np.zeros(d, dtype=complex)
        r[tr.upper] = 1.0
        phase = np.exp(1j * (tr.phase + drive.phase))
        local = 0.5 * drive.rabi * (phase * np.outer(u, r.conj()))
        local = local + local.conj().T
        left = sp.identity(int(np.prod([a.num_levels for a in atoms[: tr.atom]], dtype=np.int64)), format="csr")
        right = sp.identity(int(np.prod([a.num_levels for a in atoms[tr.atom + 1 :]], dtype=np.int64)), format="csr")
        h = h + sp.kron(sp.kron(left, sp.csr_matrix(local)), right, format="csr")
    assert h.shape == (dim, dim)
    return h.tocsr()


def _propagate(h: sp.csr_matrix, t: float, psi: np.ndarray) -> np.ndarray:
    if t == 0:
        return psi.copy()
    if h.shape[0] <= DENSE_LIMIT:
        return scipy.linalg.expm(-1j * t * h.toarray()) @ psi
    return expm_multiply(-1j * t * h, psi)


def evolve(
    state: RegisterState,
    drive: DriveSpec | None,
    graph: InteractionGraph,
    duration: float | None = None,
) -> RegisterState:
    """Evolve ``state`` under a constant drive for ``duration``."""
    t = drive.duration if duration is None and drive is not None else duration
    if t is None or not math.isfinite(t) or t < 0:
        raise ValueError("duration must be finite and >= 0")
    h = hamiltonian(state.atoms, drive, graph)
    return RegisterState(state.atoms, _propagate(h, t, state.amplitudes))


def _layer_drive(atoms: Sequence[AtomSpec], layer: Sequence[PulseSpec], rabi: float) -> DriveSpec:
    angles = {round(p.angle, 12) for p in layer}
    if len(angles) != 1:
        raise ValueError("pulses in one dynamical layer must share a pulse area")
    transitions = tuple(Transition.from_pulse(p, atoms[p.atom].num_levels) for p in layer)
    return DriveSpec(transitions, rabi, duration=layer[0].angle / rabi)


def execute_dynamical(
    atoms: Sequence[AtomSpec],
    psi: np.ndarray,
    layers: Iterable[Sequence],
    graph: InteractionGraph,
    rabi: float,
) -> np.ndarray:
    """Run layered operations on amplitude array(s) with finite interactions.

    ``psi`` may hold several states as columns. Ideal blockade conditions on
    pulses are ignored; blocking comes from ``graph``. Operations that are
    not pulses or dwells must expose ``dynamical_layers(atoms)``.
    """
    atoms = tuple(atoms)
    if not (math.isfinite(rabi) and rabi > 0):
        raise ValueError("Rabi frequency must be finite and > 0")
    cache: dict = {}
    for layer in layers:
        layer = tuple(layer)
        if not layer:
            continue
        if all(isinstance(op, PulseSpec) for op in layer):
            key = ("drive", layer)
            if key not in cache:
                drive = _layer_drive(atoms, layer, rabi)
                cache[key] = (hamiltonian(atoms, drive, graph), drive.duration)
            h, t = cache[key]
            psi = _propagate(h, t, psi)
        elif len(layer) == 1 and isinstance(layer[0], Dwell):
            key = ("free",)
            if key not in cache:
                cache[key] = hamiltonian(atoms, None, graph)
            psi = _propagate(cache[key], layer[0].resolve(graph), psi)
        elif len(layer) == 1 and hasattr(layer[0], "dynamical_layers"):
            psi = execute_dynamical(atoms, psi, layer[0].dynamical_layers(atoms), graph, rabi)
        else:
            raise ValueError(f"cannot execute layer {layer!r} dynamically")
    return psi


def execute_ideal(state: RegisterState, layers: Iterable[Sequence]) -> RegisterState:
    for layer in layers:
        for op in layer:
            state = op.apply(state)
    return state


def layer_pi_durations(layers: Iterable[Sequence]) -> float:
    """Sequence length in single-atom pi-pulse durations (parallel ops count once)."""
    return sum(max((op.pi_durations for op in layer), default=0.0) for layer in layers)


# --- two-atom reference fragment -------------------------------------------------


def controlled_phase_atoms() -> tuple[AtomSpec, AtomSpec]:
    return three_level_atom(), three_level_atom()


def controlled_phase_layers() -> list[tuple[PulseSpec]]:
    """Blockade controlled-phase gate: control pi, target 2pi, control pi back."""
    from .hilbert import BlockadeCondition

    r = 2
    ctl = PulseSpec(0, BARE, (1, r))
    tgt = PulseSpec(1, BARE, (1, r), angle=2 * math.pi, blockade=BlockadeCondition({0}, {r}))
    return [(ctl,), (tgt,), (ctl.inverse(),)]


def controlled_phase_graph(shift: float, lifetime: float) -> InteractionGraph:
    gamma = 0.0 if math.isinf(lifetime) else 1.0 / lifetime
    return InteractionGraph.all_pairs(controlled_phase_atoms(), shift, gamma)


# --- errors ----------------------------------------------------------------------


def _fringe_nodes(graph: InteractionGraph, rabi: float, nodes: int, periods: float):
    """Blockade scale factors and weights spanning ``periods`` fringes of the
    off-resonant leakage oscillation (period ~ Omega in B)."""
    b = graph.max_shift()
    if nodes <= 0 or b == 0:
        return np.array([1.0]), np.array([1.0])
    x, w = np.polynomial.legendre.leggauss(nodes)
    width = periods * rabi * math.sqrt(rabi**2 + b**2) / b
    if width >= 2 * b:
        width = b
    return 1.0 + x * width / (2 * b), w / 2


def gate_error(
    layers: Sequence[Sequence],
    graph: InteractionGraph,
    rabi: float,
    input_set: Sequence[RegisterState],
    fringe_nodes: int = 0,
    fringe_periods: float = 2.0,
) -> float:
    """Mean over inputs of (1 - F) + (1 - norm^2) against ideal execution.

    F is the phase-insensitive overlap of the renormalized dynamical output
    with the ideal output, so the two terms separate coherent error from
    spontaneous-emission loss. With ``fringe_nodes > 0`` the error is also
    averaged over a small window of blockade strengths (Gauss-Legendre), which
    removes the fast oscillation of off-resonant leakage with pulse length.
    """
    if not input_set:
        raise ValueError("input_set is empty")
    atoms = input_set[0].atoms
    ideal = [execute_ideal(s, layers) for s in input_set]
    psi0 = np.stack([s.amplitudes for s in input_set], axis=1)
    scales, weights = _fringe_nodes(graph, rabi, fringe_nodes, fringe_periods)
    total = 0.0
    for scale, weight in zip(scales, weights):
        out = execute_dynamical(atoms, psi0, layers, graph.scaled(scale), rabi)
        errs = []
        for col, ref in enumerate(ideal):
            dyn = RegisterState(atoms, out[:, col])
            n2 = dyn.norm_squared()
            fid = fidelity_mod_phase(dyn, ref) / n2 if n2 > 0 else 0.0
            errs.append((1.0 - fid) + (1.0 - n2))
        total += weight * float(np.mean(errs))
    return total


def computational_inputs(atoms: Sequence[AtomSpec], qubit_atoms: Sequence[int] | None = None) -> list[RegisterState]:
    """All qubit basis states (other atoms in ground0)."""
    atoms = tuple(atoms)
    qubit_atoms = list(range(len(atoms)) if qubit_atoms is None else qubit_atoms)
    out = []
    for bits in range(2 ** len(qubit_atoms)):
        label = [a.level("ground0") for a in atoms]
        for pos, i in enumerate(qubit_atoms):
            if (bits >> (len(qubit_atoms) - 1 - pos)) & 1:
                label[i] = atoms[i].level("ground1")
        out.append(basis_state(atoms, label))
    return out


def optimal_rabi(shift: float, lifetime: float) -> float:
    if shift <= 0 or lifetime <= 0:
        raise ValueError("blockade shift and lifetime must be positive")
    return RABI_PREFACTOR * shift ** (2 / 3) * lifetime ** (-1 / 3)


def min_error_formula(shift: float, lifetime: float) -> float:
    product = shift * lifetime
    if not product > 0:
        raise ValueError("B * tau must be positive")
    return ERROR_PREFACTOR * product ** (-2 / 3)


@dataclass
class RabiScan:
    shift: float
    lifetime: float
    omegas: np.ndarray
    errors: np.ndarray
    omega_min: float
    error_min: float

    @property
    def omega_ratio(self) -> float:
        return self.omega_min / optimal_rabi(self.shift, self.lifetime)

    @property
    def error_ratio(self) -> float:
        return self.error_min / min_error_formula(self.shift, self.lifetime)


def scan_rabi(
    shift: float,
    lifetime: float,
    points: int = 15,
    span: float = 0.35,
    fringe_nodes: int = 16,
    layers: Sequence[Sequence] | None = None,
    atoms: Sequence[AtomSpec] | None = None,
    graph: InteractionGraph | None = None,
) -> RabiScan:
    """Scan Omega over ``optimal_rabi * exp([-span, span])`` and locate the
    minimum of the gate error with a quadratic fit of log E against log Omega.

    Defaults to the two-atom controlled-phase fragment.
    """
    layers = controlled_phase_layers() if layers is None else layers
    atoms = controlled_phase_atoms() if atoms is None else tuple(atoms)
    graph = controlled_phase_graph(shift, lifetime) if graph is None else graph
    inputs = computational_inputs(atoms)
    center = optimal_rabi(shift, lifetime)
    logs = np.linspace(-span, span, points)
    omegas = center * np.exp(logs)
    errors = np.array([gate_error(layers, graph, om, inputs, fringe_nodes=fringe_nodes) for om in omegas])
    c2, c1, c0 = np.polyfit(logs, np.log(errors), 2)
    if c2 > 0:
        lmin = float(np.clip(-c1 / (2 * c2), logs[0], logs[-1]))
        emin = float(np.exp(np.polyval([c2, c1, c0], lmin)))
    else:
        lmin = float(logs[np.argmin(errors)])
        emin = float(errors.min())
    return RabiScan(shift, lifetime, omegas, errors, float(center * math.exp(lmin)), emin)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# --- collective Rabi enhancement -------------------------------------------------


def collective_enhancement(
    m: int,
    rabi: float = 1.0,
    shift: float = 100.0,
    periods: float = 60.0,
    samples: int = 1 << 14,
) -> float:
    """Ground-state oscillation frequency of ``m`` blockaded atoms, in units of Omega.

    All atoms start in |0> and are driven together on 0 <-> r. The frequency
    is the peak of the (windowed, refined) spectrum of the all-ground
    population.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if rabi <= 0:
        raise ValueError("Rabi frequency must be positive")
    if m > 1 and shift / rabi < 10:
        warnings.warn(
            f"B/Omega = {shift / rabi:.3g} < 10; blockade is weak and the ratio is not meaningful",
            WeakBlockadeWarning,
            stacklevel=2,
        )
    atoms = tuple(three_level_atom() for _ in range(m))
    graph = InteractionGraph.all_pairs(atoms, shift)
    pulses = tuple(PulseSpec(i, BARE, (0, 2)) for i in range(m))
    drive = DriveSpec(tuple(Transition.from_pulse(p, 3) for p in pulses), rabi)
    h = hamiltonian(atoms, drive, graph).toarray()
    evals, evecs = np.linalg.eigh(h)
    psi0 = basis_state(atoms, [0] * m).amplitudes
    coeffs = evecs.conj().T @ psi0
    t_total = periods * 2 * math.pi / (math.sqrt(m) * rabi)
    t = np.linspace(0.0, t_total, samples, endpoint=False)
    amp0 = (evecs[0, :] * coeffs) @ np.exp(-1j * np.outer(evals, t))
    pop = np.abs(amp0) ** 2
    return _peak_frequency(t, pop) / rabi


def _peak_frequency(t: np.ndarray, signal: np.ndarray) -> float:
    """Angular frequency of the dominant spectral line of a uniformly sampled signal."""
    from scipy.optimize import minimize_scalar

    dt = t[1] - t[0]
    y = (signal - signal.mean()) * np.hanning(len(signal))
    pad = 8 * len(y)
    spec = np.abs(np.fft.rfft(y, n=pad))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    step = 2 * math.pi / (pad * dt)

    def neg_dtft(w):
        return -abs(np.sum(y * np.exp(-1j * w * t)))

    res = minimize_scalar(
        neg_dtft,
        bounds=((k - 1) * step, (k + 1) * step),
        method="bounded",
        options={"xatol": step * 1e-6},
    )
    return float(res.x)
