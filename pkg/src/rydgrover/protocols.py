"""Grover oracle and diffusion steps built from blockade pulse sequences.

Every step is first built as a list of *layers*: tuples of operations that
run at the same time (pulses on different atoms, or a single controlled
transfer). The same layers are executed in the ideal-blockade limit or
dynamically with finite interactions, and their length in pi-pulse
durations is what the pulse-count bookkeeping reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import dynamics
from .dynamics import Dwell, InteractionGraph
from .hilbert import (
    AtomSpec,
    BlockadeCondition,
    RegisterError,
    RegisterState,
    ancilla_atom,
    apply_block_unitary,
    embed_qubit_vector,
    extract_qubit_vector,
    population_outside,
    qubit_indices,
    s_level_atom,
    three_level_atom,
    two_species_atom,
)
from .pulses import BARE, BRIGHT, PulseSpec

SEQUENTIAL = "sequential"
SIMULTANEOUS = "simultaneous"
SUBREGISTER = "subregister"
ARCHITECTURES = (SEQUENTIAL, SIMULTANEOUS, SUBREGISTER)

ORACLE = "oracle"
DIFFUSION = "diffusion"

Layer = tuple
Layers = list


class ProtocolError(ValueError):
    pass


# --- configuration ----------------------------------------------------------------


@dataclass
class ProtocolConfig:
    """Architecture, register size and marked element of a Grover run.

    The dynamical-mode parameters (``rabi``, ``blockade_shift``,
    ``lifetime``, ``ancilla_shift``) share one unit system.
    """

    architecture: str
    k: int
    marked: tuple[int, ...]
    n_s: int | None = None
    k_s: int | None = None
    mode: str = "ideal"
    rabi: float | None = None
    blockade_shift: float | None = None
    lifetime: float = math.inf
    ancilla_shift: float | None = None

    def __post_init__(self):
        self.marked = tuple(int(b) for b in self.marked)
        if self.architecture not in ARCHITECTURES:
            raise ProtocolError(f"unknown architecture {self.architecture!r}")
        if self.k < 1:
            raise ProtocolError("k must be >= 1")
        if len(self.marked) != self.k or any(b not in (0, 1) for b in self.marked):
            raise ProtocolError(f"marked element must be {self.k} binary digits, got {self.marked}")
        if self.mode not in ("ideal", "dynamical"):
            raise ProtocolError(f"unknown mode {self.mode!r}")
        if self.architecture == SUBREGISTER:
            if self.n_s is None or self.k_s is None:
                raise ProtocolError("sub-register architecture needs n_s and k_s")
            if self.n_s < 2 or self.k_s < 1:
                raise ProtocolError("sub-register architecture needs n_s >= 2 and k_s >= 1")
            if self.n_s * self.k_s != self.k:
                raise ProtocolError(f"partition {self.n_s} x {self.k_s} does not cover k = {self.k}")
        if self.mode == "dynamical":
            if not self.rabi or not self.blockade_shift:
                raise ProtocolError("dynamical mode needs rabi and blockade_shift")
            if self.architecture == SUBREGISTER and not self.ancilla_shift:
                raise ProtocolError("dynamical sub-register mode needs ancilla_shift")

    @classmethod
    def from_dict(cls, d: Mapping) -> ProtocolConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ProtocolError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ProtocolError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["marked"] = list(self.marked)
        if math.isinf(d["lifetime"]):
            d["lifetime"] = None
        return d

    @property
    def num_ancillas(self) -> int:
        if self.architecture == SIMULTANEOUS:
            return 1
        if self.architecture == SUBREGISTER:
            return self.n_s
        return 0

    def atoms(self) -> tuple[AtomSpec, ...]:
        return register_atoms(self.architecture, self.k, self.n_s or 0)

    @property
    def register(self) -> list[int]:
        return list(range(self.k))

    @property
    def ancillas(self) -> list[int]:
        return list(range(self.k, self.k + self.num_ancillas))


def register_atoms(architecture: str, k: int, n_s: int = 0) -> tuple[AtomSpec, ...]:
    """Atom layout: register atoms 0..k-1, then ancillas."""
    if architecture == SEQUENTIAL:
        return tuple(three_level_atom() for _ in range(k))
    if architecture == SIMULTANEOUS:
        return tuple(two_species_atom() for _ in range(k)) + (three_level_atom(),)
    if architecture == SUBREGISTER:
        return tuple(s_level_atom() for _ in range(k)) + tuple(ancilla_atom() for _ in range(n_s))
    raise ProtocolError(f"unknown architecture {architecture!r}")


# --- controlled transfer --------------------------------------------------------------


@dataclass(frozen=True)
class ControlledTransfer:
    """|ctl_level>|a> <-> |ctl_level>|b> on the target; identity otherwise.

    Ideal execution applies the effective unitary directly. Dynamical
    execution runs the interaction-gate sequence: control to Rydberg, target
    bright state (|a> - |b>)/sqrt2 to Rydberg, dwell pi/dE_rr so |rr> picks up
    a sign, then both pulses inverted.
    """

    ctl_atom: int
    ctl_level: int
    tgt_atom: int
    a_level: int
    b_level: int

    pi_durations = 4.0

    def __post_init__(self):
        if self.ctl_atom == self.tgt_atom:
            raise ProtocolError("control and target must differ")
        if self.a_level == self.b_level:
            raise ProtocolError("transfer levels must differ")

    def _validate(self, atoms: Sequence[AtomSpec]) -> None:
        for atom, lvls in ((self.ctl_atom, (self.ctl_level,)), (self.tgt_atom, (self.a_level, self.b_level))):
            if not 0 <= atom < len(atoms):
                raise ProtocolError(f"atom {atom} outside the register")
            if any(not 0 <= l < atoms[atom].num_levels for l in lvls):
                raise ProtocolError(f"atom {atom} lacks one of levels {lvls}")

    def apply(self, state: RegisterState) -> RegisterState:
        self._validate(state.atoms)
        ctl = state.atoms[self.ctl_atom]
        others = [l for l in range(ctl.num_levels) if l != self.ctl_level]
        swap = np.array([[0, 1], [1, 0]], dtype=complex)
        cond = BlockadeCondition({self.ctl_atom}, others)
        return apply_block_unitary(state, self.tgt_atom, swap, (self.a_level, self.b_level), cond)

    def inverse(self) -> ControlledTransfer:
        return self

    def dynamical_layers(self, atoms: Sequence[AtomSpec]) -> list:
        self._validate(atoms)
        rc = atoms[self.ctl_atom].level("ryd_r")
        rt = atoms[self.tgt_atom].level("ryd_r")
        ctl = PulseSpec(self.ctl_atom, BARE, (self.ctl_level, rc))
        tgt = PulseSpec(self.tgt_atom, BRIGHT, (self.a_level, self.b_level, rt))
        dwell = Dwell((self.ctl_atom, self.tgt_atom), (rc, rt))
        return [(ctl,), (tgt,), (dwell,), (tgt.inverse(),), (ctl.inverse(),)]


def controlled_transfer(state, ctl_atom, ctl_level, tgt_atom, a_level, b_level, *, mode="ideal", graph=None, rabi=None):
    op = ControlledTransfer(ctl_atom, ctl_level, tgt_atom, a_level, b_level)
    return run_layers(state, [(op,)], mode=mode, graph=graph, rabi=rabi)


def and_pair_layers(first: int, second: int) -> Layers:
    """|10> -> |12> -> |02>: the first ancilla ends in |1> iff both were |1>."""
    return [
        (ControlledTransfer(first, 1, second, 0, 2),),
        (ControlledTransfer(second, 2, first, 1, 0),),
    ]


def and_pair(state, first_ancilla, second_ancilla, *, mode="ideal", graph=None, rabi=None):
    for idx in (first_ancilla, second_ancilla):
        a = state.atoms[idx]
        if a.num_levels < 4 or not a.has("logical2") or not a.has("ryd_r"):
            raise ProtocolError(f"atom {idx} is not a four-level ancilla (0, 1, 2, r)")
    return run_layers(state, and_pair_layers(first_ancilla, second_ancilla), mode=mode, graph=graph, rabi=rabi)


# --- layer utilities -----------------------------------------------------------------------


def inverse_layers(layers: Sequence[Layer]) -> Layers:
    return [tuple(op.inverse() for op in layer) for layer in reversed(layers)]


def pi_durations(layers: Sequence[Layer]) -> float:
    return dynamics.layer_pi_durations(layers)


def run_layers(
    state: RegisterState,
    layers: Sequence[Layer],
    *,
    mode: str = "ideal",
    graph: InteractionGraph | None = None,
    rabi: float | None = None,
) -> RegisterState:
    if mode == "ideal":
        return dynamics.execute_ideal(state, layers)
    if mode == "dynamical":
        if graph is None or rabi is None:
            raise ProtocolError("dynamical execution needs an interaction graph and a Rabi frequency")
        psi = dynamics.execute_dynamical(state.atoms, state.amplitudes, layers, graph, rabi)
        return RegisterState(state.atoms, psi)
    raise ProtocolError(f"unknown mode {mode!r}")


def _rydberg_levels(atoms: Sequence[AtomSpec], idx: Sequence[int]) -> set[int]:
    return {l for i in idx for l in atoms[i].rydberg_levels}


# --- sequential architecture ---------------------------------------------------------------


def _sequential_layers(atoms, k, lower_pulse: Callable[[int, BlockadeCondition | None], PulseSpec], deexcite_phase: float) -> Layers:
    forward = []
    for i in range(k):
        lower = list(range(i))
        blk = BlockadeCondition(lower, _rydberg_levels(atoms, lower)) if lower else None
        forward.append(lower_pulse(i, blk))
    back = [PulseSpec(p.atom, p.kind, p.levels, p.angle, p.phase + deexcite_phase, p.blockade) for p in reversed(forward)]
    return [(p,) for p in forward] + [(p,) for p in back]


def sequential_oracle_layers(marked: Sequence[int], atoms: Sequence[AtomSpec] | None = None, deexcite_phase: float = 0.0) -> Layers:
    """Forward sweep |1-b_i> -> r blockaded by lower atoms, then reverse sweep.

    With equal excitation and de-excitation phases every excited component
    returns with a minus sign, giving 2|x0><x0| - I.
    """
    k = len(marked)
    atoms = tuple(atoms) if atoms is not None else register_atoms(SEQUENTIAL, k)

    def pulse(i, blk):
        a = atoms[i]
        src = a.level("ground1") if marked[i] == 0 else a.level("ground0")
        return PulseSpec(i, BARE, (src, a.level("ryd_r")), math.pi, 0.0, blk)

    return _sequential_layers(atoms, k, pulse, deexcite_phase)


def sequential_diffusion_layers(k: int, atoms: Sequence[AtomSpec] | None = None, deexcite_phase: float = 0.0) -> Layers:
    atoms = tuple(atoms) if atoms is not None else register_atoms(SEQUENTIAL, k)

    def pulse(i, blk):
        a = atoms[i]
        g0, g1 = a.qubit_levels
        return PulseSpec(i, BRIGHT, (g0, g1, a.level("ryd_r")), math.pi, 0.0, blk)

    return _sequential_layers(atoms, k, pulse, deexcite_phase)


def _require_qubit_subspace(state: RegisterState, qubit_atoms: Sequence[int], ancillas: Sequence[int] = ()) -> None:
    allowed = []
    for i, a in enumerate(state.atoms):
        if i in ancillas:
            allowed.append((a.level("ground0"),))
        elif i in qubit_atoms:
            allowed.append(a.qubit_levels)
        else:
            allowed.append(tuple(range(a.num_levels)))
    leak = population_outside(state, allowed)
    if leak > 1e-12:
        raise ProtocolError(f"input has population {leak:.3g} outside the qubit subspace (ancillas must start in |0>)")


def oracle_sequential(state: RegisterState, marked: Sequence[int], **run) -> RegisterState:
    k = len(marked)
    _require_qubit_subspace(state, range(k))
    return run_layers(state, sequential_oracle_layers(marked, state.atoms), **run)


def diffusion_sequential(state: RegisterState, **run) -> RegisterState:
    k = state.num_atoms
    _require_qubit_subspace(state, range(k))
    return run_layers(state, sequential_diffusion_layers(k, state.atoms), **run)


# --- simultaneous two-species architecture -------------------------------------------------


def _register_pulses(atoms, register, variant, marked, upper_role) -> tuple[PulseSpec, ...]:
    pulses = []
    for i in register:
        a = atoms[i]
        up = a.level(upper_role)
        if variant == ORACLE:
            src = a.level("ground1") if marked[register.index(i)] == 0 else a.level("ground0")
            pulses.append(PulseSpec(i, BARE, (src, up)))
        else:
            g0, g1 = a.qubit_levels
            pulses.append(PulseSpec(i, BRIGHT, (g0, g1, up)))
    return tuple(pulses)


def simultaneous_layers(k: int, variant: str, marked: Sequence[int] | None = None, atoms: Sequence[AtomSpec] | None = None) -> Layers:
    """All register atoms to |s> at once, ancilla 2pi on 0 <-> r blocked by
    any |s>, register returned with phase-shifted (sign-free) pulses."""
    atoms = tuple(atoms) if atoms is not None else register_atoms(SIMULTANEOUS, k)
    register = list(range(k))
    anc = k
    excite = _register_pulses(atoms, register, variant, marked, "ryd_s")
    s_levels = {atoms[i].level("ryd_s") for i in register}
    two_pi = PulseSpec(
        anc,
        BARE,
        (atoms[anc].level("ground0"), atoms[anc].level("ryd_r")),
        2 * math.pi,
        0.0,
        BlockadeCondition(register, s_levels),
    )
    return [excite, (two_pi,), tuple(p.inverse() for p in excite)]


def oracle_simultaneous(state: RegisterState, marked: Sequence[int], **run) -> RegisterState:
    k = len(marked)
    _require_qubit_subspace(state, range(k), ancillas=[k])
    return run_layers(state, simultaneous_layers(k, ORACLE, marked, state.atoms), **run)


def diffusion_simultaneous(state: RegisterState, **run) -> RegisterState:
    k = state.num_atoms - 1
    _require_qubit_subspace(state, range(k), ancillas=[k])
    return run_layers(state, simultaneous_layers(k, DIFFUSION, None, state.atoms), **run)


# --- sub-register architecture -------------------------------------------------------------


def tree_pairs(ancillas: Sequence[int]) -> list[tuple[int, int]]:
    """Binary-tree reduction order; the root is ``ancillas[0]``.

    Pairs are formed by index adjacency. Non-power-of-two counts leave an
    unpaired ancilla to move up a level unchanged, equivalent to pairing with
    a virtual ancilla fixed in |1>.
    """
    pairs = []
    level = list(ancillas)
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            pairs.append((level[i], level[i + 1]))
            nxt.append(level[i])
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return pairs


@dataclass
class SubregisterStages:
    forward: Layers
    root: Layers
    reverse: Layers

    @property
    def layers(self) -> Layers:
        return self.forward + self.root + self.reverse


def subregister_stages(
    n_s: int,
    k_s: int,
    variant: str,
    marked: Sequence[int] | None = None,
    atoms: Sequence[AtomSpec] | None = None,
) -> SubregisterStages:
    """Sub-register step: summarize each cluster in its ancilla, AND the
    ancillas down a binary tree, 2pi the root on |1> <-> r, undo everything."""
    k = n_s * k_s
    atoms = tuple(atoms) if atoms is not None else register_atoms(SUBREGISTER, k, n_s)
    register = list(range(k))
    ancillas = list(range(k, k + n_s))
    excite = _register_pulses(atoms, register, variant, marked, "ryd_s")
    to_r, to_one = [], []
    for j, anc in enumerate(ancillas):
        members = register[j * k_s : (j + 1) * k_s]
        blk = BlockadeCondition(members, {atoms[i].level("ryd_s") for i in members})
        a = atoms[anc]
        r = a.level("ryd_r")
        # phases differ by pi so |0> -> |r> -> |1> carries amplitude +1
        to_r.append(PulseSpec(anc, BARE, (a.level("ground0"), r), math.pi, 0.0, blk))
        to_one.append(PulseSpec(anc, BARE, (a.level("ground1"), r), math.pi, math.pi, blk))
    forward: Layers = [excite, tuple(to_r), tuple(to_one), tuple(p.inverse() for p in excite)]
    for first, second in tree_pairs(ancillas):
        forward += and_pair_layers(first, second)
    root_atom = atoms[ancillas[0]]
    root = [(PulseSpec(ancillas[0], BARE, (root_atom.level("ground1"), root_atom.level("ryd_r")), 2 * math.pi),)]
    return SubregisterStages(forward, root, inverse_layers(forward))


def subregister_layers(n_s, k_s, variant, marked=None, atoms=None) -> Layers:
    return subregister_stages(n_s, k_s, variant, marked, atoms).layers


def grover_step_subregister(state: RegisterState, config: ProtocolConfig, variant: str = ORACLE, **run) -> RegisterState:
    if config.architecture != SUBREGISTER:
        raise ProtocolError("config is not a sub-register configuration")
    if state.dims != tuple(a.num_levels for a in config.atoms()):
        raise ProtocolError("state does not match the sub-register partition")
    _require_qubit_subspace(state, config.register, ancillas=config.ancillas)
    marked = config.marked if variant == ORACLE else None
    return run_layers(state, subregister_layers(config.n_s, config.k_s, variant, marked, state.atoms), **run)


# --- whole steps ---------------------------------------------------------------------------


def step_layers(config: ProtocolConfig, variant: str) -> Layers:
    atoms = config.atoms()
    if config.architecture == SEQUENTIAL:
        if variant == ORACLE:
            return sequential_oracle_layers(config.marked, atoms)
        return sequential_diffusion_layers(config.k, atoms)
    if config.architecture == SIMULTANEOUS:
        return simultaneous_layers(config.k, variant, config.marked, atoms)
    return subregister_layers(config.n_s, config.k_s, variant, config.marked, atoms)


def default_graph(config: ProtocolConfig) -> InteractionGraph:
    """Interaction graph for dynamical runs of ``config``.

    Sequential: uniform r-r shift between all atoms. Simultaneous: s-r shift
    between every register atom and the ancilla, no s-s shift.
    Sub-register: s-r shift inside each cluster, ``ancilla_shift`` r-r
    between ancillas.
    """
    atoms = config.atoms()
    gamma = 0.0 if math.isinf(config.lifetime) else 1.0 / config.lifetime
    b = config.blockade_shift or 0.0
    shifts = {}
    decay = {}
    if config.architecture == SEQUENTIAL:
        return InteractionGraph.all_pairs(atoms, b, gamma)
    if config.architecture == SIMULTANEOUS:
        anc = config.k
        for i in config.register:
            shifts[(i, anc, atoms[i].level("ryd_s"), atoms[anc].level("ryd_r"))] = b
    else:
        for j, anc in enumerate(config.ancillas):
            for i in config.register[j * config.k_s : (j + 1) * config.k_s]:
                shifts[(i, anc, atoms[i].level("ryd_s"), atoms[anc].level("ryd_r"))] = b
        for x, a1 in enumerate(config.ancillas):
            for a2 in config.ancillas[x + 1 :]:
                shifts[(a1, a2, atoms[a1].level("ryd_r"), atoms[a2].level("ryd_r"))] = config.ancilla_shift or 0.0
    if gamma:
        decay = {"ryd_r": gamma, "ryd_s": gamma}
    return InteractionGraph(shifts, decay)


def qubit_block_matrix(config_or_atoms, layers: Sequence[Layer], register: Sequence[int], ancillas: Sequence[int] = ()) -> np.ndarray:
    """Matrix of ``layers`` restricted to register qubit labels (ancillas in |0>),
    assembled column by column from basis inputs."""
    atoms = config_or_atoms.atoms() if isinstance(config_or_atoms, ProtocolConfig) else tuple(config_or_atoms)
    m = len(register)
    cols = []
    for x in range(2**m):
        vec = np.zeros(2**m, dtype=complex)
        vec[x] = 1.0
        out = dynamics.execute_ideal(embed_qubit_vector(atoms, register, vec), layers)
        cols.append(extract_qubit_vector(out, register))
    return np.array(cols).T


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """Whether ``a == e^{i chi} b`` entrywise within ``atol`` for one global chi."""
    return max_phase_aligned_diff(a, b) < atol


def max_phase_aligned_diff(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    overlap = np.vdot(b.ravel(), a.ravel())
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def oracle_matrix(marked: Sequence[int]) -> np.ndarray:
    """2|x0><x0| - I on the qubit block."""
    n = 2 ** len(marked)
    x0 = int("".join(str(b) for b in marked), 2)
    m = -np.eye(n, dtype=complex)
    m[x0, x0] = 1.0
    return m


def diffusion_matrix(k: int) -> np.ndarray:
    """2P - I with P the projector on the uniform superposition."""
    n = 2**k
    return 2.0 * np.full((n, n), 1.0 / n, dtype=complex) - np.eye(n)


# --- Grover search -------------------------------------------------------------------------


def auto_iterations(k: int) -> int:
    theta = math.asin(2.0 ** (-k / 2))
    # nearest integer to pi/(4 theta) - 1/2, halves rounded up
    return int(math.floor(math.pi / (4 * theta)))


def analytic_success(k: int, m: int) -> float:
    return math.sin((2 * m + 1) * math.asin(2.0 ** (-k / 2))) ** 2


@dataclass
class GroverTrace:
    """Success probability, norm and cumulative pi-pulse durations per iteration
    (row 0 is the initial state)."""

    config: ProtocolConfig
    success: list[float] = field(default_factory=list)
    norm: list[float] = field(default_factory=list)
    pulses: list[float] = field(default_factory=list)
    amplitude: list[complex] = field(default_factory=list)
    final_state: RegisterState | None = None

    @property
    def iterations(self) -> int:
        return len(self.success) - 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "success_prob", "norm", "cumulative_pulses"])
        for i, (p, n, c) in enumerate(zip(self.success, self.norm, self.pulses)):
            w.writerow([i, f"{p:.12g}", f"{n:.12g}", f"{c:.12g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "iterations": self.iterations,
            "success_prob": self.success,
            "norm": self.norm,
            "cumulative_pulses": self.pulses,
            "ordering": "mixed-radix, atom 0 most significant; register atoms 0..k-1 then ancillas",
            "levels_per_atom": [a.num_levels for a in self.config.atoms()],
            "final_state": None if self.final_state is None else [[z.real, z.imag] for z in self.final_state.amplitudes.tolist()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def initial_state(config: ProtocolConfig) -> RegisterState:
    vec = np.full(2**config.k, 2.0 ** (-config.k / 2), dtype=complex)
    return embed_qubit_vector(config.atoms(), config.register, vec)


def marked_index(config: ProtocolConfig) -> int:
    x0 = int("".join(str(b) for b in config.marked), 2)
    return int(qubit_indices(config.atoms(), config.register)[x0])


def grover_search(config: ProtocolConfig, iterations: int | str | None = "auto") -> GroverTrace:
    """Prepare the uniform state and alternate oracle and diffusion."""
    if iterations is None or iterations == "auto":
        iterations = auto_iterations(config.k)
    iterations = int(iterations)
    if iterations < 0:
        raise ProtocolError("iterations must be >= 0")
    oracle = step_layers(config, ORACLE)
    diffusion = step_layers(config, DIFFUSION)
    step_pulses = pi_durations(oracle) + pi_durations(diffusion)
    run = {"mode": config.mode}
    if config.mode == "dynamical":
        run.update(graph=default_graph(config), rabi=config.rabi)
    state = initial_state(config)
    idx = marked_index(config)
    trace = GroverTrace(config)

    def record(st, pulses):
        amp = complex(st.amplitudes[idx])
        trace.amplitude.append(amp)
        trace.success.append(abs(amp) ** 2)
        trace.norm.append(math.sqrt(st.norm_squared()))
        trace.pulses.append(pulses)

    record(state, 0.0)
    for it in range(1, iterations + 1):
        state = run_layers(state, oracle, **run)
        state = run_layers(state, diffusion, **run)
        record(state, it * step_pulses)
    trace.final_state = state
    return trace
