"""Rydberg pair shifts, square-lattice geometry and lattice-averaged gate errors.

Lengths are in micrometres, frequencies in rad/s, times in seconds.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .dynamics import InteractionGraph, min_error_formula

SINGLE_SPECIES = "single-species"
TWO_SPECIES = "two-species"

# Rydberg frequency R_inf * c in rad/s
RYDBERG_ANGULAR = 2 * math.pi * 3.289841960e15


@dataclass(frozen=True)
class PairModel:
    """Two-channel Foerster pair model quoted at principal quantum number ``n0``.

    ``c3`` scales as n^4, ``c6`` as n^11 and the lifetime as n^3, so the
    Foerster defect ``c3**2 / c6`` scales as n^-3. Set ``c6 = inf`` (or
    ``delta = 0``) for a purely resonant 1/R^3 interaction.
    """

    name: str
    n0: float
    c3: float
    c6: float
    tau0: float
    energy_scale: float = RYDBERG_ANGULAR
    delta: float | None = None

    def __post_init__(self):
        for field_name in ("n0", "c3", "tau0", "energy_scale"):
            if not getattr(self, field_name) > 0:
                raise ValueError(f"{field_name} must be positive")
        if not self.c6 > 0:
            raise ValueError("c6 must be positive (use inf for the resonant limit)")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be >= 0")

    def c3_at(self, n: float) -> float:
        return self.c3 * (n / self.n0) ** 4

    def c6_at(self, n: float) -> float:
        if self.delta is not None:
            return math.inf if self.delta == 0 else self.c3_at(n) ** 2 / self.delta_at(n)
        return self.c6 * (n / self.n0) ** 11

    def delta_at(self, n: float) -> float:
        if self.delta is not None:
            return self.delta * (n / self.n0) ** -3
        return 0.0 if math.isinf(self.c6) else self.c3_at(n) ** 2 / self.c6_at(n)

    def lifetime(self, n: float) -> float:
        return self.tau0 * (n / self.n0) ** 3

    def resonant(self) -> PairModel:
        return replace(self, c6=math.inf, delta=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {
            "name": d["name"],
            "n0": d["n0"],
            "C3": d["c3"],
            "C6": None if math.isinf(d["c6"]) else d["c6"],
            "delta": d["delta"],
            "tau0": d["tau0"],
            "energy_scale": d["energy_scale"],
        }

    @classmethod
    def from_dict(cls, d: dict) -> PairModel:
        missing = {"name", "n0", "C3", "tau0"} - set(d)
        if missing:
            raise ValueError(f"species file lacks {sorted(missing)}")
        c6 = d.get("C6")
        delta = d.get("delta")
        if c6 is None and delta is None:
            raise ValueError("species file needs C6 or delta")
        return cls(
            name=d["name"],
            n0=float(d["n0"]),
            c3=float(d["C3"]),
            c6=math.inf if c6 is None else float(c6),
            tau0=float(d["tau0"]),
            energy_scale=float(d.get("energy_scale", RYDBERG_ANGULAR)),
            delta=None if delta is None else float(delta),
        )


def load_species(path_or_name: str | Path) -> PairModel:
    """Load a species JSON file, or a shipped preset by name (``cs_like``, ``rb_like``)."""
    path = Path(path_or_name)
    if path.suffix != ".json" and not path.exists():
        text = resources.files("rydgrover.data").joinpath(f"{path_or_name}.json").read_text()
    else:
        text = path.read_text()
    return PairModel.from_dict(json.loads(text))


def pair_shift(model: PairModel, n: float, r: float) -> float:
    """Magnitude of the interaction-shifted pair eigenvalue at separation ``r``.

    Two-channel model: ``|(-delta + sign(delta) sqrt(delta^2 + 4 V^2)) / 2|``
    with ``V = C3(n)/r^3``; resonant 1/r^3 at small r, C6/r^6 at large r.
    """
    if not r > 0:
        raise ValueError("separation must be positive")
    v = model.c3_at(n) / r**3
    delta = model.delta_at(n)
    if delta == 0:
        return v
    # same value as (-delta + sqrt(delta^2 + 4 v^2)) / 2 without cancellation
    return 2 * v**2 / (delta + math.sqrt(delta**2 + 4 * v**2))


@dataclass(frozen=True)
class LatticeSpec:
    """Square lattice of ``side**2`` sites with period ``d``.

    With ``center_ancilla`` the site nearest the geometric centre holds the
    ancilla and the rest form the register.
    """

    side: int
    d: float
    center_ancilla: bool = False

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("lattice side must be >= 1")
        if not self.d > 0:
            raise ValueError("lattice period must be positive")

    @classmethod
    def for_register(cls, k: int, d: float, center_ancilla: bool = False) -> LatticeSpec:
        """``k`` counts all sites (register plus the central ancilla if flagged)."""
        side = math.isqrt(k)
        if side * side != k:
            raise ValueError(f"k = {k} is not a perfect square")
        return cls(side, d, center_ancilla)

    @property
    def num_sites(self) -> int:
        return self.side**2

    @property
    def ancilla_site(self) -> int | None:
        if not self.center_ancilla:
            return None
        c = (self.side - 1) / 2
        pts = lattice_positions(replace(self, center_ancilla=False))
        dist = [math.hypot(x / self.d - c, y / self.d - c) for x, y in pts]
        return int(np.argmin(dist))


def lattice_positions(spec: LatticeSpec) -> list[tuple[float, float]]:
    """Row-major site coordinates; the ancilla (if any) is one of them."""
    return [(col * spec.d, row * spec.d) for row in range(spec.side) for col in range(spec.side)]


def max_separation(points: Sequence[tuple[float, float]]) -> float:
    return max((math.dist(p, q) for p, q in itertools.combinations(points, 2)), default=0.0)


def quoted_max_separation(k: int, d: float) -> float:
    """``sqrt(2 (k - 1)) d``, the maximal spacing as quoted for a k-site lattice.

    For square k > 1 this exceeds the corner-to-corner distance
    ``sqrt(2) (sqrt(k) - 1) d`` of the grid; kept for comparison only,
    geometry uses :func:`max_separation`.
    """
    return math.sqrt(2 * (k - 1)) * d


def blockade_ceiling(n: float, energy_scale: float = RYDBERG_ANGULAR) -> float:
    """Half the spacing between Rydberg levels n-1 and n: ``(1/(n-1)^2 - 1/n^2)/2``
    times ``energy_scale``; ~ energy_scale / n^3 for large n."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return 0.5 * energy_scale * (1.0 / (n - 1) ** 2 - 1.0 / n**2)


def relevant_pairs(spec: LatticeSpec, mode: str) -> list[tuple[int, int]]:
    sites = range(spec.num_sites)
    if mode == SINGLE_SPECIES:
        return list(itertools.combinations(sites, 2))
    if mode == TWO_SPECIES:
        anc = spec.ancilla_site
        if anc is None:
            raise ValueError("two-species mode needs a central ancilla")
        return [(min(anc, i), max(anc, i)) for i in sites if i != anc]
    raise ValueError(f"unknown mode {mode!r}")


def lattice_interaction_graph(model: PairModel, n: float, spec: LatticeSpec, mode: str = SINGLE_SPECIES) -> InteractionGraph:
    """Pair shifts on the lattice.

    Single-species atoms use levels (0, 1, r=2) and every pair carries the
    r-r shift. In two-species mode register atoms sit in s (level 2) and
    the ancilla in r (level 2 of a three-level ancilla); only
    ancilla-register s-r pairs interact, resonantly (n^4 scaling), and s-s
    pairs carry nothing.
    """
    pts = lattice_positions(spec)
    gamma = 1.0 / model.lifetime(n)
    shifts = {}
    if mode == SINGLE_SPECIES:
        for i, j in relevant_pairs(spec, mode):
            shifts[(i, j, 2, 2)] = pair_shift(model, n, math.dist(pts[i], pts[j]))
        return InteractionGraph(shifts, {"ryd_r": gamma})
    resonant = model.resonant()
    anc = spec.ancilla_site
    for i, j in relevant_pairs(spec, mode):
        b = pair_shift(resonant, n, math.dist(pts[i], pts[j]))
        shifts[(i, j, 2, 2)] = b
    return InteractionGraph(shifts, {"ryd_r": gamma, "ryd_s": gamma})


def pair_shift_values(model: PairModel, n: float, spec: LatticeSpec, mode: str = SINGLE_SPECIES) -> np.ndarray:
    return np.array(list(lattice_interaction_graph(model, n, spec, mode).shifts.values()))


@dataclass
class LatticeAverage:
    error: float
    error_mean_shift: float
    max_shift: float
    ceiling: float

    @property
    def ceiling_violated(self) -> bool:
        return self.max_shift >= self.ceiling

    @property
    def rule_discrepancy(self) -> float:
        """Ratio of the per-pair-average rule to the average-B-first rule."""
        return self.error / self.error_mean_shift


def lattice_average(model: PairModel, n: float, spec: LatticeSpec, mode: str = SINGLE_SPECIES, lifetime: float | None = None) -> LatticeAverage:
    """Both averaging rules plus the blockade-ceiling check."""
    tau = model.lifetime(n) if lifetime is None else lifetime
    shifts = pair_shift_values(model, n, spec, mode)
    if shifts.size == 0:
        raise ValueError("lattice has no interacting pairs")
    per_pair = float(np.mean([min_error_formula(b, tau) for b in shifts]))
    mean_b = float(min_error_formula(float(shifts.mean()), tau))
    return LatticeAverage(per_pair, mean_b, float(shifts.max()), blockade_ceiling(n, model.energy_scale))


def lattice_average_error(
    model: PairModel,
    n: float,
    spec: LatticeSpec,
    lifetime: float | None = None,
    mode: str = SINGLE_SPECIES,
    rule: str = "pair-error",
) -> float:
    """Mean over relevant pairs of the optimized two-atom gate error.

    ``rule="mean-shift"`` instead applies the error formula to the mean shift.
    """
    avg = lattice_average(model, n, spec, mode, lifetime)
    if rule == "pair-error":
        return avg.error
    if rule == "mean-shift":
        return avg.error_mean_shift
    raise ValueError(f"unknown averaging rule {rule!r}")
