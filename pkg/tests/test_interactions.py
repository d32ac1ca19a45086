import itertools
import json
import math

import numpy as np
import pytest

from rydgrover import interactions
from rydgrover.dynamics import min_error_formula
from rydgrover.interactions import (
    SINGLE_SPECIES,
    TWO_SPECIES,
    LatticeSpec,
    PairModel,
    blockade_ceiling,
    lattice_average,
    lattice_average_error,
    lattice_interaction_graph,
    lattice_positions,
    load_species,
    max_separation,
    pair_shift,
    pair_shift_values,
    quoted_max_separation,
)

CS = load_species("cs_like")
N = 75


def r_at_ratio(model, n, ratio):
    """Separation where C3/R^3 equals ``ratio`` times the Foerster defect."""
    return (model.c3_at(n) / (ratio * model.delta_at(n))) ** (1 / 3)


# --- pair shift ---------------------------------------------------------------------------


def test_resonant_limit_is_c3_over_r3():
    res = CS.resonant()
    for r in [1.0, 3.0, 10.0]:
        assert pair_shift(res, N, r) == pytest.approx(CS.c3_at(N) / r**3, rel=1e-15)


def test_van_der_waals_limit():
    r = r_at_ratio(CS, N, 0.01)
    c6 = CS.c3_at(N) ** 2 / CS.delta_at(N)
    assert pair_shift(CS, N, r) == pytest.approx(c6 / r**6, rel=1e-4)


def test_doubling_r_in_vdw_regime():
    r = r_at_ratio(CS, N, 0.01)
    assert pair_shift(CS, N, r) / pair_shift(CS, N, 2 * r) == pytest.approx(64, rel=0.01)


def test_shift_continuous_and_decreasing():
    r = np.geomspace(0.5, 200, 4000)
    b = np.array([pair_shift(CS, N, x) for x in r])
    assert np.all(np.diff(b) < 0)
    assert np.max(np.abs(np.diff(np.log(b)))) < 0.05


def test_shift_rejects_bad_separation():
    with pytest.raises(ValueError):
        pair_shift(CS, N, 0.0)


def test_n_scalings():
    assert CS.c3_at(2 * N) == pytest.approx(16 * CS.c3, rel=1e-12)
    assert CS.c6_at(2 * N) == pytest.approx(2**11 * CS.c6, rel=1e-12)
    assert CS.lifetime(2 * N) == pytest.approx(8 * CS.tau0, rel=1e-12)
    assert CS.delta_at(2 * N) == pytest.approx(CS.delta_at(N) / 8, rel=1e-12)


# --- lattice geometry -----------------------------------------------------------------------


def test_lattice_k4_max_separation():
    pts = lattice_positions(LatticeSpec.for_register(4, 5.0))
    assert max_separation(pts) == pytest.approx(math.sqrt(2) * 5, abs=1e-12)
    assert round(max_separation(pts), 3) == 7.071


@pytest.mark.parametrize("k", [4, 9, 16, 25, 36])
def test_max_separation_is_corner_to_corner(k):
    d = 2.5
    pts = lattice_positions(LatticeSpec.for_register(k, d))
    brute = max(math.dist(p, q) for p, q in itertools.combinations(pts, 2))
    assert max_separation(pts) == brute
    assert brute == pytest.approx(math.sqrt(2) * (math.sqrt(k) - 1) * d, rel=1e-12)


@pytest.mark.parametrize("k, expected", [(4, math.sqrt(6)), (9, 4.0), (16, math.sqrt(30))])
def test_quoted_max_separation(k, expected):
    assert quoted_max_separation(k, 1.0) == pytest.approx(expected, rel=1e-15)
    pts = lattice_positions(LatticeSpec.for_register(k, 1.0))
    assert quoted_max_separation(k, 1.0) > max_separation(pts)


def test_lattice_rejects_non_square():
    with pytest.raises(ValueError):
        LatticeSpec.for_register(8, 1.0)
    with pytest.raises(ValueError):
        LatticeSpec(2, -1.0)


@pytest.mark.parametrize("k, site", [(9, 4), (25, 12), (16, 5)])
def test_ancilla_site(k, site):
    assert LatticeSpec.for_register(k, 1.0, center_ancilla=True).ancilla_site == site


# --- blockade ceiling ---------------------------------------------------------------------


@pytest.mark.parametrize("n", [40, 60, 100])
def test_ceiling_scales_as_n_cubed(n):
    assert blockade_ceiling(2 * n) / blockade_ceiling(n) == pytest.approx(1 / 8, rel=0.05)


def test_ceiling_matches_level_spacing_derivative():
    # derivative of energy_scale / (2 n^2), taken midway between n-1 and n
    n = 75
    deriv = interactions.RYDBERG_ANGULAR / (n - 0.5) ** 3
    assert blockade_ceiling(n) == pytest.approx(deriv, rel=0.02)


def test_ceiling_monotone():
    vals = [blockade_ceiling(n) for n in range(30, 121)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_ceiling_domain():
    with pytest.raises(ValueError):
        blockade_ceiling(1)


# --- interaction graphs ---------------------------------------------------------------------


def test_graph_k4_pairs():
    vals = pair_shift_values(CS, N, LatticeSpec.for_register(4, 3.0))
    assert vals.size == 6
    assert len(np.unique(np.round(vals / vals.max(), 12))) == 2


def test_two_species_links():
    spec = LatticeSpec.for_register(9, 3.0, center_ancilla=True)
    g = lattice_interaction_graph(CS, N, spec, TWO_SPECIES)
    assert len(g.shifts) == 8
    assert all(4 in key[:2] for key in g.shifts)


def test_two_species_needs_ancilla():
    with pytest.raises(ValueError):
        pair_shift_values(CS, N, LatticeSpec.for_register(9, 3.0), TWO_SPECIES)


def test_graph_symmetric_and_positive():
    g = lattice_interaction_graph(CS, N, LatticeSpec.for_register(9, 3.0))
    for (i, j, a, b), v in g.shifts.items():
        assert v > 0
        assert g.shift(j, i, b, a) == v


def test_lattice_symmetry_invariance():
    spec = LatticeSpec.for_register(9, 2.0)
    pts = np.array(lattice_positions(spec))
    base = sorted(pair_shift_values(CS, N, spec))
    # rotate the grid by 90 degrees and recompute pair distances
    rot = pts[:, ::-1] * np.array([1, -1])
    dists = [math.dist(p, q) for p, q in itertools.combinations(rot, 2)]
    assert sorted(pair_shift(CS, N, r) for r in dists) == pytest.approx(base, rel=1e-14)


# --- lattice-averaged error -------------------------------------------------------------------


def test_average_is_mean_of_pair_formula():
    spec = LatticeSpec.for_register(4, 3.0)
    tau = CS.lifetime(N)
    dists = [math.dist(p, q) for p, q in itertools.combinations(lattice_positions(spec), 2)]
    expected = np.mean([min_error_formula(pair_shift(CS, N, r), tau) for r in dists])
    assert lattice_average_error(CS, N, spec) == pytest.approx(expected, rel=1e-14)


def test_k9_error_order_of_magnitude():
    e = lattice_average_error(CS, N, LatticeSpec.for_register(9, 3.0))
    assert 1e-3 <= e <= 1e-2


def test_error_grows_with_k():
    e9 = lattice_average_error(CS, N, LatticeSpec.for_register(9, 3.0))
    e16 = lattice_average_error(CS, N, LatticeSpec.for_register(16, 3.0))
    assert e16 >= e9


def test_d_scaling_in_vdw_regime():
    d = 4 * r_at_ratio(CS, N, 0.01)
    e1 = lattice_average_error(CS, N, LatticeSpec.for_register(4, d))
    e2 = lattice_average_error(CS, N, LatticeSpec.for_register(4, math.sqrt(2) * d))
    assert e2 / e1 == pytest.approx(4, rel=0.01)


def test_mean_shift_rule():
    spec = LatticeSpec.for_register(9, 3.0)
    avg = lattice_average(CS, N, spec)
    assert lattice_average_error(CS, N, spec, rule="mean-shift") == avg.error_mean_shift
    # convexity of B^(-2/3): averaging errors never undercuts the mean-shift rule
    assert avg.rule_discrepancy >= 1
    with pytest.raises(ValueError):
        lattice_average_error(CS, N, spec, rule="median")


def test_ceiling_flag():
    avg = lattice_average(CS, N, LatticeSpec.for_register(4, 0.3))
    assert avg.ceiling_violated
    assert not lattice_average(CS, N, LatticeSpec.for_register(4, 3.0)).ceiling_violated


# --- species files --------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["cs_like", "rb_like"])
def test_species_presets_load(name):
    m = load_species(name)
    assert isinstance(m, PairModel)
    assert PairModel.from_dict(json.loads(json.dumps(m.to_dict()))) == m


def test_species_file_roundtrip(tmp_path):
    p = tmp_path / "sp.json"
    p.write_text(json.dumps(CS.resonant().to_dict()))
    assert load_species(p) == CS.resonant()


@pytest.mark.parametrize(
    "payload",
    [
        {"name": "x", "n0": 60, "C3": 1.0, "C6": 1.0},  # no tau0
        {"name": "x", "n0": 60, "C3": 1.0, "tau0": 1e-4},  # neither C6 nor delta
        {"name": "x", "n0": -1, "C3": 1.0, "C6": 1.0, "tau0": 1e-4},
    ],
)
def test_species_rejects(payload):
    with pytest.raises(ValueError):
        PairModel.from_dict(payload)


def test_unknown_mode():
    with pytest.raises(ValueError):
        interactions.relevant_pairs(LatticeSpec(2, 1.0), "three-species")


def test_single_species_pairs_count():
    assert len(interactions.relevant_pairs(LatticeSpec(3, 1.0), SINGLE_SPECIES)) == 36
