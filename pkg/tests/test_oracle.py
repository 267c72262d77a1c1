import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvrp_qaoa import oracle, qubo
from hvrp_qaoa.decode import RoutePlan, classical_cost, decode_bits, validate
from hvrp_qaoa.errors import CapExceededError
from hvrp_qaoa.model import builtin_instance
from hvrp_qaoa.qubo import QuadraticBinaryModel, assemble, build_cost_terms, layout

from . import reference as ref


def test_spectrum_matches_direct_evaluation():
    rng = np.random.default_rng(0)
    m = QuadraticBinaryModel(rng.normal(size=6), np.triu(rng.normal(size=(6, 6)), 1), 0.3)
    spectrum = oracle.enumerate_spectrum(m)
    np.testing.assert_allclose(spectrum.energies, [m.evaluate(b) for b in ref.all_bits(6)])
    assert spectrum.n == 6
    assert spectrum.ground_energy == pytest.approx(min(m.evaluate(b) for b in ref.all_bits(6)))


def test_ground_states_and_summary():
    # x0 + x1 - 2 x0 x1: zero on 00 and 11
    m = QuadraticBinaryModel(np.array([1.0, 1.0]), np.array([[0.0, -2.0], [0.0, 0.0]]))
    spectrum = oracle.enumerate_spectrum(m)
    assert list(spectrum.ground_states) == [0, 3]
    assert spectrum.summary() == [(0.0, 2), (1.0, 2)]


def test_cap_is_enforced():
    with pytest.raises(CapExceededError):
        oracle.enumerate_spectrum(QuadraticBinaryModel.zeros(5), cap=4)
    inst = builtin_instance("I")
    with pytest.raises(CapExceededError):
        oracle.feasible_mask(inst, layout(inst), cap=10)


@pytest.mark.parametrize("name, count", [("I", 6), ("II", 24), ("III", 24)])
def test_zero_set_equals_feasible_set(name, count):
    inst = builtin_instance(name)
    model, lay = assemble(inst)
    zero = oracle.zero_set(model)
    feasible = oracle.feasible_mask(inst, lay)
    np.testing.assert_array_equal(zero, feasible)
    assert feasible.sum() == count


def test_feasible_states_enumerate_all_tours_of_instance_i():
    inst = builtin_instance("I")
    lay = layout(inst)
    found = set()
    for z in np.flatnonzero(oracle.feasible_mask(inst, lay)):
        plan, _ = decode_bits(lay, ref.all_bits(11)[z])
        found.add(plan.routes[0])
    assert found == set(itertools.permutations((1, 2, 3)))


def test_feasible_mask_is_read_only_and_cached():
    inst = builtin_instance("I")
    a = oracle.feasible_mask(inst, layout(inst))
    assert oracle.feasible_mask(inst, layout(inst)) is a
    with pytest.raises(ValueError):
        a[0] = True


def test_rescale_cost_maps_onto_unit_interval():
    inst = builtin_instance("I")
    cost = build_cost_terms(inst)
    scale, rescaled = oracle.rescale_cost(cost)
    e = rescaled.energies()
    assert e.min() == pytest.approx(0.0, abs=1e-12)
    assert e.max() == pytest.approx(1.0, abs=1e-12)
    raw = cost.energies()
    np.testing.assert_allclose(scale.invert(e), raw, rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(scale.apply(raw), e, atol=1e-12)


def test_rescale_rejects_constant_cost():
    with pytest.raises(oracle.DegenerateScaleError):
        oracle.rescale_cost(QuadraticBinaryModel.zeros(3))


def test_full_mode_ground_states_are_the_cheapest_tours():
    inst = builtin_instance("I")
    assembled = assemble(inst, mode=qubo.FULL)
    spectrum = oracle.enumerate_spectrum(assembled.model)
    lay = assembled.layout
    costs = {
        perm: classical_cost(inst, RoutePlan.from_routes([list(perm)]))
        for perm in itertools.permutations((1, 2, 3))
    }
    best = min(costs.values())
    ground_routes = set()
    for z in spectrum.ground_states:
        plan, assign = decode_bits(lay, ref.all_bits(11)[z])
        assert validate(inst, plan, assign.slack_values)
        ground_routes.add(plan.routes[0])
    assert ground_routes == {r for r, c in costs.items() if c == pytest.approx(best, rel=1e-12)}
    assert len(ground_routes) == 2


def test_floor_bins():
    e = np.array([0.0, 0.5, 1.0 - 1e-12, 2.3])
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert oracle.floor_bins(e, p) == pytest.approx({0: 0.3, 1: 0.3, 2: 0.4})


@pytest.mark.parametrize("p", [[0.5, 0.4], [0.6, 0.6]])
def test_floor_bins_rejects_unnormalised(p):
    with pytest.raises(ValueError):
        oracle.floor_bins([0.0, 1.0], p)


def test_floor_bins_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        oracle.floor_bins([0.0, 1.0], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=30), st.integers(0, 1000))
def test_floor_bins_conserve_mass(energies, seed):
    w = np.random.default_rng(seed).random(len(energies)) + 1e-3
    bins = oracle.floor_bins(energies, w / w.sum())
    assert sum(bins.values()) == pytest.approx(1.0)
    assert set(bins) == {int(np.floor(e + oracle.ENERGY_ATOL)) for e in energies}


def test_bitstring_is_qubit_ordered():
    assert oracle.bitstring(1, 4) == "1000"
    assert oracle.bitstring(6, 3) == "011"


def test_spectrum_csv(tmp_path):
    inst = builtin_instance("I")
    model, lay = assemble(inst)
    spectrum = oracle.enumerate_spectrum(model)
    path = tmp_path / "s.csv"
    oracle.write_spectrum_csv(path, spectrum, oracle.feasible_mask(inst, lay))
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 2048
    assert sum(int(r["feasible"]) for r in rows) == 6
    assert all(float(r["energy"]) == 0 for r in rows if r["feasible"] == "1")


@pytest.mark.parametrize("capacity, load, count", [(3, 2, 1), (5, 2, 2), (5, 5, 1), (6, 3, 2), (4, 5, 0)])
def test_count_slack_encodings(capacity, load, count):
    assert oracle.count_slack_encodings(capacity, load) == count
