import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hvrp_qaoa import qaoa
from hvrp_qaoa.errors import CapExceededError
from hvrp_qaoa.qaoa import DiagonalCost, QaoaParams
from hvrp_qaoa.qubo import QuadraticBinaryModel

from . import reference as ref


def random_diag(n, seed, integral=False):
    rng = np.random.default_rng(seed)
    e = rng.integers(0, 12, 2**n) if integral else rng.normal(size=2**n)
    return DiagonalCost(e.astype(float))


angles = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def test_params_vector_roundtrip():
    p = QaoaParams((0.1, 0.2), (0.3, 0.4))
    np.testing.assert_array_equal(p.to_vector(), [0.1, 0.2, 0.3, 0.4])
    assert QaoaParams.from_vector(p.to_vector()) == p
    assert p.p == 2


@pytest.mark.parametrize(
    "gammas, betas",
    [((), ()), ((0.1,), (0.1, 0.2)), ((float("nan"),), (0.0,))],
)
def test_params_validation(gammas, betas):
    with pytest.raises(ValueError):
        QaoaParams(gammas, betas)


@pytest.mark.parametrize("x", [[], [1.0, 2.0, 3.0], [[1.0, 2.0]]])
def test_params_from_bad_vector(x):
    with pytest.raises(ValueError):
        QaoaParams.from_vector(x)


@pytest.mark.parametrize("energies", [[1.0, 2.0, 3.0], [1.0, float("inf")], []])
def test_diagonal_validation(energies):
    with pytest.raises(ValueError):
        DiagonalCost(energies)


def test_diagonal_properties():
    d = DiagonalCost([0.0, 1.0, 2.0, 5.0])
    assert (d.n, d.min, d.max, d.mean) == (2, 0.0, 5.0, 2.0)
    assert d.is_integral
    assert not DiagonalCost([0.5, 1.0]).is_integral
    assert not d.energies.flags.writeable


def test_from_model_uses_little_endian_states():
    m = QuadraticBinaryModel(np.array([1.0, 10.0]), np.zeros((2, 2)))
    np.testing.assert_array_equal(DiagonalCost.from_model(m).energies, [0.0, 1.0, 10.0, 11.0])


def test_cap():
    with pytest.raises(CapExceededError):
        qaoa.prepare_plus(qaoa.MAX_QUBITS + 1)
    with pytest.raises(CapExceededError):
        DiagonalCost.from_model(QuadraticBinaryModel.zeros(qaoa.MAX_QUBITS + 1))


def test_plus_state():
    psi = qaoa.prepare_plus(3)
    np.testing.assert_allclose(psi, np.full(8, 8**-0.5))


@pytest.mark.parametrize("n, p", [(1, 1), (2, 2), (3, 1), (4, 3), (5, 2)])
def test_state_matches_dense_reference(n, p):
    d = random_diag(n, n * 10 + p)
    rng = np.random.default_rng(p)
    gammas, betas = rng.uniform(-3, 3, p), rng.uniform(-3, 3, p)
    got = qaoa.evolve(d, QaoaParams(gammas, betas))
    np.testing.assert_allclose(got, ref.dense_state(d.energies, gammas, betas), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(angles, angles), min_size=1, max_size=3), st.integers(0, 100))
def test_expectation_matches_dense_reference(layers, seed):
    d = random_diag(4, seed)
    g, b = zip(*layers)
    assert qaoa.expectation(d, QaoaParams(g, b)) == pytest.approx(ref.dense_expectation(d.energies, g, b), abs=1e-10)


def test_single_qubit_closed_form():
    # E = (e0 + e1)/2 + (e1 - e0)/2 * sin(2 beta) * sin(gamma (e1 - e0))
    e0, e1, g, b = 0.0, 1.0, 0.7, 0.3
    expected = (e0 + e1) / 2 + (e1 - e0) / 2 * math.sin(2 * b) * math.sin(g * (e1 - e0))
    assert qaoa.expectation(DiagonalCost([e0, e1]), QaoaParams((g,), (b,))) == pytest.approx(expected, abs=1e-14)


def test_zero_angles_give_uniform_distribution():
    d = random_diag(5, 1)
    probs = qaoa.distribution(d, QaoaParams((0.0,), (0.0,)))
    np.testing.assert_allclose(probs, 1 / 32)
    assert qaoa.expectation(d, QaoaParams((0.0,), (0.0,))) == pytest.approx(d.mean)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(angles, angles), min_size=1, max_size=3), st.integers(0, 100))
def test_norm_and_expectation_consistency(layers, seed):
    d = random_diag(6, seed)
    params = QaoaParams(*zip(*layers))
    probs = qaoa.distribution(d, params)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert probs @ d.energies == pytest.approx(qaoa.expectation(d, params), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(angles, angles), min_size=1, max_size=3), st.integers(0, 100))
def test_integer_spectrum_periodicity(layers, seed):
    d = random_diag(5, seed, integral=True)
    g, b = map(np.array, zip(*layers))
    base = qaoa.expectation(d, QaoaParams(g, b))
    k = seed % len(g)
    g2, b2 = g.copy(), b.copy()
    g2[k] += 2 * math.pi
    b2[k] += math.pi
    assert qaoa.expectation(d, QaoaParams(g2, b)) == pytest.approx(base, abs=1e-9)
    assert qaoa.expectation(d, QaoaParams(g, b2)) == pytest.approx(base, abs=1e-9)


def test_zero_layer_padding_keeps_the_state():
    d = random_diag(6, 2)
    p = QaoaParams((0.3, 1.1), (0.4, 2.0))
    padded = QaoaParams(p.gammas + (0.0,), p.betas + (0.0,))
    np.testing.assert_allclose(qaoa.evolve(d, padded), qaoa.evolve(d, p), atol=1e-15)


def test_sampling_is_seeded_and_complete():
    d = random_diag(4, 3)
    params = QaoaParams((0.8,), (0.4,))
    a = qaoa.sample(d, params, 5000, seed=1)
    assert a == qaoa.sample(d, params, 5000, seed=1)
    assert sum(a.values()) == 5000
    probs = qaoa.distribution(d, params)
    freq = np.zeros(16)
    for z, c in a.items():
        freq[z] = c / 5000
    assert np.abs(freq - probs).max() < 0.03
    with pytest.raises(ValueError):
        qaoa.sample(d, params, 0)


def test_success_probability():
    d = DiagonalCost([0.0, 1.0, 1.0, 2.0])
    params = QaoaParams((0.0,), (0.0,))
    assert qaoa.success_probability(d, params, [True, False, False, True]) == pytest.approx(0.5)


def test_grid_scan_matches_pointwise():
    d = random_diag(4, 5, integral=True)
    gammas, betas, grid = qaoa.grid_scan(d, (0.0, 1.0), (0.0, 2.0), (5, 4))
    assert grid.shape == (5, 4)
    for i in (0, 2, 4):
        for j in (0, 3):
            assert grid[i, j] == pytest.approx(qaoa.expectation(d, QaoaParams((gammas[i],), (betas[j],))), abs=1e-12)
    with pytest.raises(ValueError):
        qaoa.grid_scan(d, resolution=1)


def test_central_difference_on_polynomial():
    f = lambda x: x[0] ** 3 + 2 * x[0] * x[1]  # noqa: E731
    g = qaoa.central_difference(f, np.array([1.0, 2.0]), 1e-4)
    np.testing.assert_allclose(g, [3 + 4, 2], rtol=1e-7)
    with pytest.raises(ValueError):
        qaoa.central_difference(f, np.zeros(2), 0.0)


def test_gradient_matches_single_qubit_derivative():
    g0, b0 = 0.7, 0.3
    grad = qaoa.gradient_fd(DiagonalCost([0.0, 1.0]), QaoaParams((g0,), (b0,)))
    dg = 0.5 * math.sin(2 * b0) * math.cos(g0)
    db = math.cos(2 * b0) * math.sin(g0)
    np.testing.assert_allclose(grad, [dg, db], atol=1e-7)


def test_grid_and_distribution_csv(tmp_path):
    d = random_diag(3, 0, integral=True)
    gammas, betas, grid = qaoa.grid_scan(d, resolution=3)
    qaoa.write_grid_csv(tmp_path / "g.csv", gammas, betas, grid)
    rows = list(csv.DictReader((tmp_path / "g.csv").open()))
    assert len(rows) == 9 and set(rows[0]) == {"gamma", "beta", "energy"}
    probs = qaoa.distribution(d, QaoaParams((0.5,), (0.2,)))
    qaoa.write_distribution_csv(tmp_path / "d.csv", probs, d.energies, np.ones(8, bool), min_probability=0.1)
    rows = list(csv.DictReader((tmp_path / "d.csv").open()))
    assert len(rows) == int((probs >= 0.1).sum())
    assert all(int(r["bin"]) == math.floor(float(r["energy"])) for r in rows)
