"""Exact statevector simulation of QAOA for diagonal cost Hamiltonians.

Basis state ``z`` stores qubit ``k`` in bit ``k`` of ``z`` (little-endian), so
masks over basis states line up with model variable indices.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import CapExceededError

__all__ = [
    "MAX_QUBITS",
    "QaoaParams",
    "DiagonalCost",
    "prepare_plus",
    "evolve",
    "expectation",
    "distribution",
    "sample",
    "success_probability",
    "grid_scan",
    "gradient_fd",
    "central_difference",
    "write_grid_csv",
    "write_distribution_csv",
]

MAX_QUBITS = 24


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        g = tuple(float(x) for x in np.atleast_1d(self.gammas))
        b = tuple(float(x) for x in np.atleast_1d(self.betas))
        if len(g) != len(b) or not g:
            raise ValueError(f"need p >= 1 gammas and betas of equal length, got {len(g)} and {len(b)}")
        if not all(math.isfinite(x) for x in g + b):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "betas", b)

    @property
    def p(self) -> int:
        return len(self.gammas)

    def to_vector(self) -> np.ndarray:
        """``[gamma_1..gamma_p, beta_1..beta_p]``."""
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "QaoaParams":
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size % 2 or x.size == 0:
            raise ValueError(f"angle vector must have even length 2p, got shape {x.shape}")
        p = x.size // 2
        return cls(tuple(x[:p]), tuple(x[p:]))


@dataclass(frozen=True, eq=False)
class DiagonalCost:
    """Energy of every basis state of an ``n``-qubit register."""

    energies: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        size = e.size
        if e.ndim != 1 or size == 0 or size & (size - 1):
            raise ValueError("diagonal length must be a power of two")
        if not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite")
        e.flags.writeable = False
        object.__setattr__(self, "energies", e)

    @classmethod
    def from_model(cls, model) -> "DiagonalCost":
        _check_qubits(model.n)
        return cls(model.energies())

    @property
    def n(self) -> int:
        return self.energies.size.bit_length() - 1

    @property
    def min(self) -> float:
        return float(self.energies.min())

    @property
    def max(self) -> float:
        return float(self.energies.max())

    @property
    def mean(self) -> float:
        return float(self.energies.mean())

    @property
    def is_integral(self) -> bool:
        return bool(np.all(np.abs(self.energies - np.rint(self.energies)) <= 1e-9))


def _check_qubits(n: int) -> None:
    if n > MAX_QUBITS:
        raise CapExceededError(f"{n} qubits exceed the statevector cap of {MAX_QUBITS}")


def prepare_plus(n: int) -> np.ndarray:
    """Uniform superposition ``|+>^n``."""
    _check_qubits(n)
    return np.full(2**n, 2.0 ** (-n / 2), dtype=complex)


@numba.njit(cache=True)
def _mix(state, n, c, s):
    """In place: ``(a, b) -> (c a - i s b, -i s a + c b)`` over every qubit's pairs, ascending."""
    size = state.size
    for k in range(n):
        h = 1 << k
        for base in range(0, size, 2 * h):
            for j in range(base, base + h):
                a = state[j]
                b = state[j + h]
                state[j] = complex(c * a.real + s * b.imag, c * a.imag - s * b.real)
                state[j + h] = complex(c * b.real + s * a.imag, c * b.imag - s * a.real)


@numba.njit(cache=True)
def _phase(state, energies, gamma):
    for j in range(state.size):
        t = gamma * energies[j]
        state[j] *= complex(math.cos(t), -math.sin(t))


@numba.njit(cache=True)
def _weighted_norm(state, energies):
    acc = 0.0
    for j in range(state.size):
        a = state[j]
        acc += (a.real * a.real + a.imag * a.imag) * energies[j]
    return acc


def _apply_mixer(state: np.ndarray, n: int, beta: float) -> None:
    """In place: ``exp(-i beta X)`` on every qubit."""
    if beta != 0.0:
        _mix(state, n, math.cos(beta), math.sin(beta))


def evolve(diag: DiagonalCost, params: QaoaParams) -> np.ndarray:
    """Variational state: for each layer, the cost phase then the mixer."""
    n = diag.n
    state = prepare_plus(n)
    e = diag.energies
    for g, b in zip(params.gammas, params.betas):
        if g != 0.0:
            _phase(state, e, g)
        _apply_mixer(state, n, b)
    return state


def distribution(diag: DiagonalCost, params: QaoaParams) -> np.ndarray:
    state = evolve(diag, params)
    return state.real**2 + state.imag**2


def expectation(diag: DiagonalCost, params: QaoaParams) -> float:
    return float(_weighted_norm(evolve(diag, params), diag.energies))


def sample(diag: DiagonalCost, params: QaoaParams, shots: int, seed=None) -> dict[int, int]:
    """Measurement counts keyed by basis-state index."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = distribution(diag, params)
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p / p.sum())
    idx = np.flatnonzero(counts)
    return {int(z): int(counts[z]) for z in idx}


def success_probability(diag: DiagonalCost, params: QaoaParams, mask: np.ndarray) -> float:
    """Probability mass on the basis states selected by ``mask``."""
    p = distribution(diag, params)
    return float(p[np.asarray(mask, dtype=bool)].sum())


def grid_scan(
    diag: DiagonalCost,
    gamma_range: tuple[float, float] = (0.0, 2 * math.pi),
    beta_range: tuple[float, float] = (0.0, math.pi),
    resolution: int | tuple[int, int] = 64,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """p = 1 expectation on an inclusive lattice.

    Returns:
        ``(gammas, betas, energies)`` with ``energies[i, j]`` at
        ``(gammas[i], betas[j])``.
    """
    rg, rb = (resolution, resolution) if np.isscalar(resolution) else resolution
    if rg < 2 or rb < 2:
        raise ValueError("resolution must be >= 2 per axis")
    gammas = np.linspace(*gamma_range, rg)
    betas = np.linspace(*beta_range, rb)
    out = np.empty((rg, rb))
    n = diag.n
    e = diag.energies
    for i, g in enumerate(gammas):
        phased = prepare_plus(n)
        _phase(phased, e, float(g))
        for j, b in enumerate(betas):
            state = phased.copy()
            _apply_mixer(state, n, float(b))
            out[i, j] = _weighted_norm(state, e)
    return gammas, betas, out


def central_difference(fun, x, step: float) -> np.ndarray:
    """Central finite differences of a scalar function of a vector."""
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += step
        xm[k] -= step
        grad[k] = (fun(xp) - fun(xm)) / (2 * step)
    return grad


def gradient_fd(diag: DiagonalCost, params: QaoaParams, step: float = 1e-4) -> np.ndarray:
    """Central finite-difference gradient of the expectation, in ``to_vector`` order."""
    return central_difference(lambda x: expectation(diag, QaoaParams.from_vector(x)), params.to_vector(), step)


def write_grid_csv(path, gammas, betas, energies) -> None:
    """CSV with header ``gamma,beta,energy``, gamma-major."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "beta", "energy"])
        for i, g in enumerate(gammas):
            for j, b in enumerate(betas):
                w.writerow([repr(float(g)), repr(float(b)), repr(float(energies[i, j]))])


def write_distribution_csv(path, probs, energies, feasible=None, min_probability: float = 0.0) -> None:
    """CSV ``bitstring,probability,energy,bin,feasible``; rows below ``min_probability`` are skipped."""
    from .oracle import ENERGY_ATOL, bitstring

    n = int(np.asarray(probs).size).bit_length() - 1
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bitstring", "probability", "energy", "bin", "feasible"])
        for z in np.flatnonzero(np.asarray(probs) >= min_probability):
            e = float(energies[z])
            f = "" if feasible is None else int(feasible[z])
            w.writerow([bitstring(z, n), repr(float(probs[z])), repr(e), int(math.floor(e + ENERGY_ATOL)), f])
