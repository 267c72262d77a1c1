"""Exhaustive enumeration: spectra, ground states, feasible sets, cost rescaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .decode import feasible_batch
from .errors import CapExceededError
from .model import HvrpInstance
from .qubo import QuadraticBinaryModel, VariableLayout

__all__ = [
    "DEFAULT_CAP",
    "Spectrum",
    "CostScale",
    "DegenerateScaleError",
    "enumerate_spectrum",
    "rescale_cost",
    "zero_set",
    "feasible_mask",
    "floor_bins",
    "bitstring",
    "write_spectrum_csv",
]

DEFAULT_CAP = 24
# ground states and integer bins are decided with this absolute slack
ENERGY_ATOL = 1e-9


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CapExceededError(f"{n} variables exceed the enumeration cap of {cap}")


@dataclass(frozen=True, eq=False)
class Spectrum:
    energies: np.ndarray  # one value per basis state, little-endian index

    @property
    def n(self) -> int:
        return int(self.energies.size).bit_length() - 1

    @property
    def ground_energy(self) -> float:
        return float(self.energies.min())

    @property
    def ground_states(self) -> np.ndarray:
        return np.flatnonzero(self.energies <= self.ground_energy + ENERGY_ATOL)

    def summary(self, decimals: int = 9) -> list[tuple[float, int]]:
        """Sorted distinct energies (rounded) with multiplicities."""
        vals, counts = np.unique(np.round(self.energies, decimals), return_counts=True)
        return [(float(v), int(c)) for v, c in zip(vals, counts)]


def enumerate_spectrum(model: QuadraticBinaryModel, cap: int = DEFAULT_CAP) -> Spectrum:
    """Energies of all ``2**n`` basis states.

    Raises:
        CapExceededError: ``model.n > cap``.
    """
    _check_cap(model.n, cap)
    return Spectrum(model.energies())


class DegenerateScaleError(ValueError):
    pass


@dataclass(frozen=True)
class CostScale:
    """Affine map ``raw -> (raw - raw_min) / (raw_max - raw_min)``."""

    raw_min: float
    raw_max: float

    @property
    def span(self) -> float:
        return self.raw_max - self.raw_min

    def apply(self, raw):
        return (np.asarray(raw, dtype=float) - self.raw_min) / self.span

    def invert(self, scaled):
        return np.asarray(scaled, dtype=float) * self.span + self.raw_min


def rescale_cost(cost_model: QuadraticBinaryModel, cap: int = DEFAULT_CAP) -> tuple[CostScale, QuadraticBinaryModel]:
    """Min-max map of a cost model onto [0, 1] over every bitstring.

    Raises:
        DegenerateScaleError: the cost is the same for every bitstring.
    """
    e = enumerate_spectrum(cost_model, cap).energies
    lo, hi = float(e.min()), float(e.max())
    if not hi > lo:
        raise DegenerateScaleError(f"cost is constant ({lo}); nothing to rescale")
    scale = CostScale(lo, hi)
    return scale, cost_model.scaled(1.0 / scale.span, -lo)


def zero_set(model: QuadraticBinaryModel, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Mask of basis states whose (non-negative penalty) energy is zero."""
    return np.abs(enumerate_spectrum(model, cap).energies) <= ENERGY_ATOL


def feasible_mask(instance: HvrpInstance, lay: VariableLayout, strict: bool = True, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Boolean mask over basis states: does the decoded plan pass validation?

    Results are cached per (instance, layout, strict); the returned array is
    read-only.
    """
    _check_cap(lay.total, cap)
    return _feasible_mask_cached(instance, lay, strict)


@lru_cache(maxsize=16)
def _feasible_mask_cached(instance: HvrpInstance, lay: VariableLayout, strict: bool) -> np.ndarray:
    n = lay.total
    out = np.empty(2**n, dtype=bool)
    chunk = 1 << 16
    shifts = np.arange(n, dtype=np.int64)
    for lo in range(0, 2**n, chunk):
        z = np.arange(lo, min(lo + chunk, 2**n), dtype=np.int64)
        bits = ((z[:, None] >> shifts) & 1).astype(np.int8)
        out[lo : lo + z.size] = feasible_batch(instance, lay, bits, strict)
    out.flags.writeable = False
    return out


def floor_bins(energies, probabilities, atol: float = ENERGY_ATOL) -> dict[int, float]:
    """Probability mass per ``floor(energy)``.

    Energies within ``atol`` below an integer count as that integer, so
    rounding noise in an exact penalty value does not drop it a bin.

    Raises:
        ValueError: probabilities do not sum to 1 within 1e-9.
    """
    e = np.asarray(energies, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if e.shape != p.shape:
        raise ValueError("energies and probabilities differ in shape")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {p.sum()!r}, expected 1")
    keys = np.floor(e + atol).astype(np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    mass = np.bincount(inv.ravel(), weights=p.ravel())
    return {int(k): float(m) for k, m in zip(uniq, mass)}


def bitstring(index: int, n: int) -> str:
    """Character ``k`` is variable ``k`` (qubit order, not binary-numeral order)."""
    return "".join("1" if (int(index) >> k) & 1 else "0" for k in range(n))


def write_spectrum_csv(path, spectrum: Spectrum, feasible: np.ndarray | None = None) -> None:
    """CSV with header ``bitstring,energy,feasible``."""
    n = spectrum.n
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bitstring", "energy", "feasible"])
        for z, e in enumerate(spectrum.energies):
            f = "" if feasible is None else int(feasible[z])
            w.writerow([bitstring(z, n), repr(float(e)), f])


def count_slack_encodings(capacity: int, load: int) -> int:
    """Number of slack register settings whose value equals ``load``."""
    from .qubo import slack_weights

    w = slack_weights(capacity)
    return sum(1 for z in range(2 ** len(w)) if math.isclose(((z >> np.arange(len(w))) & 1) @ w, load))
