"""Problem instances: heterogeneous vehicle routing and knapsack.

Instances are immutable. Built-in HVRP instances live as JSON files in the
``instances`` package directory and are loaded through the same validating
reader used for user files.

Instance file schema (JSON)::

    {
      "name": "I",
      "depot": [x, y],                              # km
      "customers": [{"id": 1, "pos": [x, y], "demand": 1}, ...],
      "vehicles": [{"id": 1, "capacity": 3,
                    "fixed_cost": 75000.0,          # EUR per departure
                    "cost_per_km": 0.3432}, ...],   # EUR/km
      "notes": "free text"                          # optional
    }

Customer ids must be contiguous ``1..N0``, vehicle ids ``1..V``. Unknown keys
are rejected at every level.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

__all__ = [
    "Customer",
    "Vehicle",
    "HvrpInstance",
    "KnapsackInstance",
    "InstanceError",
    "InstanceParseError",
    "InstanceValidationError",
    "TRUCK_TYPES",
    "builtin_instance",
    "builtin_knapsack_demo",
    "load_instance",
    "save_instance",
    "instance_from_dict",
    "instance_to_dict",
    "distance_matrix",
    "edge_costs",
]

# Truck cost data: road cost converted from EUR/100 km to EUR/km, chassis
# price used directly as the fixed cost per departure.
TRUCK_TYPES = {
    "rt": {"fixed_cost": 75_000.0, "cost_per_km": 34.32 / 100, "capacity": 3},
    "ts": {"fixed_cost": 150_000.0, "cost_per_km": 41.4 / 100, "capacity": 4},
}

BUILTIN_NAMES = ("I", "II", "III")


class InstanceError(ValueError):
    """Base class for instance file problems; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class InstanceParseError(InstanceError):
    """The file is not valid JSON or does not follow the schema shape."""


class InstanceValidationError(InstanceError):
    """The file parses but violates an instance invariant."""


@dataclass(frozen=True)
class Customer:
    id: int
    position: tuple[float, float]
    demand: int


@dataclass(frozen=True)
class Vehicle:
    id: int
    capacity: int
    fixed_cost: float
    cost_per_km: float


@dataclass(frozen=True)
class HvrpInstance:
    """A single-depot HVRP instance with an explicit list of vehicles."""

    name: str
    customers: tuple[Customer, ...]
    vehicles: tuple[Vehicle, ...]
    depot_position: tuple[float, float] = (0.0, 0.0)
    notes: str = ""

    def __post_init__(self):
        object.__setattr__(self, "customers", tuple(self.customers))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "depot_position", _point(self.depot_position, "depot"))
        _validate(self)

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def demands(self) -> tuple[int, ...]:
        return tuple(c.demand for c in self.customers)

    @property
    def capacities(self) -> tuple[int, ...]:
        return tuple(v.capacity for v in self.vehicles)


@dataclass(frozen=True)
class KnapsackInstance:
    weights: tuple[int, ...]
    values: tuple[float, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(int(w) for w in self.weights))
        object.__setattr__(self, "values", tuple(float(c) for c in self.values))
        if not self.weights:
            raise ValueError("knapsack needs at least one item")
        if len(self.weights) != len(self.values):
            raise ValueError("weights and values must have equal length")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive integers")
        if any(c < 0 for c in self.values):
            raise ValueError("values must be non-negative")
        if self.capacity < 1:
            raise ValueError("capacity must be a positive integer")

    @property
    def n_items(self) -> int:
        return len(self.weights)


def _point(value, path: str) -> tuple[float, float]:
    try:
        x, y = value
        pt = (float(x), float(y))
    except (TypeError, ValueError):
        raise InstanceParseError(path, "expected a pair of numbers [x, y]") from None
    if not all(math.isfinite(c) for c in pt):
        raise InstanceValidationError(path, "coordinates must be finite")
    return pt


def _validate(inst: HvrpInstance) -> None:
    if not inst.customers:
        raise InstanceValidationError("customers", "at least one customer is required")
    if not inst.vehicles:
        raise InstanceValidationError("vehicles", "at least one vehicle is required")
    for k, c in enumerate(inst.customers):
        where = f"customers[{k}]"
        if c.id != k + 1:
            raise InstanceValidationError(f"{where}.id", f"ids must be contiguous 1..N0, got {c.id}")
        if not isinstance(c.demand, (int, np.integer)) or c.demand < 1:
            raise InstanceValidationError(
                f"{where}.demand", f"customer {c.id} needs a positive integer demand, got {c.demand!r}"
            )
    for k, v in enumerate(inst.vehicles):
        where = f"vehicles[{k}]"
        if v.id != k + 1:
            raise InstanceValidationError(f"{where}.id", f"ids must be contiguous 1..V, got {v.id}")
        if not isinstance(v.capacity, (int, np.integer)) or v.capacity < 1:
            raise InstanceValidationError(f"{where}.capacity", f"must be a positive integer, got {v.capacity!r}")
        if not v.fixed_cost >= 0:
            raise InstanceValidationError(f"{where}.fixed_cost", "must be non-negative")
        if not v.cost_per_km > 0:
            raise InstanceValidationError(f"{where}.cost_per_km", "must be positive")
    if sum(inst.capacities) < sum(inst.demands):
        raise InstanceValidationError(
            "vehicles",
            f"total capacity {sum(inst.capacities)} is below total demand {sum(inst.demands)}",
        )


# --- serialization ----------------------------------------------------------

_TOP_KEYS = {"name", "depot", "customers", "vehicles"}
_CUSTOMER_KEYS = {"id", "pos", "demand"}
_VEHICLE_KEYS = {"id", "capacity", "fixed_cost", "cost_per_km"}


def _check_keys(obj: Any, required: set, path: str, optional: frozenset = frozenset()) -> None:
    if not isinstance(obj, dict):
        raise InstanceParseError(path or "<root>", "expected an object")
    missing = required - obj.keys()
    if missing:
        raise InstanceParseError(f"{path}{'.' if path else ''}{sorted(missing)[0]}", "missing required key")
    unknown = obj.keys() - required - optional
    if unknown:
        raise InstanceParseError(f"{path}{'.' if path else ''}{sorted(unknown)[0]}", "unknown key")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceParseError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceParseError(path, f"expected an integer, got {value!r}")
    return value


def instance_from_dict(data: dict) -> HvrpInstance:
    """Build an instance from the JSON document structure, checking the schema."""
    _check_keys(data, _TOP_KEYS, "", optional=frozenset({"notes"}))
    if not isinstance(data["name"], str):
        raise InstanceParseError("name", "expected a string")
    for key in ("customers", "vehicles"):
        if not isinstance(data[key], list):
            raise InstanceParseError(key, "expected a list")

    customers = []
    for k, c in enumerate(data["customers"]):
        where = f"customers[{k}]"
        _check_keys(c, _CUSTOMER_KEYS, where)
        customers.append(
            Customer(
                id=_integer(c["id"], f"{where}.id"),
                position=_point(c["pos"], f"{where}.pos"),
                demand=_integer(c["demand"], f"{where}.demand"),
            )
        )
    vehicles = []
    for k, v in enumerate(data["vehicles"]):
        where = f"vehicles[{k}]"
        _check_keys(v, _VEHICLE_KEYS, where)
        vehicles.append(
            Vehicle(
                id=_integer(v["id"], f"{where}.id"),
                capacity=_integer(v["capacity"], f"{where}.capacity"),
                fixed_cost=_number(v["fixed_cost"], f"{where}.fixed_cost"),
                cost_per_km=_number(v["cost_per_km"], f"{where}.cost_per_km"),
            )
        )
    notes = data.get("notes", "")
    if not isinstance(notes, str):
        raise InstanceParseError("notes", "expected a string")
    return HvrpInstance(
        name=data["name"],
        customers=tuple(customers),
        vehicles=tuple(vehicles),
        depot_position=_point(data["depot"], "depot"),
        notes=notes,
    )


def instance_to_dict(instance: HvrpInstance) -> dict:
    out = {
        "name": instance.name,
        "depot": list(instance.depot_position),
        "customers": [{"id": c.id, "pos": list(c.position), "demand": c.demand} for c in instance.customers],
        "vehicles": [
            {"id": v.id, "capacity": v.capacity, "fixed_cost": v.fixed_cost, "cost_per_km": v.cost_per_km}
            for v in instance.vehicles
        ],
    }
    if instance.notes:
        out["notes"] = instance.notes
    return out


def load_instance(path) -> HvrpInstance:
    """Read and validate an instance file.

    Raises:
        InstanceParseError: malformed JSON, wrong shape, missing or unknown keys.
        InstanceValidationError: an instance invariant does not hold.
    """
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError("<root>", f"invalid JSON ({exc})") from None
    return instance_from_dict(data)


def save_instance(instance: HvrpInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")


def builtin_instance(which: str) -> HvrpInstance:
    """Return one of the three benchmark instances ``"I"``, ``"II"`` or ``"III"``.

    Coordinates are synthetic (documented in each file's ``notes``); demands
    are one item per customer.
    """
    key = str(which).upper()
    if key not in BUILTIN_NAMES:
        raise KeyError(f"unknown built-in instance {which!r}; choose from {BUILTIN_NAMES}")
    data = json.loads(resources.files("hvrp_qaoa").joinpath(f"instances/{key}.json").read_text())
    return instance_from_dict(data)


def builtin_knapsack_demo() -> KnapsackInstance:
    """Items of weight 4, 3, 2, 1 and a capacity of 5; values are all zero."""
    return KnapsackInstance(weights=(4, 3, 2, 1), values=(0.0, 0.0, 0.0, 0.0), capacity=5)


def distance_matrix(instance: HvrpInstance) -> np.ndarray:
    """Euclidean distances (km) between all nodes; node 0 is the depot."""
    pts = np.array([instance.depot_position] + [c.position for c in instance.customers], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def edge_costs(instance: HvrpInstance) -> np.ndarray:
    """Travel cost per vehicle and edge, shape ``(V, N0+1, N0+1)`` in EUR."""
    d = distance_matrix(instance)
    rates = np.array([v.cost_per_km for v in instance.vehicles])
    return rates[:, None, None] * d[None, :, :]

