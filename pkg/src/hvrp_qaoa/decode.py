"""Reading bitstrings back as vehicle routes, checking them, and pricing them.

A vehicle's row of positions is read left to right. Consecutive occupied
positions are consecutive stops. An empty position between two occupied ones
sends the vehicle back to the depot, so the row splits into several trips;
this is exactly how the edge indicators of the cost encoding behave, and it
keeps encoder and decoder in agreement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import HvrpInstance, edge_costs
from .qubo import VariableLayout

__all__ = [
    "RoutePlan",
    "Assignment",
    "Violation",
    "FeasibilityReport",
    "decode_bits",
    "validate",
    "classical_cost",
    "render_plan",
    "feasible_batch",
    "bits_from_index",
    "encode_plan",
]

VISIT_ONCE = "visit_once"
POSITION_UNIQUE = "position_unique"
CAPACITY = "capacity"
SLACK_MISMATCH = "slack_mismatch"
MALFORMED = "malformed_assignment"


@dataclass(frozen=True)
class RoutePlan:
    """Customer ids per vehicle and tour position.

    ``slots[v][a]`` holds the ids placed at position ``a`` of vehicle ``v``;
    an empty tuple means the position is unused.
    """

    slots: tuple[tuple[tuple[int, ...], ...], ...]

    @classmethod
    def from_routes(cls, routes: Sequence[Sequence[int]], n_positions: int | None = None) -> "RoutePlan":
        """Place each vehicle's customers on consecutive positions starting at the first."""
        width = n_positions if n_positions is not None else max((len(r) for r in routes), default=0)
        slots = []
        for r in routes:
            if len(r) > width:
                raise ValueError(f"route {list(r)} does not fit in {width} positions")
            slots.append(tuple((c,) for c in r) + ((),) * (width - len(r)))
        return cls(tuple(slots))

    @property
    def n_vehicles(self) -> int:
        return len(self.slots)

    @property
    def routes(self) -> tuple[tuple[int, ...], ...]:
        """Visited ids per vehicle in position order, empty positions skipped."""
        return tuple(tuple(c for slot in row for c in slot) for row in self.slots)

    @property
    def trips(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """Per vehicle, the depot-to-depot trips implied by empty positions."""
        out = []
        for row in self.slots:
            trips, cur = [], []
            for slot in row:
                if slot:
                    cur.extend(slot)
                elif cur:
                    trips.append(tuple(cur))
                    cur = []
            if cur:
                trips.append(tuple(cur))
            out.append(tuple(trips))
        return tuple(out)

    @property
    def malformed(self) -> tuple[tuple[int, int, tuple[int, ...]], ...]:
        """``(vehicle, position, ids)`` for every position holding two or more customers."""
        return tuple((v, a, slot) for v, row in enumerate(self.slots) for a, slot in enumerate(row) if len(slot) > 1)

    def reversed(self) -> "RoutePlan":
        """Every vehicle's row read backwards (each trip reversed)."""
        return RoutePlan(tuple(tuple(reversed(row)) for row in self.slots))


@dataclass(frozen=True, eq=False)
class Assignment:
    y: np.ndarray  # (V, N0, N0) routing bits
    z: tuple[np.ndarray, ...]  # per-vehicle slack bits, least significant first
    slack_values: tuple[int, ...]
    u: np.ndarray | None = None  # (V, N0) auxiliary position bits


@dataclass(frozen=True)
class Violation:
    constraint: str
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible

    def kinds(self) -> set[str]:
        return {v.constraint for v in self.violations}


def bits_from_index(index: int, n: int) -> np.ndarray:
    """Bit ``k`` of the basis-state index becomes entry ``k``."""
    return (int(index) >> np.arange(n)) & 1


def decode_bits(lay: VariableLayout, bits) -> tuple[RoutePlan, Assignment]:
    bits = np.asarray(bits).astype(np.int64)
    if bits.shape != (lay.total,):
        raise ValueError(f"expected {lay.total} bits, got shape {bits.shape}")
    nv, n0 = lay.n_vehicles, lay.n_customers
    y = bits[: lay.n_routing].reshape(nv, n0, n0)
    slots = tuple(
        tuple(tuple(int(i) + 1 for i in np.flatnonzero(y[v, :, a])) for a in range(n0)) for v in range(nv)
    )
    z = tuple(bits[lay.slack_indices(v)] for v in range(nv))
    values = tuple(int(round(float(zv @ lay.slack_weights(v)))) for v, zv in enumerate(z))
    u = None
    if lay.with_aux:
        start = lay.n_routing + lay.n_slack
        u = bits[start : start + lay.n_aux].reshape(nv, n0)
    return RoutePlan(slots), Assignment(y.copy(), z, values, u)


def validate(
    instance: HvrpInstance,
    plan: RoutePlan,
    slack: Sequence[int] | None = None,
    strict: bool = True,
) -> FeasibilityReport:
    """Check a plan against the routing constraints.

    Args:
        slack: decoded slack register value per vehicle; when given, each
            must equal the vehicle's load. ``None`` skips that check.
        strict: every position must hold exactly one customer across all
            vehicles. Relaxed mode only requires at most one customer per
            vehicle and position.
    """
    out: list[Violation] = []
    n0 = instance.n_customers
    if plan.n_vehicles != instance.n_vehicles:
        raise ValueError(f"plan has {plan.n_vehicles} vehicles, instance has {instance.n_vehicles}")

    counts = np.zeros(n0 + 1, dtype=int)
    for v, route in enumerate(plan.routes):
        for c in route:
            if not 1 <= c <= n0:
                out.append(Violation(MALFORMED, f"vehicle {v + 1} visits unknown customer {c}"))
                continue
            counts[c] += 1
    for c in range(1, n0 + 1):
        if counts[c] != 1:
            out.append(Violation(VISIT_ONCE, f"customer {c} visited {counts[c]} times"))

    for v, a, ids in plan.malformed:
        out.append(Violation(MALFORMED, f"vehicle {v + 1} position {a + 1} holds customers {list(ids)}"))

    if strict:
        width = max((len(row) for row in plan.slots), default=0)
        for a in range(max(width, n0)):
            k = sum(len(row[a]) for row in plan.slots if a < len(row))
            if k != 1:
                out.append(Violation(POSITION_UNIQUE, f"position {a + 1} holds {k} customers across vehicles"))

    demand = instance.demands
    for v, route in enumerate(plan.routes):
        load = sum(demand[c - 1] for c in route if 1 <= c <= n0)
        cap = instance.vehicles[v].capacity
        if load > cap:
            out.append(Violation(CAPACITY, f"vehicle {v + 1} carries {load} > capacity {cap}"))
        if slack is not None and slack[v] != load:
            out.append(Violation(SLACK_MISMATCH, f"vehicle {v + 1} slack register {slack[v]} != load {load}"))
    return FeasibilityReport(tuple(out))


def classical_cost(instance: HvrpInstance, plan: RoutePlan) -> float:
    """Fixed cost per depot departure plus travel cost of every leg."""
    c = edge_costs(instance)
    total = 0.0
    for v, trips in enumerate(plan.trips):
        t = instance.vehicles[v].fixed_cost
        for trip in trips:
            nodes = (0, *trip, 0)
            total += t + sum(c[v, a, b] for a, b in zip(nodes[:-1], nodes[1:]))
    return total


def render_plan(instance: HvrpInstance, plan: RoutePlan) -> str:
    """One line per vehicle, e.g. ``v1: 0 -> 2 -> 3 -> 0 | load 2/3``."""
    lines = []
    demand = instance.demands
    for v, (trips, route) in enumerate(zip(plan.trips, plan.routes)):
        cap = instance.vehicles[v].capacity
        load = sum(demand[c - 1] for c in route if 1 <= c <= instance.n_customers)
        if trips:
            path = " -> ".join(["0"] + [" -> ".join(map(str, t)) + " -> 0" for t in trips])
        else:
            path = "-"
        flag = " (malformed)" if any(m[0] == v for m in plan.malformed) else ""
        lines.append(f"v{v + 1}: {path} | load {load}/{cap}{flag}")
    return "\n".join(lines)


def encode_plan(lay: VariableLayout, plan: RoutePlan, slack: Sequence[int] | None = None) -> np.ndarray:
    """Bitstring for a plan; slack defaults to each vehicle's customer count times demand 1.

    Slack values are written with the greedy high-bit-first representation.
    """
    bits = np.zeros(lay.total, dtype=np.int8)
    for v, row in enumerate(plan.slots):
        for a, slot in enumerate(row):
            for c in slot:
                bits[lay.routing(v, c - 1, a)] = 1
    for v in range(lay.n_vehicles):
        value = len(plan.routes[v]) if slack is None else slack[v]
        w = lay.slack_weights(v)
        for k in reversed(range(len(w))):
            if value >= w[k]:
                bits[lay.slack(v, k)] = 1
                value -= int(w[k])
        if value != 0:
            raise ValueError(f"slack value not representable for vehicle {v + 1}")
    if lay.with_aux:
        for v, row in enumerate(plan.slots):
            for a, slot in enumerate(row):
                if slot:
                    bits[lay.aux(v, a)] = 1
    return bits


def feasible_batch(instance: HvrpInstance, lay: VariableLayout, bits: np.ndarray, strict: bool = True) -> np.ndarray:
    """Vectorised :func:`validate` over rows of ``bits`` (shape ``(m, total)``).

    Same rules as ``decode_bits`` followed by ``validate`` with the decoded
    slack values.
    """
    bits = np.asarray(bits)
    m = bits.shape[0]
    nv, n0 = lay.n_vehicles, lay.n_customers
    y = bits[:, : lay.n_routing].reshape(m, nv, n0, n0).astype(np.int64)
    ok = (y.sum(axis=(1, 3)) == 1).all(axis=1)  # each customer exactly once
    per_slot = y.sum(axis=2)  # (m, V, N0)
    ok &= (per_slot <= 1).all(axis=(1, 2))
    if strict:
        ok &= (per_slot.sum(axis=1) == 1).all(axis=1)
    q = np.asarray(instance.demands, dtype=np.int64)
    for v in range(nv):
        load = (y[:, v].sum(axis=2) * q).sum(axis=1)
        reg = bits[:, lay.slack_indices(v)].astype(float) @ lay.slack_weights(v)
        ok &= load <= instance.vehicles[v].capacity
        ok &= np.rint(reg).astype(np.int64) == load
    return ok
