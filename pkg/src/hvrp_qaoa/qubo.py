"""Quadratic binary models for the HVRP and knapsack encodings.

Variable ordering (little-endian basis-state index, bit ``k`` = variable ``k``):

* routing block first: ``y[v, i, a]`` at ``(v * N0 + i) * N0 + a`` with
  vehicle ``v``, customer ``i`` (id ``i + 1``) and tour position ``a``, all
  zero-based;
* then one slack register per vehicle, vehicle-major, least significant bit
  first;
* then, only for the relaxed position constraint, one auxiliary bit
  ``u[v, a]`` per vehicle and position.

Slack registers use the clamped binary encoding: bit ``k < M`` has weight
``2**k`` and the top bit ``M = floor(log2 Q)`` has weight ``Q + 1 - 2**M``,
so the register spans exactly ``0..Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .model import HvrpInstance, KnapsackInstance, edge_costs

__all__ = [
    "VariableLayout",
    "QuadraticBinaryModel",
    "SpinModel",
    "PenaltyWeights",
    "WeightOrderingError",
    "layout",
    "slack_weights",
    "qubit_count",
    "build_cost_terms",
    "build_constraint_terms",
    "build_capacity_terms",
    "build_knapsack",
    "assemble",
    "to_ising",
]

CONSTRAINTS_ONLY = "constraints_only"
FULL = "full"

# Chunk of basis states evaluated at once by ``QuadraticBinaryModel.energies``.
_CHUNK_BITS = 16


def slack_weights(capacity: int) -> np.ndarray:
    """Bit weights of a register that encodes every integer in ``0..capacity``."""
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    top = capacity.bit_length() - 1
    w = [2**k for k in range(top)]
    w.append(capacity + 1 - 2**top)
    return np.array(w, dtype=float)


@dataclass(frozen=True)
class VariableLayout:
    """Bijection between semantic variables and flat qubit indices."""

    n_customers: int
    n_vehicles: int
    capacities: tuple[int, ...]
    with_aux: bool = False

    @property
    def n_routing(self) -> int:
        return self.n_customers**2 * self.n_vehicles

    @property
    def slack_widths(self) -> tuple[int, ...]:
        return tuple(q.bit_length() for q in self.capacities)

    @property
    def slack_offsets(self) -> tuple[int, ...]:
        offs, start = [], self.n_routing
        for w in self.slack_widths:
            offs.append(start)
            start += w
        return tuple(offs)

    @property
    def n_slack(self) -> int:
        return sum(self.slack_widths)

    @property
    def n_aux(self) -> int:
        return self.n_customers * self.n_vehicles if self.with_aux else 0

    @property
    def total(self) -> int:
        return self.n_routing + self.n_slack + self.n_aux

    def routing(self, v: int, i: int, a: int) -> int:
        n0 = self.n_customers
        if not (0 <= v < self.n_vehicles and 0 <= i < n0 and 0 <= a < n0):
            raise IndexError(f"routing index out of range: v={v} i={i} a={a}")
        return (v * n0 + i) * n0 + a

    def slack(self, v: int, k: int) -> int:
        if not 0 <= k < self.slack_widths[v]:
            raise IndexError(f"slack bit {k} out of range for vehicle {v}")
        return self.slack_offsets[v] + k

    def aux(self, v: int, a: int) -> int:
        if not self.with_aux:
            raise IndexError("layout has no auxiliary position bits")
        return self.n_routing + self.n_slack + v * self.n_customers + a

    def slack_indices(self, v: int) -> list[int]:
        return [self.slack(v, k) for k in range(self.slack_widths[v])]

    def slack_weights(self, v: int) -> np.ndarray:
        return slack_weights(self.capacities[v])

    def describe(self) -> dict:
        return {
            "routing": self.n_routing,
            "capacity": self.n_slack,
            "auxiliary": self.n_aux,
            "total": self.total,
        }


def layout(instance: HvrpInstance, with_aux: bool = False) -> VariableLayout:
    return VariableLayout(instance.n_customers, instance.n_vehicles, instance.capacities, with_aux)


def qubit_count(instance: HvrpInstance, with_aux: bool = False) -> int:
    """Closed form: ``N0**2 V + sum_v (floor(log2 Q_v) + 1)`` (plus ``N0 V`` with aux)."""
    n0, nv = instance.n_customers, instance.n_vehicles
    total = n0 * n0 * nv + sum(int(math.floor(math.log2(q))) + 1 for q in instance.capacities)
    return total + (n0 * nv if with_aux else 0)


# --- models -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticBinaryModel:
    """``offset + sum_i linear[i] x_i + sum_{i<j} quad[i, j] x_i x_j`` over x in {0,1}^n.

    ``quad`` is a dense strictly upper triangular ``(n, n)`` array.
    """

    linear: np.ndarray
    quad: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float).copy()
        q = np.asarray(self.quad, dtype=float).copy()
        n = lin.shape[0]
        if q.shape != (n, n):
            raise ValueError(f"quadratic block must be ({n}, {n}), got {q.shape}")
        if np.any(np.tril(q) != 0):
            raise ValueError("quadratic block must be strictly upper triangular")
        lin.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quad", q)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def zeros(cls, n: int) -> "QuadraticBinaryModel":
        return cls(np.zeros(n), np.zeros((n, n)), 0.0)

    @property
    def n(self) -> int:
        return self.linear.shape[0]

    @property
    def quadratic(self) -> dict[tuple[int, int], float]:
        rows, cols = np.nonzero(self.quad)
        return {(int(i), int(j)): float(self.quad[i, j]) for i, j in zip(rows, cols)}

    def __add__(self, other: "QuadraticBinaryModel") -> "QuadraticBinaryModel":
        if not isinstance(other, QuadraticBinaryModel):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"cannot add models over {self.n} and {other.n} variables")
        return QuadraticBinaryModel(self.linear + other.linear, self.quad + other.quad, self.offset + other.offset)

    def scaled(self, factor: float, shift: float = 0.0) -> "QuadraticBinaryModel":
        """The model ``factor * (self + shift)``."""
        return QuadraticBinaryModel(factor * self.linear, factor * self.quad, factor * (self.offset + shift))

    def __mul__(self, factor: float) -> "QuadraticBinaryModel":
        return self.scaled(float(factor))

    __rmul__ = __mul__

    def padded(self, n: int) -> "QuadraticBinaryModel":
        """Same polynomial embedded in ``n >= self.n`` variables."""
        if n < self.n:
            raise ValueError("cannot shrink a model")
        lin = np.zeros(n)
        lin[: self.n] = self.linear
        q = np.zeros((n, n))
        q[: self.n, : self.n] = self.quad
        return QuadraticBinaryModel(lin, q, self.offset)

    def evaluate(self, bits) -> np.ndarray | float:
        """Value for one bitstring (shape ``(n,)``) or a batch (shape ``(m, n)``)."""
        x = np.asarray(bits, dtype=float)
        vals = self.offset + x @ self.linear + np.einsum("...i,ij,...j->...", x, self.quad, x)
        return float(vals) if x.ndim == 1 else vals

    def energies(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Values for basis states ``start..stop-1`` (default: all ``2**n``).

        State ``z`` assigns ``x_k = (z >> k) & 1``.
        """
        n = self.n
        stop = 2**n if stop is None else stop
        out = np.empty(stop - start)
        sym = self.quad  # upper triangular: x.Q.x counts each pair once
        chunk = 1 << _CHUNK_BITS
        shifts = np.arange(n, dtype=np.int64)
        for lo in range(start, stop, chunk):
            hi = min(lo + chunk, stop)
            z = np.arange(lo, hi, dtype=np.int64)
            x = ((z[:, None] >> shifts) & 1).astype(float)
            out[lo - start : hi - start] = self.offset + x @ self.linear + ((x @ sym) * x).sum(axis=1)
        return out

    def max_degree(self) -> int:
        if np.any(self.quad):
            return 2
        return 1 if np.any(self.linear) else 0

    def dumps(self) -> str:
        """Text dump: ``n``, ``offset``, ``lin i v`` and ``quad i j v`` (i < j) lines."""
        lines = [f"n {self.n}", f"offset {self.offset!r}"]
        lines += [f"lin {i} {float(v)!r}" for i, v in enumerate(self.linear) if v != 0]
        lines += [f"quad {i} {j} {v!r}" for (i, j), v in sorted(self.quadratic.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> "QuadraticBinaryModel":
        offset, lin, quad, declared = 0.0, {}, {}, None
        for lineno, raw in enumerate(text.splitlines(), 1):
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                tag = parts[0]
                if tag == "n":
                    declared = int(parts[1])
                elif tag == "offset":
                    offset += float(parts[1])
                elif tag == "lin":
                    i = int(parts[1])
                    lin[i] = lin.get(i, 0.0) + float(parts[2])
                elif tag == "quad":
                    i, j = sorted((int(parts[1]), int(parts[2])))
                    if i == j:
                        raise ValueError("self-pair")
                    quad[i, j] = quad.get((i, j), 0.0) + float(parts[3])
                else:
                    raise ValueError(f"unknown tag {tag!r}")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"line {lineno}: cannot parse {raw!r} ({exc})") from None
        idx = list(lin) + [k for ij in quad for k in ij]
        size = n or declared or (max(idx) + 1 if idx else 0)
        if idx and max(idx) >= size:
            raise ValueError(f"variable index {max(idx)} exceeds model size {size}")
        linear, q = np.zeros(size), np.zeros((size, size))
        for i, v in lin.items():
            linear[i] = v
        for (i, j), v in quad.items():
            q[i, j] = v
        return cls(linear, q, offset)


@dataclass(frozen=True, eq=False)
class SpinModel:
    """``offset + sum_i h[i] s_i + sum_{i<j} J[i, j] s_i s_j`` over s in {-1,+1}^n."""

    h: np.ndarray
    J: np.ndarray
    offset: float = 0.0

    @property
    def n(self) -> int:
        return len(self.h)

    def evaluate(self, spins) -> np.ndarray | float:
        s = np.asarray(spins, dtype=float)
        vals = self.offset + s @ self.h + np.einsum("...i,ij,...j->...", s, self.J, s)
        return float(vals) if s.ndim == 1 else vals


def to_ising(model: QuadraticBinaryModel) -> SpinModel:
    """Substitute ``x = (1 - s) / 2`` (bit 0 <-> spin +1)."""
    q = model.quad
    h = -model.linear / 2 - (q.sum(axis=1) + q.sum(axis=0)) / 4
    offset = model.offset + model.linear.sum() / 2 + q.sum() / 4
    return SpinModel(h, q / 4, offset)


class _Builder:
    """Accumulates products of affine expressions into a degree-2 model."""

    def __init__(self, n: int):
        self.lin = np.zeros(n)
        self.quad = np.zeros((n, n))
        self.offset = 0.0

    def add_term(self, coef: float, *idx: int) -> None:
        if len(idx) == 0:
            self.offset += coef
        elif len(idx) == 1 or idx[0] == idx[1]:
            self.lin[idx[0]] += coef
        elif len(idx) == 2:
            i, j = sorted(idx)
            self.quad[i, j] += coef
        else:
            raise AssertionError("degree > 2 term")

    def add_product(self, scale: float, e1: "Affine", e2: "Affine") -> None:
        c1, t1 = e1
        c2, t2 = e2
        self.add_term(scale * c1 * c2)
        for i, a in t1.items():
            self.add_term(scale * a * c2, i)
        for j, b in t2.items():
            self.add_term(scale * c1 * b, j)
        for i, a in t1.items():
            for j, b in t2.items():
                self.add_term(scale * a * b, i, j)

    def add_square(self, scale: float, e: "Affine") -> None:
        self.add_product(scale, e, e)

    def build(self) -> QuadraticBinaryModel:
        return QuadraticBinaryModel(self.lin, self.quad, self.offset)


# (constant, {index: coefficient})
Affine = tuple[float, Mapping[int, float]]


def _affine(const: float = 0.0, terms: Iterable[tuple[int, float]] = ()) -> Affine:
    acc: dict[int, float] = {}
    for i, a in terms:
        acc[i] = acc.get(i, 0.0) + a
    return const, acc


# --- HVRP terms -------------------------------------------------------------


def _routing_sizes(lay: VariableLayout):
    return lay.n_vehicles, lay.n_customers


def _depart(lay: VariableLayout, b: _Builder, v: int, i: int, scale: float) -> None:
    """Add ``scale * x_0i^v``: customer ``i`` starts a trip of vehicle ``v``.

    ``y[i,0] + sum_{a>=1} (1 - sum_{j != i} y[j,a-1]) y[i,a]``
    """
    _, n0 = _routing_sizes(lay)
    b.add_term(scale, lay.routing(v, i, 0))
    for a in range(1, n0):
        prev = _affine(1.0, ((lay.routing(v, j, a - 1), -1.0) for j in range(n0) if j != i))
        b.add_product(scale, prev, _affine(0.0, [(lay.routing(v, i, a), 1.0)]))


def _arrive(lay: VariableLayout, b: _Builder, v: int, i: int, scale: float) -> None:
    """Add ``scale * x_i0^v``: customer ``i`` ends a trip of vehicle ``v``.

    ``y[i,N0-1] + sum_{a<N0-1} y[i,a] (1 - sum_{j != i} y[j,a+1])``
    """
    _, n0 = _routing_sizes(lay)
    b.add_term(scale, lay.routing(v, i, n0 - 1))
    for a in range(n0 - 1):
        nxt = _affine(1.0, ((lay.routing(v, j, a + 1), -1.0) for j in range(n0) if j != i))
        b.add_product(scale, _affine(0.0, [(lay.routing(v, i, a), 1.0)]), nxt)


def build_cost_terms(instance: HvrpInstance, lay: VariableLayout | None = None) -> QuadraticBinaryModel:
    """Variable travel cost plus fixed departure cost, unit prefactors.

    Edge indicators follow the position encoding: consecutive positions of one
    vehicle form an edge, and an empty neighbouring position (or the end of the
    row) connects a customer to the depot. Each departure from the depot is
    charged the vehicle's fixed cost.
    """
    lay = lay or layout(instance)
    nv, n0 = _routing_sizes(lay)
    c = edge_costs(instance)
    b = _Builder(lay.total)
    for v in range(nv):
        t = instance.vehicles[v].fixed_cost
        for i in range(n0):
            for j in range(n0):
                if i == j:
                    continue
                for a in range(n0 - 1):
                    b.add_term(c[v, i + 1, j + 1], lay.routing(v, i, a), lay.routing(v, j, a + 1))
            _depart(lay, b, v, i, c[v, 0, i + 1] + t)
            _arrive(lay, b, v, i, c[v, i + 1, 0])
    return b.build()


def _visit_once_terms(lay: VariableLayout) -> QuadraticBinaryModel:
    nv, n0 = _routing_sizes(lay)
    b = _Builder(lay.total)
    for i in range(n0):
        b.add_square(1.0, _affine(1.0, ((lay.routing(v, i, a), -1.0) for v in range(nv) for a in range(n0))))
    return b.build()


def _position_terms(lay: VariableLayout, use_alternative_HD: bool) -> QuadraticBinaryModel:
    nv, n0 = _routing_sizes(lay)
    b = _Builder(lay.total)
    if use_alternative_HD:
        for v in range(nv):
            for a in range(n0):
                terms = [(lay.aux(v, a), 1.0)] + [(lay.routing(v, i, a), -1.0) for i in range(n0)]
                b.add_square(1.0, _affine(0.0, terms))
    else:
        for a in range(n0):
            b.add_square(1.0, _affine(1.0, ((lay.routing(v, i, a), -1.0) for v in range(nv) for i in range(n0))))
    return b.build()


def build_constraint_terms(
    instance: HvrpInstance, use_alternative_HD: bool = False, lay: VariableLayout | None = None
) -> QuadraticBinaryModel:
    """Visit-once and position penalties with unit prefactors.

    Default: every position hosts exactly one customer across all vehicles.
    Alternative: per vehicle and position, the customer count must equal the
    auxiliary bit ``u[v, a]`` (so each vehicle may leave positions empty).
    """
    lay = lay or layout(instance, with_aux=use_alternative_HD)
    if use_alternative_HD and not lay.with_aux:
        raise ValueError("the relaxed position constraint needs a layout with auxiliary bits")
    return _visit_once_terms(lay) + _position_terms(lay, use_alternative_HD)


def build_capacity_terms(instance: HvrpInstance, lay: VariableLayout | None = None) -> QuadraticBinaryModel:
    """Per vehicle: (slack register value - carried demand)**2, unit prefactor."""
    lay = lay or layout(instance)
    nv, n0 = _routing_sizes(lay)
    b = _Builder(lay.total)
    for v in range(nv):
        terms = list(zip(lay.slack_indices(v), lay.slack_weights(v)))
        terms += [(lay.routing(v, i, a), -float(instance.customers[i].demand)) for i in range(n0) for a in range(n0)]
        b.add_square(1.0, _affine(0.0, terms))
    return b.build()


# --- knapsack ---------------------------------------------------------------


def build_knapsack(
    instance: KnapsackInstance, log_encoding: bool = True, A: float = 1.0, B: float = 0.0
) -> QuadraticBinaryModel:
    """Knapsack as a penalty model over item bits followed by weight-register bits.

    One-hot form uses ``W`` register bits (bit ``n-1`` means "total weight n")
    plus the one-hot penalty; log form uses ``floor(log2 W) + 1`` clamped
    binary bits and drops the one-hot penalty. ``B`` rewards item values.
    """
    n_items = instance.n_items
    W = instance.capacity
    if log_encoding:
        reg = slack_weights(W)
    else:
        reg = np.arange(1, W + 1, dtype=float)
    n = n_items + len(reg)
    b = _Builder(n)
    reg_idx = range(n_items, n)
    if not log_encoding:
        b.add_square(A, _affine(1.0, ((k, -1.0) for k in reg_idx)))
    terms = list(zip(reg_idx, reg)) + [(i, -float(w)) for i, w in enumerate(instance.weights)]
    b.add_square(A, _affine(0.0, terms))
    for i, c in enumerate(instance.values):
        b.add_term(-B * c, i)
    return b.build()


# --- assembly ---------------------------------------------------------------


class WeightOrderingError(ValueError):
    """Penalty prefactors do not dominate the (rescaled) routing cost."""

    def __init__(self, message: str, offending_max: float):
        self.offending_max = offending_max
        super().__init__(message)


@dataclass(frozen=True)
class PenaltyWeights:
    A: float = 0.0
    B: float = 0.0
    C: float = 1.0
    D: float = 1.0
    E: float = 1.0

    def __post_init__(self):
        for name in "ABCDE":
            if getattr(self, name) < 0:
                raise ValueError(f"penalty weight {name} must be non-negative")

    @classmethod
    def constraints_only(cls) -> "PenaltyWeights":
        return cls(0.0, 0.0, 1.0, 1.0, 1.0)

    @classmethod
    def full(cls, A: float = 1.0) -> "PenaltyWeights":
        return cls(A, A, 1.0, 1.0, 1.0)


@dataclass(frozen=True)
class AssembledModel:
    """Result of :func:`assemble`: the model plus everything needed to read it."""

    model: QuadraticBinaryModel
    layout: VariableLayout
    mode: str
    weights: PenaltyWeights
    cost_scale: object | None = None  # oracle.CostScale in full mode
    parts: dict = field(default_factory=dict, repr=False)

    def __iter__(self):
        # allows ``model, lay = assemble(...)``
        return iter((self.model, self.layout))


def assemble(
    instance: HvrpInstance,
    weights: PenaltyWeights | None = None,
    mode: str = CONSTRAINTS_ONLY,
    use_alternative_HD: bool = False,
) -> AssembledModel:
    """Sum of weighted cost and penalty terms.

    In ``full`` mode the routing cost (variable plus fixed, which share one
    prefactor) is first mapped affinely onto [0, 1] over all bitstrings, then
    multiplied by ``A``. The weights must then satisfy
    ``A * max_feasible(rescaled cost) < min(C, D, E)``.

    Raises:
        WeightOrderingError: the penalties do not dominate the routing cost.
        ValueError: weights inconsistent with the mode.
    """
    from . import oracle  # oracle depends on this module

    if mode not in (CONSTRAINTS_ONLY, FULL):
        raise ValueError(f"unknown mode {mode!r}")
    if weights is None:
        weights = PenaltyWeights.constraints_only() if mode == CONSTRAINTS_ONLY else PenaltyWeights.full()
    lay = layout(instance, with_aux=use_alternative_HD)
    hc = _visit_once_terms(lay)
    hd = _position_terms(lay, use_alternative_HD)
    he = build_capacity_terms(instance, lay)
    parts = {"H_C": hc, "H_D": hd, "H_E": he}
    penalty = weights.C * hc + weights.D * hd + weights.E * he

    if mode == CONSTRAINTS_ONLY:
        if weights.A != 0 or weights.B != 0:
            raise ValueError("constraints_only mode requires A = B = 0")
        return AssembledModel(penalty, lay, mode, weights, None, parts)

    if weights.A <= 0 or weights.A != weights.B:
        raise ValueError("full mode requires A = B > 0 (fixed and variable cost share one scale)")
    cost = build_cost_terms(instance, lay)
    scale, rescaled = oracle.rescale_cost(cost)
    parts["H_AB"] = cost
    feasible = oracle.zero_set(hc + hd + he)
    worst = float(weights.A * scale.apply(cost.energies()[feasible]).max()) if feasible.any() else 0.0
    bound = min(weights.C, weights.D, weights.E)
    if not 0 <= worst < bound:
        raise WeightOrderingError(
            f"max(H_A + H_B) over feasible states is {worst:.6g}, must be < min(C, D, E) = {bound:.6g}",
            worst,
        )
    return AssembledModel(weights.A * rescaled + penalty, lay, mode, weights, scale, parts)
