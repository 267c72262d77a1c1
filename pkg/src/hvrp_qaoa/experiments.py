"""End-to-end experiment drivers shared by the CLI and the acceptance tests."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle, qaoa, qubo
from .model import HvrpInstance, builtin_instance, builtin_knapsack_demo, load_instance
from .opt import Objective, OptResult, angle_bounds, run_optimizer, warm_start_extend
from .qaoa import DiagonalCost, QaoaParams

__all__ = [
    "Problem",
    "DepthResult",
    "build_problem",
    "initial_guess",
    "depth_sweep",
    "compare_optimizers",
]

CONSTRAINTS = "constraints"
FULL = "full"
_MODES = {CONSTRAINTS: qubo.CONSTRAINTS_ONLY, FULL: qubo.FULL}


@dataclass(eq=False)
class Problem:
    """A compiled problem ready for simulation.

    ``feasible`` marks states satisfying every constraint; ``optimal`` marks
    the feasible states of least routing cost (for pure constraint problems it
    equals ``feasible``).
    """

    name: str
    mode: str
    model: qubo.QuadraticBinaryModel
    diag: DiagonalCost
    feasible: np.ndarray
    optimal: np.ndarray
    instance: HvrpInstance | None = None
    layout: qubo.VariableLayout | None = None
    weights: qubo.PenaltyWeights | None = None
    cost_scale: oracle.CostScale | None = None
    raw_cost: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def uniform_feasible_mass(self) -> float:
        return float(self.feasible.mean())

    def metadata(self) -> dict:
        out = {"name": self.name, "mode": self.mode, "qubits": self.n}
        if self.layout is not None:
            out["layout"] = self.layout.describe()
        if self.weights is not None:
            w = self.weights
            out["penalty_weights"] = {"A": w.A, "B": w.B, "C": w.C, "D": w.D, "E": w.E}
        if self.cost_scale is not None:
            out["cost_rescaling"] = {"raw_min": self.cost_scale.raw_min, "raw_max": self.cost_scale.raw_max}
        out["feasible_states"] = int(self.feasible.sum())
        out["optimal_states"] = int(self.optimal.sum())
        return out


@dataclass(frozen=True)
class Compiled:
    """A model and its provenance, before any state-space enumeration."""

    name: str
    mode: str
    model: qubo.QuadraticBinaryModel
    instance: HvrpInstance | None = None
    layout: qubo.VariableLayout | None = None
    weights: qubo.PenaltyWeights | None = None
    cost_scale: oracle.CostScale | None = None

    def metadata(self) -> dict:
        out = {"name": self.name, "mode": self.mode, "qubits": self.model.n}
        if self.layout is not None:
            out["layout"] = self.layout.describe()
        if self.weights is not None:
            w = self.weights
            out["penalty_weights"] = {"A": w.A, "B": w.B, "C": w.C, "D": w.D, "E": w.E}
        if self.cost_scale is not None:
            out["cost_rescaling"] = {"raw_min": self.cost_scale.raw_min, "raw_max": self.cost_scale.raw_max}
        return out


def compile_model(selector: str, mode: str = CONSTRAINTS) -> Compiled:
    """Compile a selector into a model without touching the state space.

    ``selector`` is ``I``, ``II``, ``III``, ``knapsack`` (the demo, log
    encoding, constraint only), an instance JSON path, or a model dump path
    (``*.txt`` / ``*.qubo``).
    """
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}; choose 'constraints' or 'full'")
    key = str(selector)
    if key.upper() in ("I", "II", "III"):
        instance = builtin_instance(key)
    elif key.lower() == "knapsack":
        return Compiled("knapsack", mode, qubo.build_knapsack(builtin_knapsack_demo(), log_encoding=True))
    else:
        path = Path(key)
        if not path.exists():
            raise FileNotFoundError(f"no built-in instance or file named {selector!r}")
        if path.suffix.lower() in (".txt", ".qubo"):
            return Compiled(path.stem, mode, qubo.QuadraticBinaryModel.loads(path.read_text()))
        instance = load_instance(path)
    assembled = qubo.assemble(instance, mode=_MODES[mode])
    return Compiled(
        instance.name, mode, assembled.model, instance, assembled.layout, assembled.weights, assembled.cost_scale
    )


def build_problem(selector: str, mode: str = CONSTRAINTS) -> Problem:
    """Compile a problem (see :func:`compile_model`) and enumerate its diagonal and masks."""
    c = compile_model(selector, mode)
    diag = DiagonalCost.from_model(c.model)
    raw = None
    if c.instance is not None:
        feasible = oracle.feasible_mask(c.instance, c.layout)
        raw = qubo.build_cost_terms(c.instance, c.layout).energies()
        best = raw[feasible].min()
        optimal = feasible & (raw <= best + 1e-9 * max(1.0, abs(best)))
    else:
        e = diag.energies
        zero = np.abs(e) <= oracle.ENERGY_ATOL
        feasible = zero if zero.any() else e <= diag.min + oracle.ENERGY_ATOL
        optimal = e <= diag.min + oracle.ENERGY_ATOL
    return Problem(
        name=c.name,
        mode=mode,
        model=c.model,
        diag=diag,
        feasible=feasible,
        optimal=optimal,
        instance=c.instance,
        layout=c.layout,
        weights=c.weights,
        cost_scale=c.cost_scale,
        raw_cost=raw,
    )


def initial_guess(p: int, seed=None, bounds=None) -> QaoaParams:
    """Uniform random angles inside the search box."""
    bounds = bounds or angle_bounds(p)
    lo, hi = np.array(bounds, dtype=float).T
    rng = np.random.default_rng(seed)
    return QaoaParams.from_vector(lo + (hi - lo) * rng.random(lo.size))


def _bounds(p: int, gamma_max: float) -> list[tuple[float, float]]:
    return [(0.0, gamma_max)] * p + [(0.0, math.pi)] * p


@dataclass
class DepthResult:
    p: int
    params: QaoaParams
    energy: float
    success_feasible: float
    success_optimal: float
    evaluations: int
    wall_time: float
    histogram: dict[int, float]
    optimizer: str = ""
    result: OptResult | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "optimizer": self.optimizer,
            "p": self.p,
            "energy": self.energy,
            "success_feasible": self.success_feasible,
            "success_optimal": self.success_optimal,
            "wall_time_s": self.wall_time,
            "evaluations": self.evaluations,
            "gammas": " ".join(repr(g) for g in self.params.gammas),
            "betas": " ".join(repr(b) for b in self.params.betas),
        }


def evaluate_params(problem: Problem, params: QaoaParams) -> tuple[float, float, float, dict[int, float]]:
    """Energy, feasible mass, optimal mass and floor-binned histogram."""
    probs = qaoa.distribution(problem.diag, params)
    energy = float(probs @ problem.diag.energies)
    return (
        energy,
        float(probs[problem.feasible].sum()),
        float(probs[problem.optimal].sum()),
        oracle.floor_bins(problem.diag.energies, probs / probs.sum()),
    )


def depth_sweep(
    problem: Problem,
    p_max: int,
    optimizer: str = "basinhopping",
    seed: int | None = 0,
    options: dict | None = None,
    start: QaoaParams | None = None,
    gamma_max: float = 2 * math.pi,
    starts: dict[int, QaoaParams] | None = None,
    on_result=None,
) -> list[DepthResult]:
    """Optimize depths ``1..p_max`` with warm starts.

    Depth 1 starts from ``start`` (default: seeded random angles); each deeper
    run starts from the previous optimum plus a zero layer. ``starts`` maps a
    depth to an initial guess that replaces the warm start (e.g. angles
    transferred from a smaller instance).
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    results: list[DepthResult] = []
    prev: QaoaParams | None = None
    qaoa.expectation(problem.diag, QaoaParams((0.1,), (0.1,)))  # nonzero angles so every kernel compiles before timing
    for p in range(1, p_max + 1):
        bounds = _bounds(p, gamma_max)
        obj = Objective(lambda x: qaoa.expectation(problem.diag, QaoaParams.from_vector(x)), bounds)
        if prev is None:
            x0 = start if start is not None else initial_guess(p, seed, bounds)
        else:
            x0 = warm_start_extend(prev)
        if starts and p in starts:
            x0 = starts[p]
        if x0.p != p:
            raise ValueError(f"initial guess has depth {x0.p}, expected {p}")
        layer_seed = None if seed is None else seed * 1000 + p
        t0 = time.perf_counter()
        res = run_optimizer(optimizer, obj, x0.to_vector(), seed=layer_seed, **(options or {}))
        wall = time.perf_counter() - t0
        params = res.params()
        energy, fmass, omass, hist = evaluate_params(problem, params)
        dr = DepthResult(p, params, energy, fmass, omass, res.evaluations, wall, hist, optimizer, res)
        results.append(dr)
        if on_result is not None:
            on_result(dr)
        prev = params
    return results


def compare_optimizers(
    problem: Problem,
    p_max: int,
    optimizers=("nelder-mead", "powell", "de", "basinhopping"),
    seed: int | None = 0,
    options: dict[str, dict] | None = None,
    gamma_max: float = 2 * math.pi,
) -> list[DepthResult]:
    """Depth sweeps for several optimizers from one shared random start."""
    start = initial_guess(1, seed, _bounds(1, gamma_max))
    rows: list[DepthResult] = []
    for name in optimizers:
        rows += depth_sweep(
            problem,
            p_max,
            name,
            seed=seed,
            options=(options or {}).get(name),
            start=start,
            gamma_max=gamma_max,
        )
    return rows
