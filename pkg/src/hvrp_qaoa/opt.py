"""Classical optimizers for the 2p QAOA angles.

Nelder-Mead, Powell, differential evolution and basinhopping are driven
through :mod:`scipy.optimize`; this module owns the evaluation accounting,
the finite-difference BFGS stage of basinhopping, seeding, and warm starts.
Every optimizer reports the best point it ever evaluated (the start point is
always evaluated first), so no result is worse than its start.
"""

from __future__ import annotations

import csv
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize as _so

from .qaoa import DiagonalCost, QaoaParams, central_difference, expectation

__all__ = [
    "Objective",
    "OptResult",
    "TracePoint",
    "OPTIMIZERS",
    "DEFAULT_OPTIONS",
    "angle_bounds",
    "nelder_mead",
    "powell",
    "differential_evolution",
    "basinhopping",
    "run_optimizer",
    "warm_start_extend",
    "cross_instance_seed",
    "write_trace_csv",
]


class Objective:
    """Counting wrapper around ``fun(x) -> float``; safe to call from several threads."""

    def __init__(self, fun: Callable[[np.ndarray], float], bounds: Sequence[tuple[float, float]] | None = None):
        self.fun = fun
        self.bounds = None if bounds is None else [tuple(map(float, b)) for b in bounds]
        self.evaluations = 0
        self.best_x: np.ndarray | None = None
        self.best_value = math.inf
        self._lock = threading.Lock()

    @classmethod
    def for_qaoa(cls, diag: DiagonalCost, p: int, bounds="box") -> "Objective":
        """Expectation of the depth-``p`` state as a function of ``[gammas, betas]``."""
        if bounds == "box":
            bounds = angle_bounds(p)

        def fun(x):
            return expectation(diag, QaoaParams.from_vector(x))

        return cls(fun, bounds)

    def __call__(self, x) -> float:
        x = np.array(x, dtype=float)
        value = float(self.fun(x))
        with self._lock:
            self.evaluations += 1
            if value < self.best_value:
                self.best_value = value
                self.best_x = x
        return value


def angle_bounds(p: int) -> list[tuple[float, float]]:
    """``gamma in [0, 2 pi]``, ``beta in [0, pi]`` per layer."""
    return [(0.0, 2 * math.pi)] * p + [(0.0, math.pi)] * p


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    best_value: float
    evaluations: int
    elapsed_s: float


@dataclass(frozen=True, eq=False)
class OptResult:
    best_params: np.ndarray
    best_value: float
    evaluations: int
    wall_time: float
    trace: tuple[TracePoint, ...] = ()
    message: str = ""
    converged: bool = True
    options: dict = field(default_factory=dict)

    def params(self) -> QaoaParams:
        return QaoaParams.from_vector(self.best_params)


class _Tracer:
    def __init__(self, obj: Objective):
        self.obj = obj
        self.t0 = time.perf_counter()
        self.points: list[TracePoint] = []

    def __call__(self, *args, **kwargs):
        self.points.append(
            TracePoint(len(self.points) + 1, self.obj.best_value, self.obj.evaluations, time.perf_counter() - self.t0)
        )


def _finish(obj: Objective, tracer: _Tracer, message: str, converged: bool, options: dict) -> OptResult:
    x = obj.best_x.copy()
    value = obj(x)  # re-evaluated so the reported value is exact for the reported point
    return OptResult(
        best_params=x,
        best_value=value,
        evaluations=obj.evaluations,
        wall_time=time.perf_counter() - tracer.t0,
        trace=tuple(tracer.points),
        message=message,
        converged=converged,
        options=options,
    )


def _start(obj: Objective, x0) -> tuple[np.ndarray, _Tracer]:
    tracer = _Tracer(obj)
    x0 = np.array(x0, dtype=float).ravel()
    if obj.bounds is not None and len(obj.bounds) != x0.size:
        raise ValueError(f"x0 has {x0.size} entries but {len(obj.bounds)} bounds were given")
    obj(x0)
    return x0, tracer


def _budget(evals_per_param: int | None, dim: int) -> int | None:
    return None if evals_per_param is None else int(evals_per_param) * dim


def nelder_mead(
    obj: Objective,
    x0,
    simplex_scale: float = 0.1,
    max_iter: int | None = None,
    tol: float = 1e-8,
    evals_per_param: int | None = None,
    use_bounds=True,
) -> OptResult:
    """Simplex search from an axis-aligned simplex of edge ``simplex_scale`` at ``x0``.

    ``evals_per_param`` caps the evaluations at that many per angle; with
    ``tol = 0`` the run normally uses the whole budget.
    """
    x0, tracer = _start(obj, x0)
    simplex = np.vstack([x0] + [x0 + simplex_scale * e for e in np.eye(x0.size)])
    res = _so.minimize(
        obj,
        x0,
        method="Nelder-Mead",
        bounds=obj.bounds if use_bounds else None,
        callback=tracer,
        options={
            "initial_simplex": simplex,
            "maxiter": max_iter,
            "maxfev": _budget(evals_per_param, x0.size),
            "xatol": tol,
            "fatol": tol,
        },
    )
    opts = {"simplex_scale": simplex_scale, "max_iter": max_iter, "tol": tol, "evals_per_param": evals_per_param}
    return _finish(obj, tracer, str(res.message), bool(res.success), opts)


def powell(
    obj: Objective,
    x0,
    max_iter: int | None = None,
    tol: float = 1e-8,
    evals_per_param: int | None = None,
    use_bounds=True,
) -> OptResult:
    """Direction-set search starting from the coordinate axes; budget as in :func:`nelder_mead`."""
    x0, tracer = _start(obj, x0)
    res = _so.minimize(
        obj,
        x0,
        method="Powell",
        bounds=obj.bounds if use_bounds else None,
        callback=tracer,
        options={
            "maxiter": max_iter,
            "maxfev": _budget(evals_per_param, x0.size),
            "xtol": tol,
            "ftol": tol,
            "direc": np.eye(x0.size),
        },
    )
    opts = {"max_iter": max_iter, "tol": tol, "evals_per_param": evals_per_param}
    return _finish(obj, tracer, str(res.message), bool(res.success), opts)


def differential_evolution(
    obj: Objective,
    bounds: Sequence[tuple[float, float]] | None = None,
    seed=None,
    pop_size: int = 15,
    F: float = 0.6,
    CR: float = 0.9,
    max_gen: int = 100,
    x0=None,
    tol: float = 0.0,
    polish: bool = True,
) -> OptResult:
    """rand/1/bin evolution over a box; ``x0`` (if any) replaces one initial member.

    The population holds ``pop_size`` members per parameter. With the default
    ``tol = 0`` every run lasts exactly ``max_gen`` generations; ``polish``
    then refines the best member with bounded L-BFGS.
    """
    bounds = bounds if bounds is not None else obj.bounds
    if bounds is None:
        raise ValueError("differential evolution needs finite bounds")
    lo, hi = np.array(bounds, dtype=float).T
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bounds must be finite")
    members = pop_size * lo.size
    if members < 5:
        raise ValueError("population must have at least 5 members")
    rng = np.random.default_rng(seed)
    init = lo + (hi - lo) * rng.random((members, lo.size))
    tracer = _Tracer(obj)
    if x0 is not None:
        x0, tracer = _start(obj, np.clip(x0, lo, hi))
        init[0] = x0
    res = _so.differential_evolution(
        obj,
        list(zip(lo, hi)),
        strategy="rand1bin",
        maxiter=max_gen,
        popsize=pop_size,
        mutation=F,
        recombination=CR,
        tol=tol,
        atol=0.0,
        init=init,
        polish=polish,
        rng=np.random.default_rng(rng.integers(2**63)),
        callback=tracer,
        updating="immediate",
    )
    opts = {"pop_size": pop_size, "F": F, "CR": CR, "max_gen": max_gen, "tol": tol, "polish": polish, "seed": seed}
    return _finish(obj, tracer, str(res.message), bool(res.success), opts)


def basinhopping(
    obj: Objective,
    x0,
    seed=None,
    n_hops: int = 30,
    step_size: float = 0.5,
    temperature: float = 1.0,
    fd_step: float = 1e-4,
    local_max_iter: int | None = None,
) -> OptResult:
    """Random hops, each followed by BFGS with a finite-difference gradient.

    Hops are uniform in ``[-step_size, step_size]`` per coordinate and accepted
    by the Metropolis rule at ``temperature``.
    """
    x0, tracer = _start(obj, x0)

    def jac(x):
        return central_difference(obj, x, fd_step)

    local_opts = {} if local_max_iter is None else {"maxiter": local_max_iter}
    res = _so.basinhopping(
        obj,
        x0,
        niter=n_hops,
        T=temperature,
        stepsize=step_size,
        interval=max(n_hops + 1, 50),  # keep the step size fixed
        minimizer_kwargs={"method": "BFGS", "jac": jac, "options": local_opts},
        callback=tracer,
        rng=np.random.default_rng(seed),
    )
    opts = {
        "n_hops": n_hops,
        "step_size": step_size,
        "temperature": temperature,
        "fd_step": fd_step,
        "local_max_iter": local_max_iter,
        "seed": seed,
    }
    return _finish(obj, tracer, " ".join(map(str, res.message)), True, opts)


OPTIMIZERS = ("nelder-mead", "powell", "de", "basinhopping")

DEFAULT_OPTIONS = {
    "nelder-mead": {"simplex_scale": 0.1, "max_iter": None, "tol": 1e-10, "evals_per_param": 200},
    "powell": {"max_iter": None, "tol": 1e-8, "evals_per_param": 200},
    "de": {"pop_size": 15, "F": 0.6, "CR": 0.9, "max_gen": 1000, "tol": 0.01, "polish": True},
    "basinhopping": {"n_hops": 100, "step_size": 1.0, "temperature": 1.0, "fd_step": 1e-4, "local_max_iter": None},
}


def run_optimizer(name: str, obj: Objective, x0, seed=None, **options) -> OptResult:
    """Dispatch by name with :data:`DEFAULT_OPTIONS` overridden by ``options``."""
    key = name.lower().replace("_", "-")
    aliases = {"differential-evolution": "de", "nm": "nelder-mead", "bh": "basinhopping"}
    key = aliases.get(key, key)
    if key not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {name!r}; choose from {OPTIMIZERS}")
    opts = {**DEFAULT_OPTIONS[key], **options}
    if key == "nelder-mead":
        return nelder_mead(obj, x0, **opts)
    if key == "powell":
        return powell(obj, x0, **opts)
    if key == "de":
        return differential_evolution(obj, seed=seed, x0=x0, **opts)
    return basinhopping(obj, x0, seed=seed, **opts)


def warm_start_extend(params: QaoaParams) -> QaoaParams:
    """Append a zero layer; the state, hence the energy, is unchanged."""
    return QaoaParams(params.gammas + (0.0,), params.betas + (0.0,))


def cross_instance_seed(params: QaoaParams, target_p: int) -> QaoaParams:
    """Reuse angles from another instance, zero-padded to ``target_p`` layers."""
    if params.p > target_p:
        raise ValueError(f"cannot shrink depth {params.p} to {target_p}")
    while params.p < target_p:
        params = warm_start_extend(params)
    return params


def write_trace_csv(path, trace: Sequence[TracePoint]) -> None:
    """CSV ``iteration,best_value,evaluations,elapsed_s``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "best_value", "evaluations", "elapsed_s"])
        for t in trace:
            w.writerow([t.iteration, repr(t.best_value), t.evaluations, f"{t.elapsed_s:.6f}"])
