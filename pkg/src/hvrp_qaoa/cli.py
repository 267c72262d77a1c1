"""Command-line driver: ``hvrp-qaoa <command> [options]``.

Commands: encode, landscape, optimize, depth-sweep, compare-optimizers,
oracle. Results go to ``--out`` as CSV plus a ``metadata.json`` run record;
nothing is plotted. Exit codes: 0 success, 2 configuration error, 3 resource
cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, oracle, qaoa
from .decode import classical_cost, decode_bits, render_plan, validate
from .errors import CapExceededError
from .experiments import (
    CONSTRAINTS,
    FULL,
    _bounds,
    build_problem,
    compare_optimizers,
    compile_model,
    depth_sweep,
    evaluate_params,
    initial_guess,
)
from .model import InstanceError
from .opt import DEFAULT_OPTIONS, OPTIMIZERS, Objective, run_optimizer, write_trace_csv
from .qaoa import QaoaParams

EXIT_CONFIG = 2
EXIT_CAP = 3


class ConfigError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _optimizer_options(args) -> dict:
    opts: dict = {}
    if getattr(args, "options", None):
        try:
            opts.update(json.loads(Path(args.options).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read optimizer options {args.options}: {exc}") from None
    for item in getattr(args, "opt", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--opt expects KEY=VALUE, got {item!r}")
        opts[key.strip()] = _parse_value(value.strip())
    return opts


def _options_for(name: str, opts: dict) -> dict:
    """Accept either flat options or a mapping keyed by optimizer name."""
    if any(k in OPTIMIZERS for k in opts):
        opts = opts.get(name, {})
    unknown = set(opts) - set(DEFAULT_OPTIONS[name])
    if unknown:
        raise ConfigError(f"unknown option(s) for {name}: {sorted(unknown)}")
    return opts


def _out_dir(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metadata(out: Path | None, args, problem, extra: dict, t0: float) -> None:
    if out is None:
        return
    import scipy

    meta = {
        "command": args.command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "versions": {
            "hvrp_qaoa": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "problem": problem.metadata() if problem is not None else None,
        "wall_time_s": time.perf_counter() - t0,
        **extra,
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, default=str) + "\n")


def _problem(args, build=build_problem):
    selector = args.file or args.instance
    try:
        return build(selector, args.mode)
    except (FileNotFoundError, KeyError, InstanceError) as exc:
        raise ConfigError(str(exc)) from None


def _write_rows(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def count_local_minima(grid: np.ndarray, rtol: float = 1e-12) -> int:
    """Interior grid points strictly below all eight neighbours."""
    g = np.asarray(grid)
    c = g[1:-1, 1:-1]
    ok = np.ones_like(c, dtype=bool)
    tol = rtol * max(1.0, float(np.abs(g).max()))
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = g[1 + di : g.shape[0] - 1 + di, 1 + dj : g.shape[1] - 1 + dj]
                ok &= c < nb - tol
    return int(ok.sum())


# --- commands ---------------------------------------------------------------


def cmd_encode(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args, compile_model)
    out = _out_dir(args)
    if problem.layout is not None:
        d = problem.layout.describe()
        print(f"routing {d['routing']}, capacity {d['capacity']}, total {d['total']}")
    else:
        print(f"total {problem.model.n}")
    if out is not None:
        (out / "model.txt").write_text(problem.model.dumps())
    _write_metadata(out, args, problem, {}, t0)
    return 0


def cmd_landscape(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args)
    out = _out_dir(args)
    gamma_max = args.gamma_max if args.gamma_max else 2 * math.pi
    gammas, betas, grid = qaoa.grid_scan(problem.diag, (0.0, gamma_max), (0.0, math.pi), args.resolution)
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    minima = count_local_minima(grid)
    print(
        f"{problem.name} ({problem.n} qubits): min E = {grid[i, j]:.6g} at gamma={gammas[i]:.4f}, "
        f"beta={betas[j]:.4f}; max E = {grid.max():.6g}; strict local minima: {minima}"
    )
    if out is not None:
        qaoa.write_grid_csv(out / "landscape.csv", gammas, betas, grid)
    _write_metadata(out, args, problem, {"resolution": args.resolution, "local_minima": minima}, t0)
    return 0


_SWEEP_COLUMNS = ["optimizer", "p", "energy", "success_feasible", "success_optimal", "wall_time_s", "evaluations", "gammas", "betas"]


def _dump_depth(out: Path, problem, r, full_distribution: bool) -> None:
    with (out / f"histogram_p{r.p}.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin", "probability"])
        for k in sorted(r.histogram):
            w.writerow([k, repr(r.histogram[k])])
    if full_distribution:
        probs = qaoa.distribution(problem.diag, r.params)
        qaoa.write_distribution_csv(out / f"distribution_p{r.p}.csv", probs, problem.diag.energies, problem.feasible)
    if r.result is not None:
        write_trace_csv(out / f"trace_p{r.p}.csv", r.result.trace)


def _report(r) -> None:
    print(
        f"p={r.p} E*={r.energy:.6f} feasible={r.success_feasible:.4f} optimal={r.success_optimal:.4f} "
        f"evals={r.evaluations} time={r.wall_time:.2f}s"
    )


def cmd_optimize(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args)
    out = _out_dir(args)
    name = _canonical_optimizer(args.optimizer)
    opts = _options_for(name, _optimizer_options(args))
    bounds = _bounds(args.p, args.gamma_max or 2 * math.pi)
    obj = Objective(lambda x: qaoa.expectation(problem.diag, QaoaParams.from_vector(x)), bounds)
    x0 = initial_guess(args.p, args.seed, bounds)
    res = run_optimizer(name, obj, x0.to_vector(), seed=args.seed, **opts)
    params = res.params()
    energy, fmass, omass, hist = evaluate_params(problem, params)
    print(f"optimizer {name}, p={args.p}: E*={energy:.6f} feasible={fmass:.4f} optimal={omass:.4f} evals={res.evaluations}")
    print("gammas " + " ".join(f"{g:.6f}" for g in params.gammas))
    print("betas  " + " ".join(f"{b:.6f}" for b in params.betas))
    if out is not None:
        write_trace_csv(out / "trace.csv", res.trace)
        probs = qaoa.distribution(problem.diag, params)
        qaoa.write_distribution_csv(
            out / "distribution.csv", probs, problem.diag.energies, problem.feasible, min_probability=args.min_probability
        )
    _write_metadata(
        out, args, problem, {"optimizer": name, "options": res.options, "energy": energy, "histogram": hist}, t0
    )
    return 0


def _canonical_optimizer(name: str) -> str:
    key = name.lower()
    key = {"differential-evolution": "de", "bh": "basinhopping", "nm": "nelder-mead"}.get(key, key)
    if key not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {name!r}")
    return key


def cmd_depth_sweep(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args)
    out = _out_dir(args)
    name = _canonical_optimizer(args.optimizer)
    opts = _options_for(name, _optimizer_options(args))
    full_dist = args.dump_distribution or problem.n <= 16
    print(f"{problem.name} ({problem.n} qubits, {problem.mode}); uniform feasible mass {problem.uniform_feasible_mass:.3e}")

    def on_result(r):
        _report(r)
        if out is not None:
            _dump_depth(out, problem, r, full_dist)

    results = depth_sweep(
        problem, args.p_max, name, seed=args.seed, options=opts, gamma_max=args.gamma_max or 2 * math.pi, on_result=on_result
    )
    if out is not None:
        _write_rows(out / "depth_sweep.csv", [r.row() for r in results], _SWEEP_COLUMNS)
    _write_metadata(out, args, problem, {"optimizer": name, "options": {**DEFAULT_OPTIONS[name], **opts}}, t0)
    return 0


def cmd_compare(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args)
    out = _out_dir(args)
    names = [_canonical_optimizer(n) for n in args.optimizers.split(",")]
    raw = _optimizer_options(args)
    if raw and not any(k in OPTIMIZERS for k in raw):
        raise ConfigError("compare-optimizers takes options keyed by optimizer name")
    opts = {n: _options_for(n, raw) for n in names}
    rows = compare_optimizers(problem, args.p_max, names, seed=args.seed, options=opts, gamma_max=args.gamma_max or 2 * math.pi)
    for r in rows:
        print(f"{r.optimizer:>12} ", end="")
        _report(r)
    if out is not None:
        _write_rows(
            out / "compare_optimizers.csv",
            [r.row() for r in rows],
            ["optimizer", "p", "success_feasible", "success_optimal", "wall_time_s", "evaluations"],
        )
    budgets = {n: {**DEFAULT_OPTIONS[n], **opts[n]} for n in names}
    _write_metadata(out, args, problem, {"options": budgets}, t0)
    return 0


def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    problem = _problem(args)
    out = _out_dir(args)
    spectrum = oracle.enumerate_spectrum(problem.model)
    ground = spectrum.ground_states
    print(f"{problem.name} ({problem.n} qubits, {problem.mode}): ground energy {spectrum.ground_energy:.9g}, {ground.size} ground state(s)")
    print(f"feasible states: {int(problem.feasible.sum())} of {2 ** problem.n}")
    if problem.layout is not None:
        inst = problem.instance
        for z in ground[: args.show]:
            bits = ((int(z) >> np.arange(problem.n)) & 1)
            plan, assign = decode_bits(problem.layout, bits)
            report = validate(inst, plan, assign.slack_values)
            print(f"[{oracle.bitstring(z, problem.n)}] cost {classical_cost(inst, plan):.4f} feasible {report.feasible}")
            print("  " + render_plan(inst, plan).replace("\n", "\n  "))
        if ground.size > args.show:
            print(f"... {ground.size - args.show} more")
    if out is not None and not args.no_spectrum:
        oracle.write_spectrum_csv(out / "spectrum.csv", spectrum, problem.feasible)
    _write_metadata(out, args, problem, {"ground_energy": spectrum.ground_energy, "ground_states": int(ground.size)}, t0)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", default="I", help="I, II, III, knapsack, or a path (instance JSON / model dump)")
    common.add_argument("--file", help="instance JSON or model dump (overrides --instance)")
    common.add_argument("--mode", choices=[CONSTRAINTS, FULL], default=CONSTRAINTS)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory")
    common.add_argument("--gamma-max", type=float, default=None, help="upper end of the gamma box (default 2 pi)")

    opt_args = argparse.ArgumentParser(add_help=False)
    opt_args.add_argument("--options", help="JSON file with optimizer options")
    opt_args.add_argument("--opt", action="append", metavar="KEY=VALUE", help="optimizer option (repeatable)")

    parser = argparse.ArgumentParser(prog="hvrp-qaoa", description="Exact QAOA simulation of vehicle-routing QUBOs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", parents=[common], help="qubit counts and model dump")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("landscape", parents=[common], help="p=1 energy grid")
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("optimize", parents=[common, opt_args], help="optimize angles at one depth")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--optimizer", default="basinhopping")
    p.add_argument("--min-probability", type=float, default=1e-6, help="distribution rows below this are skipped")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("depth-sweep", parents=[common, opt_args], help="p = 1..p_max with warm starts")
    p.add_argument("--p-max", type=int, default=5)
    p.add_argument("--optimizer", default="basinhopping")
    p.add_argument("--dump-distribution", action="store_true", help="write full distributions even above 16 qubits")
    p.set_defaults(func=cmd_depth_sweep)

    p = sub.add_parser("compare-optimizers", parents=[common, opt_args], help="all optimizers, p = 1..p_max")
    p.add_argument("--p-max", type=int, default=5)
    p.add_argument("--optimizers", default=",".join(OPTIMIZERS))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", parents=[common], help="exhaustive spectrum and ground states")
    p.add_argument("--show", type=int, default=10, help="ground states to print")
    p.add_argument("--no-spectrum", action="store_true", help="skip the spectrum CSV")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name in ("p", "p_max", "resolution"):
        value = getattr(args, name, None)
        if value is not None and value < (2 if name == "resolution" else 1):
            print(f"error: --{name.replace('_', '-')} is too small: {value}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except CapExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
