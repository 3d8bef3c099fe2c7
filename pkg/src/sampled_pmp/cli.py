"""Command-line front end: solve, check, sweep and compare.

Exit codes: 0 success, 2 certificate failure, 3 solver non-convergence,
4 bad input.  Diagnostics go to standard error; artifacts (CSV, JSON, SVG)
into the chosen output directory.  Numeric CSV cells use %.12e with a dot
decimal point, so identical inputs give byte-identical data files.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import parking
from .certificate import check_certificate, write_certificate_json
from .errors import (Infeasible, InternalInconsistency, NonConvergence,
                     UnsupportedCase)
from .problem import FixedTime, FreeTime, build_grid, floor_index
from .simulate import integrate_extremal_forward, write_trajectory_csv
from .solver import SolverConfig, solve
from .specfile import LoadedSpec, SpecError, load_problem_spec
from .svgfig import SvgPlot

EXIT_OK = 0
EXIT_CERTIFICATE = 2
EXIT_NONCONVERGENCE = 3
EXIT_BAD_INPUT = 4

SUBSTEPS_ENV = "SAMPLED_PMP_SUBSTEPS"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; bad input must be 4 here
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="sampled-pmp",
                description="Solve and certify optimal sampled-data control "
                            "problems by indirect shooting.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_problem_flags(sp, with_T=True):
        sp.add_argument("--problem", choices=["parking"],
                        help="built-in problem name")
        sp.add_argument("--spec", type=str, help="problem specification JSON")
        sp.add_argument("--M", type=float, help="parking initial position")
        sp.add_argument("--tf", type=float, help="final time")
        if with_T:
            sp.add_argument("--T", type=float, help="sampling period")

    sp = sub.add_parser("solve", description="Solve a problem and write "
                        "controls, trajectory, certificate and manifest.")
    add_problem_flags(sp)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("check", description="Re-simulate a control sequence "
                        "and verify the optimality certificate.")
    add_problem_flags(sp)
    sp.add_argument("--controls", required=True, help="controls CSV")
    sp.add_argument("--adjoint-init", required=True,
                    help="initial adjoint p1,...,pn or a JSON file with it "
                         "(use --adjoint-init=-1,-2 for negative values)")
    sp.add_argument("--out", default=".", help="output directory")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("sweep", description="Solve the parking instance over "
                        "a list of sampling periods and tabulate the "
                        "deviation from the permanent optimum.")
    add_problem_flags(sp, with_T=False)
    sp.add_argument("--T-list", required=True, dest="T_list",
                    help="comma-separated sampling periods")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", description="Emit the sample-and-hold "
                        "staircase of a solved run next to the permanent "
                        "optimal control.")
    sp.add_argument("--run", required=True, help="directory written by solve")
    sp.add_argument("--out", default=None,
                    help="output directory (default: the run directory)")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    try:
        return args.func(args)
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        for entry in exc.history[-5:]:
            print(f"  {entry}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except InternalInconsistency as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except (SpecError, UnsupportedCase, Infeasible, ValueError, OSError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


def console_main() -> None:
    sys.exit(main())


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _solver_config() -> SolverConfig:
    substeps = os.environ.get(SUBSTEPS_ENV)
    if substeps is None:
        return SolverConfig()
    try:
        value = int(substeps)
    except ValueError:
        raise ValueError(f"{SUBSTEPS_ENV} must be an integer, got {substeps!r}")
    return SolverConfig(substeps=value)


def _resolve_problem(args, need_T: bool = True) -> LoadedSpec:
    """Problem from --problem/--spec with flag overrides for M, tf, T."""
    if (args.problem is None) == (getattr(args, "spec", None) is None):
        raise ValueError("exactly one of --problem or --spec is required")
    if args.problem is not None:
        if args.problem != "parking":
            raise ValueError(f"unknown builtin problem {args.problem!r}")
        if args.M is None or args.tf is None:
            raise ValueError("--problem parking needs --M and --tf")
        T = getattr(args, "T", None)
        if need_T and T is None:
            raise ValueError("--problem parking needs --T")
        return LoadedSpec(problem=parking.parking_problem(args.M, args.tf),
                          t_f=args.tf, T=T if T is not None else float("nan"),
                          builtin="parking", params={"M": args.M})
    loaded = load_problem_spec(args.spec)
    tf = args.tf if args.tf is not None else loaded.t_f
    T = getattr(args, "T", None)
    T = T if T is not None else loaded.T
    problem = loaded.problem
    if tf != loaded.t_f:
        if loaded.builtin == "parking":
            problem = parking.parking_problem(loaded.params["M"], tf)
        else:
            mode = (FreeTime(tf) if isinstance(problem.final_time, FreeTime)
                    else FixedTime(tf))
            problem = dataclasses.replace(problem, final_time=mode)
    return LoadedSpec(problem=problem, t_f=tf, T=T, builtin=loaded.builtin,
                      params=loaded.params)


def _sha256(path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


def _write_controls_csv(path, grid, controls, residuals) -> None:
    m = controls.m
    header = ["k", "t_k", "delta_k"] + [f"u_{i+1}" for i in range(m)] + ["residual_k"]
    lines = [",".join(header)]
    for k in range(grid.n_intervals):
        cells = [str(k), "%.12e" % grid.times[k], "%.12e" % grid.lengths[k]]
        cells += ["%.12e" % v for v in controls[k]]
        cells.append("%.12e" % residuals[k])
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_controls_csv(path, m: int) -> np.ndarray:
    """Controls from a CSV with u_1..u_m columns; diagnoses bad cells."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"controls file {path} does not exist")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        cols = []
        for i in range(m):
            name = f"u_{i+1}"
            if name not in header:
                raise ValueError(f"{path}: header row lacks column '{name}' "
                                 f"(found {header})")
            cols.append(header.index(name))
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(row)} cells, "
                                 f"header has {len(header)}")
            vals = []
            for name, idx in zip([f"u_{i+1}" for i in range(m)], cols):
                try:
                    vals.append(float(row[idx]))
                except ValueError:
                    raise ValueError(f"{path}: row {lineno}, column '{name}': "
                                     f"cannot parse {row[idx]!r} as a number")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows)


def _parse_adjoint_init(text: str, n: int) -> np.ndarray:
    """p(0) from 'p1,...,pn' or from a JSON file carrying it."""
    candidate = Path(text)
    if candidate.exists():
        data = json.loads(candidate.read_text(encoding="utf-8"))
        if isinstance(data, dict) and "p_init" in data:
            vec = data["p_init"]
        elif isinstance(data, dict) and "unknowns" in data \
                and isinstance(data["unknowns"], dict) \
                and "p_init" in data["unknowns"]:
            vec = data["unknowns"]["p_init"]
        elif isinstance(data, list):
            vec = data
        else:
            raise ValueError(f"{text}: no 'p_init' entry found")
        arr = np.asarray(vec, dtype=float)
    else:
        try:
            arr = np.array([float(tok) for tok in text.split(",")])
        except ValueError:
            raise ValueError(f"--adjoint-init {text!r} is neither a file nor "
                             f"a comma-separated vector")
    if arr.shape != (n,):
        raise ValueError(f"--adjoint-init must have {n} components, "
                         f"got {arr.shape}")
    return arr


def _write_manifest(out_dir: Path, payload: dict, outputs) -> None:
    payload = dict(payload)
    payload["outputs"] = sorted(set(list(outputs) + ["manifest.json"]))
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_dict(config: SolverConfig) -> dict:
    return {
        "inner_step": config.inner_step,
        "inner_tol": config.inner_tol,
        "inner_max_iter": config.inner_max_iter,
        "newton_tol": config.newton_tol,
        "newton_max_iter": config.newton_max_iter,
        "fd_step": config.fd_step,
        "max_halvings": config.max_halvings,
        "substeps": config.substeps,
        "use_broyden": config.use_broyden,
        "max_kink_restarts": config.max_kink_restarts,
    }


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    loaded = _resolve_problem(args)
    config = _solver_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    stats: dict = {}
    if loaded.builtin == "parking":
        M = loaded.params["M"]
        controls, (p1, p2f), cert = parking.solve_parking(M, loaded.t_f,
                                                          loaded.T, config,
                                                          stats=stats)
        grid = build_grid(loaded.t_f, loaded.T)
        p_init = np.array([p1, p1 * loaded.t_f + p2f])
        extremal = integrate_extremal_forward(loaded.problem, grid, controls,
                                              np.array([M, 0.0]), p_init,
                                              -1.0, config.substeps)
        unknowns = {"p_init": p_init.tolist(), "multipliers": [p1, p2f]}
    else:
        grid = build_grid(loaded.t_f, loaded.T)
        extremal, cert = solve(loaded.problem, grid, config=config, stats=stats)
        controls = extremal.controls
        unknowns = {"p_init": extremal.adjoint.initial.tolist()}
        if "unknowns" in stats:
            unknowns["vector"] = stats["unknowns"]
    wall = time.perf_counter() - started

    _write_controls_csv(out_dir / "controls.csv", extremal.grid, controls,
                        cert.interval_residuals)
    write_trajectory_csv(extremal, out_dir / "trajectory.csv")
    write_certificate_json(cert, out_dir / "certificate.json")

    inputs = {}
    if args.spec:
        inputs[str(args.spec)] = _sha256(args.spec)
    _write_manifest(out_dir, {
        "command": "solve",
        "config": _config_dict(config),
        "problem": {"builtin": loaded.builtin, "name": loaded.problem.name,
                    "tf": loaded.t_f, "T": loaded.T, **loaded.params},
        "inputs": inputs,
        "unknowns": unknowns,
        "iterations": stats.get("iterations"),
        "residual_norm": stats.get("residual_norm"),
        "residual_history": [entry["residual_norm"]
                             for entry in stats.get("history", [])],
        "wall_time_s": wall,
    }, ["controls.csv", "trajectory.csv", "certificate.json"])

    if not cert.passed:
        print("certificate failed: " + "; ".join(cert.violations), file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    loaded = _resolve_problem(args)
    config = _solver_config()
    problem = loaded.problem
    grid = build_grid(loaded.t_f, loaded.T)

    values = _read_controls_csv(args.controls, problem.m)
    if values.shape[0] != grid.n_intervals:
        raise ValueError(f"{args.controls}: {values.shape[0]} control rows but "
                         f"the grid has {grid.n_intervals} intervals")
    p_init = _parse_adjoint_init(args.adjoint_init, problem.n)

    q0 = problem.initial_state()
    extremal = integrate_extremal_forward(problem, grid, values, q0, p_init,
                                          -1.0, config.substeps,
                                          enforce_admissible=False)
    cert = check_certificate(problem, extremal)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_certificate_json(cert, out_dir / "certificate.json")
    if not cert.passed:
        print("certificate failed: " + "; ".join(cert.violations), file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    loaded = _resolve_problem(args, need_T=False)
    if loaded.builtin != "parking":
        raise ValueError("sweep compares against the permanent parking "
                         "optimum and requires the parking problem")
    M, t_f = loaded.params["M"], loaded.t_f
    tokens = [tok.strip() for tok in args.T_list.split(",") if tok.strip()]
    if not tokens:
        raise ValueError("--T-list must contain at least one period")
    try:
        periods = [float(tok) for tok in tokens]
    except ValueError:
        raise ValueError(f"--T-list must be comma-separated numbers, "
                         f"got {args.T_list!r}")
    config = _solver_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=min(len(periods), os.cpu_count() or 1)) as pool:
        rows = list(pool.map(lambda T: parking.sweep_row(M, t_f, T, config),
                             periods))
    wall = time.perf_counter() - started

    header = ["T", "K", "sup_dev", "terminal_residual", "max_pmp_residual",
              "cost_sampled", "cost_permanent", "status"]
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join([
            "%.12e" % row.T, str(row.K), "%.12e" % row.sup_dev,
            "%.12e" % row.terminal_residual, "%.12e" % row.max_pmp_residual,
            "%.12e" % row.cost_sampled, "%.12e" % row.cost_permanent,
            row.status,
        ]))
    (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    outputs = ["sweep.csv"]
    for tok, row in zip(tokens, rows):
        if row.status != "ok":
            continue
        name = f"sweep_T{tok}.svg"
        _sweep_svg(out_dir / name, M, t_f, row.T, config)
        outputs.append(name)

    _write_manifest(out_dir, {
        "command": "sweep",
        "config": _config_dict(config),
        "problem": {"builtin": "parking", "M": M, "tf": t_f},
        "inputs": {str(args.spec): _sha256(args.spec)} if args.spec else {},
        "periods": periods,
        "statuses": [row.status for row in rows],
        "errors": {tok: row.error for tok, row in zip(tokens, rows) if row.error},
        "wall_time_s": wall,
    }, outputs)

    if all(row.status != "ok" for row in rows):
        print("every period in the sweep failed", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _sweep_svg(path, M, t_f, T, config) -> None:
    controls, _, _ = parking.solve_parking(M, t_f, T, config)
    grid = build_grid(t_f, T)
    ts = np.linspace(0.0, t_f, 1000)
    fig = SvgPlot(title=f"sampled vs permanent control (T={T:g})",
                  xlabel="t", ylabel="u")
    fig.add_line(ts, parking.permanent_control(M, t_f, ts), color="red")
    fig.add_crosses(np.asarray(grid.times), controls.values[:, 0], color="blue")
    fig.save(path)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def cmd_compare(args) -> int:
    run_dir = Path(args.run)
    manifest_path = run_dir / "manifest.json"
    controls_path = run_dir / "controls.csv"
    if not run_dir.is_dir() or not manifest_path.exists() or not controls_path.exists():
        raise ValueError(f"{run_dir} is not a solved run directory "
                         f"(needs manifest.json and controls.csv)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    prob = manifest.get("problem", {})
    if prob.get("builtin") != "parking":
        raise ValueError("compare needs a parking run (the permanent optimum "
                         "has a closed form only there)")
    M, t_f, T = float(prob["M"]), float(prob["tf"]), float(prob["T"])
    values = _read_controls_csv(controls_path, 1)
    grid = build_grid(t_f, T)
    if values.shape[0] != grid.n_intervals:
        raise ValueError(f"{controls_path}: row count does not match the grid")
    u = values[:, 0]

    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    ts = np.linspace(0.0, t_f, 1001)
    K = grid.n_intervals
    hold = np.array([u[min(floor_index(t, T), K - 1)] for t in ts])
    star = np.asarray(parking.permanent_control(M, t_f, ts))
    lines = ["t,u_hold,u_star"]
    for i in range(len(ts)):
        lines.append("%.12e,%.12e,%.12e" % (ts[i], hold[i], star[i]))
    (out_dir / "compare.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    edges = list(np.asarray(grid.times)) + [t_f]
    fig = SvgPlot(title=f"sample-and-hold (M={M:g}, tf={t_f:g}, T={T:g})",
                  xlabel="t", ylabel="u")
    fig.add_line(ts, star, color="red")
    fig.add_steps(edges, u, color="blue")
    fig.save(out_dir / "compare.svg")
    return EXIT_OK


if __name__ == "__main__":
    console_main()
