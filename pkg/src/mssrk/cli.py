"""Command-line driver: configured runs, tableau checks, noise sampling.

Subcommands
    check-tableau NAME_OR_FILE [--tol X]
    run-1d       --config cfg.json [--seed N] [--out DIR] [--tol X]
    run-maxwell  --config cfg.json [--seed N] [--out DIR] [--tol X]
    sample-noise --config cfg.json [--seed N] [--out DIR]

Configs are strict JSON: unknown keys anywhere are rejected before any
computation.  All floating-point CSV output uses 17 significant digits so
files round-trip bit-faithfully.  Exit codes: 0 success, 2 config/parse
error, 3 numerical failure (non-converged stage solve or failed check).
Seed sweeps run one output file per seed; MSSRK_THREADS caps how many
realizations run concurrently.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import integrator1d, maxwell3d
from .noise import QWienerSpec, path_to_csv, sample_path, tensor_sine_family
from .solver import SolverConfig, SolverError
from .system import SystemSpec, builtin_system, system_from_dict
from .tableau import Tableau, builtin_tableau, condition_residual, is_multisymplectic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _require_keys(data: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return data


def _parse_tableau(value, where: str) -> Tableau:
    if isinstance(value, str):
        try:
            return builtin_tableau(value)
        except ValueError as exc:
            raise ConfigError(str(exc))
    if isinstance(value, dict):
        try:
            return Tableau.from_dict(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad inline tableau in {where}: {exc}")
    raise ConfigError(f"{where} must be a builtin name or an inline tableau object")


def _parse_noise(data: dict, default_length, seed_override=None) -> QWienerSpec:
    _require_keys(
        data, {"J", "eta", "domain_length", "seed"}, {"J", "eta", "seed"}, "noise"
    )
    J = int(data["J"])
    eta = data["eta"]
    if isinstance(eta, dict):
        _require_keys(eta, {"decay", "p"}, {"decay", "p"}, "noise.eta")
        if eta["decay"] != "j^-p":
            raise ConfigError('noise.eta.decay must be "j^-p"')
        eta = (np.arange(1, J + 1, dtype=float) ** (-float(eta["p"]))).tolist()
    eta = np.asarray(eta, dtype=float)
    length = data.get("domain_length", default_length)
    seed = int(data["seed"]) if seed_override is None else int(seed_override)
    lengths = np.atleast_1d(np.asarray(length, dtype=float))
    fam = tensor_sine_family(lengths) if lengths.size > 1 else None
    try:
        return QWienerSpec(J=J, eta=eta, domain_length=length, seed=seed, eigenfunctions=fam)
    except ValueError as exc:
        raise ConfigError(f"bad noise spec: {exc}")


def _parse_solver(data: dict | None, tol_override=None) -> SolverConfig:
    data = dict(data or {})
    _require_keys(data, {"tol", "max_iter"}, set(), "solver")
    tol = float(tol_override) if tol_override is not None else float(data.get("tol", 1e-13))
    try:
        return SolverConfig(tol=tol, max_iter=int(data.get("max_iter", 500)))
    except ValueError as exc:
        raise ConfigError(f"bad solver config: {exc}")


def _seed_list(config: dict, seed_override) -> list[int]:
    if seed_override is not None:
        return [int(seed_override)]
    if "seeds" in config:
        seeds = config["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds must be a nonempty list of integers")
        return [int(s) for s in seeds]
    return [int(config.get("noise", {}).get("seed", 0))]


def _num_workers(n_jobs: int) -> int:
    raw = os.environ.get("MSSRK_THREADS", "1")
    try:
        cap = max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MSSRK_THREADS must be an integer, got {raw!r}")
    return min(cap, n_jobs)


def _initial_profile_1d(n: int, length: float):
    def z0(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (n,))
        for c in range(n):
            out[..., c] = np.sin(2.0 * np.pi * x / length + 0.7 * c) + 0.3 * np.cos(
                4.0 * np.pi * x / length + 0.3 * c
            )
        return out

    return z0


def _initial_profile_3d(lengths):
    lx, ly, lz = lengths

    def f0(pts):
        x, y, z = pts[..., 0], pts[..., 1], pts[..., 2]
        out = np.empty(x.shape + (6,))
        for c in range(6):
            out[..., c] = np.sin(2.0 * np.pi * x / lx + c) * np.cos(
                2.0 * np.pi * y / ly
            ) + 0.3 * np.sin(2.0 * np.pi * z / lz + 0.2 * c)
        return out

    return f0


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_metadata(path: Path, config: dict, seed: int, wall: float) -> None:
    with open(path, "w") as fh:
        json.dump({"config": config, "seed": seed, "wall_time_s": wall}, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# check-tableau
# ---------------------------------------------------------------------------

def cmd_check_tableau(args) -> int:
    name = args.tableau
    try:
        if name.endswith(".json") or os.path.sep in name:
            with open(name) as fh:
                tab = Tableau.from_dict(json.load(fh))
        else:
            tab = builtin_tableau(name)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tol = args.tol if args.tol is not None else 1e-12
    M = condition_residual(tab)
    print(f"tableau: {name} ({tab.stages} stages)")
    print("condition residual matrix:")
    for row in M:
        print("  " + "  ".join(f"{v: .17g}" for v in row))
    ok = is_multisymplectic(tab, tol=tol)
    print(f"max residual: {np.abs(M).max():.17g}  (tol {tol:g})")
    print(f"verdict: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# run-1d
# ---------------------------------------------------------------------------

_RUN1D_KEYS = {
    "system", "grid", "tableaux", "noise", "solver",
    "diagnostics", "seeds", "tangent_seed", "output",
}

HEADER_1D = ["step", "time", "ms_residual_max", "quadratic_invariant", "solver_iterations"]
HEADER_MAXWELL = ["step", "time", "energy", "energy_rel_drift", "ms_residual_max", "solver_iterations"]


def _parse_system(value) -> SystemSpec:
    try:
        if isinstance(value, str):
            return builtin_system(value)
        if isinstance(value, dict):
            return system_from_dict(value)
    except ValueError as exc:
        raise ConfigError(str(exc))
    raise ConfigError("system must be a builtin name or a matrix object")


def _run_1d_one_seed(config, seed, out_dir, tol_override):
    """One realization; returns (csv_path, exit_code)."""
    spec = _parse_system(config["system"])
    gd = dict(config["grid"])
    _require_keys(gd, {"cells", "h", "steps", "tau"}, {"cells", "h", "steps", "tau"}, "grid")
    try:
        grid = integrator1d.GridSpec(
            cells=int(gd["cells"]), h=float(gd["h"]),
            steps=int(gd["steps"]), tau=float(gd["tau"]),
        )
    except ValueError as exc:
        raise ConfigError(f"bad grid: {exc}")
    tabs = dict(config["tableaux"])
    _require_keys(tabs, {"time", "space"}, {"time", "space"}, "tableaux")
    t_tab = _parse_tableau(tabs["time"], "tableaux.time")
    x_tab = _parse_tableau(tabs["space"], "tableaux.space")
    noise_spec = _parse_noise(config["noise"], grid.domain_length, seed)
    solver = _parse_solver(config.get("solver"), tol_override)
    diagnostics = tuple(config.get("diagnostics", integrator1d.DIAGNOSTICS))
    unknown = set(diagnostics) - set(integrator1d.DIAGNOSTICS)
    if unknown:
        raise ConfigError(f"unknown diagnostics: {sorted(unknown)}")

    pts = integrator1d.stage_points(grid, x_tab)
    noise = sample_path(noise_spec, grid.steps, grid.tau, pts)
    state = integrator1d.init_state(grid, x_tab, _initial_profile_1d(spec.n, grid.domain_length))
    pair = None
    if "ms_residual" in diagnostics:
        rng = np.random.default_rng(int(config.get("tangent_seed", 0)))
        shape = (grid.cells, x_tab.stages, spec.n)
        pair = integrator1d.TangentPair(
            u_lines=rng.standard_normal(shape), v_lines=rng.standard_normal(shape)
        )

    prefix = config.get("output", "run1d")
    csv_path = out_dir / f"{prefix}_seed{seed}.csv"
    meta_path = out_dir / f"{prefix}_seed{seed}.json"
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        record = integrator1d.run(
            spec, grid, t_tab, x_tab, state, noise,
            solver=solver, diagnostics=diagnostics, tangent_pair=pair,
        )
        rows = list(record.rows())
    except SolverError as exc:
        print(f"seed {seed}: solver failure: {exc}", file=sys.stderr)
        rows = [[-1, float("nan"), exc.residual, float("nan"), -1]]
        code = EXIT_NUMERIC
    _write_rows(csv_path, HEADER_1D, rows)
    _write_metadata(meta_path, config, seed, time.perf_counter() - t0)
    if code == EXIT_OK:
        qi = [v for v in record.quadratic_invariant if np.isfinite(v)]
        drift = abs(qi[-1] - qi[0]) if len(qi) > 1 else 0.0
        ms = np.nanmax(record.ms_residual_max) if len(rows) > 1 else float("nan")
        print(
            f"seed {seed}: {len(rows)} rows, invariant drift {drift:.3e}, "
            f"max ms residual {ms:.3e} -> {csv_path}"
        )
    return csv_path, code


def cmd_run_1d(args) -> int:
    config = _load_config(args.config)
    _require_keys(config, _RUN1D_KEYS, {"system", "grid", "tableaux", "noise"}, "config")
    seeds = _seed_list(config, args.seed)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = _num_workers(len(seeds))
    jobs = [(config, s, out_dir, args.tol) for s in seeds]
    if workers == 1:
        results = [_run_1d_one_seed(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_1d_one_seed(*j), jobs))
    return max(code for _, code in results)


# ---------------------------------------------------------------------------
# run-maxwell
# ---------------------------------------------------------------------------

_MAXWELL_KEYS = {
    "lambda", "grid", "dx", "tau", "steps", "tableaux", "noise",
    "solver", "diagnostics", "seeds", "tangent_seed", "output",
}


def _parse_maxwell_config(config, tol_override):
    _require_keys(
        config, _MAXWELL_KEYS, {"lambda", "grid", "dx", "tau", "steps", "tableaux", "noise"},
        "config",
    )
    cells = config["grid"]
    dx = config["dx"]
    if not (isinstance(cells, list) and len(cells) == 3):
        raise ConfigError("grid must be a list [I1, I2, I3]")
    if not (isinstance(dx, list) and len(dx) == 3):
        raise ConfigError("dx must be a list [dx, dy, dz]")
    try:
        grid3 = maxwell3d.Grid3Spec(
            cells=tuple(int(c) for c in cells),
            spacing=tuple(float(d) for d in dx),
            steps=int(config["steps"]),
            tau=float(config["tau"]),
        )
    except ValueError as exc:
        raise ConfigError(f"bad grid: {exc}")
    tv = config["tableaux"]
    if isinstance(tv, (str, dict)) and not (isinstance(tv, dict) and "time" in tv):
        one = _parse_tableau(tv, "tableaux")
        tabs = maxwell3d.TableauSet(time=one, x=one, y=one, z=one)
    else:
        tv = dict(tv)
        _require_keys(tv, {"time", "x", "y", "z"}, {"time", "x", "y", "z"}, "tableaux")
        tabs = maxwell3d.TableauSet(
            time=_parse_tableau(tv["time"], "tableaux.time"),
            x=_parse_tableau(tv["x"], "tableaux.x"),
            y=_parse_tableau(tv["y"], "tableaux.y"),
            z=_parse_tableau(tv["z"], "tableaux.z"),
        )
    solver = _parse_solver(config.get("solver"), tol_override)
    return grid3, tabs, solver


def _run_maxwell_one_seed(config, seed, out_dir, engine, grid3, tabs, solver):
    noise_spec = _parse_noise(config["noise"], grid3.lengths, seed)
    mspec = maxwell3d.MaxwellSpec(
        lam=float(config["lambda"]), grid3=grid3, tableaux=tabs, noise=noise_spec
    )
    diagnostics = tuple(config.get("diagnostics", ("energy",)))
    unknown = set(diagnostics) - set(maxwell3d.MAXWELL_DIAGNOSTICS)
    if unknown:
        raise ConfigError(f"unknown diagnostics: {sorted(unknown)}")
    state = maxwell3d.init_maxwell_state(grid3, tabs, _initial_profile_3d(grid3.lengths))
    pair = None
    if "ms_residual" in diagnostics:
        rng = np.random.default_rng(int(config.get("tangent_seed", 0)))
        shape = grid3.cells + tabs.stage_shape + (6,)
        pair = maxwell3d.MaxwellTangentPair(
            u_lines=rng.standard_normal(shape), v_lines=rng.standard_normal(shape)
        )

    prefix = config.get("output", "maxwell")
    csv_path = out_dir / f"{prefix}_seed{seed}.csv"
    meta_path = out_dir / f"{prefix}_seed{seed}.json"
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        record = maxwell3d.run_maxwell(
            mspec, state, solver=solver, diagnostics=diagnostics,
            tangent_pair=pair, engine=engine,
        )
        rows = list(record.rows())
    except SolverError as exc:
        print(f"seed {seed}: solver failure: {exc}", file=sys.stderr)
        rows = [[-1, float("nan"), float("nan"), float("nan"), exc.residual, -1]]
        code = EXIT_NUMERIC
    _write_rows(csv_path, HEADER_MAXWELL, rows)
    _write_metadata(meta_path, config, seed, time.perf_counter() - t0)
    if code == EXIT_OK:
        print(
            f"seed {seed}: {len(rows)} rows, max energy drift "
            f"{max(record.energy_rel_drift):.3e} -> {csv_path}"
        )
    return csv_path, code


def cmd_run_maxwell(args) -> int:
    config = _load_config(args.config)
    grid3, tabs, solver = _parse_maxwell_config(config, args.tol)
    seeds = _seed_list(config, args.seed)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    # one engine per sweep: the expensive noise-free factorization is shared
    probe_noise = _parse_noise(config["noise"], grid3.lengths, seeds[0])
    mspec0 = maxwell3d.MaxwellSpec(
        lam=float(config["lambda"]), grid3=grid3, tableaux=tabs, noise=probe_noise
    )
    engine = maxwell3d.MaxwellEngine(mspec0, solver)
    engine._ensure_pinv()
    workers = _num_workers(len(seeds))
    jobs = [(config, s, out_dir, engine, grid3, tabs, solver) for s in seeds]
    if workers == 1:
        results = [_run_maxwell_one_seed(*j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_maxwell_one_seed(*j), jobs))
    return max(code for _, code in results)


# ---------------------------------------------------------------------------
# sample-noise
# ---------------------------------------------------------------------------

_NOISE_RUN_KEYS = {"noise", "steps", "tau", "points", "output"}


def cmd_sample_noise(args) -> int:
    config = _load_config(args.config)
    _require_keys(config, _NOISE_RUN_KEYS, {"noise", "steps", "tau", "points"}, "config")
    steps = int(config["steps"])
    tau = float(config["tau"])
    pv = config["points"]
    if isinstance(pv, dict):
        _require_keys(pv, {"count"}, {"count"}, "points")
        nd = config["noise"]
        length = float(np.atleast_1d(np.asarray(nd.get("domain_length", 1.0)))[0])
        points = np.linspace(0.0, length, int(pv["count"]) + 2)[1:-1]
    else:
        points = np.asarray(pv, dtype=float)
    spec = _parse_noise(config["noise"], config["noise"].get("domain_length", 1.0), args.seed)
    try:
        path = sample_path(spec, steps, tau, points)
    except ValueError as exc:
        raise ConfigError(str(exc))
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{config.get('output', 'noise')}.csv"
    with open(csv_path, "w", newline="") as fh:
        path_to_csv(path, fh)
    # variance summary: sample variance per point against tau * sum eta_j e_j^2
    E = np.stack([spec.eigenfunctions(j, path.points) for j in range(1, spec.J + 1)])
    expected = tau * (spec.eta[:, None] * E**2).sum(axis=0)
    sample = path.increments.var(axis=0, ddof=1) if steps > 1 else np.zeros(len(E[0]))
    sigma = expected * np.sqrt(2.0 / max(steps - 1, 1))
    ok = sigma > 0
    zmax = float(np.abs((sample - expected)[ok] / sigma[ok]).max()) if ok.any() else 0.0
    print(f"wrote {csv_path} ({steps} steps x {path.increments.shape[1]} points)")
    print(f"variance summary: max z-score {zmax:.2f} (3-sigma bound 3.00)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mssrk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-tableau", help="verify the multi-symplecticity condition")
    p.add_argument("tableau", help="builtin name or path to a tableau JSON file")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_check_tableau)

    for name, func in (("run-1d", cmd_run_1d), ("run-maxwell", cmd_run_maxwell)):
        p = sub.add_parser(name, help=f"run the {name[4:]} scheme from a JSON config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None, help="override the config seeds")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--tol", type=float, default=None, help="override solver tolerance")
        p.set_defaults(func=func)

    p = sub.add_parser("sample-noise", help="sample Q-Wiener increments to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sample_noise)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
