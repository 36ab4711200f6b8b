"""Command-line entry point: ``bulksurf {speed,sweep,optimize,validate,mesh}``."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .assembly import assemble, dump_coo
from .config import ConfigError, RunConfig, load_config, write_manifest
from .eigsolver import EigenSolverError
from .geometry import (
    FourierShape,
    InvalidShapeError,
    MeshQualityError,
    build_mesh,
    rings_for,
    write_mesh,
    write_shape,
)
from .optimizer import optimize, random_shape
from .shape_grad import UnsupportedConfiguration, fourier_gradient, write_gradient_csv
from .speed import (
    BracketError,
    TrialRejected,
    persistence_condition,
    spreading_speed,
    sweep,
    write_sweep_csv,
)
from .validation import run_suite, write_report

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

SPEED_HEADER = ["c_star", "alpha_star", "lambda0", "lambda_star", "persistent", "evals", "status"]


def _g(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _mesh_for(cfg: RunConfig):
    # target_h is relative to the mean radius
    return build_mesh(cfg.shape, cfg.target_h * cfg.shape.a0, cfg.n_rings)


def cmd_speed(cfg: RunConfig) -> int:
    mesh = _mesh_for(cfg)
    res = spreading_speed(mesh, cfg.params, cfg.solver)
    cond = persistence_condition(mesh, cfg.params)
    with open(cfg.out / "speed.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPEED_HEADER)
        w.writerow([_g(res.c_star), _g(res.alpha_star), _g(res.lambda0), _g(res.lambda_at_star),
                    int(res.persistent), res.evals, res.status])
    if cfg.debug:
        forms = assemble(mesh, cfg.params, res.alpha_star or 0.0)
        dump_coo(forms.A, cfg.out / "A.coo")
        dump_coo(forms.B, cfg.out / "B.coo")
        if res.persistent:
            try:
                write_gradient_csv(fourier_gradient(cfg.shape, mesh, cfg.params, res), cfg.out / "gradient.csv")
            except UnsupportedConfiguration as exc:
                print(f"gradient dump skipped: {exc}", file=sys.stderr)
    summary = {
        "c_star": res.c_star,
        "alpha_star": res.alpha_star,
        "lambda0": res.lambda0,
        "lambda_star": res.lambda_at_star,
        "persistent": res.persistent,
        "persistence_condition": cond,
        "evals": res.evals,
        "n_vertices": mesh.n_vertices,
    }
    write_manifest(cfg, "speed", cfg.out / "manifest.json", summary)
    if res.persistent:
        print(f"c* = {res.c_star:.10g}  alpha* = {res.alpha_star:.10g}  lambda(0) = {res.lambda0:.6g}  "
              f"persistent (nu*int g + mu*int f = {cond:.6g})  nodes = {mesh.n_vertices}")
    else:
        print(f"extinct: c* = 0  lambda(0) = {res.lambda0:.6g}  (nu*int g + mu*int f = {cond:.6g})  "
              f"nodes = {mesh.n_vertices}")
    return EXIT_OK


def _chunks(values, n):
    k, r = divmod(len(values), n)
    out, start = [], 0
    for i in range(n):
        stop = start + k + (1 if i < r else 0)
        if stop > start:
            out.append(values[start:stop])
        start = stop
    return out


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section")
    var, values = cfg.sweep.var, cfg.sweep.values
    # R-sweeps dilate the configured shape; topology is fixed across workers
    rings = cfg.n_rings if cfg.n_rings is not None else rings_for(cfg.shape, cfg.target_h * cfg.shape.a0)
    h = cfg.target_h * cfg.shape.a0

    # cold starts keep every point independent of the worker split
    def run(chunk):
        return sweep(cfg.shape, cfg.params, var, chunk, target_h=h, opts=cfg.solver, n_rings=rings, warm=False)

    if cfg.threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(run, _chunks(values, cfg.threads)))
        points = [p for part in parts for p in part]
    else:
        points = run(values)
    write_sweep_csv(points, cfg.out / "sweep.csv")
    n_ok = sum(p.status == "ok" for p in points)
    n_ext = sum(p.status == "extinct" for p in points)
    write_manifest(cfg, "sweep", cfg.out / "manifest.json",
                   {"points": len(points), "ok": n_ok, "extinct": n_ext, "n_rings": rings})
    print(f"sweep {var}: {len(points)} points, {n_ok} ok, {n_ext} extinct, "
          f"{len(points) - n_ok - n_ext} errors -> {cfg.out / 'sweep.csv'}")
    return EXIT_OK


def _initial_shape(cfg: RunConfig) -> FourierShape:
    M = cfg.optim.M if cfg.optim.M is not None else cfg.shape.M
    if cfg.optim_init == "random":
        return random_shape(np.random.default_rng(cfg.seed), M, cfg.optim.constraint)
    if cfg.optim_init == "disk":
        return FourierShape.circle(cfg.optim_R0, M)
    return cfg.shape.with_modes(M)


def cmd_optimize(cfg: RunConfig) -> int:
    shape0 = _initial_shape(cfg)
    run_dir = cfg.out / "run"
    run = optimize(shape0, cfg.params, cfg.optim, run_dir=run_dir, threads=cfg.threads)
    write_shape(run.shape, cfg.out / "final.shape")
    R_hat = math.sqrt(run.shape.area() / math.pi)
    write_manifest(cfg, "optimize", cfg.out / "manifest.json", {
        "status": run.status,
        "iterations": run.iterations,
        "solves": run.solves,
        "c_star": run.c_star,
        "area": run.shape.area(),
        "perimeter": run.shape.perimeter(),
        "initial_shape": {"a0": shape0.a0, "a": list(shape0.a), "b": list(shape0.b)},
        "n_rings": run.meta["n_rings"],
    })
    print(f"optimize {run.direction} {run.constraint}: status={run.status} iterations={run.iterations} "
          f"solves={run.solves} c*={run.c_star:.10g} area={run.shape.area():.10g} "
          f"perimeter={run.shape.perimeter():.10g} R_eq={R_hat:.6g}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    rows = run_suite(cfg.suite, log=print)
    write_report(rows, cfg.out / "validation.csv")
    failed = [r for r in rows if not r.passed]
    write_manifest(cfg, "validate", cfg.out / "manifest.json",
                   {"cases": len(rows), "failed": [r.case for r in failed]})
    print(f"validate {cfg.suite}: {len(rows) - len(failed)}/{len(rows)} cases passed -> {cfg.out / 'validation.csv'}")
    return EXIT_VALIDATION if failed else EXIT_OK


def cmd_mesh(cfg: RunConfig) -> int:
    mesh = _mesh_for(cfg)
    write_mesh(mesh, cfg.out / "mesh.txt")
    write_manifest(cfg, "mesh", cfg.out / "manifest.json",
                   {"n_vertices": mesh.n_vertices, "n_triangles": len(mesh.triangles), "n_rings": mesh.n_rings})
    print(f"mesh: {mesh.n_vertices} vertices, {len(mesh.triangles)} triangles, "
          f"{len(mesh.boundary)} boundary nodes -> {cfg.out / 'mesh.txt'}")
    return EXIT_OK


COMMANDS = {
    "speed": cmd_speed,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "mesh": cmd_mesh,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bulksurf", description="Spreading speeds of bulk-surface KPP systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for random optimizer initialisation")
        p.add_argument("--threads", type=int, help="worker cap for sweeps and gradients")
        p.add_argument("--h", type=float, help="relative mesh size override")
        p.add_argument("--eps", type=float, help="regularisation override")
        p.add_argument("--debug", action="store_true", default=None, help="write matrix and gradient dumps")
        if name == "validate":
            p.add_argument("--suite", choices=("quick", "standard", "full"))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k, None) for k in ("out", "seed", "threads", "h", "eps", "debug", "suite")}
    try:
        cfg = load_config(args.config, overrides)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (ConfigError, UnsupportedConfiguration) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EigenSolverError, BracketError, TrialRejected, MeshQualityError, InvalidShapeError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
