"""Command-line experiment runner.

Exit codes: 0 success, 1 solver error, 2 configuration error, 3 divergence.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import (DivergenceError, HarmonicProblem, SourceHarmonics, run_complex_direct,
                      run_complex_linearized, run_real_linearized, run_two_harmonic)
from .config import ConfigError, build_params, config_hash, load_config, resolve_config
from .mesh import (MeshError, generate_disk, mesh_statistics, read_mesh_txt, read_msh,
                   write_mesh_txt, write_msh)
from .postprocess import (diagnostics, harmonic_norms, linf_l2, reconstruct_time,
                          relative_difference, write_csv, write_vtk)
from .sparse_linalg import SingularMatrixError

log = logging.getLogger("multiharmonic")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3


# -- helpers -------------------------------------------------------------------------

def _load_mesh(cfg, h=None):
    block = cfg["mesh"]
    if "path" in block and h is None:
        path = block["path"]
        return read_msh(path) if path.endswith(".msh") else read_mesh_txt(path)
    if "path" in block:
        raise ConfigError("mesh studies need a generated mesh, not 'mesh/path'")
    return generate_disk(block["radius"], h if h is not None else block["h_target"])


def _h_label(cfg):
    return cfg["mesh"].get("h_target", mesh_statistics(_load_mesh(cfg)).h_max)


def _problem(cfg, mesh, **param_overrides):
    params = build_params(cfg, **param_overrides)
    run = cfg["run"]
    src = SourceHarmonics.monopole(mesh, run["a"], run["r_delta"], tuple(run["source_position"]))
    return HarmonicProblem(mesh, params, src)


def solve(problem, formulation, N, polish=0):
    if formulation == "complex-linearized":
        return run_complex_linearized(problem, N)
    if formulation == "complex-direct":
        return run_complex_direct(problem, N)
    if formulation in ("real-full", "real-v0zero"):
        return run_real_linearized(problem, N, v0_zero=formulation == "real-v0zero", polish=polish)
    if formulation == "two-harmonic":
        return run_two_harmonic(problem)
    raise ConfigError(f"unknown formulation {formulation!r}")


def _headers(cfg, command, extra=()):
    return [f"multiharmonic {__version__}", f"command: {command}",
            f"config_sha256: {config_hash(cfg)}", *extra]


def _out_dir(cfg):
    d = Path(cfg["output"]["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _diag_row(cfg, problem, stack, wall):
    d = diagnostics(stack, problem.forms, cfg["run"]["n_samples"])
    row = {"run_id": config_hash(cfg)[:12], "formulation": stack.formulation, "N": stack.N,
           "a": float(cfg["run"]["a"]), "h_fem": float(_h_label(cfg)),
           "bubble_free": problem.params.bubble_free, "qoi": d.qoi,
           "wall_time_s": wall if cfg["output"]["timing"] else None}
    for m in range(2, 7):
        row[f"r_{m}"] = d.r(m)
    return row, d


def _emit(cfg, name, rows, columns=None, extra=()):
    if not cfg["output"]["csv"]:
        return None
    path = _out_dir(cfg) / name
    kw = {} if columns is None else {"columns": columns}
    write_csv(path, rows, header_lines=_headers(cfg, name.rsplit(".", 1)[0], extra), **kw)
    log.info("wrote %s", path)
    return path


# -- subcommands ------------------------------------------------------------------------

def cmd_run(cfg, args=None):
    mesh = _load_mesh(cfg)
    problem = _problem(cfg, mesh)
    run = cfg["run"]
    t0 = time.perf_counter()
    stack = solve(problem, run["formulation"], run["N_max"], run["polish"])
    wall = time.perf_counter() - t0
    row, d = _diag_row(cfg, problem, stack, wall)
    _emit(cfg, "run.csv", [row])
    if cfg["output"]["vtk"]:
        fields = {"re_p_t0": reconstruct_time(stack, 0.0)}
        for m in range(1, stack.N + 1):
            fields[f"abs_p_{m}"] = np.abs(stack.p[m])
        write_vtk(_out_dir(cfg) / "run.vtk", mesh, fields)
    print(f"{stack.formulation} N={stack.N} qoi={d.qoi:.6e} "
          + " ".join(f"r{m}={d.r(m):.3e}" for m in range(2, min(stack.N, 6) + 1)))
    return EXIT_OK


def cmd_two_harmonic(cfg, args=None):
    mesh = _load_mesh(cfg)
    rows = []
    for n0 in (None, 0.0):
        over = {} if n0 is None else {"n0": n0}
        problem = _problem(cfg, mesh, **over)
        t0 = time.perf_counter()
        stack = run_two_harmonic(problem)
        row, _ = _diag_row(cfg, problem, stack, time.perf_counter() - t0)
        rows.append(row)
        print(f"two-harmonic bubble_free={problem.params.bubble_free} r2={row['r_2']:.3e}")
    _emit(cfg, "two_harmonic.csv", rows)
    return EXIT_OK


def cmd_mesh_convergence(cfg, args=None):
    h_list = sorted(cfg["study"]["h_list"], reverse=True)
    run = cfg["run"]
    qois, stats = [], []
    for h in h_list:
        mesh = _load_mesh(cfg, h)
        problem = _problem(cfg, mesh)
        stack = solve(problem, run["formulation"], run["N_max"], run["polish"])
        qois.append(linf_l2(stack, problem.forms, run["n_samples"]))
        stats.append(mesh.n_nodes)
    ref = qois[-1]
    rows = [{"h_fem": h, "n_nodes": n, "qoi": q, "rel_error": relative_difference(q, ref)}
            for h, n, q in zip(h_list, stats, qois)]
    _emit(cfg, "mesh_convergence.csv", rows, ["h_fem", "n_nodes", "qoi", "rel_error"],
          [f"reference: h_fem = {h_list[-1]!r}", f"formulation: {run['formulation']}, N = {run['N_max']}"])
    for r in rows:
        print(f"h={r['h_fem']:.6g} nodes={r['n_nodes']} rel_error={r['rel_error']:.3e}")
    return EXIT_OK


def cmd_n_convergence(cfg, args=None):
    n_list = sorted(set(cfg["study"]["N_list"]))
    run = cfg["run"]
    mesh = _load_mesh(cfg)
    problem = _problem(cfg, mesh)
    n_ref = max(10, n_list[-1])
    ref = linf_l2(solve(problem, run["formulation"], n_ref, run["polish"]), problem.forms,
                  max(run["n_samples"], 4 * n_ref + 1))
    rows = []
    for N in n_list:
        q = linf_l2(solve(problem, run["formulation"], N, run["polish"]), problem.forms,
                    max(run["n_samples"], 4 * N + 1))
        rows.append({"N": N, "qoi": q, "rel_error": relative_difference(q, ref)})
        print(f"N={N} rel_error={rows[-1]['rel_error']:.3e}")
    _emit(cfg, "n_convergence.csv", rows, ["N", "qoi", "rel_error"], [f"reference: N = {n_ref}"])
    return EXIT_OK


def cmd_compare_formulations(cfg, args=None):
    run = cfg["run"]
    mesh = _load_mesh(cfg)
    problem = _problem(cfg, mesh)
    real_form = cfg["study"]["real_formulation"]
    sr = solve(problem, real_form, run["N_max"])
    sc = run_complex_linearized(problem, run["N_max"])
    nr, nc = harmonic_norms(sr, problem.forms), harmonic_norms(sc, problem.forms)
    rows = []
    for m in range(1, run["N_max"] + 1):
        rel = abs(nr[m] - nc[m]) / nc[m] if nc[m] > 0 else abs(nr[m] - nc[m])
        rows.append({"m": m, "norm_real": nr[m], "norm_complex": nc[m], "rel_difference": rel})
        print(f"m={m} rel_difference={rel:.3e}")
    _emit(cfg, "compare_formulations.csv", rows, ["m", "norm_real", "norm_complex", "rel_difference"],
          [f"real formulation: {real_form}", "norms: per-harmonic L2(Omega)"])
    return EXIT_OK


def cmd_mesh_gen(args):
    mesh = generate_disk(args.radius, args.h)
    out = Path(args.output)
    (write_msh if out.suffix == ".msh" else write_mesh_txt)(mesh, out)
    st = mesh_statistics(mesh)
    print(f"wrote {out}: {st.n_nodes} nodes, {st.n_triangles} triangles, h_max={st.h_max:.4g}")
    return EXIT_OK


def cmd_mesh_info(args):
    path = str(args.path)
    if not Path(path).is_file():
        raise ConfigError(f"mesh file {path!r} not found")
    mesh = read_msh(path) if path.endswith(".msh") else read_mesh_txt(path)
    st = mesh_statistics(mesh)
    print(json.dumps({"n_nodes": st.n_nodes, "n_triangles": st.n_triangles, "h_max": st.h_max,
                      "h_min": st.h_min, "n_boundary_edges": int(len(mesh.boundary_edges)),
                      "area": float(mesh.areas().sum())}, indent=2))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------------------

def _config_from_args(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else resolve_config({})
    over = {}
    for key, block, name in (("formulation", "run", "formulation"), ("N", "run", "N_max"),
                             ("a", "run", "a"), ("h", "mesh", "h_target"), ("n0", "params", "n0")):
        val = getattr(args, key, None)
        if val is not None:
            over.setdefault(block, {})[name] = val
    if getattr(args, "h_list", None):
        over.setdefault("study", {})["h_list"] = args.h_list
    if getattr(args, "n_list", None):
        over.setdefault("study", {})["N_list"] = args.n_list
    if getattr(args, "real", None):
        over.setdefault("study", {})["real_formulation"] = args.real
    if getattr(args, "output_dir", None):
        over.setdefault("output", {})["directory"] = args.output_dir
    if getattr(args, "vtk", False):
        over.setdefault("output", {})["vtk"] = True
    if getattr(args, "timing", False):
        over.setdefault("output", {})["timing"] = True
    if over:
        base = {k: v for k, v in cfg.items()}
        if "h" in vars(args) and args.h is not None and "path" in cfg["mesh"]:
            raise ConfigError("invalid config at 'mesh': --h conflicts with a mesh file")
        for block, vals in over.items():
            base[block] = {**base[block], **vals}
        cfg = resolve_config(base)
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(prog="multiharmonic", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--threads", type=int, default=1, help="worker cap (solves run sequentially)")
    sub = ap.add_subparsers(dest="command", required=True)

    def experiment(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?", help="JSON experiment config")
        p.add_argument("--formulation")
        p.add_argument("--N", type=int)
        p.add_argument("--a", type=float)
        p.add_argument("--h", type=float)
        p.add_argument("--n0", type=float)
        p.add_argument("--output-dir")
        p.add_argument("--vtk", action="store_true")
        p.add_argument("--timing", action="store_true", help="record wall time in the CSV")
        return p

    experiment("run", "single run, diagnostics CSV")
    experiment("mesh-convergence", "QoI error under mesh refinement").add_argument(
        "--h-list", type=float, nargs="+")
    experiment("n-convergence", "QoI error against the truncation level").add_argument(
        "--n-list", type=int, nargs="+")
    experiment("compare-formulations", "real vs complex per-harmonic norms").add_argument(
        "--real", choices=["real-full", "real-v0zero"])
    experiment("two-harmonic", "two-harmonic scheme with and without bubbles")

    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    g = msub.add_parser("gen", help="generate a disk mesh")
    g.add_argument("--radius", type=float, default=0.2)
    g.add_argument("--h", type=float, default=0.003)
    g.add_argument("-o", "--output", required=True)
    i = msub.add_parser("info", help="mesh statistics")
    i.add_argument("path")
    return ap


COMMANDS = {"run": cmd_run, "mesh-convergence": cmd_mesh_convergence,
            "n-convergence": cmd_n_convergence, "compare-formulations": cmd_compare_formulations,
            "two-harmonic": cmd_two_harmonic}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "mesh":
            return cmd_mesh_gen(args) if args.mesh_command == "gen" else cmd_mesh_info(args)
        cfg = _config_from_args(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (SingularMatrixError, MeshError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
