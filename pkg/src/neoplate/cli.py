"""Command-line entry point: energy evaluation, minimization, the Cantor
construction, verification checks, threshold sweeps and pinch inspection.

Every run writes delimited output (and figures where applicable) into one
output directory, then a manifest listing each emitted file with its
sha256 digest.  CSV output uses '.' decimals, 17 significant digits and
LF line endings so reruns with identical config and seed are
byte-identical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic_maps import IdentityMap, PinchMap, PinchParams, parse_map
from .cantor import (CantorConfig, cantor_measure, centersquares_up_to,
                     generation)
from .energy import EnergyParams, QuadratureSpec, energy_analytic
from .geometry import Rect, make_rect_mesh
from .minimizer import (MinimizerConfig, MinimizerError, energy_gradient,
                        init_minimizer, minimize)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2

OUTPUT_DIR_ENV = "NEOPLATE_OUT"


@dataclass
class RunManifest:
    version: str
    subcommand: str
    config: dict
    wall_time: float
    files: dict  # relative path -> sha256 hex digest


def _fmt(value) -> str:
    """One CSV cell: 17 significant digits for floats, lowercase booleans."""
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, float) or isinstance(value, np.floating):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, subcommand, config, wall_time) -> RunManifest:
    files = {}
    for root, _, names in os.walk(outdir):
        for name in sorted(names):
            if name == "manifest.json":
                continue
            full = os.path.join(root, name)
            files[os.path.relpath(full, outdir)] = _sha256(full)
    manifest = RunManifest(version=__version__, subcommand=subcommand,
                           config=config, wall_time=wall_time, files=files)
    with open(os.path.join(outdir, "manifest.json"), "w", newline="\n") as fh:
        json.dump(manifest.__dict__, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _config_echo(args: argparse.Namespace) -> dict:
    skip = {"func", "config"}
    return {k: (_fmt(v) if isinstance(v, (float, bool)) else str(v))
            for k, v in sorted(vars(args).items()) if k not in skip}


def _float_list(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok]


def load_config_file(path) -> dict:
    """Flat key=value text; '#' starts a comment, blank lines ignored."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            values[key.strip()] = val.strip()
    return values


def apply_config_file(argv: list) -> list:
    """Turn config-file entries into flags, keeping explicit flags dominant.

    File keys map to '--key' (underscores become dashes); a key already
    present on the command line is left alone.  Unknown keys surface as
    unrecognized arguments from the parser.
    """
    if "--config" not in argv:
        return argv
    path = argv[argv.index("--config") + 1]
    extra = []
    for key, val in load_config_file(path).items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue
        if val.lower() in ("true", ""):
            extra.append(flag)  # bare flag
        else:
            extra.extend([flag, val])
    return argv + extra


# ---------------------------------------------------------------------------
# Subcommand runners.  Each returns an exit code and writes its outputs.

def _quad_spec(args) -> QuadratureSpec:
    return QuadratureSpec(base_cells=args.cells, grading=args.grading,
                          order=args.order, levels=args.levels)


def run_energy(args, outdir) -> int:
    amap = parse_map(args.map, default_p=args.p, default_q=args.q)
    if args.area is not None:
        if args.map != "identity":
            raise ValueError("--area only applies to the identity map")
        amap = IdentityMap(Rect(0.0, args.area, 0.0, 1.0))
    params = EnergyParams(p=args.p, q=args.q)
    report = energy_analytic(amap, params, _quad_spec(args))
    write_csv(os.path.join(outdir, "energy.csv"),
              ["map", "p", "q", "gradient_term", "barrier_term", "total",
               "converged"],
              [[args.map, args.p, args.q, report.gradient_term,
                report.barrier_term, report.total, report.converged]])
    if args.per_level:
        write_csv(os.path.join(outdir, "levels.csv"), ["level", "total"],
                  [[i, t] for i, t in enumerate(report.levels)])
    if args.figures:
        from .figures import plot_convergence
        plot_convergence(report.levels, os.path.join(outdir, "levels.svg"),
                         title=f"{args.map}: quadrature refinement")
    return EXIT_OK


def _parse_target(text: str) -> Rect:
    w, sep, h = text.lower().partition("x")
    if not sep:
        raise ValueError(f"target must look like WxH, got {text!r}")
    return Rect(0.0, float(w), 0.0, float(h))


def _parse_init(text: str):
    """'identity', 'bilinear' or 'perturb:<sigma>[,<seed>]'."""
    if text in ("identity", "bilinear"):
        return text, 0.0, None
    name, sep, rest = text.partition(":")
    if name != "perturb" or not sep:
        raise ValueError(f"unknown init {text!r}")
    parts = rest.split(",")
    sigma = float(parts[0])
    seed = int(parts[1]) if len(parts) > 1 else None
    return "identity", sigma, seed


def run_minimize(args, outdir) -> int:
    from .figures import plot_mesh

    target = _parse_target(args.target)
    mesh = make_rect_mesh(target, args.nx, args.ny)
    params = EnergyParams(p=args.p, q=args.q)
    initial, sigma, seed = _parse_init(args.init)
    if seed is None:
        seed = args.seed
    state = init_minimizer(mesh, target, initial=initial,
                           perturb_sigma=sigma, seed=seed, params=params)
    config = MinimizerConfig(params=params, max_iters=args.max_iters,
                             grad_tol=args.tol)

    rows = []

    def record(st, grad):
        rows.append([st.iteration, st.energy_history[-1],
                     float(st.plmap.image_signed_areas().min()),
                     float(np.abs(grad).max())])
        if args.snap_every and st.iteration % args.snap_every == 0:
            plot_mesh(st.plmap,
                      os.path.join(outdir, f"mesh_{st.iteration:05d}.svg"))

    grad0 = energy_gradient(state, params)
    rows.append([0, state.energy_history[-1],
                 float(state.plmap.image_signed_areas().min()),
                 float(np.abs(grad0).max())])
    try:
        state, report = minimize(state, config, callback=record)
    except MinimizerError as exc:
        print(f"minimization failed: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    write_csv(os.path.join(outdir, "iterations.csv"),
              ["iter", "energy", "min_det", "grad_norm"], rows)
    write_csv(os.path.join(outdir, "minimize.csv"),
              ["final_energy", "iterations", "min_jacobian", "grad_norm",
               "converged", "stalled", "identity_lower_bound"],
              [[report.final_energy, report.iterations, report.min_jacobian,
                report.grad_norm, report.converged, report.stalled,
                "" if report.identity_lower_bound is None
                else _fmt(report.identity_lower_bound)]])
    plot_mesh(state.plmap, os.path.join(outdir, "mesh_final.svg"),
              title="final deformed mesh")
    if report.identity_lower_bound is not None and \
            report.final_energy < report.identity_lower_bound - 1e-9:
        print("final energy undercuts the identity lower bound", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _eps_callable(base: float):
    def eps(n: int) -> float:
        return base ** (-n)
    return eps


def run_cantor(args, outdir) -> int:
    from .figures import plot_square_family

    cfg = CantorConfig(eps=_eps_callable(args.eps_base),
                       max_depth=max(args.depth, 30))
    rows = []
    for n in range(args.depth + 1):
        fam = generation(n, cfg)
        rows.append([n, len(fam.squares), fam.squares[0].side, fam.total_area])
    write_csv(os.path.join(outdir, "generations.csv"),
              ["n", "count", "side", "area"], rows)
    write_csv(os.path.join(outdir, "measure.csv"), ["tol", "measure"],
              [[1e-12, cantor_measure(cfg, tol=1e-12)]])
    fam = generation(args.depth, cfg)
    centers = centersquares_up_to(args.depth, cfg)
    plot_square_family(fam.squares, os.path.join(outdir, "cantor.svg"),
                       centersquares=centers,
                       title=f"generation {args.depth}")
    return EXIT_OK


def _verify_map(args):
    return parse_map(args.map, default_p=args.p, default_q=args.q)


def run_verify(args, outdir) -> int:
    from . import verify as V

    if args.check == "nh":
        hist = V.injectivity_count(_verify_map(args), args.samples, args.vcells)
        write_csv(os.path.join(outdir, "nh.csv"), ["multiplicity", "cells"],
                  sorted(hist.counts.items()))
        write_csv(os.path.join(outdir, "nh_summary.csv"),
                  ["map", "samples", "cells", "fraction_N1"],
                  [[args.map, hist.source_samples, hist.target_cells,
                    hist.fraction_N1]])
        if args.min_fraction is not None and hist.fraction_N1 < args.min_fraction:
            print(f"fraction_N1 = {hist.fraction_N1:.6f} below "
                  f"{args.min_fraction}", file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_OK

    if args.check == "modulus":
        rep = V.modulus_profile(_verify_map(args), pair_samples=args.pairs,
                                delta_bins=args.bins, seed=args.seed)
        write_csv(os.path.join(outdir, "modulus.csv"), ["delta", "omega"],
                  rep.table)
        write_csv(os.path.join(outdir, "modulus_summary.csv"),
                  ["map", "pairs", "fitted_constant", "dirichlet_energy"],
                  [[args.map, rep.pair_count, rep.fitted_constant,
                    rep.dirichlet_energy]])
        omegas = [w for _, w in rep.table]
        if any(b < a for a, b in zip(omegas, omegas[1:])):
            print("empirical modulus not nondecreasing", file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_OK

    if args.check == "threshold":
        return _threshold_to_csv(args, outdir, "threshold.csv")

    if args.check == "branch":
        params = PinchParams(a=args.a, b=args.b, p=args.p, q=args.q)
        cfg = CantorConfig(eps=_eps_callable(args.eps_base),
                           max_depth=max(args.depth, 30))
        try:
            rep = V.branch_area_report(cfg, params, args.depth,
                                       samples=args.samples, seed=args.seed)
        except AssertionError as exc:
            print(f"branch check failed: {exc}", file=sys.stderr)
            return EXIT_INVARIANT
        write_csv(os.path.join(outdir, "branch.csv"),
                  ["depth", "measure_lower_bound", "sampled_points",
                   "fixed_point_failures", "witness_pairs"],
                  [[rep.depth, rep.measure_lower_bound, rep.sampled_points,
                    rep.fixed_point_failures, len(rep.witness_pairs)]])
        if rep.fixed_point_failures:
            print(f"{rep.fixed_point_failures} fixed-point failures",
                  file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_OK

    raise ValueError(f"unknown check {args.check!r}")


def _threshold_to_csv(args, outdir, filename) -> int:
    from .verify import threshold_sweep

    rows = threshold_sweep(args.ps, args.qs, with_energy=args.energy)
    out = []
    for r in rows:
        out.append([r.p, r.q, r.q_threshold, r.feasible,
                    "" if r.witness is None else _fmt(r.witness.a),
                    "" if r.witness is None else _fmt(r.witness.b),
                    r.energy_status, r.probe_status])
    write_csv(os.path.join(outdir, filename),
              ["p", "q", "q_threshold", "feasible", "witness_a", "witness_b",
               "energy_status", "probe_status"], out)
    return EXIT_OK


def run_sweep(args, outdir) -> int:
    return _threshold_to_csv(args, outdir, "sweep.csv")


def run_pinch(args, outdir) -> int:
    from .figures import plot_map_grid

    params = PinchParams(a=args.a, b=args.b, p=args.p, q=args.q)
    amap = PinchMap(params)
    eparams = EnergyParams(p=args.p, q=args.q)
    report = energy_analytic(amap, eparams, _quad_spec(args))
    write_csv(os.path.join(outdir, "pinch.csv"),
              ["a", "b", "p", "q", "feasible", "gradient_term",
               "barrier_term", "total", "converged", "diverged"],
              [[args.a, args.b, args.p, args.q, params.feasible,
                report.gradient_term, report.barrier_term, report.total,
                report.converged, report.diverged]])
    n = args.samples
    xs = np.linspace(-1.0, 1.0, n)
    ys = np.linspace(-2.0, 2.0, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    U, V = amap.eval_many(X.ravel(), Y.ravel())
    write_csv(os.path.join(outdir, "pinch_samples.csv"),
              ["x", "y", "u", "v"],
              zip(X.ravel(), Y.ravel(), U, V))
    plot_map_grid(amap, os.path.join(outdir, "pinch.svg"),
                  title=f"pinch a={args.a}, b={args.b}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly.

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None,
                        help=f"output directory (default ${OUTPUT_DIR_ENV} or ./out)")
    common.add_argument("--config", default=None,
                        help="flat key=value config file; flags override it")
    common.add_argument("--seed", type=int, default=0,
                        help="random seed for all sampling (default 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="thread budget; recorded for the determinism contract")
    common.add_argument("--figures", action="store_true",
                        help="also render SVG figures where optional")

    quad = argparse.ArgumentParser(add_help=False)
    quad.add_argument("--cells", type=int, default=8,
                      help="base quadrature cells per direction (default 8)")
    quad.add_argument("--grading", type=float, default=None,
                      help="grading exponent toward singular lines (default: auto)")
    quad.add_argument("--levels", type=int, default=4,
                      help="refinement levels (default 4)")
    quad.add_argument("--order", type=int, default=6,
                      help="Gauss order per cell (default 6)")

    parser = argparse.ArgumentParser(
        prog="neoplate",
        description="Plate energies with a jacobian barrier: evaluation, "
                    "minimization and injectivity diagnostics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    pe = sub.add_parser("energy", parents=[common, quad],
                        help="integrate the energy of a named map")
    pe.add_argument("--map", default="identity",
                    help="identity | pinch:a=..,b=.. | pinch-ext:... | "
                         "phi:... | mobius:ak=..")
    pe.add_argument("--p", type=float, default=2.0)
    pe.add_argument("--q", type=float, default=1.0)
    pe.add_argument("--area", type=float, default=None,
                    help="identity-domain area override")
    pe.add_argument("--per-level", action="store_true",
                    help="also write the per-level totals")
    pe.set_defaults(func=run_energy)

    pm = sub.add_parser("minimize", parents=[common],
                        help="projected gradient descent on a rectangle mesh")
    pm.add_argument("--nx", type=int, default=16)
    pm.add_argument("--ny", type=int, default=16)
    pm.add_argument("--p", type=float, default=2.0)
    pm.add_argument("--q", type=float, default=1.0)
    pm.add_argument("--target", default="1x1", help="target rectangle WxH")
    pm.add_argument("--init", default="identity",
                    help="identity | bilinear | perturb:<sigma>[,<seed>]")
    pm.add_argument("--max-iters", type=int, default=2000)
    pm.add_argument("--tol", type=float, default=1e-6)
    pm.add_argument("--snap-every", type=int, default=0,
                    help="SVG snapshot every k iterations (0: final only)")
    pm.set_defaults(func=run_minimize)

    pc = sub.add_parser("cantor", parents=[common],
                        help="cornersquare generations, measure and figure")
    pc.add_argument("--depth", type=int, default=3)
    pc.add_argument("--eps-base", type=float, default=4.0,
                    help="shrink parameters eps_k = base^-k (default 4)")
    pc.set_defaults(func=run_cantor)

    pv = sub.add_parser("verify", parents=[common],
                        help="empirical checks: nh, modulus, threshold, branch")
    pv.add_argument("--check", required=True,
                    choices=["nh", "modulus", "threshold", "branch"])
    pv.add_argument("--map", default="identity")
    pv.add_argument("--p", type=_float_list, default=[3.0], dest="ps",
                    help="p values (comma separated)")
    pv.add_argument("--q", type=_float_list, default=[2.0], dest="qs",
                    help="q values (comma separated)")
    pv.add_argument("--a", type=float, default=None)
    pv.add_argument("--b", type=float, default=None)
    pv.add_argument("--samples", type=int, default=512)
    pv.add_argument("--vcells", type=int, default=64,
                    help="target cells per axis for the nh check")
    pv.add_argument("--pairs", type=int, default=20000)
    pv.add_argument("--bins", type=int, default=20)
    pv.add_argument("--depth", type=int, default=3)
    pv.add_argument("--eps-base", type=float, default=4.0)
    pv.add_argument("--energy", action="store_true",
                    help="attach quadrature statuses to threshold rows")
    pv.add_argument("--min-fraction", type=float, default=None,
                    help="hard gate on fraction_N1 for the nh check")
    pv.set_defaults(func=run_verify)

    pw = sub.add_parser("sweep", parents=[common],
                        help="feasibility table over a (p, q) grid")
    pw.add_argument("--p", type=_float_list, default=[3.0], dest="ps")
    pw.add_argument("--q", type=_float_list, default=[1.0, 2.0, 3.0], dest="qs")
    pw.add_argument("--energy", action="store_true")
    pw.set_defaults(func=run_sweep)

    pp = sub.add_parser("pinch", parents=[common, quad],
                        help="evaluate one pinch configuration")
    pp.add_argument("--a", type=float, required=True)
    pp.add_argument("--b", type=float, required=True)
    pp.add_argument("--p", type=float, default=3.0)
    pp.add_argument("--q", type=float, default=2.0)
    pp.add_argument("--samples", type=int, default=41,
                    help="sample-grid points per axis")
    pp.set_defaults(func=run_pinch)
    return parser


def _normalize_verify(args) -> None:
    """Scalar p/q plus pinch defaults for checks that need single values."""
    if getattr(args, "ps", None) is not None:
        args.p = args.ps[0]
        args.q = args.qs[0]
    if getattr(args, "a", None) is None and hasattr(args, "a"):
        from .analytic_maps import feasible_params
        w = feasible_params(args.p, args.q) if args.p > 2 else None
        if w is not None:
            args.a, args.b = w.a, w.b
        else:
            args.a, args.b = -0.25, 0.75


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = apply_config_file(argv)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    if args.subcommand in ("verify", "sweep"):
        _normalize_verify(args)

    outdir = args.out or os.environ.get(OUTPUT_DIR_ENV) or "out"
    os.makedirs(outdir, exist_ok=True)
    start = time.perf_counter()
    try:
        code = args.func(args, outdir)
    except (ValueError, MinimizerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_USAGE
    wall = time.perf_counter() - start
    write_manifest(outdir, args.subcommand, _config_echo(args), wall)
    return code


if __name__ == "__main__":
    sys.exit(main())
