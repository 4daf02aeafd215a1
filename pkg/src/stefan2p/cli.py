"""Command-line interface: run, check, diag, oracle.

Exit codes: 0 success, 2 configuration error, 3 runtime degeneracy,
4 I/O error.
"""

import argparse
import sys

import numpy as np

from .config import parse_config
from .errors import ConfigError, StefanError


def _cmd_run(args):
    from .dynamics import run_simulation

    cfg = parse_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    res = run_simulation(cfg, out_dir=cfg.output_dir or "out")
    last = res.series[-1]
    print(f"steps: {res.state.step_index}  t = {res.state.t:.6g}"
          f"{'  (wall-clock truncated)' if res.truncated else ''}")
    print(f"X-(T) = {last.x_minus:.6g}  X+(T) = {last.x_plus:.6g}")
    print(f"timeseries: {res.csv_path}")
    for p in res.snapshot_paths:
        print(f"snapshot: {p}")
    return 0


def _cmd_check(args):
    from .dynamics import initialize
    from .spectral import check_admissibility

    cfg = parse_config(args.config)
    state = initialize(cfg)
    rep = check_admissibility(state, state.constants, cfg.analysis_rt_delta)
    c = state.constants
    print(f"lambda1- = {c.lambda1_minus:.9g}  lambda1+ = {c.lambda1_plus:.9g}"
          f"  lambda1+(mixed) = {c.lambda1_plus_mixed:.9g}")
    print(f"c1- = {c.c1_minus:.6g}  c1+ = {c.c1_plus:.6g}"
          f"  K- = {c.K_minus:.6g}  K+ = {c.K_plus:.6g}"
          f"  k- = {c.k_minus:.6g}  k+ = {c.k_plus:.6g}")
    print(f"RT: X0- = {rep.x0_minus:.6g}  X0+ = {rep.x0_plus:.6g}"
          f"  delta = {rep.rt_delta:.3g}  -> "
          f"{'ok' if rep.rt_ok else 'VIOLATED'}")
    print(f"signs: minus {'ok' if rep.sign_ok_minus else 'VIOLATED'},"
          f" plus {'ok' if rep.sign_ok_plus else 'VIOLATED'}")
    print(f"compatibility residuals: first-order minus "
          f"{rep.compat1_residual_minus:.3e}, plus "
          f"{rep.compat1_residual_plus:.3e}")
    print(f"outer flux residual {rep.compat_outer_flux_residual:.3e}; "
          f"second-order magnitudes: minus {rep.compat2_residual_minus:.3e}, "
          f"plus {rep.compat2_residual_plus:.3e}, outer "
          f"{rep.compat_outer_second_residual:.3e}")
    if cfg.analysis_enforce_admissibility and not rep.passed:
        return 3
    return 0


def _cmd_diag(args):
    from .diagnostics import build_report
    from .dynamics import SimulationState, _solve_maps
    from .geometry import HeightState, build_reference_geometry
    from .grid import PhaseGrid
    from .heat import PhaseField, apply_boundary_conditions, compute_gradient_v
    from .io import load_snapshot
    from .spectral import compute_eigenstructure

    for path in args.snapshots:
        doc = load_snapshot(path)
        g = doc["geometry"]
        geom = build_reference_geometry(g["r_gamma"], g["r_outer"],
                                        g["n_theta"], g["perturb"])
        shapes = {t: doc[f"q_{t}"]["shape"] for t in ("minus", "plus")}
        grids = {t: PhaseGrid(t, geom, shapes[t][1]) for t in ("minus", "plus")}
        coeffs = np.array([c[1] + 1j * c[2] for c in doc["h"]])
        h = HeightState(coeffs=coeffs, t=doc["t"])
        fields = {}
        for t in ("minus", "plus"):
            q = np.array(doc[f"q_{t}"]["data"]).reshape(shapes[t])
            fields[t] = PhaseField(phase=t, q=q, t=doc["t"])
        state = SimulationState(geom=geom, grids=grids, h=h, fields=fields,
                                t=doc["t"], kappa=doc["kappa"])
        state.h_t_samples = np.zeros(geom.n_theta)
        _solve_maps(state)
        for t in ("minus", "plus"):
            apply_boundary_conditions(fields[t], grids[t], state.maps[t])
            fields[t].v = compute_gradient_v(fields[t], state.maps[t], grids[t])
        constants = compute_eigenstructure(grids, eta=args.eta)
        constants.c1_minus = constants.c1_plus = 1.0
        rep = build_report(state, constants, nu=args.nu, kappa=doc["kappa"],
                           order_cap=args.order_cap)
        print(f"{path}: t = {rep.t:.6g}")
        print(f"  X- = {rep.x_minus:.6g}  X+ = {rep.x_plus:.6g}")
        print(f"  E- = {rep.e_minus:.6g}  E+ = {rep.e_plus:.6g}"
              f"  EGamma = {rep.e_gamma:.6g}")
        print(f"  Ek- = {rep.ek_minus:.6g}  Ek+ = {rep.ek_plus:.6g}")
        if rep.missing:
            print(f"  missing: {', '.join(rep.missing)}")
    return 0


def _cmd_oracle(args):
    from . import oracles
    from .io import _write_atomic

    if args.oracle_cmd == "eigen-disc":
        val = oracles.eigen_oracle_disc(args.radius)
        print("%.17g" % val)
    elif args.oracle_cmd == "eigen-annulus":
        val = oracles.annulus_eigen_oracle(args.r_in, args.r_out,
                                           outer=args.outer)
        print("%.17g" % val)
    elif args.oracle_cmd == "annulus-harmonic":
        a, b, _ = oracles.annulus_harmonic_oracle(
            args.mode, args.inner_data, args.r_in, args.r_out,
            outer_data=args.outer_data)
        print("a = %.17g" % a)
        print("b = %.17g" % b)
    elif args.oracle_cmd == "radial":
        from .dynamics import radial_affine_profiles

        q0m, q0p = radial_affine_profiles(args.r0, args.r_out, args.scale)
        res = oracles.radial_two_phase_oracle(
            args.r0, q0m, q0p, args.r_out, args.t_end, n_cells=args.n_cells)
        lines = ["t,R"]
        for t, R in zip(res.times, res.R_of_t):
            lines.append("%.17g,%.17g" % (t, R))
        if args.out:
            _write_atomic(args.out, "\n".join(lines) + "\n")
            print(f"wrote {args.out}")
        else:
            print("\n".join(lines))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="stefan2p",
                                description="Two-phase Stefan simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    pr = sub.add_parser("run", help="run a simulation")
    pr.add_argument("config")
    pr.add_argument("--out", default="", help="output directory")
    pr.set_defaults(func=_cmd_run)

    pc = sub.add_parser("check", help="admissibility report for a config")
    pc.add_argument("config")
    pc.set_defaults(func=_cmd_check)

    pd = sub.add_parser("diag", help="recompute diagnostics from snapshots")
    pd.add_argument("snapshots", nargs="+")
    pd.add_argument("--eta", type=float, default=0.2)
    pd.add_argument("--nu", type=float, default=0.25)
    pd.add_argument("--order-cap", type=int, default=2)
    pd.set_defaults(func=_cmd_diag)

    po = sub.add_parser("oracle", help="reference computations")
    osub = po.add_subparsers(dest="oracle_cmd", required=True)
    o1 = osub.add_parser("eigen-disc")
    o1.add_argument("--radius", type=float, default=1.0)
    o2 = osub.add_parser("eigen-annulus")
    o2.add_argument("--r-in", type=float, default=1.0)
    o2.add_argument("--r-out", type=float, default=2.0)
    o2.add_argument("--outer", choices=["dirichlet", "neumann"],
                    default="dirichlet")
    o3 = osub.add_parser("annulus-harmonic")
    o3.add_argument("--mode", type=int, default=1)
    o3.add_argument("--inner-data", type=float, default=1.0)
    o3.add_argument("--outer-data", type=float, default=0.0)
    o3.add_argument("--r-in", type=float, default=1.0)
    o3.add_argument("--r-out", type=float, default=2.0)
    o4 = osub.add_parser("radial")
    o4.add_argument("--r0", type=float, default=1.0)
    o4.add_argument("--r-out", type=float, default=2.0)
    o4.add_argument("--t-end", type=float, default=0.1)
    o4.add_argument("--scale", type=float, default=1.0)
    o4.add_argument("--n-cells", type=int, default=256)
    o4.add_argument("--out", default="")
    po.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except StefanError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
