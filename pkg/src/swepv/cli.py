"""Command line front end.

The thread cap has to land in the BLAS environment before numpy loads, so
this module keeps its top-level imports to the standard library and pulls
the solver in lazily inside the command handlers.
"""

import argparse
import os
import sys

__all__ = ["main"]

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")


def _apply_thread_cap():
    cap = os.environ.get("SWE_THREADS", "").strip()
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"SWE_THREADS must be a positive integer, got {cap!r}")
    for var in _THREAD_VARS:
        os.environ[var] = str(n)


def _load_config(path):
    from . import config
    with open(path, encoding="utf-8") as fh:
        return config.parse_config(fh.read())


def _build_operators(cfg):
    from .mesh import Mesh2D
    from .operators import Operators
    mesh = Mesh2D(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly, cfg.p, n_q=cfg.n_q)
    return Operators(mesh)


def _initial_state(ops, cfg):
    from .initial import jet_state, rest_state
    if cfg.jet_speed == 0.0 and cfg.amplitude == 0.0:
        return rest_state(ops, cfg.depth)
    return jet_state(ops, cfg.g, cfg.f0, cfg.depth, cfg.jet_speed,
                     cfg.jet_width, y_center=cfg.jet_center,
                     bump_amplitude=cfg.amplitude, bump_mode=cfg.kx)


def _cmd_run(args):
    cfg = _load_config(args.config)

    import numpy as np

    from . import diagnostics, io, report, timestepper
    from .config import config_hash
    from .timestepper import Stepper
    from .upwinding import UpwindConfig

    ops = _build_operators(cfg)
    coriolis = cfg.f0 * np.ones(ops.mesh.dim_v0)
    upwind = UpwindConfig(scheme=cfg.scheme, tau_policy=cfg.tau_policy,
                          tau=cfg.tau, clamp_limit=cfg.clamp_limit)
    stepper = Stepper(ops, coriolis, cfg.g, cfg.dt, upwind=upwind,
                      pv_mode=cfg.pv_mode, newton_mode=cfg.newton_mode,
                      tol=cfg.tol, k_fixed=cfg.k_max)
    u, h = _initial_state(ops, cfg)
    u, h, records = timestepper.run(ops, stepper, u, h, cfg.n_steps,
                                    cadence=cfg.cadence)

    out_dir = args.out if args.out else cfg.directory
    os.makedirs(out_dir, exist_ok=True)
    io.write_diagnostics(os.path.join(out_dir, "diagnostics.csv"), records)
    io.write_snapshot(os.path.join(out_dir, "snapshot"), ops.mesh,
                      cfg.n_steps, cfg.n_steps * cfg.dt, config_hash(cfg),
                      u, h, cfg.spectrum_n)
    k, e_k = diagnostics.ke_spectrum(ops, u, n=cfg.spectrum_n)
    io.write_spectrum(os.path.join(out_dir, "spectrum.csv"), k, e_k)
    report.render_report(out_dir)

    last = records[-1]
    print(f"completed {cfg.n_steps} steps; outputs in {out_dir}")
    print(f"final energy {last.energy:.17g}, enstrophy "
          f"{last.enstrophy:.17g}, mass {last.mass:.17g}")
    return 0


def _cmd_check_operators(args):
    cfg = _load_config(args.config)

    import numpy as np

    ops = _build_operators(cfg)

    def sparse_max(mat):
        return 0.0 if mat.nnz == 0 else float(np.abs(mat.data).max())

    checks = []
    comp = (ops.div @ ops.perp).tocsr()
    comp.eliminate_zeros()
    checks.append(("curl-then-divergence composition", sparse_max(comp)))

    scale_d = sparse_max(ops.d)
    diff_d = (ops.d - ops.m2 @ ops.div).tocsr()
    checks.append(("weak divergence vs mass-weighted topological form",
                   sparse_max(diff_d) / scale_d))

    scale_r = sparse_max(ops.r)
    diff_r = (ops.r - ops.m1 @ ops.perp).tocsr()
    checks.append(("curl pairing vs mass-weighted topological form",
                   sparse_max(diff_r) / scale_r))

    rng = np.random.default_rng(2024)
    q_vals = ops.v0_at_quad(rng.standard_normal(ops.mesh.dim_v0))
    rot = ops.assemble_rotation(q_vals).tocsr()
    asym = (rot + rot.T).tocsr()
    checks.append(("rotation pairing antisymmetry",
                   sparse_max(asym) / sparse_max(rot)))

    tol = 1e-13
    worst = 0.0
    for name, value in checks:
        ok = value <= tol
        worst = max(worst, value)
        print(f"{name}: max {value:.3e} (tol {tol:.0e}) "
              f"{'PASS' if ok else 'FAIL'}")
    if worst <= tol:
        print("PASS")
        return 0
    print("FAIL")
    return 1


def _cmd_spectrum(args):
    from . import diagnostics, io
    from .mesh import Mesh2D
    from .operators import Operators

    meta, u, _ = io.read_snapshot(args.snapshot)
    mesh = Mesh2D(meta["nx"], meta["ny"], meta["Lx"], meta["Ly"], meta["p"],
                  n_q=meta["n_q"])
    ops = Operators(mesh)
    k, e_k = diagnostics.ke_spectrum(ops, u, n=meta["spectrum_n"])
    io.write_spectrum(args.out, k, e_k)
    print(f"wrote {args.out}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="swe",
        description="Compatible finite-element rotating shallow water "
                    "solver on a doubly periodic plane",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runner = sub.add_parser("run", help="advance a configured run and "
                                        "write its outputs")
    runner.add_argument("--config", required=True,
                        help="path to a key=value config file")
    runner.add_argument("--out", default=None,
                        help="output directory (default: the config's)")
    runner.set_defaults(handler=_cmd_run)

    checker = sub.add_parser("check-operators",
                             help="verify the discrete operator identities")
    checker.add_argument("--config", required=True)
    checker.set_defaults(handler=_cmd_check_operators)

    spectrum = sub.add_parser("spectrum",
                              help="recompute a spectrum from a snapshot")
    spectrum.add_argument("--snapshot", required=True,
                          help="snapshot directory or its manifest.csv")
    spectrum.add_argument("--out", required=True)
    spectrum.set_defaults(handler=_cmd_spectrum)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _apply_thread_cap()
        return args.handler(args)
    except Exception as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
