"""Command-line drivers: simulate, optimize, gradient-check, validate.

Exit status: 0 on success, 1 when a check fails or a solve aborts,
2 for configuration errors.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import _accel, config as config_mod, output
from .errors import ConfigError, HughesError
from .forward import Problem, solve_forward
from .objectives import ObjectiveConfig, objective_terms

log = logging.getLogger("hughes_control")


def _prepare(args):
    cfg = config_mod.parse_and_validate(args.config)
    if args.snapshot_every is not None:
        if args.snapshot_every < 0:
            raise ConfigError(["--snapshot-every: must be >= 0"])
        cfg.output.snapshot_every = args.snapshot_every
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return Problem(cfg), out


def _write_trajectory(pb, traj, out):
    cfg = pb.config
    output.write_mass(out, traj)
    output.write_agents(out, traj)
    output.write_objective(out, objective_terms(traj, pb.grid, ObjectiveConfig.from_config(cfg.objective)))
    output.write_snapshots(out, traj, pb.grid, cfg.output.snapshot_every, cfg.output.snapshot_format)


def cmd_simulate(args):
    pb, out = _prepare(args)
    traj = solve_forward(pb)
    _write_trajectory(pb, traj, out)
    if traj.wall_crossings:
        log.warning("%d agent steps crossed the boundary", traj.wall_crossings)
    print(f"simulate: {pb.n_steps} steps, final mass {traj.mass[-1]:.10g}, outputs in {out}")
    return 0


def cmd_optimize(args):
    from .optimizer import optimize

    pb, out = _prepare(args)
    res = optimize(pb, callback=lambda e: print(
        f"iter {e['iter']:3d}  J = {e['objective']:.12g}  stationarity = {e['stationarity']:.3e}"))
    output.write_history(out, res.history)
    output.write_controls(out / "controls.csv", pb.times, res.controls)
    _write_trajectory(pb, res.trajectory, out)
    print(f"optimize: status {res.status}, J = {res.objective:.12g}")
    return 0


def _report(name, report, out):
    lines = report.lines()
    (out / f"{name}.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0 if report.passed else 1


def cmd_gradient_check(args):
    from .checks import run_gradient_check

    pb, out = _prepare(args)
    coords = None if args.fd_all else ()
    return _report("gradient_check", run_gradient_check(pb, fd_coords=coords), out)


def cmd_validate(args):
    from .checks import run_validate

    pb, out = _prepare(args)
    report, traj = run_validate(pb)
    _write_trajectory(pb, traj, out)
    return _report("validate", report, out)


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "gradient-check": cmd_gradient_check,
    "validate": cmd_validate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hughes-control", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", required=True, metavar="PATH", help="scenario TOML file")
    p.add_argument("--out", default="out", metavar="DIR", help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, default=1, metavar="N",
                   help="threads for compiled kernels (default 1, which keeps outputs bitwise reproducible)")
    p.add_argument("--snapshot-every", type=int, default=None, metavar="K",
                   help="write a density snapshot every K steps (0 disables)")
    p.add_argument("--fd-all", action="store_true",
                   help="gradient-check: also compare every control coordinate against central differences")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    _accel.set_threads(args.threads)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print("configuration errors:", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return 2
    except HughesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
