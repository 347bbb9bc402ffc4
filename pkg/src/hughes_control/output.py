"""Plot-ready, byte-stable output files."""

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return FLOAT_FMT % float(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_mass(out_dir, traj):
    write_csv(Path(out_dir) / "mass.csv", ["t", "mass", "outflux"],
              zip(traj.times, traj.mass, traj.outflux))


def agent_header(m):
    cols = ["t"]
    for i in range(m):
        cols += [f"x_{i}", f"y_{i}", f"ux_{i}", f"uy_{i}"]
    return cols


def write_agents(out_dir, traj):
    m = traj.x.shape[1]
    rows = []
    for n, t in enumerate(traj.times):
        row = [t]
        for i in range(m):
            row += [traj.x[n, i, 0], traj.x[n, i, 1], traj.u[n, i, 0], traj.u[n, i, 1]]
        rows.append(row)
    write_csv(Path(out_dir) / "agents.csv", agent_header(m), rows)


def write_controls(path, times, u):
    m = u.shape[1]
    header = ["t"] + [c for i in range(m) for c in (f"ux_{i}", f"uy_{i}")]
    rows = [[t] + [u[n, i, c] for i in range(m) for c in (0, 1)] for n, t in enumerate(times)]
    write_csv(path, header, rows)


def write_objective(out_dir, terms):
    write_csv(Path(out_dir) / "objective.csv", ["term", "value"], terms.items())


def write_history(out_dir, history):
    keys = ["iter", "objective", "stationarity", "step", "backtracks"]
    write_csv(Path(out_dir) / "history.csv", keys, ([h[k] for k in keys] for h in history))


def write_matrix(path, field):
    np.savetxt(path, field, fmt=FLOAT_FMT)


def write_vtk(path, field, grid, name="rho"):
    """Legacy ASCII structured points, one point per cell center."""
    nx, ny = field.shape
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {ny} 1",
        f"ORIGIN {_fmt(0.5 * grid.hx)} {_fmt(0.5 * grid.hy)} 0",
        f"SPACING {_fmt(grid.hx)} {_fmt(grid.hy)} 1",
        f"POINT_DATA {nx * ny}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    # VTK orders points with x varying fastest
    lines += [_fmt(v) for v in field.T.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshots(out_dir, traj, grid, every, fmt="txt"):
    if every <= 0:
        return []
    snap = Path(out_dir) / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    written = []
    for n in range(0, traj.n_steps + 1, every):
        if fmt == "vtk":
            p = snap / f"rho_{n:05d}.vtk"
            write_vtk(p, traj.rho[n], grid)
        else:
            p = snap / f"rho_{n:05d}.txt"
            write_matrix(p, traj.rho[n])
        written.append(p)
    return written


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
