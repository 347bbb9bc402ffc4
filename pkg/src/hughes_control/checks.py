"""Invariant suite and derivative checks behind the ``validate`` and ``gradient-check`` verbs."""

from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from .forward import as_problem, mass_balance_defect, solve_forward
from .objectives import ObjectiveConfig, objective_value
from .optimizer import project_controls
from .sensitivity import adjoint_sweep, directional_derivative, solve_adjoint, solve_tangent

BOX_TOL = 1e-10
PSI_TOL = 1e-12
CONSERVATION_TOL = 1e-11
BALANCE_TOL = 1e-10
SYMMETRY_TOL = 1e-11
DOT_TOL = 1e-10
CONSISTENCY_TOL = 1e-9
TAYLOR_STEPS = (1e-2, 1e-3, 1e-4)
SLOPE_TARGET, SLOPE_TOL = 2.0, 0.1
FD_STEP, FD_TOL = 1e-5, 1e-4


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        s = f"{tag}  {self.name:<22} {self.value:.3e}  (limit {self.limit:.1e})"
        return s + (f"  {self.detail}" if self.detail else "")


@dataclass
class Report:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, limit, passed=None, detail=""):
        ok = bool(value <= limit) if passed is None else bool(passed)
        self.checks.append(Check(name, ok, float(value), float(limit), detail))

    def lines(self):
        out = [c.line() for c in self.checks]
        out.append("PASS" if self.passed else "FAIL")
        return out

    def as_dict(self):
        return {c.name: {"passed": c.passed, "value": c.value, "limit": c.limit} for c in self.checks}


# ---------------------------------------------------------------------------
# mirror images
# ---------------------------------------------------------------------------


def _flip(axis):
    return 0 if axis == "x" else 1


def mirror_positions(x, axis, lx, ly):
    x = np.array(x, dtype=float)
    k = _flip(axis)
    x[..., k] = (lx if k == 0 else ly) - x[..., k]
    return x


def mirror_controls(u, axis):
    u = np.array(u, dtype=float)
    u[..., _flip(axis)] *= -1.0
    return u


def mirror_field(rho, axis):
    return np.flip(rho, axis=-2 if axis == "x" else -1)


_SIDE_SWAP = {"x": {"left": "right", "right": "left"}, "y": {"bottom": "top", "top": "bottom"}}


def mirror_config(cfg, axis):
    """Scenario reflected about the midline x = lx/2 ("x") or y = ly/2 ("y")."""
    new = config_mod.from_dict(config_mod.to_dict(cfg))
    g = new.geometry
    k = _flip(axis)
    length = g.lx if k == 0 else g.ly
    for d in g.doors:
        along_flipped = (k == 0 and d.side in ("bottom", "top")) or (k == 1 and d.side in ("left", "right"))
        d.side = _SIDE_SWAP[axis].get(d.side, d.side)
        if along_flipped:
            d.start, d.end = length - d.end, length - d.start
    a = new.agents
    if a.positions:
        a.positions = mirror_positions(a.positions, axis, g.lx, g.ly).tolist()
    if a.controls:
        a.controls = mirror_controls(a.controls, axis).tolist()
    d = new.initial_density
    if d.kind == "box":
        x0, x1, y0, y1 = d.box
        d.box = [g.lx - x1, g.lx - x0, y0, y1] if k == 0 else [x0, x1, g.ly - y1, g.ly - y0]
    elif d.kind == "bumps":
        d.centers = mirror_positions(d.centers, axis, g.lx, g.ly).tolist()
    return new


def agent_permutation(x, x_mirror, tol=1e-12):
    """perm with x_mirror[i] == x[perm[i]], or None."""
    perm = []
    for p in x_mirror:
        d = np.linalg.norm(x - p, axis=1)
        j = int(np.argmin(d)) if d.size else -1
        if j < 0 or d[j] > tol or j in perm:
            return None
        perm.append(j)
    return np.array(perm, dtype=int)


def symmetry_axes(pb, u):
    """Axes about which the scenario (geometry, rho0, agents and controls) is symmetric."""
    g = pb.grid
    axes = []
    for axis in ("x", "y"):
        gm = g.mirrored(axis)
        if not all(np.array_equal(g.door_mask(s), gm.door_mask(s)) for s in ("left", "right", "bottom", "top")):
            continue
        if not np.allclose(mirror_field(pb.rho0, axis), pb.rho0, rtol=0.0, atol=1e-14):
            continue
        perm = agent_permutation(pb.x0, mirror_positions(pb.x0, axis, g.lx, g.ly))
        if perm is None:
            continue
        if not np.allclose(mirror_controls(u, axis), u[:, perm], rtol=0.0, atol=1e-14):
            continue
        axes.append((axis, perm))
    return axes


def symmetry_defect(traj, axis, perm, lx, ly):
    """(density defect, agent defect) of a trajectory against its own mirror image."""
    drho = float(np.max(np.abs(mirror_field(traj.rho, axis) - traj.rho)))
    xm = mirror_positions(traj.x, axis, lx, ly)
    dx = float(np.max(np.abs(xm - traj.x[:, perm]))) if traj.x.size else 0.0
    return drho, dx


def mirrored_pair_defect(traj, traj_m, axis, lx, ly):
    """Defects between a trajectory and the run of the mirrored scenario."""
    drho = float(np.max(np.abs(mirror_field(traj.rho, axis) - traj_m.rho)))
    dx = float(np.max(np.abs(mirror_positions(traj.x, axis, lx, ly) - traj_m.x))) if traj.x.size else 0.0
    return drho, dx


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def invariant_checks(pb, traj, report=None):
    report = Report() if report is None else report
    lo, hi = float(traj.rho.min()), float(traj.rho.max())
    # values are excesses over the bound, zero when comfortably inside
    report.add("rho_min", max(-lo, 0.0), BOX_TOL, detail=f"min rho = {lo:.17g}")
    report.add("rho_max", max(hi - 1.0, 0.0), BOX_TOL, detail=f"max rho = {hi:.17g}")
    psi_lo, psi_hi = float(traj.psi.min()), float(traj.psi.max())
    report.add("psi_upper", max(psi_hi, 0.0), PSI_TOL, detail=f"max psi = {psi_hi:.17g}")
    report.add("psi_lower", max(-1.0 - psi_lo, 0.0), 0.0, passed=psi_lo > -1.0,
               detail=f"min psi = {psi_lo:.17g}")
    phi_lo = float(traj.phi.min())
    report.add("phi_lower", max(-phi_lo, 0.0), PSI_TOL, detail=f"min phi = {phi_lo:.17g}")
    scale = max(abs(float(traj.mass[0])), 1e-300)
    if pb.sealed:
        drift = float(np.max(np.abs(traj.mass - traj.mass[0]))) / scale
        report.add("mass_conservation", drift, CONSERVATION_TOL)
    else:
        report.add("mass_balance", abs(mass_balance_defect(traj, pb.dt)) / scale, BALANCE_TOL)
    return report


def run_validate(scenario, controls=None):
    """Forward solve plus the invariant suite; symmetry is checked when the scenario has one."""
    pb = as_problem(scenario)
    u = pb.initial_controls() if controls is None else np.asarray(controls, dtype=float)
    traj = solve_forward(pb, u)
    report = invariant_checks(pb, traj)
    for axis, perm in symmetry_axes(pb, u):
        drho, dx = symmetry_defect(traj, axis, perm, pb.grid.lx, pb.grid.ly)
        report.add(f"symmetry_{axis}_rho", drho, SYMMETRY_TOL)
        report.add(f"symmetry_{axis}_agents", dx, SYMMETRY_TOL)
    return report, traj


# ---------------------------------------------------------------------------
# gradient check
# ---------------------------------------------------------------------------


def random_direction(rng, shape):
    du = rng.standard_normal(shape)
    return du / max(float(np.max(np.abs(du))), 1e-300)


def dot_test(pb, base, rng):
    """<L du, w> against <du, L^T w> for the full tangent map u -> (rho, x, phi)."""
    du = random_direction(rng, base.u.shape)
    tan = solve_tangent(pb, base, du)
    wr = rng.standard_normal(tan.rho.shape)
    wx = rng.standard_normal(tan.x.shape)
    wp = rng.standard_normal(tan.phi.shape)
    lhs = float(np.sum(tan.rho * wr) + np.sum(tan.x * wx) + np.sum(tan.phi * wp))
    u_bar, _ = adjoint_sweep(pb, base, wr, wx, wp)
    rhs = float(np.sum(du * u_bar))
    norm_out = np.sqrt(np.sum(tan.rho**2) + np.sum(tan.x**2) + np.sum(tan.phi**2))
    norm_w = np.sqrt(np.sum(wr**2) + np.sum(wx**2) + np.sum(wp**2))
    scaled = abs(lhs - rhs) / max(norm_out * norm_w, 1e-300)
    rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
    return scaled, rel, tan.near_switch


def taylor_test(pb, base, cfg, grad, du, steps=TAYLOR_STEPS):
    """Second-order remainders and their log-log slope."""
    j0 = objective_value(base, pb.grid, cfg)
    slope_dir = float(np.sum(grad.nodal * du))
    rem = []
    for s in steps:
        j = objective_value(solve_forward(pb, project_controls(base.u + s * du)), pb.grid, cfg)
        rem.append(abs(j - j0 - s * slope_dir))
    rem = np.array(rem)
    with np.errstate(divide="ignore"):
        fit = np.polyfit(np.log(steps), np.log(np.maximum(rem, 1e-300)), 1)[0]
    return float(fit), rem


def feasible_direction(u, du, s_max):
    """Shrink du where u is too close to the unit ball for u + s du to stay inside."""
    room = 1.0 - np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.clip(room / (s_max * np.maximum(np.linalg.norm(du, axis=-1, keepdims=True), 1e-300)), 0.0, 1.0)
    return du * scale


def fd_check(pb, base, cfg, grad, coords=None, step=FD_STEP):
    """Worst relative error of central differences per control coordinate."""
    u = base.u
    flat = grad.nodal.ravel()
    idx = range(u.size) if coords is None else coords
    scale = max(float(np.max(np.abs(flat))), 1e-300)
    worst = 0.0
    for k in idx:
        e = np.zeros(u.size)
        e[k] = step
        e = e.reshape(u.shape)
        jp = objective_value(solve_forward(pb, u + e), pb.grid, cfg)
        jm = objective_value(solve_forward(pb, u - e), pb.grid, cfg)
        fd = (jp - jm) / (2.0 * step)
        # the floor only matters for components that vanish identically
        worst = max(worst, abs(fd - flat[k]) / max(abs(flat[k]), 1e-12 * scale))
    return worst


def run_gradient_check(scenario, controls=None, seed=None, fd_coords=()):
    """Dot test, gradient consistency and Taylor remainder slope on the scenario."""
    pb = as_problem(scenario)
    cfg = ObjectiveConfig.from_config(pb.config.objective)
    rng = np.random.default_rng(pb.config.seed if seed is None else seed)
    u = pb.initial_controls() if controls is None else np.asarray(controls, dtype=float)
    base = solve_forward(pb, u)
    grad = solve_adjoint(pb, base, cfg)
    report = Report()

    scaled, rel, near = dot_test(pb, base, rng)
    report.add("dot_test", scaled, DOT_TOL, detail=f"plain relative {rel:.3e}; near-switch faces {near}")

    du = feasible_direction(u, random_direction(rng, u.shape), max(TAYLOR_STEPS))
    d_tan = directional_derivative(pb, base, du, cfg)
    d_adj = float(np.sum(grad.nodal * du))
    report.add("gradient_consistency", abs(d_tan - d_adj) / max(abs(d_adj), 1e-300), CONSISTENCY_TOL)

    slope, rem = taylor_test(pb, base, cfg, grad, du)
    report.add("taylor_slope", abs(slope - SLOPE_TARGET), SLOPE_TOL,
               detail=f"slope {slope:.4f}; remainders " + " ".join(f"{r:.3e}" for r in rem))
    if fd_coords is None or len(fd_coords):
        report.add("fd_per_coordinate", fd_check(pb, base, cfg, grad, fd_coords), FD_TOL)
    return report

