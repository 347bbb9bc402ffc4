"""Coupled time loop: Eikonal -> transport field -> density -> agents."""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from .agents import check_controls, crosses_wall, step_agents
from .density import DensityParams, DensityStepper, TransportOperator, boundary_outflux
from .eikonal import EikonalParams, EikonalSolver
from .errors import HughesError, InvalidInputError, StepFailure
from .grid import FaceField, build_grid, integrate_cell_field
from .model import KernelParams, ProjectionParams, SpeedLaw


class Problem:
    """A validated scenario with its grid and the per-grid operators assembled once."""

    def __init__(self, cfg):
        self.config = cfg
        geo, phy = cfg.geometry, cfg.physics
        self.grid = build_grid(geo.nx, geo.ny, geo.lx, geo.ly,
                               [(d.side, d.start, d.end) for d in geo.doors])
        self.law = SpeedLaw(phy.speed_law)
        self.eikonal_params = EikonalParams(phy.delta1, phy.delta2)
        self.density_params = DensityParams(phy.eps, phy.eta_out, cfg.dt)
        self.kernel = KernelParams(cfg.kernel.intensity, cfg.kernel.radius)
        self.proj = ProjectionParams(phy.eps_h)
        self.T = cfg.time.T
        self.n_steps = cfg.time.n_steps
        self.dt = cfg.dt
        self.times = np.arange(self.n_steps + 1) * self.dt
        self.rho0 = config_mod.initial_density(cfg, self.grid)
        self.x0 = np.asarray(cfg.agents.positions, dtype=float).reshape(-1, 2)
        self.n_agents = self.x0.shape[0]
        self.eikonal = EikonalSolver(self.grid, self.eikonal_params, self.law,
                                     solver=cfg.numerics.linear_solver, tol=cfg.numerics.tol)
        self.transport = TransportOperator(self.grid, self.kernel, self.proj)
        self.sealed = bool(geo.sealed_doors)
        self.stepper = DensityStepper(self.grid, self.density_params, self.law, sealed=self.sealed)

    @classmethod
    def from_path(cls, path):
        return cls(config_mod.parse_and_validate(path))

    def initial_controls(self):
        cfg = self.config
        shape = (self.n_steps + 1, self.n_agents, 2)
        if cfg.agents.controls_file:
            return read_controls_csv(cfg.agents.controls_file, shape)
        if cfg.agents.controls:
            c = np.asarray(cfg.agents.controls, dtype=float).reshape(self.n_agents, 2)
            return np.broadcast_to(c, shape).copy()
        return np.zeros(shape)


def read_controls_csv(path, shape):
    """Read controls from a CSV with columns t, ux_0, uy_0, ux_1, uy_1, ..."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    cols = [c for c in header if c.startswith(("ux_", "uy_"))]
    if body.shape[0] != shape[0] or len(cols) != 2 * shape[1]:
        raise InvalidInputError(f"controls file {path}: expected {shape[0]} rows and {shape[1]} agents")
    out = np.empty(shape)
    for m in range(shape[1]):
        out[:, m, 0] = body[:, header.index(f"ux_{m}")]
        out[:, m, 1] = body[:, header.index(f"uy_{m}")]
    return out


def as_problem(scenario):
    if isinstance(scenario, Problem):
        return scenario
    return Problem(scenario)


@dataclass
class ForwardTrajectory:
    times: np.ndarray
    rho: np.ndarray  # (N + 1, nx, ny)
    phi: np.ndarray
    psi: np.ndarray
    w: np.ndarray  # 1 + psi, computed directly
    x: np.ndarray  # (N + 1, M, 2)
    u: np.ndarray
    mass: np.ndarray  # (N + 1,)
    outflux: np.ndarray  # (N + 1,) exit rate of each node's density
    grad: np.ndarray = field(repr=False, default=None)  # (N, n_faces, 2) reconstructed gradients
    tx: np.ndarray = field(repr=False, default=None)  # (N, nx + 1, ny)
    ty: np.ndarray = field(repr=False, default=None)  # (N, nx, ny + 1)
    agent_records: list = field(repr=False, default_factory=list)
    wall_crossings: int = 0

    @property
    def n_steps(self):
        return self.rho.shape[0] - 1

    def transport(self, n):
        return FaceField(self.tx[n], self.ty[n])


def solve_forward(scenario, controls=None, rho0=None, x0=None):
    """Run the coupled system on the scenario's uniform time grid.

    Per step n: phi^n from rho^n, transport field from (phi^n, x^n), one IMEX
    density step, one Heun step for the agents using rho^n and rho^{n+1}.
    """
    pb = as_problem(scenario)
    g, n, m = pb.grid, pb.n_steps, pb.n_agents
    u = pb.initial_controls() if controls is None else np.asarray(controls, dtype=float)
    if u.shape != (n + 1, m, 2):
        raise InvalidInputError(f"controls must have shape {(n + 1, m, 2)}, got {u.shape}")
    check_controls(u)
    rho = np.empty((n + 1,) + g.shape)
    rho[0] = pb.rho0 if rho0 is None else rho0
    lo, hi = float(rho[0].min()), float(rho[0].max())
    if lo < 0.0 or hi > 1.0:
        raise InvalidInputError(f"initial density must lie in [0, 1], got [{lo}, {hi}]")
    x = np.empty((n + 1, m, 2))
    x[0] = pb.x0 if x0 is None else np.asarray(x0, dtype=float).reshape(m, 2)
    phi = np.empty_like(rho)
    psi = np.empty_like(rho)
    w = np.empty_like(rho)
    n_faces = pb.transport.px.size
    grad = np.empty((n, n_faces, 2))
    tx = np.empty((n, g.nx + 1, g.ny))
    ty = np.empty((n, g.nx, g.ny + 1))
    records = []
    crossings = 0

    def eik(k):
        sol = pb.eikonal.solve(rho[k])
        phi[k], psi[k], w[k] = sol.phi, sol.psi, sol.w

    for k in range(n):
        try:
            eik(k)
            grad[k], tf = pb.transport.field(phi[k], x[k])
            tx[k], ty[k] = tf.x, tf.y
            rho[k + 1] = pb.stepper.step(rho[k], tf)
            x[k + 1], rec = step_agents(x[k], rho[k], rho[k + 1], u[k], u[k + 1], pb.dt, pb.law, g,
                                        record=True)
        except HughesError as exc:
            raise StepFailure(k, exc, {"rho_min": float(rho[k].min()), "rho_max": float(rho[k].max()),
                                       "positions": x[k].tolist()}) from exc
        records.append(rec)
        crossings += int(np.sum(crosses_wall(x[k], x[k + 1], g)))
    try:
        eik(n)
    except HughesError as exc:
        raise StepFailure(n, exc) from exc

    mass = np.array([integrate_cell_field(r, g) for r in rho])
    outflux = np.array([boundary_outflux(r, pb.density_params, g, pb.sealed) for r in rho])
    return ForwardTrajectory(
        times=pb.times.copy(), rho=rho, phi=phi, psi=psi, w=w, x=x, u=u.copy(), mass=mass,
        outflux=outflux, grad=grad, tx=tx, ty=ty, agent_records=records, wall_crossings=crossings,
    )


def mass_balance_defect(traj, dt):
    """mass(0) - mass(T) - sum_{n >= 1} dt outflux(t_n); zero up to roundoff.

    The implicit door term removes dt * outflux(rho^{n+1}) in step n.
    """
    return float(traj.mass[0] - traj.mass[-1] - dt * np.sum(traj.outflux[1:]))
