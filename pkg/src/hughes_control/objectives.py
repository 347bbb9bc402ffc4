"""Evacuation and cohesion objectives with their discrete derivatives.

Time integrals of state terms use the trapezoid rule on the uniform grid;
the H^1(0, T) norm of the piecewise-linear controls is integrated exactly
(P1 mass matrix plus stiffness matrix).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DegenerateMassError, InvalidInputError


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: str = "evacuation"
    c1: float = 1.0
    c2: float = 1.0
    alpha: float = 0.1
    blend_weights: tuple = (1.0, 1.0)
    mass_floor: float = 1e-10

    def __post_init__(self):
        if self.kind not in ("evacuation", "variance", "blend"):
            raise InvalidInputError(f"unknown objective kind {self.kind!r}")
        if not self.alpha > 0 or self.c1 < 0 or self.c2 < 0:
            raise InvalidInputError("need alpha > 0 and c1, c2 >= 0")

    @classmethod
    def from_config(cls, o):
        return cls(o.kind, o.c1, o.c2, o.alpha, tuple(o.blend), o.mass_floor)


def trapezoid_weights(n_steps, T):
    w = np.full(n_steps + 1, T / n_steps)
    w[0] = w[-1] = 0.5 * T / n_steps
    return w


def h1_banded(n_nodes, T):
    """(M + K) in LAPACK symmetric-banded upper form for P1 hats on [0, T]."""
    h = T / (n_nodes - 1)
    diag = np.full(n_nodes, 2.0 * h / 3.0 + 2.0 / h)
    diag[0] = diag[-1] = h / 3.0 + 1.0 / h
    off = np.full(n_nodes - 1, h / 6.0 - 1.0 / h)
    ab = np.zeros((2, n_nodes))
    ab[0, 1:] = off
    ab[1] = diag
    return ab


def h1_apply(u, T):
    """(M + K) u along axis 0 (nodes)."""
    ab = h1_banded(u.shape[0], T)
    out = ab[1].reshape((-1,) + (1,) * (u.ndim - 1)) * u
    off = ab[0, 1:].reshape((-1,) + (1,) * (u.ndim - 1))
    out[:-1] += off * u[1:]
    out[1:] += off * u[:-1]
    return out


def h1_inner(a, b, T):
    return float(np.sum(a * h1_apply(b, T)))


def riesz_h1(l2_grad, T):
    """Solve (v, w)_{H^1} = l(w) for all P1 w, with l given by its values on the hats."""
    l2_grad = np.asarray(l2_grad, dtype=float)
    shape = l2_grad.shape
    rhs = l2_grad.reshape(shape[0], -1)
    if rhs.shape[1] == 0:
        return np.zeros(shape)
    v = sla.solveh_banded(h1_banded(shape[0], T), rhs)
    return v.reshape(shape)


def control_h1_penalty(u, alpha, T):
    """(alpha / 2T) sum_i ||u_i||^2_{H^1(0, T)} for nodal controls of shape (N + 1, M, 2)."""
    return 0.5 * alpha / T * h1_inner(u, u, T)


def control_h1_penalty_gradient(u, alpha, T):
    """Nodal derivative of the penalty (values on the hats)."""
    return alpha / T * h1_apply(np.asarray(u, dtype=float), T)


# ---------------------------------------------------------------------------
# state terms
# ---------------------------------------------------------------------------


def _moments(rho, grid, floor):
    a = grid.cell_area
    xx, yy = grid.cell_centers()
    m = a * np.sum(rho)
    if m < floor:
        raise DegenerateMassError(f"total mass {m:.3e} below floor {floor:.1e}; variance undefined")
    ex = a * np.sum(rho * xx) / m
    ey = a * np.sum(rho * yy) / m
    d2 = (xx - ex) ** 2 + (yy - ey) ** 2
    return m, d2, a * np.sum(rho * d2) / m


def density_variance(rho, grid, floor=1e-10):
    return _moments(rho, grid, floor)[2]


def evacuation_state_term(rho, times, grid, cfg):
    a = grid.cell_area
    w = trapezoid_weights(len(times) - 1, times[-1])
    masses = a * rho.reshape(rho.shape[0], -1).sum(axis=1)
    return cfg.c1 * masses[-1] + cfg.c2 * float(np.sum(w * times * masses))


def variance_state_term(rho, times, grid, cfg):
    T = times[-1]
    w = trapezoid_weights(len(times) - 1, T)
    v = np.array([density_variance(r, grid, cfg.mass_floor) for r in rho])
    return float(np.sum(w * v)) / (2.0 * T)


def _weights(cfg):
    if cfg.kind == "evacuation":
        return 1.0, 0.0
    if cfg.kind == "variance":
        return 0.0, 1.0
    return cfg.blend_weights


def objective_terms(traj, grid, cfg):
    """Breakdown of the objective value into its parts."""
    be, bv = _weights(cfg)
    T = traj.times[-1]
    out = {"evacuation": 0.0, "variance": 0.0}
    if be:
        out["evacuation"] = be * evacuation_state_term(traj.rho, traj.times, grid, cfg)
    if bv:
        out["variance"] = bv * variance_state_term(traj.rho, traj.times, grid, cfg)
    out["penalty"] = control_h1_penalty(traj.u, cfg.alpha, T)
    out["total"] = out["evacuation"] + out["variance"] + out["penalty"]
    return out


def objective_value(traj, grid, cfg):
    return objective_terms(traj, grid, cfg)["total"]


def evacuation_objective(traj, u, cfg, grid):
    return (evacuation_state_term(traj.rho, traj.times, grid, cfg)
            + control_h1_penalty(u, cfg.alpha, traj.times[-1]))


def variance_objective(traj, u, cfg, grid):
    return (variance_state_term(traj.rho, traj.times, grid, cfg)
            + control_h1_penalty(u, cfg.alpha, traj.times[-1]))


def objective_gradient_wrt_trajectory(traj, grid, cfg):
    """dJ/drho^n for every node n, shape (N + 1, nx, ny)."""
    be, bv = _weights(cfg)
    times = traj.times
    T = times[-1]
    w = trapezoid_weights(len(times) - 1, T)
    a = grid.cell_area
    out = np.zeros_like(traj.rho)
    if be:
        out += (be * cfg.c2 * a * w * times)[:, None, None]
        out[-1] += be * cfg.c1 * a
    if bv:
        for n, r in enumerate(traj.rho):
            m, d2, v = _moments(r, grid, cfg.mass_floor)
            # dV/drho_k = (a / m) (|x_k - E|^2 - V)
            out[n] += bv * w[n] / (2.0 * T) * (a / m) * (d2 - v)
    return out
