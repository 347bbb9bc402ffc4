"""Agent ODE x' = f(rho_ext(t, x)) u via Heun steps and a clamp-bilinear extension."""

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, InvalidInputError
from .model import SpeedLaw

CONTROL_TOL = 1e-12


@dataclass(frozen=True)
class Stencil:
    """Bilinear weights of a query point; d_w* are derivatives w.r.t. the point."""

    i0: int
    j0: int
    w: np.ndarray  # (2, 2) weights on cells (i0 + a, j0 + b)
    dwx: np.ndarray
    dwy: np.ndarray


def stencil(x, g):
    xc0, yc0 = 0.5 * g.hx, 0.5 * g.hy
    xcl, ycl = xc0 + (g.nx - 1) * g.hx, yc0 + (g.ny - 1) * g.hy
    px, py = float(x[0]), float(x[1])
    free_x = xc0 <= px <= xcl
    free_y = yc0 <= py <= ycl
    cx = min(max(px, xc0), xcl)
    cy = min(max(py, yc0), ycl)
    i0 = min(int((cx - xc0) / g.hx), g.nx - 2)
    j0 = min(int((cy - yc0) / g.hy), g.ny - 2)
    tx = (cx - xc0) / g.hx - i0
    ty = (cy - yc0) / g.hy - j0
    wx = np.array([1.0 - tx, tx])
    wy = np.array([1.0 - ty, ty])
    dx = np.array([-1.0, 1.0]) / g.hx if free_x else np.zeros(2)
    dy = np.array([-1.0, 1.0]) / g.hy if free_y else np.zeros(2)
    return Stencil(i0, j0, np.outer(wx, wy), np.outer(dx, wy), np.outer(wx, dy))


def _patch(rho, s):
    return rho[s.i0:s.i0 + 2, s.j0:s.j0 + 2]


def sample_density_extended(rho, x, g):
    """Bilinear interpolation of cell values, constant continuation outside the center hull."""
    s = stencil(x, g)
    return float(np.sum(s.w * _patch(np.asarray(rho, dtype=float), s)))


def sample_with_gradient(rho, x, g):
    s = stencil(x, g)
    p = _patch(rho, s)
    return float(np.sum(s.w * p)), np.array([np.sum(s.dwx * p), np.sum(s.dwy * p)]), s


def _scatter(out, s, val):
    out[s.i0:s.i0 + 2, s.j0:s.j0 + 2] += val * s.w


@dataclass
class AgentStepRecord:
    """Intermediates of one Heun step, kept for the linearization."""

    z1: np.ndarray
    g1: np.ndarray
    st1: list
    xp: np.ndarray
    z2: np.ndarray
    g2: np.ndarray
    st2: list


def check_controls(u):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("controls must be finite")
    if u.size and np.max(np.linalg.norm(u, axis=-1)) > 1.0 + CONTROL_TOL:
        raise InvalidInputError("controls must satisfy |u_i(t)| <= 1")


def _slopes(rho, x, u, law, g):
    m = x.shape[0]
    z = np.empty(m)
    grad = np.empty((m, 2))
    st = []
    for i in range(m):
        z[i], grad[i], s = sample_with_gradient(rho, x[i], g)
        st.append(s)
    return z, grad, st, law.f(z)[:, None] * u


def step_agents(x, rho_n, rho_np1, u_n, u_np1, dt, law, g, record=False):
    """Explicit trapezoid (Heun) step; returns new positions (and intermediates)."""
    law = SpeedLaw(law)
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    u_n = np.asarray(u_n, dtype=float).reshape(-1, 2)
    u_np1 = np.asarray(u_np1, dtype=float).reshape(-1, 2)
    z1, g1, st1, s1 = _slopes(rho_n, x, u_n, law, g)
    xp = x + dt * s1
    z2, g2, st2, s2 = _slopes(rho_np1, xp, u_np1, law, g)
    out = x + 0.5 * dt * (s1 + s2)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("agent positions became non-finite")
    if record:
        return out, AgentStepRecord(z1, g1, st1, xp, z2, g2, st2)
    return out


def step_agents_jvp(rec, u_n, u_np1, dt, law, rho_t_n, rho_t_np1, x_t, u_t_n, u_t_np1):
    law = SpeedLaw(law)
    m = x_t.shape[0]
    zt1 = np.array([np.sum(rec.st1[i].w * _patch(rho_t_n, rec.st1[i])) for i in range(m)])
    zt1 += np.sum(rec.g1 * x_t, axis=1)
    st1 = law.df(rec.z1)[:, None] * zt1[:, None] * u_n + law.f(rec.z1)[:, None] * u_t_n
    xpt = x_t + dt * st1
    zt2 = np.array([np.sum(rec.st2[i].w * _patch(rho_t_np1, rec.st2[i])) for i in range(m)])
    zt2 += np.sum(rec.g2 * xpt, axis=1)
    st2 = law.df(rec.z2)[:, None] * zt2[:, None] * u_np1 + law.f(rec.z2)[:, None] * u_t_np1
    return x_t + 0.5 * dt * (st1 + st2)


def step_agents_vjp(rec, u_n, u_np1, dt, law, x_bar_out, shape):
    """Returns (rho_bar_n, rho_bar_np1, x_bar, u_bar_n, u_bar_np1)."""
    law = SpeedLaw(law)
    m = x_bar_out.shape[0]
    rb_n = np.zeros(shape)
    rb_np1 = np.zeros(shape)
    x_bar = x_bar_out.copy()
    sb2 = 0.5 * dt * x_bar_out
    sb1 = 0.5 * dt * x_bar_out
    ub_np1 = law.f(rec.z2)[:, None] * sb2
    zb2 = law.df(rec.z2) * np.sum(u_np1 * sb2, axis=1)
    xpb = rec.g2 * zb2[:, None]
    for i in range(m):
        _scatter(rb_np1, rec.st2[i], zb2[i])
    x_bar += xpb
    sb1 = sb1 + dt * xpb
    ub_n = law.f(rec.z1)[:, None] * sb1
    zb1 = law.df(rec.z1) * np.sum(u_n * sb1, axis=1)
    x_bar += rec.g1 * zb1[:, None]
    for i in range(m):
        _scatter(rb_n, rec.st1[i], zb1[i])
    return rb_n, rb_np1, x_bar, ub_n, ub_np1


def crosses_wall(x_prev, x_next, g):
    """Diagnostic: True for agents whose step leaves or re-enters the rectangle."""
    def inside(p):
        return (p[:, 0] >= 0) & (p[:, 0] <= g.lx) & (p[:, 1] >= 0) & (p[:, 1] <= g.ly)

    return inside(x_prev) != inside(x_next)
