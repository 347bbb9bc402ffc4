"""Exact derivatives of the discrete forward map.

``solve_tangent`` pushes a control direction through every time step;
``adjoint_sweep`` applies the transpose of the same step maps in reverse
order.  Upwind directions are frozen at the base trajectory's pattern.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .agents import step_agents_jvp, step_agents_vjp
from .forward import as_problem
from .objectives import (
    ObjectiveConfig,
    control_h1_penalty_gradient,
    objective_gradient_wrt_trajectory,
    riesz_h1,
)

log = logging.getLogger(__name__)


@dataclass
class TangentState:
    rho: np.ndarray  # (N + 1, nx, ny)
    phi: np.ndarray
    x: np.ndarray  # (N + 1, M, 2)
    near_switch: int = 0  # faces whose upwind side was numerically undecided


@dataclass
class ReducedGradient:
    nodal: np.ndarray  # dj/du at the nodes, i.e. j'(u) applied to the hat functions
    h1: np.ndarray  # H^1(0, T) Riesz representative
    rho0: np.ndarray = None  # dj/drho_0, a by-product of the sweep


def solve_tangent(scenario, base, du, drho0=None):
    """Directional derivative of (rho, phi, x) along the control direction ``du``."""
    pb = as_problem(scenario)
    g, n = pb.grid, base.n_steps
    du = np.asarray(du, dtype=float)
    rho_t = np.zeros_like(base.rho)
    phi_t = np.zeros_like(base.rho)
    x_t = np.zeros_like(base.x)
    if drho0 is not None:
        rho_t[0] = drho0
    switches = 0
    for k in range(n):
        sol = pb.eikonal.solve(base.rho[k])
        phi_t[k] = pb.eikonal.jvp(base.rho[k], sol, rho_t[k])
        tf = base.transport(k)
        switches += pb.stepper.near_switch(tf)
        t_t = pb.transport.jvp(base.grad[k], base.x[k], phi_t[k], x_t[k])
        rho_t[k + 1] = pb.stepper.jvp(base.rho[k], tf, rho_t[k], t_t)
        x_t[k + 1] = step_agents_jvp(base.agent_records[k], base.u[k], base.u[k + 1], pb.dt, pb.law,
                                     rho_t[k], rho_t[k + 1], x_t[k], du[k], du[k + 1])
    sol = pb.eikonal.solve(base.rho[n])
    phi_t[n] = pb.eikonal.jvp(base.rho[n], sol, rho_t[n])
    if switches:
        log.warning("tangent: %d upwind faces within 1e-14 of switching (frozen)", switches)
    return TangentState(rho_t, phi_t, x_t, switches)


def adjoint_sweep(scenario, base, rho_seed=None, x_seed=None, phi_seed=None):
    """Transpose of the tangent map: returns (u_bar, rho0_bar).

    Seeds are cotangents on the recorded states; the result satisfies
    <tangent(du), seed> = <du, u_bar> in the Euclidean pairing.
    """
    pb = as_problem(scenario)
    g, n = pb.grid, base.n_steps
    rb = np.zeros_like(base.rho) if rho_seed is None else np.array(rho_seed, dtype=float)
    xb = np.zeros_like(base.x) if x_seed is None else np.array(x_seed, dtype=float)
    ub = np.zeros_like(base.u)
    if phi_seed is not None:
        sol = pb.eikonal.solve(base.rho[n])
        rb[n] += pb.eikonal.vjp(base.rho[n], sol, phi_seed[n])
    for k in range(n - 1, -1, -1):
        rbn, rbn1, xbk, ubn, ubn1 = step_agents_vjp(base.agent_records[k], base.u[k], base.u[k + 1],
                                                    pb.dt, pb.law, xb[k + 1], g.shape)
        rb[k] += rbn
        rb[k + 1] += rbn1
        xb[k] += xbk
        ub[k] += ubn
        ub[k + 1] += ubn1
        rbd, t_bar = pb.stepper.vjp(base.rho[k], base.transport(k), rb[k + 1])
        rb[k] += rbd
        phib, xbt = pb.transport.vjp(base.grad[k], base.x[k], t_bar)
        xb[k] += xbt
        if phi_seed is not None:
            phib = phib + phi_seed[k]
        sol = pb.eikonal.solve(base.rho[k])
        rb[k] += pb.eikonal.vjp(base.rho[k], sol, phib)
    return ub, rb[0]


def solve_adjoint(scenario, base, cfg=None):
    """Reduced gradient of the objective at the controls of ``base``."""
    pb = as_problem(scenario)
    if cfg is None:
        cfg = ObjectiveConfig.from_config(pb.config.objective)
    seed = objective_gradient_wrt_trajectory(base, pb.grid, cfg)
    ub, r0 = adjoint_sweep(pb, base, rho_seed=seed)
    nodal = ub + control_h1_penalty_gradient(base.u, cfg.alpha, pb.T)
    return ReducedGradient(nodal=nodal, h1=riesz_h1(nodal, pb.T), rho0=r0)


def directional_derivative(scenario, base, du, cfg=None):
    """<j'(u), du> computed through the tangent map."""
    pb = as_problem(scenario)
    if cfg is None:
        cfg = ObjectiveConfig.from_config(pb.config.objective)
    tan = solve_tangent(pb, base, du)
    seed = objective_gradient_wrt_trajectory(base, pb.grid, cfg)
    return float(np.sum(seed * tan.rho) + np.sum(control_h1_penalty_gradient(base.u, cfg.alpha, pb.T) * du))
