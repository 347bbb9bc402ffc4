"""Projected H^1 gradient descent with Armijo backtracking over agent controls."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import HughesError, InvalidInputError, OptimizationFailure
from .forward import as_problem, solve_forward
from .objectives import ObjectiveConfig, h1_inner, objective_value
from .sensitivity import solve_adjoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 50
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    tol: float = 1e-4
    min_step: float = 1e-10
    growth: float = 2.0  # next trial step = growth * last accepted step

    def __post_init__(self):
        if not (self.max_iters >= 1 and 0 < self.armijo_c < 1 and 0 < self.backtrack < 1
                and self.initial_step > 0 and self.tol > 0 and self.min_step > 0 and self.growth >= 1):
            raise InvalidInputError("invalid optimizer settings")

    @classmethod
    def from_config(cls, o):
        return cls(o.max_iters, o.armijo_c, o.backtrack, o.initial_step, o.tol, o.min_step, o.growth)


def project_controls(u):
    """Pointwise radial projection onto |u_i(t_n)| <= 1."""
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        return u.copy()
    norm = np.linalg.norm(u, axis=-1, keepdims=True)
    return u / np.maximum(1.0, norm)


def stationarity(u, grad_h1, T):
    """||u - P(u - g)||_{H^1} / (1 + ||g||_{H^1})."""
    r = u - project_controls(u - grad_h1)
    return np.sqrt(max(h1_inner(r, r, T), 0.0)) / (1.0 + np.sqrt(max(h1_inner(grad_h1, grad_h1, T), 0.0)))


@dataclass
class OptimizationResult:
    controls: np.ndarray
    objective: float
    status: str
    history: list = field(default_factory=list)
    trajectory: object = None


def optimize(scenario, cfg=None, opt=None, u0=None, callback=None):
    """Minimize the reduced objective over U_ad.

    Each history entry describes one evaluated iterate: objective value,
    stationarity measure, and the step accepted from it (0 if none).
    """
    pb = as_problem(scenario)
    cfg = ObjectiveConfig.from_config(pb.config.objective) if cfg is None else cfg
    opt = OptimizerConfig.from_config(pb.config.optimizer) if opt is None else opt
    u = project_controls(pb.initial_controls() if u0 is None else u0)
    T = pb.T

    def evaluate(v):
        try:
            tr = solve_forward(pb, v)
            return tr, objective_value(tr, pb.grid, cfg)
        except HughesError as exc:
            raise OptimizationFailure(f"forward solve failed: {exc}", iterate=v, history=history) from exc

    history = []
    traj, j = evaluate(u)
    status = "max_iters"
    s_next = opt.initial_step
    for k in range(opt.max_iters):
        grad = solve_adjoint(pb, traj, cfg)
        stat = stationarity(u, grad.h1, T)
        entry = {"iter": k, "objective": j, "stationarity": stat, "step": 0.0, "backtracks": 0}
        history.append(entry)
        if callback is not None:
            callback(entry)
        if stat <= opt.tol:
            status = "converged"
            break
        s = s_next
        accepted = False
        while s >= opt.min_step:
            trial = project_controls(u - s * grad.h1)
            tr_new, j_new = evaluate(trial)
            decrease = float(np.sum(grad.nodal * (u - trial)))
            if j_new <= j - opt.armijo_c * decrease:
                accepted = True
                break
            s *= opt.backtrack
            entry["backtracks"] += 1
        if not accepted:
            status = "min_step"
            break
        entry["step"] = s
        s_next = s * opt.growth
        log.info("iter %d  J=%.10g  stat=%.3e  step=%.3g", k, j, stat, s)
        u, traj, j = trial, tr_new, j_new
    else:
        grad = solve_adjoint(pb, traj, cfg)
        history.append({"iter": opt.max_iters, "objective": j,
                        "stationarity": stationarity(u, grad.h1, T), "step": 0.0, "backtracks": 0})
    return OptimizationResult(controls=u, objective=j, status=status, history=history, trajectory=traj)
