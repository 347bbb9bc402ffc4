"""Regularized Eikonal equation via the exponential transform.

With psi = exp(-phi / delta1) - 1 the equation
    -delta1 lap(phi) + |grad phi|^2 = 1 / (f(rho)^2 + delta2)
becomes the linear screened-Poisson problem
    -lap(psi) + q psi = -q,   q = 1 / (delta1^2 (f(rho)^2 + delta2)),
with psi = 0 on doors and zero normal flux on walls.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidInputError, InvariantViolation, SolverError
from .grid import neumann_laplacian
from .model import SpeedLaw

PSI_FLOOR = -1.0 + 1e-12


@dataclass(frozen=True)
class EikonalParams:
    delta1: float = 0.5
    delta2: float = 0.2

    def __post_init__(self):
        if not (self.delta1 > 0.0 and self.delta2 > 0.0):
            raise InvalidInputError("delta1 and delta2 must be positive")


def coefficient_q(rho, p, law=SpeedLaw.LINEAR):
    f = SpeedLaw(law).f(rho)
    return 1.0 / (p.delta1**2 * (f * f + p.delta2))


def coefficient_q_derivative(rho, p, law=SpeedLaw.LINEAR):
    law = SpeedLaw(law)
    f = law.f(rho)
    return -2.0 * f * law.df(rho) / (p.delta1**2 * (f * f + p.delta2) ** 2)


def pcg(a, b, tol=1e-10, maxiter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients on an SPD matrix."""
    n = b.size
    maxiter = 10 * n if maxiter is None else maxiter
    dinv = 1.0 / a.diagonal()
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - a @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        ap = a @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x
    raise SolverError("conjugate gradient did not converge", residual=res)


class ScreenedOperator:
    """Assembles -lap_h + diag(q) with ghost-cell Dirichlet rows at doors.

    The door ghost value is minus the interior value, which adds
    2 / h^2 per door face to the diagonal.
    """

    def __init__(self, grid, solver="direct", tol=1e-10):
        self.grid = grid
        self.solver = solver
        self.tol = tol
        cx, cy = grid.door_counts()
        self.door_diag = (2.0 * cx / grid.hx**2 + 2.0 * cy / grid.hy**2).ravel()
        self._base = (neumann_laplacian(grid) + sp.diags(self.door_diag)).tocsr()

    def matrix(self, q):
        q = np.asarray(q, dtype=float).ravel()
        if not np.all(q > 0.0):
            raise InvalidInputError("screened-Poisson coefficient q must be positive")
        return (self._base + sp.diags(q)).tocsc()

    def factorize(self, q):
        """Return a callable b -> A(q)^{-1} b (A is symmetric, so it is its own transpose)."""
        a = self.matrix(q)
        if self.solver == "direct":
            lu = spla.splu(a)

            def solve(b):
                x = lu.solve(np.asarray(b, dtype=float).ravel())
                res = np.linalg.norm(a @ x - b.ravel()) / max(np.linalg.norm(b), 1e-300)
                if not np.isfinite(res) or res > max(self.tol, 1e-8):
                    raise SolverError("sparse direct solve inaccurate", residual=res)
                return x

            return solve
        if self.solver == "cg":
            return lambda b: pcg(a.tocsr(), np.asarray(b, dtype=float).ravel(), tol=self.tol)
        raise InvalidInputError(f"unknown linear solver {self.solver!r}")


def solve_screened_poisson(q, rhs, g, solver="direct", tol=1e-10):
    """Solve -lap(psi) + q psi = rhs with psi = 0 on doors, Neumann on walls."""
    op = ScreenedOperator(g, solver=solver, tol=tol)
    return op.factorize(q)(np.asarray(rhs, dtype=float)).reshape(g.shape)


def potential_from_psi(psi, delta1):
    psi = np.asarray(psi, dtype=float)
    lo = float(psi.min())
    if lo <= PSI_FLOOR:
        raise InvariantViolation(
            f"psi reached {lo:.3e} <= -1 + 1e-12; discrete maximum principle broken"
        )
    return -delta1 * np.log1p(psi)


@dataclass
class EikonalSolution:
    phi: np.ndarray
    psi: np.ndarray
    w: np.ndarray  # 1 + psi
    solve: object  # factorized A(q)^{-1}


class EikonalSolver:
    """Reusable per-grid solver; also provides the linearized solve and its transpose."""

    def __init__(self, grid, params, law=SpeedLaw.LINEAR, solver="direct", tol=1e-10):
        self.grid = grid
        self.params = params
        self.law = SpeedLaw(law)
        self.op = ScreenedOperator(grid, solver=solver, tol=tol)

    def solve(self, rho):
        # 1 + psi solves A w = door_diag exactly (A 1 = q + door_diag); solving for
        # w directly keeps relative accuracy where w is tiny.
        q = coefficient_q(rho, self.params, self.law)
        solve = self.op.factorize(q)
        w = solve(self.op.door_diag).reshape(self.grid.shape)
        if float(w.min()) <= 1e-12:
            raise InvariantViolation(
                f"psi reached {w.min() - 1.0:.3e} <= -1 + 1e-12; discrete maximum principle broken"
            )
        psi = w - 1.0
        phi = -self.params.delta1 * np.log(w)
        return EikonalSolution(phi=phi, psi=psi, w=w, solve=solve)

    def jvp(self, rho, sol, rho_t):
        """phi_t from rho_t: A w_t = -w q'(rho) rho_t, phi_t = -delta1 w_t / w."""
        dq = coefficient_q_derivative(rho, self.params, self.law)
        w_t = sol.solve(-(sol.w * dq * rho_t).ravel()).reshape(self.grid.shape)
        return -self.params.delta1 * w_t / sol.w

    def vjp(self, rho, sol, phi_bar):
        dq = coefficient_q_derivative(rho, self.params, self.law)
        w_bar = -self.params.delta1 * phi_bar / sol.w
        lam = sol.solve(w_bar.ravel()).reshape(self.grid.shape)
        return -sol.w * lam * dq


def solve_eikonal(rho, params, grid, law=SpeedLaw.LINEAR, solver="direct"):
    """Return (phi, psi) for the density ``rho``."""
    sol = EikonalSolver(grid, params, law, solver=solver).solve(rho)
    return sol.phi, sol.psi
