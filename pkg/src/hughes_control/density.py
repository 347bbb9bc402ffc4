"""Density transport: face transport field, IMEX step, door outflux."""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import InvalidInputError, InvariantViolation, StepSizeError
from .grid import FaceField, ghost_padding, neumann_laplacian
from .model import KernelParams, ProjectionParams, SpeedLaw

BOX_TOL = 1e-10


@dataclass(frozen=True)
class DensityParams:
    eps: float = 0.02
    eta_out: float = 1.0
    dt: float = 0.05

    def __post_init__(self):
        if not (self.eps > 0.0 and self.eta_out > 0.0 and self.dt > 0.0):
            raise InvalidInputError("eps, eta_out and dt must be positive")


def cfl_limit(grid, law=SpeedLaw.LINEAR):
    """Largest dt for which the explicit advective step is monotone (|T| <= 1)."""
    return 1.0 / (2.0 * (1.0 / grid.hx + 1.0 / grid.hy) * SpeedLaw(law).lipschitz())


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape
    )


class TransportOperator:
    """Face-normal component of h(grad(phi + phi_K)) and its derivatives.

    The potential gradient is reconstructed from the ghost-padded cell array:
    the normal part is the two-point difference across the face, the
    tangential part the mean of the central differences of the adjacent
    cells (the single interior cell on boundary faces).
    """

    def __init__(self, grid, kernel=KernelParams(), proj=ProjectionParams()):
        self.grid = grid
        self.kernel = kernel
        self.proj = proj
        nx, ny = grid.shape
        hx, hy = grid.hx, grid.hy
        npad = (nx + 2) * (ny + 2)
        pad = np.arange(npad).reshape(nx + 2, ny + 2)

        # x-faces (i, j), i = 0..nx
        fx = np.arange((nx + 1) * ny).reshape(nx + 1, ny)
        dxx = _coo([fx.ravel()] * 2, [pad[1:, 1:-1].ravel(), pad[:-1, 1:-1].ravel()],
                   [np.full(fx.size, 1.0 / hx), np.full(fx.size, -1.0 / hx)], (fx.size, npad))
        # central y-difference of a cell (c, j) is (pad[c+1, j+2] - pad[c+1, j]) / 2hy
        w = np.full((nx + 1, ny), 0.5)
        w[0, :] = w[-1, :] = 1.0
        rows, cols, vals = [], [], []
        for shift, sel in ((-1, slice(1, None)), (0, slice(None, -1))):
            faces = fx[sel]
            ii = np.arange(nx + 1)[sel] + shift + 1
            wf = w[sel] / (2.0 * hy)
            jj = np.arange(ny)
            rows += [faces.ravel(), faces.ravel()]
            cols += [pad[ii[:, None], jj[None, :] + 2].ravel(), pad[ii[:, None], jj[None, :]].ravel()]
            vals += [wf.ravel(), -wf.ravel()]
        dxy = _coo(rows, cols, vals, (fx.size, npad))

        # y-faces (i, j), j = 0..ny
        fy = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
        dyy = _coo([fy.ravel()] * 2, [pad[1:-1, 1:].ravel(), pad[1:-1, :-1].ravel()],
                   [np.full(fy.size, 1.0 / hy), np.full(fy.size, -1.0 / hy)], (fy.size, npad))
        w = np.full((nx, ny + 1), 0.5)
        w[:, 0] = w[:, -1] = 1.0
        rows, cols, vals = [], [], []
        for shift, sel in ((-1, slice(1, None)), (0, slice(None, -1))):
            faces = fy[:, sel]
            jj = np.arange(ny + 1)[sel] + shift + 1
            wf = w[:, sel] / (2.0 * hx)
            ii = np.arange(nx)
            rows += [faces.ravel(), faces.ravel()]
            cols += [pad[ii[:, None] + 2, jj[None, :]].ravel(), pad[ii[:, None], jj[None, :]].ravel()]
            vals += [wf.ravel(), -wf.ravel()]
        dyx = _coo(rows, cols, vals, (fy.size, npad))

        p = ghost_padding(grid)
        self.n_xf = fx.size
        self.n_yf = fy.size
        self.c0 = sp.vstack([dxx @ p, dyx @ p]).tocsr()  # x-component on all faces
        self.c1 = sp.vstack([dxy @ p, dyy @ p]).tocsr()  # y-component on all faces
        xfx, xfy = grid.xface_centers()
        yfx, yfy = grid.yface_centers()
        self.px = np.ascontiguousarray(np.concatenate([xfx.ravel(), yfx.ravel()]))
        self.py = np.ascontiguousarray(np.concatenate([xfy.ravel(), yfy.ravel()]))
        self.is_x = np.zeros(self.px.size, bool)
        self.is_x[: self.n_xf] = True
        wall_x = np.zeros((nx + 1, ny), bool)
        wall_x[0, :] = ~grid.door_left
        wall_x[-1, :] = ~grid.door_right
        wall_y = np.zeros((nx, ny + 1), bool)
        wall_y[:, 0] = ~grid.door_bottom
        wall_y[:, -1] = ~grid.door_top
        self.live = ~np.concatenate([wall_x.ravel(), wall_y.ravel()])

    def _agents(self, positions):
        a = np.asarray(positions, dtype=float).reshape(-1, 2)
        return np.ascontiguousarray(a[:, 0]), np.ascontiguousarray(a[:, 1])

    def split(self, flat):
        nx, ny = self.grid.shape
        return FaceField(flat[: self.n_xf].reshape(nx + 1, ny), flat[self.n_xf:].reshape(nx, ny + 1))

    def gradient(self, phi, positions):
        """Reconstructed grad(phi + phi_K) on all faces, shape (n_faces, 2)."""
        phi = np.asarray(phi, dtype=float).ravel()
        ax, ay = self._agents(positions)
        kx, ky = kernels.kernel_grad_sum(self.px, self.py, ax, ay, self.kernel.intensity, self.kernel.radius)
        return np.stack([self.c0 @ phi + kx, self.c1 @ phi + ky], axis=-1)

    def _normal(self, hx, hy):
        return np.where(self.live, np.where(self.is_x, hx, hy), 0.0)

    def field(self, phi, positions):
        g = self.gradient(phi, positions)
        hx, hy = kernels.projection(np.ascontiguousarray(g[:, 0]), np.ascontiguousarray(g[:, 1]), self.proj.eps_h)
        return g, self.split(self._normal(hx, hy))

    def jvp(self, g, positions, phi_t, x_t):
        phi_t = np.asarray(phi_t, dtype=float).ravel()
        ax, ay = self._agents(positions)
        vx, vy = self._agents(x_t)
        kx, ky = kernels.kernel_hess_apply(self.px, self.py, ax, ay, vx, vy,
                                           self.kernel.intensity, self.kernel.radius)
        gtx = self.c0 @ phi_t + kx
        gty = self.c1 @ phi_t + ky
        hx, hy = kernels.projection_jvp(np.ascontiguousarray(g[:, 0]), np.ascontiguousarray(g[:, 1]),
                                        gtx, gty, self.proj.eps_h)
        return self.split(self._normal(hx, hy))

    def vjp(self, g, positions, t_bar):
        tb = np.where(self.live, np.concatenate([t_bar.x.ravel(), t_bar.y.ravel()]), 0.0)
        hbx = np.where(self.is_x, tb, 0.0)
        hby = np.where(self.is_x, 0.0, tb)
        gbx, gby = kernels.projection_jvp(np.ascontiguousarray(g[:, 0]), np.ascontiguousarray(g[:, 1]),
                                          hbx, hby, self.proj.eps_h)
        phi_bar = (self.c0.T @ gbx + self.c1.T @ gby).reshape(self.grid.shape)
        ax, ay = self._agents(positions)
        xbx, xby = kernels.kernel_hess_transpose(self.px, self.py, ax, ay, gbx, gby,
                                                 self.kernel.intensity, self.kernel.radius)
        return phi_bar, np.stack([xbx, xby], axis=-1)


def transport_field(phi, positions, k, g, proj=ProjectionParams()):
    """Face-normal transport direction; zero on walls, one-sided at doors."""
    return TransportOperator(g, k, proj).field(phi, positions)[1]


class DensityStepper:
    """One IMEX step: explicit monotone upwind advection, then implicit diffusion.

    The door condition (total outward flux eta rho) lives entirely in the
    implicit matrix; doors carry no advective flux, so mass balance is exact.
    With ``sealed=True`` every boundary face is zero-flux for the density.
    """

    def __init__(self, grid, params, law=SpeedLaw.LINEAR, sealed=False):
        self.grid = grid
        self.params = params
        self.law = SpeedLaw(law)
        self.sealed = sealed
        limit = cfl_limit(grid, self.law)
        if params.dt > limit * (1.0 + 1e-12):
            raise StepSizeError(f"dt = {params.dt:.6g} exceeds the advective limit {limit:.6g}")
        cx, cy = grid.door_counts()
        self.robin = (params.eta_out * (cx / grid.hx + cy / grid.hy)).ravel()
        if sealed:
            self.robin[:] = 0.0
        b = sp.identity(grid.n_cells) + params.dt * (params.eps * neumann_laplacian(grid) + sp.diags(self.robin))
        self.matrix = b.tocsc()
        self._lu = spla.splu(self.matrix)

    def implicit_solve(self, rhs):
        return self._lu.solve(np.ascontiguousarray(rhs, dtype=float).ravel()).reshape(self.grid.shape)

    def _fd(self, rho):
        return self.law.f(rho), self.law.df(rho)

    def explicit(self, rho, t):
        f, _ = self._fd(rho)
        g = self.grid
        return kernels.advect(rho, f, t.x, t.y, self.params.dt, g.hx, g.hy)

    def step(self, rho, t):
        lo, hi = float(rho.min()), float(rho.max())
        if lo < -BOX_TOL or hi > 1.0 + BOX_TOL:
            raise InvariantViolation(f"density outside [0, 1] before step: [{lo:.3e}, {hi:.6g}]")
        out = self.implicit_solve(self.explicit(rho, t))
        lo, hi = float(out.min()), float(out.max())
        if not np.all(np.isfinite(out)) or lo < -BOX_TOL or hi > 1.0 + BOX_TOL:
            raise InvariantViolation(f"density left [0, 1] after step: [{lo:.3e}, {hi:.6g}]")
        return out

    def jvp(self, rho, t, rho_t, t_t):
        f, df = self._fd(rho)
        g = self.grid
        star = kernels.advect_jvp(rho, f, df, t.x, t.y, np.ascontiguousarray(rho_t), t_t.x, t_t.y,
                                  self.params.dt, g.hx, g.hy)
        return self.implicit_solve(star)

    def vjp(self, rho, t, out_bar):
        f, df = self._fd(rho)
        g = self.grid
        star_bar = self.implicit_solve(out_bar)
        rho_bar, tx_bar, ty_bar = kernels.advect_vjp(rho, f, df, t.x, t.y, star_bar,
                                                     self.params.dt, g.hx, g.hy)
        return rho_bar, FaceField(tx_bar, ty_bar)

    def near_switch(self, t, tol=1e-14):
        """Number of interior faces whose upwind side is (numerically) undecided."""
        return int(np.sum(np.abs(t.x[1:-1, :]) <= tol) + np.sum(np.abs(t.y[:, 1:-1]) <= tol))


def advance_density(rho_n, t, p, law, g, sealed=False):
    return DensityStepper(g, p, law, sealed=sealed).step(np.asarray(rho_n, dtype=float), t)


def boundary_outflux(rho, p, g, sealed=False):
    """Exit rate sum over door faces of eta * rho(adjacent cell) * face length."""
    if sealed:
        return 0.0
    rho = np.asarray(rho, dtype=float)
    return float(p.eta_out * (
        g.hy * (rho[0, :] @ g.door_left + rho[-1, :] @ g.door_right)
        + g.hx * (rho[:, 0] @ g.door_bottom + rho[:, -1] @ g.door_top)
    ))
