"""Constitutive functions: speed law, flux density, smoothed projection, agent kernel."""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError


class SpeedLaw(str, enum.Enum):
    """Density-dependent walking speed with f(0) = 1 and f(1) = 0."""

    LINEAR = "linear"
    SMOOTH_BUMP = "smooth_bump"

    def f(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self is SpeedLaw.LINEAR:
            return 1.0 - np.clip(rho, 0.0, 1.0)
        inside = np.abs(rho) < 1.0
        r2 = np.where(inside, rho * rho, 0.0)
        return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - r2)), 0.0)

    def df(self, rho):
        """Derivative of ``f``; the linear law uses slope -1 on the closed interval [0, 1]."""
        rho = np.asarray(rho, dtype=float)
        if self is SpeedLaw.LINEAR:
            return np.where((rho >= 0.0) & (rho <= 1.0), -1.0, 0.0)
        inside = np.abs(rho) < 1.0
        r = np.where(inside, rho, 0.0)
        den = 1.0 - r * r
        return np.where(inside, np.exp(1.0 - 1.0 / den) * (-2.0 * r / den**2), 0.0)

    def lipschitz(self):
        """max over [0, 1] of max(f, rho |f'|); bounds the explicit-step slopes."""
        if self is SpeedLaw.LINEAR:
            return 1.0
        rho = np.linspace(0.0, 1.0, 20001)
        return float(max(self.f(rho).max(), np.max(rho * np.abs(self.df(rho)))))


@dataclass(frozen=True)
class ProjectionParams:
    eps_h: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.eps_h < 0.5:
            raise InvalidInputError(f"eps_h must lie in (0, 0.5), got {self.eps_h}")


@dataclass(frozen=True)
class KernelParams:
    intensity: float = 1.0
    radius: float = 1.0

    def __post_init__(self):
        if not (self.intensity > 0.0 and self.radius > 0.0):
            raise InvalidInputError("kernel intensity and radius must be positive")


def _check_finite(x, name):
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} must be finite")


def speed_f(rho, law=SpeedLaw.LINEAR):
    _check_finite(rho, "rho")
    out = SpeedLaw(law).f(rho)
    return float(out) if np.ndim(out) == 0 else out


def flux_density_g(rho, law=SpeedLaw.LINEAR):
    """g(rho) = rho f(rho)."""
    _check_finite(rho, "rho")
    out = np.asarray(rho, dtype=float) * SpeedLaw(law).f(rho)
    return float(out) if np.ndim(out) == 0 else out


def project_h(y, p=ProjectionParams()):
    """Smoothed projection of 2-vectors onto the unit ball.

    ``y`` may be a single 2-vector or an array of shape (..., 2).
    """
    y = np.asarray(y, dtype=float)
    flat = y.reshape(-1, 2)
    hx, hy = kernels.projection(np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1]), p.eps_h)
    return np.stack([hx, hy], axis=-1).reshape(y.shape)


def project_h_jvp(y, v, p=ProjectionParams()):
    """Directional derivative Dh(y) v (the Jacobian is symmetric)."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    fy, fv = y.reshape(-1, 2), v.reshape(-1, 2)
    ox, oy = kernels.projection_jvp(
        np.ascontiguousarray(fy[:, 0]), np.ascontiguousarray(fy[:, 1]),
        np.ascontiguousarray(fv[:, 0]), np.ascontiguousarray(fv[:, 1]), p.eps_h,
    )
    return np.stack([ox, oy], axis=-1).reshape(y.shape)


def kernel_K(d, k=KernelParams()):
    d = np.asarray(d, dtype=float)
    d2 = np.sum(d * d, axis=-1)
    r2 = k.radius**2
    inside = d2 < r2
    tau = np.where(inside, r2 - d2, 1.0)
    out = np.where(inside, k.intensity * np.exp(-r2 / tau), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _points(x):
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    return np.ascontiguousarray(x[:, 0]), np.ascontiguousarray(x[:, 1])


def agent_potential_grad(x, positions, k=KernelParams()):
    """Gradient of sum_i K(x - x_i) evaluated at the point(s) ``x``."""
    x = np.asarray(x, dtype=float)
    _check_finite(positions, "positions")
    px, py = _points(x)
    ax, ay = _points(positions)
    gx, gy = kernels.kernel_grad_sum(px, py, ax, ay, k.intensity, k.radius)
    return np.stack([gx, gy], axis=-1).reshape(x.shape)


def kernel_radial_profile(t, k=KernelParams()):
    """k(|d|) for scalar distances; convenience for monotonicity checks."""
    t = np.asarray(t, dtype=float)
    return kernel_K(np.stack([t, np.zeros_like(t)], axis=-1), k)
