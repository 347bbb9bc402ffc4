"""Hot inner loops: agent kernel sums, the smoothed projection and upwind fluxes.

Every kernel exists twice: an explicit loop version (compiled with numba when
available) and a vectorized numpy version.  The public names bind to the loop
version when numba is active and to the numpy version otherwise; both are kept
importable so they can be cross-checked and benchmarked.
"""

import math

import numpy as np

from ._accel import NUMBA_ENABLED, jit

# exp(-700) is below the smallest normal double; beyond that K and all its
# derivatives are flushed to zero to avoid 0 * inf.
_EXP_CUTOFF = 700.0


# ---------------------------------------------------------------------------
# agent kernel  K(d) = s exp(-r^2 / (r^2 - |d|^2))  on |d| < r
# ---------------------------------------------------------------------------


def _kernel_grad_sum_loop(px, py, ax, ay, s, r):
    n = px.shape[0]
    gx = np.zeros(n)
    gy = np.zeros(n)
    r2 = r * r
    for p in range(n):
        sx = 0.0
        sy = 0.0
        for i in range(ax.shape[0]):
            dx = px[p] - ax[i]
            dy = py[p] - ay[i]
            tau = r2 - (dx * dx + dy * dy)
            if tau <= 0.0 or r2 / tau > _EXP_CUTOFF:
                continue
            k = s * math.exp(-r2 / tau)
            c = -2.0 * r2 * k / (tau * tau)
            sx += c * dx
            sy += c * dy
        gx[p] = sx
        gy[p] = sy
    return gx, gy


def _kernel_hess_apply_loop(px, py, ax, ay, vx, vy, s, r):
    # sum_i -H(p - x_i) v_i
    n = px.shape[0]
    gx = np.zeros(n)
    gy = np.zeros(n)
    r2 = r * r
    for p in range(n):
        sx = 0.0
        sy = 0.0
        for i in range(ax.shape[0]):
            dx = px[p] - ax[i]
            dy = py[p] - ay[i]
            tau = r2 - (dx * dx + dy * dy)
            if tau <= 0.0 or r2 / tau > _EXP_CUTOFF:
                continue
            k = s * math.exp(-r2 / tau)
            c = -2.0 * r2 * k / (tau * tau)
            dc = 2.0 * r2 * k * (r2 / tau**4 - 2.0 / tau**3)
            dv = dx * vx[i] + dy * vy[i]
            sx -= c * vx[i] + 2.0 * dc * dx * dv
            sy -= c * vy[i] + 2.0 * dc * dy * dv
        gx[p] = sx
        gy[p] = sy
    return gx, gy


def _kernel_hess_transpose_loop(px, py, ax, ay, bx, by, s, r):
    # xbar_i = sum_p -H(p - x_i) b_p
    m = ax.shape[0]
    ox = np.zeros(m)
    oy = np.zeros(m)
    r2 = r * r
    for i in range(m):
        sx = 0.0
        sy = 0.0
        for p in range(px.shape[0]):
            dx = px[p] - ax[i]
            dy = py[p] - ay[i]
            tau = r2 - (dx * dx + dy * dy)
            if tau <= 0.0 or r2 / tau > _EXP_CUTOFF:
                continue
            k = s * math.exp(-r2 / tau)
            c = -2.0 * r2 * k / (tau * tau)
            dc = 2.0 * r2 * k * (r2 / tau**4 - 2.0 / tau**3)
            db = dx * bx[p] + dy * by[p]
            sx -= c * bx[p] + 2.0 * dc * dx * db
            sy -= c * by[p] + 2.0 * dc * dy * db
        ox[i] = sx
        oy[i] = sy
    return ox, oy


def _kernel_terms(px, py, axi, ayi, s, r):
    r2 = r * r
    dx = px - axi
    dy = py - ayi
    tau = r2 - (dx * dx + dy * dy)
    live = tau > 0.0
    live[live] = r2 / tau[live] <= _EXP_CUTOFF
    t = np.where(live, tau, 1.0)
    k = np.where(live, s * np.exp(-r2 / t), 0.0)
    c = -2.0 * r2 * k / (t * t)
    dc = 2.0 * r2 * k * (r2 / t**4 - 2.0 / t**3)
    return dx, dy, c, dc


def _kernel_grad_sum_numpy(px, py, ax, ay, s, r):
    gx = np.zeros(px.shape[0])
    gy = np.zeros(px.shape[0])
    for i in range(ax.shape[0]):
        dx, dy, c, _ = _kernel_terms(px, py, ax[i], ay[i], s, r)
        gx += c * dx
        gy += c * dy
    return gx, gy


def _kernel_hess_apply_numpy(px, py, ax, ay, vx, vy, s, r):
    gx = np.zeros(px.shape[0])
    gy = np.zeros(px.shape[0])
    for i in range(ax.shape[0]):
        dx, dy, c, dc = _kernel_terms(px, py, ax[i], ay[i], s, r)
        dv = dx * vx[i] + dy * vy[i]
        gx -= c * vx[i] + 2.0 * dc * dx * dv
        gy -= c * vy[i] + 2.0 * dc * dy * dv
    return gx, gy


def _kernel_hess_transpose_numpy(px, py, ax, ay, bx, by, s, r):
    m = ax.shape[0]
    ox = np.zeros(m)
    oy = np.zeros(m)
    for i in range(m):
        dx, dy, c, dc = _kernel_terms(px, py, ax[i], ay[i], s, r)
        db = dx * bx + dy * by
        ox[i] = -np.sum(c * bx + 2.0 * dc * dx * db)
        oy[i] = -np.sum(c * by + 2.0 * dc * dy * db)
    return ox, oy


# ---------------------------------------------------------------------------
# smoothed projection h(y) = sigma(|y|) y / |y|
#
# sigma(s) = s on s <= 1 - e, 1 on s >= 1 + e, and the cubic Hermite blend
# a + 2e (t - t^2 / 2), t = (s - a) / (2e), in between; sigma' = 1 - t there.
# ---------------------------------------------------------------------------


def _projection_loop(yx, yy, e):
    n = yx.shape[0]
    hx = np.empty(n)
    hy = np.empty(n)
    a = 1.0 - e
    b = 1.0 + e
    for k in range(n):
        s = math.sqrt(yx[k] * yx[k] + yy[k] * yy[k])
        if s <= a:
            hx[k] = yx[k]
            hy[k] = yy[k]
            continue
        if s >= b:
            sig = 1.0
        else:
            t = (s - a) / (2.0 * e)
            sig = a + 2.0 * e * (t - 0.5 * t * t)
        hx[k] = sig * yx[k] / s
        hy[k] = sig * yy[k] / s
    return hx, hy


def _projection_jvp_loop(yx, yy, vx, vy, e):
    # Jacobian of h is symmetric, so this also serves as the transpose.
    n = yx.shape[0]
    ox = np.empty(n)
    oy = np.empty(n)
    a = 1.0 - e
    b = 1.0 + e
    for k in range(n):
        s = math.sqrt(yx[k] * yx[k] + yy[k] * yy[k])
        if s <= a:
            ox[k] = vx[k]
            oy[k] = vy[k]
            continue
        if s >= b:
            sig = 1.0
            dsig = 0.0
        else:
            t = (s - a) / (2.0 * e)
            sig = a + 2.0 * e * (t - 0.5 * t * t)
            dsig = 1.0 - t
        ux = yx[k] / s
        uy = yy[k] / s
        ratio = sig / s
        proj = (dsig - ratio) * (ux * vx[k] + uy * vy[k])
        ox[k] = ratio * vx[k] + proj * ux
        oy[k] = ratio * vy[k] + proj * uy
    return ox, oy


def _blend(s, e):
    a = 1.0 - e
    t = np.clip((s - a) / (2.0 * e), 0.0, 1.0)
    sig = np.where(s <= a, s, a + 2.0 * e * (t - 0.5 * t * t))
    dsig = np.where(s <= a, 1.0, 1.0 - t)
    return sig, dsig


def _projection_numpy(yx, yy, e):
    s = np.hypot(yx, yy)
    sig, _ = _blend(s, e)
    inner = s <= 1.0 - e
    ratio = np.where(inner, 1.0, sig / np.where(inner, 1.0, s))
    return ratio * yx, ratio * yy


def _projection_jvp_numpy(yx, yy, vx, vy, e):
    s = np.hypot(yx, yy)
    sig, dsig = _blend(s, e)
    inner = s <= 1.0 - e
    safe = np.where(inner, 1.0, s)
    ratio = np.where(inner, 1.0, sig / safe)
    ux = yx / safe
    uy = yy / safe
    proj = np.where(inner, 0.0, (dsig - ratio) * (ux * vx + uy * vy))
    return ratio * vx + proj * ux, ratio * vy + proj * uy


# ---------------------------------------------------------------------------
# explicit advective step  rho* = rho - dt div F
#
# Interior face flux with face velocity a = -T (T = normal part of h):
#   a >= 0:  F = a rho_L f(rho_R)       a < 0:  F = a rho_R f(rho_L)
# Boundary faces carry no advective flux.
# ---------------------------------------------------------------------------


def _advect_loop(rho, f, tx, ty, dt, hx, hy):
    nx, ny = rho.shape
    out = rho.copy()
    for i in range(1, nx):
        for j in range(ny):
            a = -tx[i, j]
            if a >= 0.0:
                flux = a * rho[i - 1, j] * f[i, j]
            else:
                flux = a * rho[i, j] * f[i - 1, j]
            out[i - 1, j] -= dt * flux / hx
            out[i, j] += dt * flux / hx
    for i in range(nx):
        for j in range(1, ny):
            a = -ty[i, j]
            if a >= 0.0:
                flux = a * rho[i, j - 1] * f[i, j]
            else:
                flux = a * rho[i, j] * f[i, j - 1]
            out[i, j - 1] -= dt * flux / hy
            out[i, j] += dt * flux / hy
    return out


def _advect_jvp_loop(rho, f, df, tx, ty, rho_t, tx_t, ty_t, dt, hx, hy):
    nx, ny = rho.shape
    out = rho_t.copy()
    for i in range(1, nx):
        for j in range(ny):
            a = -tx[i, j]
            at = -tx_t[i, j]
            if a >= 0.0:
                ft = (at * rho[i - 1, j] * f[i, j]
                      + a * (rho_t[i - 1, j] * f[i, j] + rho[i - 1, j] * df[i, j] * rho_t[i, j]))
            else:
                ft = (at * rho[i, j] * f[i - 1, j]
                      + a * (rho_t[i, j] * f[i - 1, j] + rho[i, j] * df[i - 1, j] * rho_t[i - 1, j]))
            out[i - 1, j] -= dt * ft / hx
            out[i, j] += dt * ft / hx
    for i in range(nx):
        for j in range(1, ny):
            a = -ty[i, j]
            at = -ty_t[i, j]
            if a >= 0.0:
                ft = (at * rho[i, j - 1] * f[i, j]
                      + a * (rho_t[i, j - 1] * f[i, j] + rho[i, j - 1] * df[i, j] * rho_t[i, j]))
            else:
                ft = (at * rho[i, j] * f[i, j - 1]
                      + a * (rho_t[i, j] * f[i, j - 1] + rho[i, j] * df[i, j - 1] * rho_t[i, j - 1]))
            out[i, j - 1] -= dt * ft / hy
            out[i, j] += dt * ft / hy
    return out


def _advect_vjp_loop(rho, f, df, tx, ty, out_bar, dt, hx, hy):
    nx, ny = rho.shape
    rho_bar = out_bar.copy()
    tx_bar = np.zeros(tx.shape)
    ty_bar = np.zeros(ty.shape)
    for i in range(1, nx):
        for j in range(ny):
            a = -tx[i, j]
            fb = dt * (out_bar[i, j] - out_bar[i - 1, j]) / hx
            if a >= 0.0:
                tx_bar[i, j] = -fb * rho[i - 1, j] * f[i, j]
                rho_bar[i - 1, j] += fb * a * f[i, j]
                rho_bar[i, j] += fb * a * rho[i - 1, j] * df[i, j]
            else:
                tx_bar[i, j] = -fb * rho[i, j] * f[i - 1, j]
                rho_bar[i, j] += fb * a * f[i - 1, j]
                rho_bar[i - 1, j] += fb * a * rho[i, j] * df[i - 1, j]
    for i in range(nx):
        for j in range(1, ny):
            a = -ty[i, j]
            fb = dt * (out_bar[i, j] - out_bar[i, j - 1]) / hy
            if a >= 0.0:
                ty_bar[i, j] = -fb * rho[i, j - 1] * f[i, j]
                rho_bar[i, j - 1] += fb * a * f[i, j]
                rho_bar[i, j] += fb * a * rho[i, j - 1] * df[i, j]
            else:
                ty_bar[i, j] = -fb * rho[i, j] * f[i, j - 1]
                rho_bar[i, j] += fb * a * f[i, j - 1]
                rho_bar[i, j - 1] += fb * a * rho[i, j] * df[i, j - 1]
    return rho_bar, tx_bar, ty_bar


def _divergence(fx, fy, hx, hy):
    nx, ny = fx.shape[0] + 1, fy.shape[1] + 1
    div = np.zeros((nx, ny))
    div[:-1, :] += fx / hx
    div[1:, :] -= fx / hx
    div[:, :-1] += fy / hy
    div[:, 1:] -= fy / hy
    return div


def _advect_numpy(rho, f, tx, ty, dt, hx, hy):
    ax = -tx[1:-1, :]
    ay = -ty[:, 1:-1]
    fx = np.where(ax >= 0.0, ax * rho[:-1, :] * f[1:, :], ax * rho[1:, :] * f[:-1, :])
    fy = np.where(ay >= 0.0, ay * rho[:, :-1] * f[:, 1:], ay * rho[:, 1:] * f[:, :-1])
    return rho - dt * _divergence(fx, fy, hx, hy)


def _advect_jvp_numpy(rho, f, df, tx, ty, rho_t, tx_t, ty_t, dt, hx, hy):
    ax = -tx[1:-1, :]
    ay = -ty[:, 1:-1]
    axt = -tx_t[1:-1, :]
    ayt = -ty_t[:, 1:-1]
    rl, rr, fl, fr, dfl, dfr = rho[:-1], rho[1:], f[:-1], f[1:], df[:-1], df[1:]
    tl, tr = rho_t[:-1], rho_t[1:]
    fx = np.where(
        ax >= 0.0,
        axt * rl * fr + ax * (tl * fr + rl * dfr * tr),
        axt * rr * fl + ax * (tr * fl + rr * dfl * tl),
    )
    rb, rt_, fb, ft_, dfb, dft = rho[:, :-1], rho[:, 1:], f[:, :-1], f[:, 1:], df[:, :-1], df[:, 1:]
    tb, tt = rho_t[:, :-1], rho_t[:, 1:]
    fy = np.where(
        ay >= 0.0,
        ayt * rb * ft_ + ay * (tb * ft_ + rb * dft * tt),
        ayt * rt_ * fb + ay * (tt * fb + rt_ * dfb * tb),
    )
    return rho_t - dt * _divergence(fx, fy, hx, hy)


def _advect_vjp_numpy(rho, f, df, tx, ty, out_bar, dt, hx, hy):
    rho_bar = out_bar.copy()
    tx_bar = np.zeros(tx.shape)
    ty_bar = np.zeros(ty.shape)

    ax = -tx[1:-1, :]
    fbx = dt * (out_bar[1:, :] - out_bar[:-1, :]) / hx
    pos = ax >= 0.0
    rl, rr, fl, fr, dfl, dfr = rho[:-1], rho[1:], f[:-1], f[1:], df[:-1], df[1:]
    tx_bar[1:-1, :] = -fbx * np.where(pos, rl * fr, rr * fl)
    rho_bar[:-1, :] += fbx * ax * np.where(pos, fr, rr * dfl)
    rho_bar[1:, :] += fbx * ax * np.where(pos, rl * dfr, fl)

    ay = -ty[:, 1:-1]
    fby = dt * (out_bar[:, 1:] - out_bar[:, :-1]) / hy
    pos = ay >= 0.0
    rb, rt_, fb, ft_, dfb, dft = rho[:, :-1], rho[:, 1:], f[:, :-1], f[:, 1:], df[:, :-1], df[:, 1:]
    ty_bar[:, 1:-1] = -fby * np.where(pos, rb * ft_, rt_ * fb)
    rho_bar[:, :-1] += fby * ay * np.where(pos, ft_, rt_ * dfb)
    rho_bar[:, 1:] += fby * ay * np.where(pos, rb * dft, fb)
    return rho_bar, tx_bar, ty_bar


LOOP = {
    "kernel_grad_sum": jit(_kernel_grad_sum_loop),
    "kernel_hess_apply": jit(_kernel_hess_apply_loop),
    "kernel_hess_transpose": jit(_kernel_hess_transpose_loop),
    "projection": jit(_projection_loop),
    "projection_jvp": jit(_projection_jvp_loop),
    "advect": jit(_advect_loop),
    "advect_jvp": jit(_advect_jvp_loop),
    "advect_vjp": jit(_advect_vjp_loop),
}

NUMPY = {
    "kernel_grad_sum": _kernel_grad_sum_numpy,
    "kernel_hess_apply": _kernel_hess_apply_numpy,
    "kernel_hess_transpose": _kernel_hess_transpose_numpy,
    "projection": _projection_numpy,
    "projection_jvp": _projection_jvp_numpy,
    "advect": _advect_numpy,
    "advect_jvp": _advect_jvp_numpy,
    "advect_vjp": _advect_vjp_numpy,
}

ACTIVE = LOOP if NUMBA_ENABLED else NUMPY
BACKEND = "numba" if NUMBA_ENABLED else "numpy"

kernel_grad_sum = ACTIVE["kernel_grad_sum"]
kernel_hess_apply = ACTIVE["kernel_hess_apply"]
kernel_hess_transpose = ACTIVE["kernel_hess_transpose"]
projection = ACTIVE["projection"]
projection_jvp = ACTIVE["projection_jvp"]
advect = ACTIVE["advect"]
advect_jvp = ACTIVE["advect_jvp"]
advect_vjp = ACTIVE["advect_vjp"]
