import numpy as np
import pytest

from hughes_control.density import (
    DensityParams,
    DensityStepper,
    TransportOperator,
    advance_density,
    boundary_outflux,
    cfl_limit,
    transport_field,
)
from hughes_control.errors import InvalidInputError, InvariantViolation, StepSizeError
from hughes_control.grid import FaceField, build_grid, integrate_cell_field
from hughes_control.model import KernelParams, ProjectionParams, SpeedLaw, agent_potential_grad, project_h


def closed_box(n=6, m=None):
    return build_grid(n, m or n, 1.0, 1.0, [], require_door=False)


def zero_field(g):
    return FaceField(np.zeros((g.nx + 1, g.ny)), np.zeros((g.nx, g.ny + 1)))


def random_field(g, rng, amp=1.0):
    tx = rng.uniform(-amp, amp, size=(g.nx + 1, g.ny))
    ty = rng.uniform(-amp, amp, size=(g.nx, g.ny + 1))
    tx[0], tx[-1] = 0.0, 0.0
    ty[:, 0], ty[:, -1] = 0.0, 0.0
    return FaceField(tx, ty)


def dense_implicit_matrix(g, eps, eta, dt):
    """Backward-Euler matrix built cell by cell: I + dt (eps L + Robin terms)."""
    n = g.n_cells
    b = np.eye(n)
    for i in range(g.nx):
        for j in range(g.ny):
            k = i * g.ny + j
            for di, dj, h in ((1, 0, g.hx), (-1, 0, g.hx), (0, 1, g.hy), (0, -1, g.hy)):
                a, c = i + di, j + dj
                if 0 <= a < g.nx and 0 <= c < g.ny:
                    b[k, k] += dt * eps / h**2
                    b[k, a * g.ny + c] -= dt * eps / h**2
            if i == 0 and g.door_left[j]:
                b[k, k] += dt * eta / g.hx
            if i == g.nx - 1 and g.door_right[j]:
                b[k, k] += dt * eta / g.hx
            if j == 0 and g.door_bottom[i]:
                b[k, k] += dt * eta / g.hy
            if j == g.ny - 1 and g.door_top[i]:
                b[k, k] += dt * eta / g.hy
    return b


# --- transport field --------------------------------------------------------


def test_zero_potential_no_agents_gives_zero_field():
    g = build_grid(5, 4, 1.0, 1.0, [("left", 0.0, 1.0)])
    t = transport_field(np.zeros(g.shape), np.zeros((0, 2)), KernelParams(), g)
    assert not t.x.any() and not t.y.any()


def test_linear_potential_on_strip():
    g = build_grid(12, 2, 1.0, 2 / 12, [("left", 0.0, 2 / 12), ("right", 0.0, 2 / 12)])
    xx, _ = g.cell_centers()
    steep = transport_field(2.0 * xx, np.zeros((0, 2)), KernelParams(), g)
    assert np.allclose(steep.x[1:-1], 1.0, rtol=0, atol=1e-14)
    assert np.allclose(steep.y, 0.0, rtol=0, atol=1e-14)
    # |grad phi| = 1 sits inside the blend: value sigma(1)
    unit = transport_field(xx, np.zeros((0, 2)), KernelParams(), g, ProjectionParams(0.1))
    sigma1 = project_h([1.0, 0.0], ProjectionParams(0.1))[0]
    assert np.allclose(unit.x[1:-1], sigma1, rtol=0, atol=1e-14)
    assert sigma1 == pytest.approx(0.975, abs=1e-15)


def test_single_agent_field_matches_kernel_gradient():
    g = build_grid(10, 10, 2.0, 2.0, [("right", 0.0, 2.0)])
    k = KernelParams(1.5, 0.8)
    agent = np.array([[0.93, 1.07]])
    t = transport_field(np.zeros(g.shape), agent, k, g)
    xfx, xfy = g.xface_centers()
    pts = np.stack([xfx.ravel(), xfy.ravel()], axis=-1)
    expect = project_h(agent_potential_grad(pts, agent, k))[:, 0].reshape(xfx.shape)
    assert np.allclose(t.x[1:-1], expect[1:-1], rtol=0, atol=1e-14)
    yfx, yfy = g.yface_centers()
    pts = np.stack([yfx.ravel(), yfy.ravel()], axis=-1)
    expect = project_h(agent_potential_grad(pts, agent, k))[:, 1].reshape(yfx.shape)
    assert np.allclose(t.y[:, 1:-1], expect[:, 1:-1], rtol=0, atol=1e-14)
    # field points toward the agent (up the kernel), so the drift -T points away
    i = int(np.argmin(np.abs(np.arange(g.nx + 1) * g.hx - 0.6)))
    assert t.x[i, 5] > 0.0


def test_wall_faces_are_zero(rng):
    g = build_grid(8, 6, 1.0, 1.0, [("right", 0.0, 0.5)])
    t = transport_field(rng.normal(size=g.shape), rng.uniform(size=(2, 2)), KernelParams(), g)
    assert not t.x[0].any()
    assert not t.x[-1][~g.door_right].any()
    assert not t.y[:, 0].any() and not t.y[:, -1].any()
    assert np.all(np.abs(t.x) <= 1) and np.all(np.abs(t.y) <= 1)


def test_transport_linearization(rng):
    g = build_grid(9, 7, 1.0, 1.0, [("top", 0.2, 0.8)])
    op = TransportOperator(g, KernelParams(0.8, 0.4), ProjectionParams(0.2))
    phi = rng.normal(size=g.shape) * 0.2
    x = rng.uniform(0.2, 0.8, size=(2, 2))
    dphi = rng.normal(size=g.shape)
    dx = rng.normal(size=(2, 2))
    grad, _ = op.field(phi, x)
    jv = op.jvp(grad, x, dphi, dx)
    s = 1e-6
    tp = op.field(phi + s * dphi, x + s * dx)[1]
    tm = op.field(phi - s * dphi, x - s * dx)[1]
    assert np.allclose(jv.x, (tp.x - tm.x) / (2 * s), rtol=0, atol=1e-7)
    assert np.allclose(jv.y, (tp.y - tm.y) / (2 * s), rtol=0, atol=1e-7)
    tb = FaceField(rng.normal(size=jv.x.shape), rng.normal(size=jv.y.shape))
    pb, xb = op.vjp(grad, x, tb)
    lhs = np.sum(jv.x * tb.x) + np.sum(jv.y * tb.y)
    rhs = np.sum(dphi * pb) + np.sum(dx * xb)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


# --- density step -----------------------------------------------------------


def test_zero_density_is_fixed(rng):
    g = build_grid(8, 8, 1.0, 1.0, [("right", 0.0, 1.0)])
    p = DensityParams(0.05, 1.0, 0.9 * cfl_limit(g))
    out = advance_density(np.zeros(g.shape), random_field(g, rng), p, SpeedLaw.LINEAR, g)
    assert np.array_equal(out, np.zeros(g.shape))


def test_full_density_closed_box_is_fixed(rng):
    g = closed_box(8)
    p = DensityParams(0.05, 1.0, 0.9 * cfl_limit(g))
    out = advance_density(np.ones(g.shape), random_field(g, rng), p, SpeedLaw.LINEAR, g)
    assert np.max(np.abs(out - 1.0)) <= 1e-14


def test_heat_step_matches_dense_reference(rng):
    g = closed_box(6)
    p = DensityParams(0.3, 1.0, 0.01)
    rho = rng.uniform(size=g.shape)
    out = advance_density(rho, zero_field(g), p, SpeedLaw.LINEAR, g)
    ref = np.linalg.solve(dense_implicit_matrix(g, p.eps, p.eta_out, p.dt), rho.ravel()).reshape(g.shape)
    assert np.max(np.abs(out - ref)) <= 1e-14
    assert integrate_cell_field(out, g) == pytest.approx(integrate_cell_field(rho, g), rel=1e-12)
    assert np.max(np.abs(out)) <= np.max(np.abs(rho))


def test_robin_rows_match_dense_reference(rng):
    g = build_grid(6, 6, 1.0, 1.0, [("left", 0.0, 0.5), ("top", 0.3, 1.0)])
    p = DensityParams(0.1, 2.0, 0.02)
    st = DensityStepper(g, p)
    ref = dense_implicit_matrix(g, p.eps, p.eta_out, p.dt)
    assert np.allclose(st.matrix.toarray(), ref, rtol=0, atol=1e-14)


def test_sealed_doors_drop_robin_rows():
    g = build_grid(6, 6, 1.0, 1.0, [("left", 0.0, 1.0)])
    p = DensityParams(0.1, 2.0, 0.02)
    st = DensityStepper(g, p, sealed=True)
    assert np.allclose(st.matrix.toarray(), dense_implicit_matrix(closed_box(6), p.eps, 1.0, p.dt), atol=1e-14)
    assert boundary_outflux(np.ones(g.shape), p, g, sealed=True) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_box_preserved_at_cfl(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(3, 14))
    g = build_grid(n, n + 2, 1.0, 1.3, [("right", 0.0, 0.7), ("bottom", 0.4, 1.0)])
    law = SpeedLaw.LINEAR if seed % 2 else SpeedLaw.SMOOTH_BUMP
    p = DensityParams(float(r.uniform(1e-3, 0.1)), float(r.uniform(0.1, 3.0)), cfl_limit(g, law))
    rho = r.uniform(size=g.shape)
    rho[r.uniform(size=g.shape) < 0.3] = 1.0
    rho[r.uniform(size=g.shape) < 0.2] = 0.0
    st = DensityStepper(g, p, law)
    for _ in range(20):
        rho = st.step(rho, random_field(g, r))
        assert rho.min() >= -1e-10 and rho.max() <= 1 + 1e-10


def test_single_step_mass_balance(rng):
    g = build_grid(10, 10, 2.0, 2.0, [("right", 0.5, 1.5), ("left", 0.0, 2.0)])
    p = DensityParams(0.02, 1.3, 0.9 * cfl_limit(g))
    rho = rng.uniform(size=g.shape)
    out = advance_density(rho, random_field(g, rng), p, SpeedLaw.LINEAR, g)
    lost = integrate_cell_field(rho, g) - integrate_cell_field(out, g)
    assert lost == pytest.approx(p.dt * boundary_outflux(out, p, g), rel=1e-11)


def test_outflux_examples():
    g = build_grid(4, 4, 1.0, 1.0, [("right", 0.0, 1.0)])
    assert boundary_outflux(np.zeros(g.shape), DensityParams(eta_out=2.0), g) == 0.0
    assert boundary_outflux(np.ones(g.shape), DensityParams(eta_out=2.0), g) == pytest.approx(2.0, rel=1e-15)
    half = build_grid(4, 4, 1.0, 1.0, [("bottom", 0.0, 0.5)])
    assert boundary_outflux(np.full(half.shape, 0.8), DensityParams(), half) == pytest.approx(0.4, rel=1e-15)


def test_step_size_error():
    g = build_grid(8, 8, 1.0, 1.0, [("right", 0.0, 1.0)])
    with pytest.raises(StepSizeError):
        DensityStepper(g, DensityParams(dt=1.01 * cfl_limit(g)))


def test_rejects_state_outside_box():
    g = build_grid(4, 4, 1.0, 1.0, [("right", 0.0, 1.0)])
    st = DensityStepper(g, DensityParams(dt=0.01))
    with pytest.raises(InvariantViolation):
        st.step(np.full(g.shape, 1.1), zero_field(g))


def test_params_validated():
    with pytest.raises(InvalidInputError):
        DensityParams(eps=0.0)


def test_step_linearization_and_transpose(rng):
    g = build_grid(7, 6, 1.0, 1.0, [("right", 0.0, 0.6)])
    p = DensityParams(0.05, 1.0, 0.8 * cfl_limit(g))
    st = DensityStepper(g, p)
    rho = rng.uniform(0.1, 0.9, size=g.shape)
    t = random_field(g, rng, 0.9)
    drho = rng.normal(size=g.shape)
    dt_field = random_field(g, rng)
    jv = st.jvp(rho, t, drho, dt_field)
    s = 1e-7
    plus = st.implicit_solve(st.explicit(rho + s * drho, FaceField(t.x + s * dt_field.x, t.y + s * dt_field.y)))
    minus = st.implicit_solve(st.explicit(rho - s * drho, FaceField(t.x - s * dt_field.x, t.y - s * dt_field.y)))
    assert np.allclose(jv, (plus - minus) / (2 * s), rtol=0, atol=1e-7)
    bar = rng.normal(size=g.shape)
    rb, tb = st.vjp(rho, t, bar)
    lhs = np.sum(jv * bar)
    rhs = np.sum(drho * rb) + np.sum(dt_field.x * tb.x) + np.sum(dt_field.y * tb.y)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
