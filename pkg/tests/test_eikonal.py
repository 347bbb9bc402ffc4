import math

import numpy as np
import pytest

from hughes_control.eikonal import (
    EikonalParams,
    EikonalSolver,
    ScreenedOperator,
    coefficient_q,
    pcg,
    potential_from_psi,
    solve_eikonal,
    solve_screened_poisson,
)
from hughes_control.errors import InvalidInputError, InvariantViolation, SolverError
from hughes_control.grid import build_grid

ALL_DOORS = [("left", 0, 1), ("right", 0, 1), ("bottom", 0, 1), ("top", 0, 1)]


def strip(nx):
    """Quasi-1D strip: doors at x = 0 and x = 1, walls top and bottom (two rows)."""
    return build_grid(nx, 2, 1.0, 2.0 / nx, [("left", 0, 2.0 / nx), ("right", 0, 2.0 / nx)])


def cosh_profile(x, q0):
    return -1.0 + np.cosh(np.sqrt(q0) * (x - 0.5)) / np.cosh(np.sqrt(q0) / 2)


def observed_order(errors, hs):
    return np.polyfit(np.log(hs), np.log(errors), 1)[0]


@pytest.mark.parametrize("rho, d1, d2, expected", [
    (0.0, 1.0, 1.0, 0.5),
    (1.0, 1.0, 0.25, 4.0),
    (0.5, 2.0, 0.5, 1.0 / 3.0),
])
def test_coefficient_examples(rho, d1, d2, expected):
    q = coefficient_q(np.full((3, 3), rho), EikonalParams(d1, d2))
    assert np.allclose(q, expected, rtol=1e-15, atol=0)


def test_coefficient_range(rng):
    p = EikonalParams(0.5, 0.2)
    q = coefficient_q(rng.uniform(size=500), p)
    assert q.min() >= 1 / (p.delta1**2 * (1 + p.delta2)) - 1e-12
    assert q.max() <= 1 / (p.delta1**2 * p.delta2) + 1e-12


def test_potential_from_psi_examples():
    assert np.array_equal(potential_from_psi(np.zeros(4), 1.0), np.zeros(4))
    assert np.allclose(potential_from_psi(np.full(4, math.exp(-1) - 1), 1.0), 1.0, rtol=1e-14)
    assert np.allclose(potential_from_psi(np.full(4, -0.5), 2.0), 2 * math.log(2), rtol=1e-15)


def test_potential_from_psi_rejects_floor():
    with pytest.raises(InvariantViolation):
        potential_from_psi(np.array([-0.2, -1.0 + 1e-13]), 1.0)


def test_params_must_be_positive():
    with pytest.raises(InvalidInputError):
        EikonalParams(0.5, 0.0)


def test_zero_rhs_gives_zero():
    g = build_grid(6, 5, 1.0, 1.0, [("top", 0.0, 1.0)])
    assert np.array_equal(solve_screened_poisson(np.ones(g.shape), np.zeros(g.shape), g), np.zeros(g.shape))


def test_quasi_1d_closed_form_second_order():
    q0 = 7.0
    errs, hs = [], []
    for nx in (16, 32, 64):
        g = strip(nx)
        psi = solve_screened_poisson(np.full(g.shape, q0), np.full(g.shape, -q0), g)
        exact = cosh_profile(g.xc, q0)
        # both rows of the strip are the same column profile
        assert np.allclose(psi[:, 0], psi[:, 1], rtol=0, atol=1e-14)
        errs.append(np.max(np.abs(psi[:, 0] - exact)))
        hs.append(g.hx)
    assert abs(observed_order(errs, hs) - 2.0) <= 0.2
    # error constant stays bounded: O(h^2) with a moderate constant
    assert max(e / h**2 for e, h in zip(errs, hs)) < 1.0


def test_manufactured_solution_order():
    errs, hs = [], []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0, ALL_DOORS)
        xx, yy = g.cell_centers()
        q = 1.0 + 3.0 * xx * yy
        exact = np.sin(np.pi * xx) * np.sin(np.pi * yy)
        rhs = (2 * np.pi**2 + q) * exact
        psi = solve_screened_poisson(q, rhs, g)
        errs.append(np.max(np.abs(psi - exact)))
        hs.append(1.0 / n)
    assert abs(observed_order(errs, hs) - 2.0) <= 0.2


def test_cg_and_direct_agree():
    g = build_grid(12, 9, 2.0, 1.5, [("right", 0.2, 1.0), ("bottom", 0.0, 0.6)])
    xx, yy = g.cell_centers()
    q = 2.0 + np.sin(xx) * np.cos(yy)
    rhs = -q
    a = solve_screened_poisson(q, rhs, g, solver="direct")
    b = solve_screened_poisson(q, rhs, g, solver="cg", tol=1e-13)
    assert np.max(np.abs(a - b)) <= 1e-11


def test_pcg_reports_nonconvergence():
    g = build_grid(20, 20, 1.0, 1.0, [("right", 0.0, 0.2)])
    a = ScreenedOperator(g).matrix(np.full(g.shape, 1e-3)).tocsr()
    with pytest.raises(SolverError) as exc:
        pcg(a, np.ones(g.n_cells), tol=1e-12, maxiter=3)
    assert exc.value.residual > 1e-12


def test_operator_is_spd():
    g = build_grid(5, 4, 1.0, 1.0, [("left", 0.0, 0.5)])
    a = ScreenedOperator(g).matrix(np.full(g.shape, 0.3)).toarray()
    assert np.array_equal(a, a.T)
    assert np.min(np.linalg.eigvalsh(a)) > 0


def test_unknown_solver_rejected():
    g = build_grid(4, 4, 1.0, 1.0, [("left", 0.0, 1.0)])
    with pytest.raises(InvalidInputError):
        ScreenedOperator(g, solver="lu").factorize(np.ones(g.shape))


@pytest.mark.parametrize("seed", range(6))
def test_discrete_maximum_principle(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(4, 20))
    side = ["left", "right", "bottom", "top"][seed % 4]
    a = float(r.uniform(0.0, 0.6))
    g = build_grid(n, n + 3, 3.0, 2.0, [(side, a, a + 0.4)])
    rho = r.uniform(size=g.shape)
    phi, psi = solve_eikonal(rho, EikonalParams(float(r.uniform(0.1, 1.0)), float(r.uniform(0.05, 1.0))), g)
    assert psi.min() > -1.0
    assert psi.max() <= 1e-12
    assert phi.min() >= -1e-12


def test_comparison_principle():
    g = build_grid(16, 16, 4.0, 4.0, [("right", 1.5, 2.5)])
    p = EikonalParams()
    phi0, _ = solve_eikonal(np.zeros(g.shape), p, g)
    phi1, _ = solve_eikonal(np.ones(g.shape), p, g)
    assert np.all(phi1 > phi0)


def test_symmetric_doors_symmetric_potential():
    g = build_grid(12, 12, 1.0, 1.0, [("left", 0.0, 1.0), ("right", 0.0, 1.0)])
    phi, _ = solve_eikonal(np.full(g.shape, 0.4), EikonalParams(), g)
    assert np.max(np.abs(phi - phi[::-1, :])) <= 1e-12
    assert np.max(np.abs(phi - phi[:, ::-1])) <= 1e-12


def test_distance_like_profile_for_small_viscosity():
    # rho = 0: |grad phi| ~ 1 / sqrt(1 + delta2) away from the door
    g = build_grid(64, 2, 1.0, 2 / 64, [("left", 0.0, 2 / 64)])
    p = EikonalParams(0.05, 0.2)
    phi, _ = solve_eikonal(np.zeros(g.shape), p, g)
    slope = np.diff(phi[:, 0]) / g.hx
    assert np.allclose(slope[:40], 1 / math.sqrt(1 + p.delta2), rtol=5e-3)


def test_linearization_matches_differences(rng):
    g = build_grid(10, 8, 2.0, 1.6, [("right", 0.4, 1.2)])
    solver = EikonalSolver(g, EikonalParams())
    rho = rng.uniform(0.1, 0.9, size=g.shape)
    drho = rng.normal(size=g.shape)
    sol = solver.solve(rho)
    s = 1e-6
    fd = (solver.solve(rho + s * drho).phi - solver.solve(rho - s * drho).phi) / (2 * s)
    jv = solver.jvp(rho, sol, drho)
    assert np.max(np.abs(jv - fd)) <= 1e-7 * np.max(np.abs(jv))


def test_transpose_dot_product(rng):
    g = build_grid(9, 11, 1.0, 1.0, [("top", 0.1, 0.9)])
    solver = EikonalSolver(g, EikonalParams(0.3, 0.1))
    rho = rng.uniform(size=g.shape)
    sol = solver.solve(rho)
    a, b = rng.normal(size=(2,) + g.shape)
    lhs = np.sum(solver.jvp(rho, sol, a) * b)
    rhs = np.sum(a * solver.vjp(rho, sol, b))
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_lipschitz_stability_bounded_under_refinement(rng):
    consts = []
    for n in (16, 32, 64):
        g = build_grid(n, n, 1.0, 1.0, [("right", 0.25, 0.75)])
        xx, yy = g.cell_centers()
        rho1 = 0.5 + 0.3 * np.sin(2 * np.pi * xx) * np.cos(np.pi * yy)
        rho2 = rho1 + 0.05 * np.exp(-10 * ((xx - 0.4) ** 2 + (yy - 0.6) ** 2))
        p = EikonalParams()
        phi1, _ = solve_eikonal(rho1, p, g)
        phi2, _ = solve_eikonal(rho2, p, g)
        consts.append(np.max(np.abs(phi1 - phi2)) / np.max(np.abs(rho1 - rho2)))
    assert all(np.isfinite(consts))
    assert max(consts) / min(consts) < 1.2
