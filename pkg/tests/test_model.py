import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hughes_control.errors import InvalidInputError
from hughes_control.model import (
    KernelParams,
    ProjectionParams,
    SpeedLaw,
    agent_potential_grad,
    flux_density_g,
    kernel_K,
    kernel_radial_profile,
    project_h,
    project_h_jvp,
    speed_f,
)

LAWS = [SpeedLaw.LINEAR, SpeedLaw.SMOOTH_BUMP]


def mp_kernel(dx, dy, s, r):
    d2 = mp.mpf(dx) ** 2 + mp.mpf(dy) ** 2
    if d2 >= r**2:
        return mp.mpf(0)
    return s * mp.e ** (-mp.mpf(r) ** 2 / (r**2 - d2))


# --- speed law and flux ----------------------------------------------------


@pytest.mark.parametrize("law", LAWS)
def test_speed_endpoints(law):
    assert speed_f(0.0, law) == 1.0
    assert speed_f(1.0, law) == 0.0


def test_linear_speed_midpoint_and_clamp():
    assert speed_f(0.5) == 0.5
    assert speed_f(-0.3) == 1.0
    assert speed_f(1.7) == 0.0


@pytest.mark.parametrize("law", LAWS)
def test_speed_positive_bounded_monotone(law):
    rho = np.linspace(0.0, 1.0, 2001)
    f = speed_f(rho, law)
    # the bump underflows to 0 a little before rho = 1
    assert np.all(f[rho <= 0.99] > 0.0)
    assert np.all((f >= 0.0) & (f <= 1.0))
    assert np.all(np.diff(f) <= 0.0)


def test_smooth_bump_compact_support():
    assert speed_f(-1.5, SpeedLaw.SMOOTH_BUMP) == 0.0
    assert speed_f(2.0, SpeedLaw.SMOOTH_BUMP) == 0.0
    assert speed_f(0.5, SpeedLaw.SMOOTH_BUMP) == pytest.approx(math.exp(1.0 - 1.0 / 0.75), rel=1e-15)


def test_linear_speed_lipschitz_at_most_one():
    rho = np.arange(8193) / 8192.0  # dyadic, so the differences are exact
    f = speed_f(rho)
    assert np.max(np.abs(np.diff(f)) / np.diff(rho)) <= 1.0 + 1e-12


@pytest.mark.parametrize("law", LAWS)
def test_speed_derivative_matches_differences(law):
    rho = np.linspace(0.05, 0.95, 37)
    h = 1e-6
    fd = (law.f(rho + h) - law.f(rho - h)) / (2 * h)
    assert np.allclose(law.df(rho), fd, rtol=1e-6, atol=1e-9)


def test_speed_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        speed_f(float("nan"))


@pytest.mark.parametrize("rho, expected", [(0.0, 0.0), (1.0, 0.0), (0.5, 0.25)])
def test_flux_density_values(rho, expected):
    assert flux_density_g(rho) == expected


@pytest.mark.parametrize("law", LAWS)
def test_flux_density_nonnegative(law):
    assert np.all(flux_density_g(np.linspace(0, 1, 501), law) >= 0.0)


# --- smoothed projection ---------------------------------------------------


def test_projection_examples():
    p = ProjectionParams(0.25)
    assert np.array_equal(project_h([0.0, 0.0], p), [0.0, 0.0])
    assert np.allclose(project_h([0.5, 0.0], p), [0.5, 0.0], rtol=0, atol=1e-15)
    assert np.allclose(project_h([3.0, 4.0], p), [0.6, 0.8], rtol=0, atol=1e-15)


def test_projection_norm_at_most_one():
    mags = np.linspace(0.0, 5.0, 801)
    ang = np.linspace(0.0, 2 * np.pi, 73)
    m, a = np.meshgrid(mags, ang)
    y = np.stack([m * np.cos(a), m * np.sin(a)], axis=-1)
    for eps in (0.05, 0.1, 0.3, 0.49):
        assert np.max(np.linalg.norm(project_h(y, ProjectionParams(eps)), axis=-1)) <= 1.0 + 1e-15


def test_projection_profile_is_c1():
    # sigma and sigma' must be continuous at both blend endpoints
    eps = 0.2
    p = ProjectionParams(eps)
    for s0 in (1 - eps, 1 + eps):
        y = np.array([[s0 - 1e-9, 0.0], [s0 + 1e-9, 0.0]])
        sig = project_h(y, p)[:, 0]
        assert abs(sig[1] - sig[0]) < 1e-8
        d = project_h_jvp(y, np.array([[1.0, 0.0], [1.0, 0.0]]), p)[:, 0]
        assert abs(d[1] - d[0]) < 1e-7


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.0, 2 * np.pi), st.floats(0.0, 2 * np.pi))
def test_projection_rotation_equivariant(mag, angle, theta):
    y = mag * np.array([np.cos(angle), np.sin(angle)])
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert np.allclose(project_h(rot @ y), rot @ project_h(y), rtol=0, atol=1e-12)


def test_projection_jacobian_matches_differences(rng):
    y = rng.normal(size=(50, 2)) * 1.2
    v = rng.normal(size=(50, 2))
    h = 1e-6
    fd = (project_h(y + h * v) - project_h(y - h * v)) / (2 * h)
    assert np.allclose(project_h_jvp(y, v), fd, rtol=0, atol=1e-7)


def test_projection_rejects_bad_eps():
    with pytest.raises(InvalidInputError):
        ProjectionParams(0.5)


# --- kernel -----------------------------------------------------------------


def test_kernel_center_and_edge():
    assert kernel_K([0.0, 0.0]) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert kernel_K([1.0, 0.0]) == 0.0
    assert kernel_K([0.3, 2.0]) == 0.0


def test_kernel_matches_high_precision():
    k = KernelParams(intensity=2.0, radius=1.0)
    expected = float(mp_kernel(0.5, 0.0, 2, 1))
    assert kernel_K([0.5, 0.0], k) == pytest.approx(expected, rel=1e-14)
    # regression value of 2 exp(-4/3)
    assert kernel_K([0.5, 0.0], k) == pytest.approx(0.5271942762, rel=1e-9)


def test_kernel_nonincreasing_along_rays():
    t = np.linspace(0.0, 1.5, 3001)
    for k in (KernelParams(), KernelParams(3.0, 0.7)):
        assert np.all(np.diff(kernel_radial_profile(t, k)) <= 0.0)


def test_kernel_gradient_examples():
    assert np.array_equal(agent_potential_grad([1.0, 1.0], [[1.0, 1.0]]), [0.0, 0.0])
    assert np.array_equal(agent_potential_grad([3.0, 0.0], [[0.0, 0.0], [0.0, 2.5]]), [0.0, 0.0])


def test_kernel_gradient_high_precision():
    g = agent_potential_grad([0.5, 0.0], [[0.0, 0.0]])
    with mp.workdps(40):
        gx = mp.diff(lambda t: mp_kernel(t, 0, 1, 1), mp.mpf("0.5"))
    assert g[1] == 0.0
    assert g[0] == pytest.approx(float(gx), rel=1e-13)
    # points back toward the agent; closed form -2 r^2 d K / tau^2
    assert g[0] == pytest.approx(-2 * 0.5 / 0.75**2 * math.exp(-1 / 0.75), rel=1e-14)
    assert g[0] == pytest.approx(-0.4686171344, rel=1e-9)


def test_kernel_gradient_matches_differences(rng):
    k = KernelParams(1.7, 1.3)
    agents = rng.uniform(0, 2, size=(3, 2))
    pts = rng.uniform(-0.5, 2.5, size=(40, 2))
    h = 1e-5

    def phi(x):
        return sum(kernel_K(x - a, k) for a in agents)

    g = agent_potential_grad(pts, agents, k)
    for x, gi in zip(pts, g):
        fd = np.array([(phi(x + h * e) - phi(x - h * e)) / (2 * h) for e in np.eye(2)])
        scale = max(np.linalg.norm(gi), 1e-3)
        assert np.linalg.norm(fd - gi) / scale <= 1e-6


def test_kernel_params_validated():
    with pytest.raises(InvalidInputError):
        KernelParams(intensity=0.0)
    with pytest.raises(InvalidInputError):
        KernelParams(radius=-1.0)
