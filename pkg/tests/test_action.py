from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st
from scipy.integrate import solve_ivp

from qcprop import catalog
from qcprop.action import (b_term_flow_form, mixed_second_derivative, mixed_second_derivative_fd,
                           partial_integral, theta_identity_check, total_action)
from qcprop.dynamics import BoundaryData, ClassicalSystem, solve_trajectory
from qcprop.errors import ConfigError
from qcprop.geometry import PhaseSpaceGeometry, kahler_potential, log_overlap, potential_gradient
from qcprop.symbols import Algebra, BoundHamiltonian

A, F = 0.7, 0.3 + 0.2j


def _su2_matrix(tau):
    """Spin-1/2 evolution entries ``a, b`` of ``[[a, b], [-conj b, conj a]]``."""
    def rhs(t, y):
        a, b = y
        return [-1j * A * a + 1j * F * np.conj(b), -1j * A * b - 1j * F * np.conj(a)]
    sol = solve_ivp(rhs, (0, tau), [1 + 0j, 0j], method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1]


def _su2_denominator(bd):
    a, b = _su2_matrix(bd.tau)
    return np.conj(a) - np.conj(b) * bd.z_I + b * bd.zbar_F + a * bd.zbar_F * bd.z_I


def test_free_action_is_log_overlap():
    for g in (PhaseSpaceGeometry.sphere(2), PhaseSpaceGeometry.plane(1.5), PhaseSpaceGeometry.disk(1.5)):
        bd = BoundaryData(0.3 - 0.1j, 0.2 + 0.4j, 0.7)
        h = catalog.zero({"sphere": Algebra.SU2, "plane": Algebra.HW, "disk": Algebra.SU11}[g.kind.value])
        br = total_action(solve_trajectory(h, g, bd), h, g)
        assert br.Phi_c == pytest.approx(log_overlap(g, bd.zbar_F, bd.z_I), abs=1e-13)
        assert br.B_int == 0


def test_free_action_sphere_closed_form():
    j = 1.5
    g = PhaseSpaceGeometry.sphere(j)
    bd = BoundaryData(0.6 + 0.2j, -0.3 + 0.1j, 1.0)
    br = total_action(solve_trajectory(catalog.zero(Algebra.SU2), g, bd), catalog.zero(Algebra.SU2), g)
    expect = j * (2 * np.log(1 + bd.zbar_F * bd.z_I)
                  - np.log(1 + abs(bd.z_F) ** 2) - np.log(1 + abs(bd.z_I) ** 2))
    assert br.Phi_c == pytest.approx(expect, abs=1e-13)


def test_oscillator_action(oscillator_case):
    g, h, bd = oscillator_case
    w = 1.3
    br = total_action(solve_trajectory(h, g, bd), h, g)
    expect = (bd.zbar_F * bd.z_I * np.exp(-1j * w * bd.tau)
              - 0.5 * abs(bd.z_F) ** 2 - 0.5 * abs(bd.z_I) ** 2)
    assert br.Phi_c == pytest.approx(expect, abs=1e-12)
    assert br.B_int == pytest.approx(w * bd.tau, abs=1e-12)


@pytest.mark.parametrize("j", [1, 2.5])
def test_su2_linear_action_and_mixed_derivative(j):
    g = PhaseSpaceGeometry.sphere(j)
    h = catalog.su2_linear(A, F)
    bd = BoundaryData(0.4, -0.1 + 0.5j, 1.0)
    tr = solve_trajectory(h, g, bd)
    br = total_action(tr, h, g)
    d = _su2_denominator(bd)
    expect = 2 * j * np.log(d) - j * np.log((1 + abs(bd.z_F) ** 2) * (1 + abs(bd.z_I) ** 2))
    assert br.Phi_c == pytest.approx(expect, abs=1e-11)
    mixed = mixed_second_derivative(tr, g)
    assert mixed.method == "Sensitivity"
    assert mixed.value == pytest.approx(2 * j / d**2, rel=1e-10)


def test_su2_b_term_closed_form(su2_case):
    g, h, bd = su2_case
    tr = solve_trajectory(h, g, bd)
    s = np.linspace(0, bd.tau, 101)
    z, zb = tr.at(s)
    b = ClassicalSystem(h, g).b_term(zb, z, s)
    assert np.max(np.abs(b - (2 * A - F * zb - np.conj(F) * z))) < 1e-12


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case", "oscillator_case"])
def test_b_term_flow_form(case, request):
    g, h, bd = request.getfixturevalue(case)
    tr = solve_trajectory(h, g, bd)
    br = total_action(tr, h, g)
    assert b_term_flow_form(tr, h, g) == pytest.approx(br.B_int, abs=1e-7)


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case", "oscillator_case"])
def test_theta_identity(case, request):
    g, h, bd = request.getfixturevalue(case)
    assert theta_identity_check(solve_trajectory(h, g, bd), h, g) < 1e-10


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case"])
def test_mixed_derivative_matches_finite_differences(case, request):
    g, h, bd = request.getfixturevalue(case)
    analytic = mixed_second_derivative(solve_trajectory(h, g, bd), g)
    fd = mixed_second_derivative_fd(h, g, bd)
    assert fd.method == "FiniteDifference"
    assert abs(fd.value / analytic.value - 1) < 1e-5


def test_fd_step_must_be_positive(su2_case):
    g, h, bd = su2_case
    with pytest.raises(ConfigError):
        mixed_second_derivative_fd(h, g, bd, step=0)


def _action_functional(h, g, bd, path, dpath, nodes=200):
    """Complex action of an arbitrary path with the boundary data held fixed."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * bd.tau * (x + 1)
    w = 0.5 * bd.tau * w
    z, zb = path(s)
    dz, dzb = dpath(s)
    fz, fzb = potential_gradient(g, zb, z)
    lag = -0.5 * (dz * fz - dzb * fzb) - 1j * BoundHamiltonian(h, g).value(zb, z, s)
    z_end, _ = path(np.array([bd.tau]))
    _, zb_start = path(np.array([0.0]))
    edge = 0.5 * (kahler_potential(g, bd.zbar_F, z_end[0]) + kahler_potential(g, zb_start[0], bd.z_I))
    return np.sum(w * lag) + edge


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case"])
def test_stationary_under_bump_variations(case, request):
    g, h, bd = request.getfixturevalue(case)
    tr = solve_trajectory(h, g, bd)
    sys_ = ClassicalSystem(h, g)
    k = np.pi / (2 * bd.tau)

    def variation(eps):
        def path(s):
            z, zb = tr.at(s)
            return z + eps * np.sin(k * s), zb + eps * np.cos(k * s)

        def dpath(s):
            z, zb = tr.at(s)
            vz, vzb = sys_.velocity(zb, z, s)
            return vz + eps * k * np.cos(k * s), vzb - eps * k * np.sin(k * s)
        return _action_functional(h, g, bd, path, dpath)

    base = variation(0.0)
    d1, d2 = abs(variation(1e-3) - base), abs(variation(1e-4) - base)
    assert d1 < 1e-4
    assert d1 / d2 > 50  # quadratic, not linear


def test_action_scales_with_weight():
    h = catalog.su2_linear()
    bd = BoundaryData(0.3, 0.2, 0.5)
    lo, hi = PhaseSpaceGeometry.sphere(2), PhaseSpaceGeometry.sphere(4)
    br1 = total_action(solve_trajectory(h, lo, bd), h, lo)
    br2 = total_action(solve_trajectory(h, hi, bd), h, hi)
    assert br2.Phi_c == pytest.approx(2 * br1.Phi_c, abs=1e-11)
    assert br2.B_int == pytest.approx(br1.B_int, abs=1e-12)


def test_partial_integrals_for_oscillator(oscillator_case):
    g, h, bd = oscillator_case
    tr = solve_trajectory(h, g, bd)
    bound = BoundHamiltonian(h, g)
    assert partial_integral(tr, bound, 1, 1) == pytest.approx(1.3 * bd.tau, abs=1e-12)
    assert partial_integral(tr, bound, 2, 0) == pytest.approx(0, abs=1e-14)
    energy = 1.3 * bd.zbar_F * bd.z_I * np.exp(-1j * 1.3 * bd.tau)
    assert partial_integral(tr, bound, 0, 0) == pytest.approx(energy * bd.tau, abs=1e-12)


@hsettings(max_examples=20, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(0.1, 2.0))
def test_sphere_kernel_modulus_bounded(x, y, tau):
    g = PhaseSpaceGeometry.sphere(1.5)
    h = catalog.su2_linear()
    z = complex(x, y)
    bd = BoundaryData(z, np.conj(z) * 0.7 - 0.2j, tau)
    br = total_action(solve_trajectory(h, g, bd), h, g)
    assert br.Phi_c.real <= 1e-12
