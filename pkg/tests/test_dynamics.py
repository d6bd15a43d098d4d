from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from qcprop import catalog
from qcprop.dynamics import (BoundaryData, ClassicalSystem, ClassicalTrajectory, SolverSettings,
                             b_integral, det_ratio_jacobi, det_ratio_sensitivity, moebius_lift,
                             solve_jacobi, solve_trajectory)
from qcprop.errors import ChartOverflow, DegenerateWronskian, MoebiusPole
from qcprop.geometry import PhaseSpaceGeometry, metric
from qcprop.symbols import Algebra, HamiltonianSpec, Term, TimeCoefficient

LINEAR = SolverSettings(method="linear")
SHOOT = SolverSettings(method="shooting")


def _lowering_only():
    # zdot = i z^2 on the sphere: z = z_I / (1 - i z_I t)
    return HamiltonianSpec(Algebra.SU2, (Term(("J-",), TimeCoefficient(1.0)),))


def test_free_evolution_paths_are_constant():
    g = PhaseSpaceGeometry.sphere(3)
    bd = BoundaryData(0.2 + 0.1j, -0.4j, 1.5)
    for s in (LINEAR, SHOOT):
        tr = solve_trajectory(catalog.zero(Algebra.SU2), g, bd, s)
        assert np.allclose(tr.z_path, bd.z_I, atol=1e-13)
        assert np.allclose(tr.zbar_path, bd.zbar_F, atol=1e-13)
        assert tr.sens_zI == pytest.approx(1, abs=1e-12)
        assert tr.sens_zbarF == pytest.approx(1, abs=1e-12)


def test_oscillator_closed_form_paths(oscillator_case):
    g, h, bd = oscillator_case
    tr = solve_trajectory(h, g, bd, SHOOT)
    w = 1.3
    s = tr.grid
    assert np.max(np.abs(tr.z_path - bd.z_I * np.exp(-1j * w * s))) < 1e-10
    assert np.max(np.abs(tr.zbar_path - bd.zbar_F * np.exp(-1j * w * (bd.tau - s)))) < 1e-10
    assert tr.sens_zI == pytest.approx(np.exp(-1j * w * bd.tau), abs=1e-10)


def test_spin_precession_without_transverse_field():
    g = PhaseSpaceGeometry.sphere(2)
    bd = BoundaryData(0.3 - 0.2j, 0.5, 1.2)
    A = 0.7
    tr = solve_trajectory(catalog.su2_linear(A, 0.0), g, bd)
    assert tr.solver_tag.startswith("linear")
    assert np.max(np.abs(tr.z_path - bd.z_I * np.exp(-2j * A * tr.grid))) < 1e-11


def test_moebius_lift_is_special_unitary_for_hermitian_generator():
    g = PhaseSpaceGeometry.sphere(2)
    sol = moebius_lift(catalog.su2_linear(), g, 2.0)
    m = sol.y[:4, -1].reshape(2, 2)
    assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-11)
    assert np.linalg.det(m) == pytest.approx(1, abs=1e-11)


@pytest.mark.parametrize("kind,h,bd", [
    ("sphere", catalog.su2_linear(), BoundaryData(0.4, -0.1 + 0.5j, 1.0)),
    ("disk", catalog.su11_linear(), BoundaryData(0.3 + 0.1j, -0.2 + 0.25j, 1.0)),
])
def test_linear_and_shooting_agree(kind, h, bd):
    g = PhaseSpaceGeometry.from_record({"kind": kind, "weight": 2})
    a = solve_trajectory(h, g, bd, LINEAR)
    b = solve_trajectory(h, g, bd, SHOOT)
    za, zba = a.at(a.grid)
    zb_, zbb = b.at(a.grid)
    assert np.max(np.abs(za - zb_)) < 1e-9
    assert np.max(np.abs(zba - zbb)) < 1e-9
    assert a.sens_zI == pytest.approx(b.sens_zI, abs=1e-9)
    assert a.sens_zbarF == pytest.approx(b.sens_zbarF, abs=1e-9)


def test_nonlinear_boundary_residual(footnote2_case):
    g, h, bd = footnote2_case
    tr = solve_trajectory(h, g, bd)
    assert tr.solver_tag.startswith("shooting")
    assert tr.residual <= 1e-10
    assert abs(tr.z_path[0] - bd.z_I) < 1e-14


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case", "oscillator_case"])
def test_flow_equations_hold_along_path(case, request):
    g, h, bd = request.getfixturevalue(case)
    tr = solve_trajectory(h, g, bd)
    sys_ = ClassicalSystem(h, g)
    s = np.linspace(0.05, bd.tau - 0.05, 25)
    step = 1e-4
    zp, zbp = tr.at(s + step)
    zm, zbm = tr.at(s - step)
    z, zb = tr.at(s)
    vz, vzb = sys_.velocity(zb, z, s)
    assert np.max(np.abs((zp - zm) / (2 * step) - vz)) < 1e-7
    assert np.max(np.abs((zbp - zbm) / (2 * step) - vzb)) < 1e-7


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case"])
def test_sensitivities_match_finite_differences(case, request):
    g, h, bd = request.getfixturevalue(case)
    tr = solve_trajectory(h, g, bd)
    step = 1e-6
    up = solve_trajectory(h, g, dataclasses.replace(bd, z_I=bd.z_I + step))
    dn = solve_trajectory(h, g, dataclasses.replace(bd, z_I=bd.z_I - step))
    fd_zi = (up.z_tau - dn.z_tau) / (2 * step)
    up = solve_trajectory(h, g, dataclasses.replace(bd, zbar_F=bd.zbar_F + step))
    dn = solve_trajectory(h, g, dataclasses.replace(bd, zbar_F=bd.zbar_F - step))
    fd_zb = (up.zbar_0 - dn.zbar_0) / (2 * step)
    assert abs(fd_zi / tr.sens_zI - 1) < 1e-5
    assert abs(fd_zb / tr.sens_zbarF - 1) < 1e-5


@pytest.mark.parametrize("tau", [1e-3, 1e-4])
def test_short_time_limit(tau, footnote2_case):
    g, h, _ = footnote2_case
    bd = BoundaryData(0.3, 0.2, tau)
    tr = solve_trajectory(h, g, bd)
    assert abs(tr.z_tau - bd.z_I) < 50 * tau
    assert abs(tr.zbar_0 - bd.zbar_F) < 50 * tau
    assert abs(tr.sens_zI - 1) < 50 * tau
    assert abs(tr.sens_zbarF - 1) < 50 * tau


def test_pole_on_trajectory_raises():
    g = PhaseSpaceGeometry.sphere(2)
    bd = BoundaryData(-1j, 0.0, 2.0)
    with pytest.raises(MoebiusPole):
        solve_trajectory(_lowering_only(), g, bd, LINEAR)
    with pytest.raises(ChartOverflow):
        solve_trajectory(_lowering_only(), g, bd, dataclasses.replace(SHOOT, continuation=0))


def test_lowering_flow_closed_form_before_pole():
    g = PhaseSpaceGeometry.sphere(2)
    bd = BoundaryData(0.2 - 0.3j, 0.1, 0.8)
    tr = solve_trajectory(_lowering_only(), g, bd)
    expect = bd.z_I / (1 - 1j * bd.z_I * tr.grid)
    assert np.max(np.abs(tr.z_path - expect)) < 1e-11


# -- Jacobi fields -------------------------------------------------------------

@pytest.mark.parametrize("case", ["su2_case", "footnote2_case"])
def test_wronskian_is_conserved(case, request):
    g, h, bd = request.getfixturevalue(case)
    js = solve_jacobi(solve_trajectory(h, g, bd), h, g)
    assert js.wronskian_drift <= 1e-8


@pytest.mark.parametrize("case", ["su2_case", "footnote2_case"])
def test_determinant_routes_agree(case, request):
    g, h, bd = request.getfixturevalue(case)
    tr = solve_trajectory(h, g, bd)
    det = det_ratio_jacobi(solve_jacobi(tr, h, g))
    b_int = b_integral(tr, ClassicalSystem(h, g))
    assert abs(det_ratio_sensitivity(tr, g, b_int, 1) / det - 1) < 1e-7
    assert abs(det_ratio_sensitivity(tr, g, b_int, 2) / det - 1) < 1e-7


def test_rescaled_variations_solve_jacobi_system(footnote2_case):
    g, h, bd = footnote2_case
    tr = solve_trajectory(h, g, bd)
    sys_ = ClassicalSystem(h, g)
    s = np.linspace(0.0, bd.tau, 2001)
    z, zb = tr.at(s)
    dz, dzb = tr.variations(s)[:2]
    a, b, c = sys_.abc(zb, z, s)
    beta = np.concatenate([[0], np.cumsum(0.5 * (b[1:] + b[:-1]) * np.diff(s))])
    root = np.sqrt(metric(g, zb, z))
    eta = dz * root * np.exp(1j * beta)
    etab = dzb * root * np.exp(-1j * beta)
    lhs1 = np.gradient(eta, s, edge_order=2)
    lhs2 = np.gradient(etab, s, edge_order=2)
    r1 = lhs1 + 1j * c * np.exp(2j * beta) * etab
    r2 = lhs2 - 1j * a * np.exp(-2j * beta) * eta
    scale = np.max(np.abs(eta)) + np.max(np.abs(etab))
    assert np.max(np.abs(r1[5:-5])) / scale < 1e-6
    assert np.max(np.abs(r2[5:-5])) / scale < 1e-6


def test_free_and_oscillator_determinants_are_one(oscillator_case):
    g, h, bd = oscillator_case
    for ham in (catalog.zero(Algebra.HW), h):
        js = solve_jacobi(solve_trajectory(ham, g, bd), ham, g)
        assert np.allclose(js.phi, 0, atol=1e-14)
        assert det_ratio_jacobi(js) == pytest.approx(1, abs=1e-12)


def test_amplifier_determinant_is_cosh():
    g = PhaseSpaceGeometry.plane(1.0)
    h = catalog.parametric_amplifier(0.0, 0.5)
    bd = BoundaryData(0.3 + 0.1j, 0.2 - 0.4j, 1.0)
    det = det_ratio_jacobi(solve_jacobi(solve_trajectory(h, g, bd), h, g))
    assert det == pytest.approx(np.cosh(0.5), abs=1e-10)
    assert abs(det - 1.127626) < 1e-6


def test_conjugate_point_raises_degenerate_wronskian():
    # imaginary squeezing turns cosh into cos, which vanishes at g tau = pi/2;
    # the Jacobi coefficients are path independent on the plane
    g = PhaseSpaceGeometry.plane(1.0)
    h = catalog.parametric_amplifier(0.0, 1j)
    tau = np.pi / 2
    grid = np.linspace(0, tau, 11)
    zeros = np.zeros_like(grid, dtype=complex)
    tr = ClassicalTrajectory(BoundaryData(0j, 0j, tau), grid, zeros, zeros, 1, 1, 0.0, "test",
                             grid, dense=lambda s: (0 * s + 0j, 0 * s + 0j))
    with pytest.raises(DegenerateWronskian):
        det_ratio_jacobi(solve_jacobi(tr, h, g))


@hsettings(max_examples=15, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.1, 1.5))
def test_linear_solver_initial_condition_and_residual(x, y, tau):
    g = PhaseSpaceGeometry.sphere(1)
    bd = BoundaryData(complex(x, y), complex(y, -x), tau)
    tr = solve_trajectory(catalog.su2_linear(), g, bd)
    assert abs(tr.z_path[0] - bd.z_I) < 1e-12
    assert tr.residual < 1e-12
