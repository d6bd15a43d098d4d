"""Action functional of a stationary path and its mixed second derivative."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from qcprop.dynamics import (BoundaryData, ClassicalSystem, ClassicalTrajectory, SolverSettings,
                             quad_along, solve_trajectory)
from qcprop.errors import ConfigError
from qcprop.geometry import (Kind, PhaseSpaceGeometry, kahler_potential, kahler_potential_diag,
                             log_argument, log_overlap, metric, potential_gradient, unwrapped_log)
from qcprop.symbols import BoundHamiltonian, HamiltonianSpec, partial_orders


def _c(x: complex) -> dict:
    return {"re": float(np.real(x)), "im": float(np.imag(x))}


@dataclass
class ActionBreakdown:
    """``Phi_c = S_kin + S_dyn + Gamma``; ``B_int`` is the integrated B-term."""

    S_kin: complex
    S_dyn: complex
    Gamma: complex
    Phi_c: complex
    B_int: complex
    winding: int = 0

    def to_record(self) -> dict:
        out = {k: _c(getattr(self, k)) for k in ("S_kin", "S_dyn", "Gamma", "Phi_c", "B_int")}
        out["winding"] = self.winding
        return out


def _path_potential(g: PhaseSpaceGeometry, zbar, z, fixed_principal: complex):
    """``F`` continued along sampled two-slot points from the principal value
    at the first sample."""
    if g.kind is Kind.PLANE:
        return kahler_potential(g, zbar, z), 0
    sign = 1 if g.kind is Kind.SPHERE else -1
    logs, winding = unwrapped_log(log_argument(g, zbar, z))
    vals = sign * g.weight * logs
    # anchor on the principal branch at the start of the path
    shift = fixed_principal - vals[0]
    return vals + shift, winding


def boundary_term(traj: ClassicalTrajectory, g: PhaseSpaceGeometry) -> tuple[complex, int]:
    bd = traj.boundary
    s = traj.fine_grid()
    z, zb = traj.at(s)
    anchor = complex(kahler_potential(g, bd.zbar_F, bd.z_I))
    f_end, w1 = _path_potential(g, np.full_like(z, bd.zbar_F), z, anchor)
    # the conjugate slot is continued from s = tau back to s = 0
    f_start, w2 = _path_potential(g, zb[::-1], np.full_like(zb, bd.z_I), anchor)
    gamma = 0.5 * (f_end[-1] + f_start[-1]
                   - kahler_potential_diag(g, bd.z_F) - kahler_potential_diag(g, bd.z_I))
    return complex(gamma), w1 + w2


def total_action(traj: ClassicalTrajectory, h: HamiltonianSpec, g: PhaseSpaceGeometry,
                 system: ClassicalSystem | None = None) -> ActionBreakdown:
    """Kinetic, dynamical and boundary pieces of the complex action."""
    system = system or ClassicalSystem(h, g)
    bound = system.bound

    def kinetic(s, z, zb):
        zdot, zbdot = system.velocity(zb, z, s)
        fz, fzb = potential_gradient(g, zb, z)
        return -0.5 * (zdot * fz - zbdot * fzb)

    s_kin = quad_along(traj, kinetic)
    s_dyn = quad_along(traj, lambda s, z, zb: -1j * bound.value(zb, z, s))
    b_int = quad_along(traj, lambda s, z, zb: system.b_term(zb, z, s))
    gamma, winding = boundary_term(traj, g)
    return ActionBreakdown(s_kin, s_dyn, gamma, s_kin + s_dyn + gamma, b_int, winding)


@dataclass
class MixedDerivative:
    value: complex
    method: str = "Sensitivity"
    diagnostics: dict = field(default_factory=dict)


def mixed_second_derivative(traj: ClassicalTrajectory, g: PhaseSpaceGeometry) -> MixedDerivative:
    """``d^2 Phi_c / dzbar_F dz_I`` from endpoint sensitivities."""
    bd = traj.boundary
    g_tau = metric(g, bd.zbar_F, traj.z_tau)
    g_0 = metric(g, traj.zbar_0, bd.z_I)
    value = 0.5 * (g_tau * traj.sens_zI + g_0 * traj.sens_zbarF)
    return MixedDerivative(complex(value), "Sensitivity", {"g_tau": complex(g_tau), "g_0": complex(g_0)})


def holomorphic_phase(h: HamiltonianSpec, g: PhaseSpaceGeometry, bd: BoundaryData,
                      settings: SolverSettings | None = None, guess: complex | None = None):
    """``Phi_c`` with the diagonal normalizations removed, so it is holomorphic
    in ``(zbar_F, z_I)``; returns the value and the trajectory."""
    traj = solve_trajectory(h, g, bd, settings, guess)
    br = total_action(traj, h, g)
    return br.Phi_c + 0.5 * (kahler_potential_diag(g, bd.z_F) + kahler_potential_diag(g, bd.z_I)), traj


_STENCIL = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))


def mixed_second_derivative_fd(h: HamiltonianSpec, g: PhaseSpaceGeometry, bd: BoundaryData,
                               step: float = 5e-3,
                               settings: SolverSettings | None = None) -> MixedDerivative:
    """Finite-difference oracle on re-solved boundary problems.

    A tensor product of fourth-order central stencils is applied to the
    holomorphic part of ``Phi_c``.  The step is deliberately not tiny: every
    stencil point carries integrator noise of order ``1e-13``.
    """
    if step <= 0:
        raise ConfigError("finite-difference step must be positive")
    settings = replace(settings or SolverSettings(), tol=1e-13)
    base = solve_trajectory(h, g, bd, settings)
    total = 0j
    for a, wa in _STENCIL:
        for b, wb in _STENCIL:
            pert = BoundaryData(bd.z_I + b * step, bd.zbar_F + a * step, bd.tau)
            val, _ = holomorphic_phase(h, g, pert, settings, guess=base.zbar_0)
            total += wa * wb * val
    return MixedDerivative(complex(total / step**2), "FiniteDifference", {"step": step})


def theta_identity_check(traj: ClassicalTrajectory, h: HamiltonianSpec, g: PhaseSpaceGeometry,
                         breakdown: ActionBreakdown | None = None,
                         system: ClassicalSystem | None = None) -> float:
    """Defect of ``S + Gamma = i int theta - i int H + log <z_F|z_I>``.

    The two sides are assembled from different pieces (endpoint potentials
    versus potential differences along the path), so agreement checks the
    quadrature and the branch continuation of ``F``.
    """
    system = system or ClassicalSystem(h, g)
    breakdown = breakdown or total_action(traj, h, g, system)
    bd = traj.boundary

    def theta(s, z, zb):
        zdot, zbdot = system.velocity(zb, z, s)
        fz, fzb = potential_gradient(g, zb, z)
        fz_end, _ = potential_gradient(g, np.full_like(zb, bd.zbar_F), z)
        _, fzb_start = potential_gradient(g, zb, np.full_like(z, bd.z_I))
        return -0.5 * (zdot * (fz - fz_end) - zbdot * (fzb - fzb_start))

    rhs = quad_along(traj, theta) + breakdown.S_dyn + log_overlap(g, bd.zbar_F, bd.z_I)
    return float(abs(breakdown.Phi_c - rhs))


def b_term_flow_form(traj: ClassicalTrajectory, h: HamiltonianSpec, g: PhaseSpaceGeometry,
                     step: float = 1e-3) -> complex:
    """``int (i/2)(d zdot/dz - d zbardot/dzbar)`` with the divergence taken by
    fourth-order differences of the velocity field."""
    system = ClassicalSystem(h, g)

    def div(s, z, zb):
        dz = dzb = 0j
        for k, w in _STENCIL:
            dz = dz + w * system.velocity(zb, z + k * step, s)[0]
            dzb = dzb + w * system.velocity(zb + k * step, z, s)[1]
        return 0.5j * (dz - dzb) / step

    return quad_along(traj, div)


def partial_integral(traj: ClassicalTrajectory, bound: BoundHamiltonian,
                            nz: int, nzb: int) -> complex:
    """``int d^{nz+nzb} H / dz^nz dzbar^nzb`` along the path."""
    order = nz + nzb
    idx = partial_orders(order).index((nz, nzb))
    return quad_along(traj, lambda s, z, zb: bound.partials(zb, z, s, order)[idx])
