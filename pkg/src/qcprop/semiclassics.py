"""Quasiclassical coherent-state propagator.

The covariant formula assembled here is::

    K = exp(Phi_c + i B_int / 2) * [ (d^2 Phi_c / dzbar_F dz_I) / sqrt(g_tau g_0) ]^{1/2}

The square-root branch is fixed by continuation from ``tau -> 0``, where the
bracket tends to 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from qcprop.action import (ActionBreakdown, mixed_second_derivative, partial_integral,
                           theta_identity_check, total_action)
from qcprop.dynamics import (BoundaryData, ClassicalSystem, ClassicalTrajectory, SolverSettings,
                             det_ratio_sensitivity, solve_trajectory)
from qcprop.errors import CausticPrefactor, ConfigError, NotFlat
from qcprop.geometry import Kind, PhaseSpaceGeometry, check_diagonal, metric, metric_gradient
from qcprop.symbols import BoundHamiltonian, HamiltonianSpec, check_compatible, partial_orders

logger = logging.getLogger(__name__)

_MAX_ARG_JUMP = np.pi / 4
CAUSTIC_LIMIT = 1e-12
MAX_TAU_SAMPLES = 2048


def _c(x: complex) -> dict:
    return {"re": float(np.real(x)), "im": float(np.imag(x))}


@dataclass
class PropagatorResult:
    amplitude: complex
    breakdown: ActionBreakdown
    prefactor: complex
    reduced: complex
    branch: int
    diagnostics: dict = field(default_factory=dict)
    trajectory: ClassicalTrajectory | None = field(default=None, repr=False)

    def to_record(self) -> dict:
        diag = {k: (_c(v) if isinstance(v, complex) else v) for k, v in self.diagnostics.items()}
        return {"amplitude": _c(self.amplitude), "prefactor": _c(self.prefactor),
                "reduced": _c(self.reduced), "branch": self.branch,
                "breakdown": self.breakdown.to_record(), "diagnostics": diag}


def _q_value(traj: ClassicalTrajectory, g: PhaseSpaceGeometry) -> tuple[complex, complex]:
    mixed = mixed_second_derivative(traj, g)
    d = mixed.diagnostics
    return complex(mixed.value**2 / (d["g_tau"] * d["g_0"])), mixed.value


def _phase_rate_bound(traj: ClassicalTrajectory, system: ClassicalSystem) -> float:
    """Bound on ``|d arg Q / d tau|`` from the linearized flow and the metric
    variation along a pilot path."""
    s = traj.fine_grid(4)
    z, zb = traj.at(s)
    _, _, vz, vzb, uz, uzb = system._vu(zb, z, s)
    zdot, zbdot = system.velocity(zb, z, s)
    gm = metric(system.g, zb, z)
    gz, gzb = metric_gradient(system.g, zb, z)
    log_g = np.abs((gz * zdot + gzb * zbdot) / gm)
    return float(2 * np.max(np.abs(vz) + np.abs(vzb) + np.abs(uz) + np.abs(uzb) + log_g))


def _track(h, g, bd, settings, system):
    """Solve along ``tau_k = k tau / K`` and follow ``arg Q`` continuously.

    ``K`` is chosen so that ``arg Q`` cannot move by more than pi/4 between
    samples (principal-value deltas would otherwise alias); a sample whose
    argument still jumps by more than pi/4 is bisected.
    """
    tau = bd.tau
    pilot = solve_trajectory(h, g, bd, settings, None, system)
    needed = int(np.ceil(tau * _phase_rate_bound(pilot, system) / _MAX_ARG_JUMP))
    if needed > MAX_TAU_SAMPLES:
        logger.warning("arg Q tracking capped at %d samples (bound asks for %d)",
                       MAX_TAU_SAMPLES, needed)
    n = max(1, settings.continuation, min(needed, MAX_TAU_SAMPLES))
    pending = [tau * k / n for k in range(1, n + 1)]
    tracked, t_prev, guess = 0.0, 0.0, bd.zbar_F
    samples = 0
    traj = q = None
    while pending:
        t = pending[0]
        cand = solve_trajectory(h, g, replace(bd, tau=t), settings, guess, system)
        samples += 1
        q_t, _ = _q_value(cand, g)
        if abs(q_t) < CAUSTIC_LIMIT:
            raise CausticPrefactor(f"prefactor vanishes near tau={t:.6g} (|Q|={abs(q_t):.2e})")
        delta = float(np.angle(q_t * np.exp(-1j * tracked)))
        if abs(delta) > _MAX_ARG_JUMP:
            if t - t_prev < tau * 2.0**-14:
                raise CausticPrefactor(f"prefactor branch cannot be followed near tau={t:.6g}")
            pending.insert(0, 0.5 * (t_prev + t))
            continue
        tracked += delta
        t_prev, guess, traj, q = t, cand.zbar_0, cand, q_t
        pending.pop(0)
    return traj, q, tracked, samples


def propagator_qc(g: PhaseSpaceGeometry, h: HamiltonianSpec, bd: BoundaryData,
                  settings: SolverSettings | None = None, checks: bool = False) -> PropagatorResult:
    """Covariant quasiclassical propagator ``<z_F| U(tau) |z_I>``.

    With ``checks`` the theta identity and the determinant identity are
    evaluated and stored in the diagnostics.
    """
    settings = settings or SolverSettings()
    check_compatible(h, g)
    check_diagonal(g, bd.z_I)
    check_diagonal(g, bd.z_F)
    system = ClassicalSystem(h, g)
    traj, q, arg_q, samples = _track(h, g, bd, settings, system)
    breakdown = total_action(traj, h, g, system)
    prefactor = complex(abs(q) ** 0.25 * np.exp(0.25j * arg_q))
    branch = int(np.rint((arg_q - np.angle(q)) / (2 * np.pi)))
    reduced = prefactor * np.exp(0.5j * breakdown.B_int)
    amplitude = complex(np.exp(breakdown.Phi_c) * reduced)
    diag = {"residual": traj.residual, "solver": traj.solver_tag, "iterations": traj.iterations,
            "tau_samples": samples, "arg_Q": float(arg_q)}
    diag.update({k: v for k, v in traj.diagnostics.items() if k != "other_roots"})
    if checks:
        diag["theta_defect"] = theta_identity_check(traj, h, g, breakdown, system)
        det = det_ratio_sensitivity(traj, g, breakdown.B_int)
        diag["det_ratio"] = det
        diag["reduced_vs_det"] = float(abs(reduced - det ** -0.5) / abs(reduced))
    return PropagatorResult(amplitude, breakdown, prefactor, complex(reduced), branch, diag, traj)


# -- flat space alpha family ---------------------------------------------------

def _idx(order: int, nz: int, nzb: int) -> int:
    return partial_orders(order).index((nz, nzb))


def propagator_flat_alpha(gamma: float | PhaseSpaceGeometry, h: HamiltonianSpec, bd: BoundaryData,
                          alpha: float,
                          settings: SolverSettings | None = None,
                          fd_step: float = 1e-3) -> PropagatorResult:
    """Plane propagator in the ``alpha`` ordering family.

    The Hamiltonian is shifted to ``H - alpha Delta H`` with ``Delta = gamma^{-1}
    d^2/dz dzbar``; the amplitude is
    ``sqrt(Phi''_alpha / gamma) exp(Phi_alpha + i (1/2 - alpha) B_alpha)``.
    On the plane the B-term coincides with ``Delta H``, so the shifted action
    and B integral follow from path integrals of ``Delta H`` and ``Delta^2 H``
    along the common stationary path.  ``gamma`` may also be a geometry,
    which must then be the plane.
    """
    if isinstance(gamma, PhaseSpaceGeometry):
        if gamma.kind is not Kind.PLANE:
            raise NotFlat(f"alpha scheme requires the plane, got {gamma.kind.value}")
        gamma = gamma.weight
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    g = PhaseSpaceGeometry.plane(gamma)
    settings = settings or SolverSettings()
    base = propagator_qc(g, h, bd, settings)
    traj = base.trajectory
    bound = BoundHamiltonian(h, g)
    lap_int = partial_integral(traj, bound, 1, 1) / gamma
    lap2_int = partial_integral(traj, bound, 2, 2) / gamma**2
    phi_a = base.breakdown.Phi_c + 1j * alpha * lap_int
    b_a = base.breakdown.B_int - alpha * lap2_int

    # the alpha shift only moves the mixed derivative when Delta H has a gradient
    s = traj.fine_grid()
    z, zb = traj.at(s)
    p3 = bound.partials(zb, z, s, 3)
    flat_grad = np.all(np.abs(p3[_idx(3, 2, 1)]) < 1e-14) and np.all(np.abs(p3[_idx(3, 1, 2)]) < 1e-14)
    mixed = mixed_second_derivative(traj, g).value
    shift = 0j
    if alpha != 0 and not flat_grad:
        shift = alpha * _lap_mixed_fd(h, g, bd, settings, fd_step, traj.zbar_0)
    mixed_a = mixed + 1j * shift
    root = np.sqrt(complex(mixed_a / gamma))
    if abs(root - base.prefactor) > abs(root + base.prefactor):
        root = -root
    amplitude = complex(root * np.exp(phi_a + 1j * (0.5 - alpha) * b_a))
    br = ActionBreakdown(base.breakdown.S_kin, base.breakdown.S_dyn + 1j * alpha * lap_int,
                         base.breakdown.Gamma, phi_a, b_a, base.breakdown.winding)
    diag = dict(base.diagnostics, alpha=alpha, laplacian_flat=bool(flat_grad))
    return PropagatorResult(amplitude, br, complex(root), complex(root * np.exp(0.5j * b_a)),
                            base.branch, diag, traj)


def _lap_mixed_fd(h, g, bd, settings, step, guess):
    """``d^2/dzbar_F dz_I`` of ``int Delta H`` along re-solved paths."""
    bound = BoundHamiltonian(h, g)
    total = 0j
    stencil = ((-1, -0.5), (1, 0.5))
    for a, wa in stencil:
        for b, wb in stencil:
            pert = BoundaryData(bd.z_I + b * step, bd.zbar_F + a * step, bd.tau)
            traj = solve_trajectory(h, g, pert, replace(settings, tol=1e-13), guess)
            total += wa * wb * partial_integral(traj, bound, 1, 1) / g.weight
    return total / step**2


# -- Duistermaat-Heckman probe ---------------------------------------------------

def _default_grid(g: PhaseSpaceGeometry) -> np.ndarray:
    radii = (0.0, 0.2, 0.4, 0.6, 0.8) if g.kind is Kind.DISK else (0.0, 0.25, 0.5, 1.0, 2.0)
    angles = 2 * np.pi * np.arange(8) / 8
    return np.array([r * np.exp(1j * a) for r in radii for a in angles])


def dh_exactness_probe(g: PhaseSpaceGeometry, h: HamiltonianSpec, grid=None,
                       times=(0.0,), threshold: float = 1e-8) -> dict:
    """Test whether the Hamiltonian flow preserves the metric.

    The infinitesimal Lie derivative of the Kähler metric along the flow has
    a ``dz dz`` component ``i g A`` (and its mirror ``-i g C``) and a trace
    component that vanishes for any Hamiltonian flow.  The defect is the
    largest of these relative to ``g`` over a diagonal grid.
    """
    check_compatible(h, g)
    system = ClassicalSystem(h, g)
    pts = _default_grid(g) if grid is None else np.asarray(grid, dtype=complex)
    defect = 0.0
    for t in times:
        for z in pts:
            zb = np.conj(z)
            _, _, vz, vzb, uz, uzb = system._vu(zb, z, t)
            zdot, zbdot = system.velocity(zb, z, t)
            gm = metric(g, zb, z)
            gz, gzb = metric_gradient(g, zb, z)
            trace = 0.5 * ((zdot * gz + zbdot * gzb) / gm - 1j * vz + 1j * uzb)
            defect = max(defect, abs(uz), abs(vzb), abs(trace))
    verdict = "ExactExpected" if defect <= threshold else "ExactNotExpected"
    return {"verdict": verdict, "defect": float(defect), "threshold": threshold,
            "points": int(len(pts) * len(times))}
