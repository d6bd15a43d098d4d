"""Complexified Hamilton equations, their boundary-value problem and Jacobi fields.

The holomorphic coordinate ``z(s)`` and the conjugate slot ``zbar(s)`` are
independent complex functions.  With ``hbar = 1``::

    dz/ds    = -i V,   V = g^{-1} dH/dzbar,   z(0)      = z_I
    dzbar/ds = +i U,   U = g^{-1} dH/dz,      zbar(tau) = zbar_F
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from qcprop.errors import (ChartOverflow, ConfigError, DegenerateWronskian, IntegratorFailure,
                           MoebiusPole, NoConvergence, QuadratureUnresolved)
from qcprop.geometry import PhaseSpaceGeometry, metric, metric_gradient
from qcprop.symbols import (BoundHamiltonian, HamiltonianSpec, Term, check_compatible)

logger = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


@dataclass(frozen=True)
class BoundaryData:
    z_I: complex
    zbar_F: complex
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "z_I", complex(self.z_I))
        object.__setattr__(self, "zbar_F", complex(self.zbar_F))
        object.__setattr__(self, "tau", float(self.tau))
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    @property
    def z_F(self) -> complex:
        return self.zbar_F.conjugate()

    @property
    def zbar_I(self) -> complex:
        return self.z_I.conjugate()


@dataclass
class SolverSettings:
    steps: int = 201
    tol: float = 1e-10
    newton_max: int = 30
    rmax: float = 1e6
    rtol: float = 1e-12
    atol: float = 1e-14
    # number of duration samples used for continuation and branch tracking
    continuation: int = 4
    method: str = "auto"
    uniqueness_probe: bool = False

    @classmethod
    def from_record(cls, rec: dict | None) -> "SolverSettings":
        rec = dict(rec or {})
        known = {k: rec.pop(k) for k in list(rec) if k in cls.__dataclass_fields__}
        if rec:
            raise ConfigError(f"unknown solver settings {sorted(rec)}")
        return cls(**known)


class ClassicalSystem:
    """Velocity field, its Jacobian and the second-variation coefficients."""

    def __init__(self, h: HamiltonianSpec, g: PhaseSpaceGeometry):
        check_compatible(h, g)
        self.h, self.g = h, g
        self.bound = BoundHamiltonian(h, g)

    def _vu(self, zbar, z, t, jac: bool = True):
        p = self.bound.partials(zbar, z, t, 2 if jac else 1)
        gm = metric(self.g, zbar, z)
        v, u = p[2] / gm, p[1] / gm
        if not jac:
            return v, u
        gz, gzb = metric_gradient(self.g, zbar, z)
        vz = p[4] / gm - v * gz / gm
        vzb = p[5] / gm - v * gzb / gm
        uz = p[3] / gm - u * gz / gm
        uzb = p[4] / gm - u * gzb / gm
        return v, u, vz, vzb, uz, uzb

    def velocity(self, zbar, z, t):
        v, u = self._vu(zbar, z, t, jac=False)
        return -1j * v, 1j * u

    def jacobian(self, zbar, z, t) -> np.ndarray:
        """``d(zdot, zbardot) / d(z, zbar)``."""
        _, _, vz, vzb, uz, uzb = self._vu(zbar, z, t)
        return np.array([[-1j * vz, -1j * vzb], [1j * uz, 1j * uzb]])

    def abc(self, zbar, z, t):
        """Second-variation coefficients ``A, B, C``."""
        _, _, vz, vzb, uz, uzb = self._vu(zbar, z, t)
        return uz, 0.5 * (vz + uzb), vzb

    def b_term(self, zbar, z, t):
        return self.abc(zbar, z, t)[1]


@dataclass
class ClassicalTrajectory:
    """Stationary path of the boundary problem with endpoint sensitivities."""

    boundary: BoundaryData
    grid: np.ndarray
    z_path: np.ndarray
    zbar_path: np.ndarray
    sens_zI: complex
    sens_zbarF: complex
    residual: float
    solver_tag: str
    knots: np.ndarray
    dense: Callable = field(repr=False)
    variations_fn: Callable | None = field(default=None, repr=False)
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    def at(self, s):
        """``(z, zbar)`` at arbitrary times in ``[0, tau]``."""
        return self.dense(np.asarray(s, dtype=float))

    def variations(self, s):
        """``(dz/dz_I, dzbar/dz_I, dz/dzbar_F, dzbar/dzbar_F)`` along the path."""
        if self.variations_fn is None:
            raise ValueError("trajectory carries no variational data")
        return self.variations_fn(np.asarray(s, dtype=float))

    @property
    def z_tau(self) -> complex:
        return complex(self.z_path[-1])

    @property
    def zbar_0(self) -> complex:
        return complex(self.zbar_path[0])

    def fine_grid(self, per_panel: int = 8) -> np.ndarray:
        edges = np.union1d(self.knots, self.grid)
        frac = np.linspace(0, 1, per_panel, endpoint=False)
        pts = (edges[:-1, None] + np.diff(edges)[:, None] * frac).ravel()
        return np.append(pts, edges[-1])


def _check_solution(sol):
    if sol.status == 1:
        raise ChartOverflow("trajectory or its variations exceeded rmax")
    if sol.status < 0:
        raise IntegratorFailure(sol.message)


def _overflow_event(rmax: float, n: int = 2):
    def ev(t, y):
        return rmax - max(abs(y[0]), abs(y[1])) if n == 2 else rmax - np.max(np.abs(y[:n]))
    ev.terminal = True
    return ev


# -- linear flows ------------------------------------------------------------

def _quadratic_fit(fn, other_slot) -> tuple[complex, complex, complex]:
    f0, fp, fm = (complex(fn(other_slot, x)) for x in (0.0, 1.0, -1.0))
    return f0, 0.5 * (fp - fm), 0.5 * (fp + fm) - f0


def riccati_coefficients(h: HamiltonianSpec, g: PhaseSpaceGeometry):
    """Per-term coefficients ``(p, q, r)`` of ``V = p + q z + r z^2`` and
    ``(pb, qb, rb)`` of ``U = pb + qb zbar + rb zbar^2`` at unit strength.

    Raises ``ValueError`` when a term does not generate a Möbius flow.
    """
    out = []
    for term in h.terms:
        unit = HamiltonianSpec(h.algebra, (Term(term.generators, lnorm=term.lnorm),))
        system = ClassicalSystem(unit, g)
        fv = lambda zb, z: system._vu(zb, z, 0.0, jac=False)[0]
        fu = lambda zb, z: system._vu(z, zb, 0.0, jac=False)[1]  # U as a function of zbar
        coeffs = []
        for fn in (fv, fu):
            p, q, r = _quadratic_fit(fn, 0.3 + 0.1j)
            for other, x in ((-0.2 + 0.25j, 0.5j), (0.1 - 0.3j, -0.4 + 0.3j)):
                if abs(fn(other, x) - (p + q * x + r * x * x)) > 1e-10 * (1 + abs(p) + abs(q) + abs(r)):
                    raise ValueError(f"term {term.generators} does not generate a Möbius flow")
            coeffs.append((p, q, r))
        out.append((term, coeffs[0], coeffs[1]))
    return out


def moebius_lift(h: HamiltonianSpec, g: PhaseSpaceGeometry, tau: float,
                 settings: SolverSettings | None = None):
    """Integrate the 2x2 lifts of both Riccati flows from the identity.

    Returns the dense solution whose first four components are ``M(t)`` (the
    ``z`` flow) and last four ``N(t)`` (the ``zbar`` flow), row-major.
    """
    settings = settings or SolverSettings()
    check_compatible(h, g)
    table = riccati_coefficients(h, g)

    def rhs(t, y):
        p = q = r = pb = qb = rb = 0j
        for term, (tp, tq, tr), (up, uq, ur) in table:
            c = term.coeff(t)
            p += c * tp; q += c * tq; r += c * tr
            pb += c * up; qb += c * uq; rb += c * ur
        m = y[:4].reshape(2, 2)
        n = y[4:].reshape(2, 2)
        gen_m = -1j * np.array([[q / 2, p], [-r, -q / 2]])
        gen_n = 1j * np.array([[qb / 2, pb], [-rb, -qb / 2]])
        return np.concatenate([(gen_m @ m).ravel(), (gen_n @ n).ravel()])

    y0 = np.concatenate([np.eye(2).ravel(), np.eye(2).ravel()]).astype(complex)
    sol = solve_ivp(rhs, (0.0, tau), y0, method="DOP853", rtol=settings.rtol,
                    atol=settings.atol, dense_output=True)
    _check_solution(sol)
    return sol


def solve_linear_flow(h: HamiltonianSpec, g: PhaseSpaceGeometry, bd: BoundaryData,
                      steps: int | None = None, settings: SolverSettings | None = None) -> ClassicalTrajectory:
    """Boundary problem for algebra-linear Hamiltonians via Möbius linearization.

    Both Riccati flows are lifted to 2x2 linear systems integrated forward from
    the identity: ``z(t) = M(t) . z_I`` and ``zbar(t) = N(t) N(tau)^{-1} . zbar_F``.
    """
    settings = settings or SolverSettings()
    steps = steps or settings.steps
    sol = moebius_lift(h, g, bd.tau, settings)
    n_tau = sol.y[4:, -1].reshape(2, 2)
    q_inv = np.linalg.inv(n_tau)
    tail = q_inv @ np.array([bd.zbar_F, 1.0])
    z_i = bd.z_I

    def mats(s):
        y = sol.sol(s)
        return y[:4].reshape((2, 2) + np.shape(s)), y[4:].reshape((2, 2) + np.shape(s))

    def moebius(s):
        m, n = mats(s)
        num_z, den_z = m[0, 0] * z_i + m[0, 1], m[1, 0] * z_i + m[1, 1]
        num_b = n[0, 0] * tail[0] + n[0, 1] * tail[1]
        den_b = n[1, 0] * tail[0] + n[1, 1] * tail[1]
        return m, n, num_z, den_z, num_b, den_b

    def dense(s):
        _, _, num_z, den_z, num_b, den_b = moebius(s)
        return num_z / den_z, num_b / den_b

    def variations(s):
        m, n, _, den_z, _, den_b = moebius(s)
        det_m = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        # N(s) Q with Q = N(tau)^{-1}; only its determinant and bottom row matter
        det_nq = (n[0, 0] * n[1, 1] - n[0, 1] * n[1, 0]) * np.linalg.det(q_inv)
        zero = np.zeros_like(den_z)
        return det_m / den_z**2, zero, zero, det_nq / den_b**2

    grid = np.linspace(0.0, bd.tau, steps)
    probe = np.union1d(grid, sol.t)
    _, _, num_z, den_z, num_b, den_b = moebius(probe)
    eps = 1e-12
    if np.any(np.abs(den_z) <= eps * (np.abs(num_z) + np.abs(den_z))) or \
            np.any(np.abs(den_b) <= eps * (np.abs(num_b) + np.abs(den_b))):
        raise MoebiusPole("Möbius denominator vanishes on the trajectory (caustic)")
    z_path, zbar_path = dense(grid)
    if max(np.max(np.abs(z_path)), np.max(np.abs(zbar_path))) > settings.rmax:
        raise ChartOverflow("trajectory left the chart (|z| > rmax)")
    d = variations(np.array([0.0, bd.tau]))
    return ClassicalTrajectory(
        boundary=bd, grid=grid, z_path=z_path, zbar_path=zbar_path,
        sens_zI=complex(d[0][1]), sens_zbarF=complex(d[3][0]),
        residual=float(abs(zbar_path[-1] - bd.zbar_F)), solver_tag="linear-flow/DOP853",
        knots=sol.t, dense=dense, variations_fn=variations)


# -- shooting ----------------------------------------------------------------

def _shoot(system: ClassicalSystem, z_i: complex, w: complex, tau: float, settings: SolverSettings):
    def rhs(t, y):
        zb, z = y[1], y[0]
        v, u, vz, vzb, uz, uzb = system._vu(zb, z, t)
        m11, m12, m21, m22 = y[2], y[3], y[4], y[5]
        j11, j12, j21, j22 = -1j * vz, -1j * vzb, 1j * uz, 1j * uzb
        return np.array([-1j * v, 1j * u,
                         j11 * m11 + j12 * m21, j11 * m12 + j12 * m22,
                         j21 * m11 + j22 * m21, j21 * m12 + j22 * m22])

    y0 = np.array([z_i, w, 1, 0, 0, 1], dtype=complex)
    sol = solve_ivp(rhs, (0.0, tau), y0, method="DOP853", rtol=settings.rtol,
                    atol=settings.atol, dense_output=True,
                    events=_overflow_event(settings.rmax, 6))
    _check_solution(sol)
    return sol


def _newton(system, bd: BoundaryData, guess: complex, settings: SolverSettings):
    w = complex(guess)
    sol = _shoot(system, bd.z_I, w, bd.tau, settings)
    r = sol.y[1, -1] - bd.zbar_F
    it = 0
    while abs(r) > settings.tol:
        if it >= settings.newton_max:
            raise NoConvergence(f"Newton residual {abs(r):.2e} after {it} iterations")
        it += 1
        step = -r / sol.y[5, -1]
        lam = 1.0
        while True:
            try:
                trial = _shoot(system, bd.z_I, w + lam * step, bd.tau, settings)
                r_new = trial.y[1, -1] - bd.zbar_F
            except (ChartOverflow, IntegratorFailure):
                r_new = np.inf
            if abs(r_new) < abs(r):
                break
            lam *= 0.5
            if lam < 1e-4:
                raise NoConvergence("damped Newton step failed to reduce the residual")
        w, sol, r = w + lam * step, trial, r_new
    return w, sol, it


def solve_bvp_shooting(h: HamiltonianSpec, g: PhaseSpaceGeometry, bd: BoundaryData,
                       guess: complex | None = None, steps: int | None = None,
                       tol: float | None = None, settings: SolverSettings | None = None,
                       system: ClassicalSystem | None = None) -> ClassicalTrajectory:
    """Shooting on the unknown ``zbar(0)`` with Newton iteration.

    The Newton derivative and the endpoint sensitivities come from the
    variational (monodromy) matrix integrated alongside the trajectory.  When
    Newton from ``guess`` (default ``zbar_F``) fails, the duration is
    continued from ``tau -> 0`` where ``zbar(0) -> zbar_F``.
    """
    settings = settings or SolverSettings()
    if tol is not None:
        settings = replace(settings, tol=tol)
    steps = steps or settings.steps
    system = system or ClassicalSystem(h, g)
    start = bd.zbar_F if guess is None else guess
    try:
        w, sol, it = _newton(system, bd, start, settings)
        tag = "shooting/newton"
    except (NoConvergence, ChartOverflow, IntegratorFailure) as exc:
        logger.debug("direct Newton failed (%s); continuing in tau", exc)
        try:
            w, sol, it = _continue_in_tau(system, bd, settings)
        except NoConvergence:
            raise exc from None
        tag = "shooting/continuation"

    y_tau = sol.y[:, -1]
    m11, m12, m21, m22 = y_tau[2:]
    dw_dzi, dw_dzbf = -m21 / m22, 1 / m22

    def dense(s):
        y = sol.sol(s)
        return y[0], y[1]

    def variations(s):
        y = sol.sol(s)
        a11, a12, a21, a22 = y[2], y[3], y[4], y[5]
        return (a11 + a12 * dw_dzi, a21 + a22 * dw_dzi, a12 * dw_dzbf, a22 * dw_dzbf)

    grid = np.linspace(0.0, bd.tau, steps)
    z_path, zbar_path = dense(grid)
    traj = ClassicalTrajectory(
        boundary=bd, grid=grid, z_path=z_path, zbar_path=zbar_path,
        sens_zI=complex((m11 * m22 - m12 * m21) / m22), sens_zbarF=complex(dw_dzbf),
        residual=float(abs(y_tau[1] - bd.zbar_F)), solver_tag=tag + "/DOP853",
        knots=sol.t, dense=dense, variations_fn=variations, iterations=it)
    if settings.uniqueness_probe:
        _probe_uniqueness(system, bd, w, settings, traj)
    return traj


def _continue_in_tau(system, bd, settings):
    n = max(2, settings.continuation)
    while n <= 256:
        try:
            w = bd.zbar_F
            total = 0
            for k in range(1, n + 1):
                w, sol, it = _newton(system, replace(bd, tau=bd.tau * k / n), w, settings)
                total += it
            return w, sol, total
        except (NoConvergence, ChartOverflow, IntegratorFailure):
            n *= 2
    raise NoConvergence("continuation in tau failed")


def _probe_uniqueness(system, bd, w, settings, traj):
    roots = []
    for shift in (0.3, -0.3j, 0.5 + 0.5j):
        try:
            other, _, _ = _newton(system, bd, w + shift * (1 + abs(w)), settings)
        except (NoConvergence, ChartOverflow, IntegratorFailure):
            continue
        if abs(other - w) > 1e-6 * (1 + abs(w)):
            roots.append(complex(other))
    traj.diagnostics["other_roots"] = roots
    if roots:
        traj.diagnostics["multiple_solutions_suspected"] = True
        logger.warning("boundary problem has other stationary paths: %s", roots)


def solve_trajectory(h: HamiltonianSpec, g: PhaseSpaceGeometry, bd: BoundaryData,
                     settings: SolverSettings | None = None, guess: complex | None = None,
                     system: ClassicalSystem | None = None) -> ClassicalTrajectory:
    """Dispatch to the Möbius solver for algebra-linear Hamiltonians, else shoot."""
    settings = settings or SolverSettings()
    method = settings.method
    if method == "auto":
        method = "linear" if h.is_linear else "shooting"
    if method == "linear":
        return solve_linear_flow(h, g, bd, settings=settings)
    if method == "shooting":
        return solve_bvp_shooting(h, g, bd, guess=guess, settings=settings, system=system)
    raise ConfigError(f"unknown solver method {method!r}")


# -- quadrature along trajectories ---------------------------------------------

def _gauss_panels(edges: np.ndarray):
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    s = (mid[:, None] + half[:, None] * _GL_NODES).ravel()
    w = (half[:, None] * _GL_WEIGHTS).ravel()
    return s, w


def quad_along(traj: ClassicalTrajectory, integrand: Callable, check: bool = True,
               tol: float = 1e-9) -> complex:
    """Composite Gauss-Legendre quadrature of ``integrand(s, z, zbar)``.

    Panels are the integrator steps; the result is recomputed on bisected
    panels and ``QuadratureUnresolved`` is raised if it moves by more than
    ``tol`` (relative to ``max(1, |I|)``).
    """
    edges = np.union1d(traj.knots, [0.0, traj.boundary.tau])

    def run(e):
        s, w = _gauss_panels(e)
        z, zb = traj.at(s)
        return complex(np.sum(w * integrand(s, z, zb)))

    coarse = run(edges)
    if not check:
        return coarse
    mids = 0.5 * (edges[1:] + edges[:-1])
    fine = run(np.union1d(edges, mids))
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise QuadratureUnresolved(f"quadrature moved by {abs(fine - coarse):.2e} on refinement")
    return fine


def b_integral(traj: ClassicalTrajectory, system: ClassicalSystem) -> complex:
    return quad_along(traj, lambda s, z, zb: system.b_term(zb, z, s))


# -- Jacobi fields -------------------------------------------------------------

@dataclass
class JacobiSolution:
    grid: np.ndarray
    phi: np.ndarray
    phibar: np.ndarray
    psi: np.ndarray
    psibar: np.ndarray
    beta: np.ndarray
    wronskian_drift: float
    phi_dense: Callable = field(repr=False, default=None)
    psi_dense: Callable = field(repr=False, default=None)


def solve_jacobi(traj: ClassicalTrajectory, h: HamiltonianSpec, g: PhaseSpaceGeometry,
                 settings: SolverSettings | None = None,
                 system: ClassicalSystem | None = None) -> JacobiSolution:
    """Integrate the gauge-transformed Jacobi equations along ``traj``.

    With ``beta(s) = int_0^s B``, ``At = A exp(-2 i beta)``, ``Ct = C exp(2 i beta)``::

        d eta / ds = -i Ct etabar,    d etabar / ds = i At eta

    ``phi`` starts from ``(0, 1)`` at ``s = 0``; ``psi`` from ``(1, 0)`` at ``tau``.
    """
    settings = settings or SolverSettings()
    system = system or ClassicalSystem(h, g)
    tau = traj.boundary.tau

    def rhs(s, y):
        z, zb = traj.at(s)
        a, b, c = system.abc(zb, z, s)
        e = np.exp(2j * y[2])
        return np.array([-1j * c * e * y[1], 1j * a / e * y[0], b])

    kw = dict(method="DOP853", rtol=settings.rtol, atol=settings.atol, dense_output=True)
    fwd = solve_ivp(rhs, (0.0, tau), np.array([0, 1, 0], dtype=complex), **kw)
    _check_solution(fwd)
    beta_tau = fwd.y[2, -1]
    bwd = solve_ivp(rhs, (tau, 0.0), np.array([1, 0, beta_tau], dtype=complex), **kw)
    _check_solution(bwd)
    grid = traj.grid
    yf, yb = fwd.sol(grid), bwd.sol(grid)
    w = yf[0] * yb[1] - yf[1] * yb[0]
    scale = np.max(np.abs(yb[0])) * np.max(np.abs(yf[1]))
    if abs(w[0]) <= 1e-12 * scale:
        raise DegenerateWronskian("Jacobi solutions are linearly dependent (conjugate point)")
    drift = float(np.max(np.abs(w - w[0])) / abs(w[0]))
    return JacobiSolution(grid, yf[0], yf[1], yb[0], yb[1], yf[2], drift,
                          phi_dense=fwd.sol, psi_dense=bwd.sol)


def det_ratio_jacobi(js: JacobiSolution, rtol: float = 1e-6) -> complex:
    """Fluctuation determinant ratio from the Jacobi solutions.

    Both ``phibar(tau)/phibar(0)`` and ``psi(0)/psi(tau)`` are formed; they must
    agree to ``rtol``.
    """
    d1 = js.phibar[-1] / js.phibar[0]
    d2 = js.psi[0] / js.psi[-1]
    if abs(d1) == 0 or abs(d2) == 0:
        raise DegenerateWronskian("vanishing determinant ratio")
    if abs(d1 - d2) > rtol * abs(d1):
        raise IntegratorFailure(f"determinant routes disagree: {d1} vs {d2}")
    return complex(d1)


def metric_ratio_sqrt(traj: ClassicalTrajectory, g: PhaseSpaceGeometry) -> complex:
    """``sqrt(g(tau)/g(0))`` continued along the trajectory from 1 at ``s = 0``."""
    s = traj.fine_grid()
    z, zb = traj.at(s)
    ratio = metric(g, zb, z) / metric(g, zb[0], z[0])
    phase = np.unwrap(np.angle(ratio))
    return complex(np.sqrt(abs(ratio[-1])) * np.exp(0.5j * phase[-1]))


def det_ratio_sensitivity(traj: ClassicalTrajectory, g: PhaseSpaceGeometry, b_int: complex,
                          form: int = 1) -> complex:
    """Determinant ratio from endpoint sensitivities, metric and the B integral.

    ``form=1`` uses ``dzbar(0)/dzbar_F``; ``form=2`` uses ``dz(tau)/dz_I``.
    """
    root = metric_ratio_sqrt(traj, g)
    if form == 1:
        return complex(root * np.exp(-1j * b_int) / traj.sens_zbarF)
    return complex(np.exp(-1j * b_int) / (root * traj.sens_zI))
