"""Finite-dimensional quantum oracle: matrices, coherent vectors, evolution."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from qcprop.errors import ConfigError, InvalidSpin, NoConvergence, TruncationTooSevere
from qcprop.geometry import Kind, PhaseSpaceGeometry
from qcprop.symbols import Algebra, HamiltonianSpec, canonical_word

HW_NMAX = 64
SU11_NMAX = 128
TAIL_LIMIT = 1e-10


@dataclass(frozen=True)
class Representation:
    """SU2 spin ``j``, truncated HW with index ``gamma``, or truncated SU11
    discrete series with Bargmann index ``k``."""

    algebra: Algebra
    param: float
    n_max: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "algebra", Algebra(self.algebra))
        if self.algebra is Algebra.SU2:
            two_j = 2 * self.param
            if self.param <= 0 or abs(two_j - round(two_j)) > 1e-12:
                raise InvalidSpin(f"2j must be a positive integer, got j={self.param}")
            object.__setattr__(self, "n_max", None)
        elif self.algebra is Algebra.HW:
            if self.param <= 0:
                raise ConfigError("gamma must be positive")
            if self.n_max is None:
                object.__setattr__(self, "n_max", HW_NMAX)
        else:
            if self.param <= 0.5:
                raise ConfigError("SU(1,1) index k must exceed 1/2")
            if self.n_max is None:
                object.__setattr__(self, "n_max", SU11_NMAX)

    @classmethod
    def for_geometry(cls, g: PhaseSpaceGeometry, n_max: int | None = None) -> "Representation":
        if g.kind is Kind.SPHERE:
            return cls(Algebra.SU2, g.weight / 2)
        if g.kind is Kind.PLANE:
            return cls(Algebra.HW, g.weight, n_max)
        return cls(Algebra.SU11, g.weight / 2, n_max)

    @property
    def dimension(self) -> int:
        if self.algebra is Algebra.SU2:
            return int(round(2 * self.param)) + 1
        return int(self.n_max)

    @cached_property
    def matrices(self) -> dict[str, np.ndarray]:
        return generator_matrices(self)


def generator_matrices(rep: Representation) -> dict[str, np.ndarray]:
    """Generators in the weight basis; basis vector 0 is the fiducial state."""
    n = np.arange(rep.dimension, dtype=float)
    if rep.algebra is Algebra.SU2:
        j = rep.param
        m = n - j
        # J+|j,m> = sqrt((j-m)(j+m+1)) |j,m+1>
        up = np.sqrt((j - m[:-1]) * (j + m[:-1] + 1))
        jp = np.diag(up, -1).astype(complex)
        return {"J+": jp, "J-": jp.T.copy(), "J0": np.diag(m).astype(complex)}
    if rep.algebra is Algebra.HW:
        ad = np.diag(np.sqrt(n[1:]), -1).astype(complex)
        return {"a+": ad, "a": ad.T.copy()}
    k = rep.param
    up = np.sqrt((n[:-1] + 1) * (n[:-1] + 2 * k))
    kp = np.diag(up, -1).astype(complex)
    return {"K+": kp, "K-": kp.T.copy(), "K0": np.diag(n + k).astype(complex)}


@dataclass
class StateVector:
    coefficients: np.ndarray
    truncation_tail: float = 0.0


def coherent_vector(rep: Representation, z: complex) -> StateVector:
    """Normalized coherent state ``|z>`` expanded in the weight basis."""
    z = complex(z)
    n = np.arange(rep.dimension)
    r2 = abs(z) ** 2
    if rep.algebra is Algebra.SU2:
        two_j = rep.dimension - 1
        log_binom = gammaln(two_j + 1) - gammaln(n + 1) - gammaln(two_j - n + 1)
        logmag = 0.5 * log_binom - 0.5 * two_j * np.log1p(r2)
        tail = 0.0
    elif rep.algebra is Algebra.HW:
        gamma = rep.param
        logmag = -0.5 * gamma * r2 + 0.5 * n * np.log(gamma) - 0.5 * gammaln(n + 1)
        tail = None
    else:
        k = rep.param
        if r2 >= 1:
            raise TruncationTooSevere("SU(1,1) coherent label outside the unit disk")
        # (2k)_n / n!
        log_poch = gammaln(2 * k + n) - gammaln(2 * k) - gammaln(n + 1)
        logmag = k * np.log1p(-r2) + 0.5 * log_poch
        tail = None
    if z != 0:
        coeffs = np.exp(logmag + n * np.log(abs(z))) * np.exp(1j * np.angle(z) * n)
    else:
        coeffs = np.zeros(rep.dimension, dtype=complex)
        coeffs[0] = 1.0
    if tail is None:
        tail = max(0.0, 1.0 - float(np.sum(np.abs(coeffs) ** 2)))
        if tail > TAIL_LIMIT:
            raise TruncationTooSevere(f"coherent tail {tail:.2e} beyond n_max={rep.dimension}")
    return StateVector(coeffs, tail)


def _term_operators(rep: Representation, h: HamiltonianSpec) -> list:
    """``(term, weight factor, operator)`` for each term of ``h``."""
    if h.algebra is not rep.algebra:
        raise ConfigError("Hamiltonian and representation algebras differ")
    mats = rep.matrices
    l = 2 * rep.param if rep.algebra is not Algebra.HW else rep.param
    out = []
    for term in h.terms:
        op = np.eye(rep.dimension, dtype=complex)
        for gen in canonical_word(h.algebra, term.generators):
            op = op @ mats[gen]
        out.append((term, term.weight_factor(l), op))
    return out


def _assemble(ops: list, dim: int, t: float) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    for term, factor, op in ops:
        c = term.coeff(t) * factor
        if c != 0:
            out += c * op
    return out


def hamiltonian_matrix(rep: Representation, h: HamiltonianSpec, t: float) -> np.ndarray:
    return _assemble(_term_operators(rep, h), rep.dimension, t)


def _magnus4(rep, h, tau, n):
    # fourth-order Magnus step with two Gauss-Legendre nodes
    dt = tau / n
    c1, c2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    ops = _term_operators(rep, h)
    dim = rep.dimension
    u = np.eye(dim, dtype=complex)
    for k in range(n):
        t0 = k * dt
        a1 = -1j * _assemble(ops, dim, t0 + c1 * dt)
        a2 = -1j * _assemble(ops, dim, t0 + c2 * dt)
        omega = 0.5 * dt * (a1 + a2) + (np.sqrt(3) / 12) * dt**2 * (a2 @ a1 - a1 @ a2)
        u = scipy.linalg.expm(omega) @ u
    return u


def evolve(rep: Representation, h: HamiltonianSpec, tau: float, steps: int = 16,
           tol: float = 1e-11, max_steps: int = 1 << 14) -> np.ndarray:
    """Time-ordered evolution operator over ``[0, tau]``.

    Time-independent Hamiltonians use a single exponential; otherwise Magnus
    steps are doubled until successive operators agree to ``tol`` (max norm).
    """
    if h.time_independent:
        return scipy.linalg.expm(-1j * tau * hamiltonian_matrix(rep, h, 0.0))
    n = max(1, int(steps))
    prev = _magnus4(rep, h, tau, n)
    while n < max_steps:
        n *= 2
        cur = _magnus4(rep, h, tau, n)
        if np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
    raise NoConvergence(f"evolution not converged at {n} steps")


def exact_amplitude(rep: Representation, h: HamiltonianSpec, z_i: complex, z_f: complex,
                    tau: float, steps: int = 16, tol: float = 1e-12,
                    max_steps: int = 1 << 14) -> complex:
    """``<z_F| T exp(-i int H) |z_I>`` from the matrix representation.

    For time-dependent Hamiltonians the Magnus steps are doubled and the
    fourth-order error is removed by Richardson extrapolation; doubling stops
    when the extrapolated amplitude (not the whole truncated operator)
    settles to ``tol``.
    """
    vi = coherent_vector(rep, z_i).coefficients
    vf = coherent_vector(rep, z_f).coefficients
    if tau <= 0:
        return complex(np.vdot(vf, vi))
    if h.time_independent:
        return complex(np.vdot(vf, evolve(rep, h, tau) @ vi))
    n = max(1, int(steps))
    raw = complex(np.vdot(vf, _magnus4(rep, h, tau, n) @ vi))
    prev = None
    while n < max_steps:
        n *= 2
        cur_raw = complex(np.vdot(vf, _magnus4(rep, h, tau, n) @ vi))
        cur = (16 * cur_raw - raw) / 15
        if prev is not None and abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        raw, prev = cur_raw, cur
    raise NoConvergence(f"evolution not converged at {n} steps")


def commutator_defect(rep: Representation) -> float:
    """Largest entrywise violation of the algebra relations."""
    m = rep.matrices
    comm = lambda a, b: a @ b - b @ a
    if rep.algebra is Algebra.SU2:
        d = [comm(m["J0"], m["J+"]) - m["J+"], comm(m["J0"], m["J-"]) + m["J-"],
             comm(m["J+"], m["J-"]) - 2 * m["J0"]]
        return max(float(np.max(np.abs(x))) for x in d)
    # truncated algebras: only the block away from the cut-off is meaningful
    s = slice(0, rep.dimension - 1)
    if rep.algebra is Algebra.HW:
        d = comm(m["a"], m["a+"]) - np.eye(rep.dimension)
        return float(np.max(np.abs(d[s, s])))
    d = [comm(m["K0"], m["K+"]) - m["K+"], comm(m["K0"], m["K-"]) + m["K-"],
         comm(m["K+"], m["K-"]) + 2 * m["K0"]]
    # entries grow like n^2, so report relative to the largest one
    scale = max(1.0, float(np.max(np.abs(m["K+"] @ m["K-"]))))
    return max(float(np.max(np.abs(x[s, s]))) for x in d) / scale


def resolution_of_unity(rep: Representation, n_radial: int = 400, n_angle: int | None = None) -> np.ndarray:
    """Quadrature of ``int |z><z| dmu`` for the spin representation.

    Radial integration uses ``u = r^2/(1+r^2)`` on Gauss-Legendre nodes; the
    angular integral is a uniform trapezoid, exact for the trigonometric
    polynomials involved.
    """
    if rep.algebra is not Algebra.SU2:
        raise ConfigError("resolution of unity check implemented for SU2 only")
    dim = rep.dimension
    n_angle = n_angle or 2 * dim + 2
    x, w = np.polynomial.legendre.leggauss(n_radial)
    u = 0.5 * (x + 1)
    wu = 0.5 * w
    r = np.sqrt(u / (1 - u))
    # density (2j+1)/(1+r^2)^2 * r dr dtheta / pi, with r dr = du / (2 (1-u)^2)
    theta = 2 * np.pi * np.arange(n_angle) / n_angle
    acc = np.zeros((dim, dim), dtype=complex)
    for ri, wi, ui in zip(r, wu, u):
        dens = dim / (1 + ri**2) ** 2 / (2 * (1 - ui) ** 2)
        for th in theta:
            v = coherent_vector(rep, ri * np.exp(1j * th)).coefficients
            acc += (wi * dens * (2 * np.pi / n_angle) / np.pi) * np.outer(v, v.conj())
    return acc
