"""Rank-1 Kähler phase spaces: the sphere, the plane and the disk.

Everything here derives from the two-slot Kähler potential ``F(zbar1, z2)``.
The conjugate slot is always carried independently; diagonal evaluation
(``zbar == conj(z)``) is a thin wrapper around the two-slot primitive.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from qcprop.errors import BranchPoint, ChartDomain, ConfigError, StepTooLarge

# sympy symbols shared with the symbols module
ZB, Z, L = sp.symbols("zb z l")


class Kind(str, enum.Enum):
    SPHERE = "sphere"
    PLANE = "plane"
    DISK = "disk"


@dataclass(frozen=True)
class PhaseSpaceGeometry:
    """A rank-1 Kähler phase space of weight ``l``.

    Sphere weights are ``l = 2j`` (a positive integer), plane weights are the
    dimensionless index ``gamma > 0`` and disk weights are ``l = 2k > 1``.
    """

    kind: Kind
    weight: float

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        w = float(self.weight)
        if not np.isfinite(w) or w <= 0:
            raise ConfigError(f"weight must be positive, got {self.weight}")
        if kind is Kind.SPHERE and abs(w - round(w)) > 1e-12:
            raise ConfigError(f"sphere weight 2j must be a positive integer, got {w}")
        if kind is Kind.DISK and w <= 1:
            raise ConfigError(f"disk weight 2k must exceed 1, got {w}")
        object.__setattr__(self, "weight", w)

    @classmethod
    def sphere(cls, j: float) -> "PhaseSpaceGeometry":
        return cls(Kind.SPHERE, 2 * j)

    @classmethod
    def plane(cls, gamma: float) -> "PhaseSpaceGeometry":
        return cls(Kind.PLANE, gamma)

    @classmethod
    def disk(cls, k: float) -> "PhaseSpaceGeometry":
        return cls(Kind.DISK, 2 * k)

    @classmethod
    def from_record(cls, rec: dict) -> "PhaseSpaceGeometry":
        try:
            return cls(Kind(str(rec["kind"]).lower()), rec["weight"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad geometry record {rec!r}: {exc}") from exc

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "weight": self.weight}

    @property
    def l(self) -> float:
        return self.weight

    @property
    def spin(self) -> float:
        if self.kind is not Kind.SPHERE:
            raise ValueError("spin only defined on the sphere")
        return self.weight / 2


def _sign(g: PhaseSpaceGeometry) -> int:
    # 1 + s*zbar*z is the log argument on the sphere (s=+1) and disk (s=-1)
    return 1 if g.kind is Kind.SPHERE else -1


def log_argument(g: PhaseSpaceGeometry, zbar1, z2):
    """``1 + zbar1*z2`` (sphere) or ``1 - zbar1*z2`` (disk)."""
    if g.kind is Kind.PLANE:
        raise ValueError("the plane potential has no logarithm")
    return 1 + _sign(g) * np.multiply(zbar1, z2)


def _check_nonzero(arg):
    if np.any(np.asarray(arg) == 0):
        raise BranchPoint("logarithm argument of the Kähler potential vanishes")


def kahler_potential(g: PhaseSpaceGeometry, zbar1, z2):
    """Two-slot Kähler potential ``F(zbar1, z2)`` on the principal branch.

    Sphere ``l*log(1 + zbar1 z2)``, plane ``gamma*zbar1*z2``,
    disk ``-l*log(1 - zbar1 z2)``. Works elementwise on arrays.
    """
    if g.kind is Kind.PLANE:
        return g.weight * np.multiply(zbar1, z2) + 0j
    arg = log_argument(g, zbar1, z2) + 0j
    _check_nonzero(arg)
    return _sign(g) * g.weight * np.log(arg)


def kahler_potential_diag(g: PhaseSpaceGeometry, z) -> float:
    return np.real(kahler_potential(g, np.conj(z), z))


def potential_gradient(g: PhaseSpaceGeometry, zbar, z):
    """Return ``(dF/dz, dF/dzbar)`` at independent slots."""
    if g.kind is Kind.PLANE:
        return g.weight * zbar, g.weight * z
    arg = log_argument(g, zbar, z)
    _check_nonzero(arg)
    return g.weight * zbar / arg, g.weight * z / arg


def metric(g: PhaseSpaceGeometry, zbar, z):
    """Mixed second derivative of ``F``: the Kähler metric coefficient."""
    if g.kind is Kind.PLANE:
        return g.weight * np.ones_like(np.multiply(zbar, z)) + 0j
    arg = log_argument(g, zbar, z) + 0j
    _check_nonzero(arg)
    return g.weight / arg**2


def metric_gradient(g: PhaseSpaceGeometry, zbar, z):
    """Return ``(dg/dz, dg/dzbar)`` of the metric coefficient."""
    if g.kind is Kind.PLANE:
        zero = 0j * np.multiply(zbar, z)
        return zero, zero
    arg = log_argument(g, zbar, z) + 0j
    _check_nonzero(arg)
    s = _sign(g)
    return -2 * s * g.weight * zbar / arg**3, -2 * s * g.weight * z / arg**3


def overlap(g: PhaseSpaceGeometry, z1, z2):
    """Normalized coherent-state overlap ``<z1|z2>``."""
    f12 = kahler_potential(g, np.conj(z1), z2)
    f11 = kahler_potential(g, np.conj(z1), z1).real
    f22 = kahler_potential(g, np.conj(z2), z2).real
    return np.exp(f12 - 0.5 * f11 - 0.5 * f22)


def log_overlap(g: PhaseSpaceGeometry, zbar_f, z_i):
    """``log <z_F|z_I>`` with ``z_F = conj(zbar_f)``, principal branch in ``F``."""
    return (kahler_potential(g, zbar_f, z_i)
            - 0.5 * kahler_potential_diag(g, np.conj(zbar_f))
            - 0.5 * kahler_potential_diag(g, z_i))


def liouville_density(g: PhaseSpaceGeometry, zbar, z) -> float:
    """Density multiplying ``dz dzbar / (2 pi i)`` so that the coherent states
    resolve the identity."""
    x = np.real(np.multiply(zbar, z))
    if g.kind is Kind.PLANE:
        return g.weight * np.ones_like(x)
    if g.kind is Kind.SPHERE:
        return (g.weight + 1) / (1 + x) ** 2
    if np.any(x >= 1):
        raise ChartDomain("disk point outside the unit disk")
    return (g.weight - 1) / (1 - x) ** 2


def check_diagonal(g: PhaseSpaceGeometry, z) -> None:
    if g.kind is Kind.DISK and np.any(np.abs(z) >= 1):
        raise ChartDomain(f"disk point |z| >= 1: {z}")
    if not np.all(np.isfinite(z)):
        raise ChartDomain("non-finite chart point")


def potential_expr(g: PhaseSpaceGeometry) -> sp.Expr:
    """Symbolic ``F(ZB, Z)`` with the weight substituted."""
    w = sp.nsimplify(g.weight)
    if g.kind is Kind.PLANE:
        return w * ZB * Z
    if g.kind is Kind.SPHERE:
        return w * sp.log(1 + ZB * Z)
    return -w * sp.log(1 - ZB * Z)


def metric_expr(g: PhaseSpaceGeometry) -> sp.Expr:
    return sp.simplify(sp.diff(potential_expr(g), ZB, Z))


def _branch_distance(g: PhaseSpaceGeometry, zbar, z) -> float:
    if g.kind is Kind.PLANE:
        return np.inf
    return abs(log_argument(g, zbar, z)) / (1 + abs(zbar) + abs(z))


def mixed_fd(f: Callable, zbar, z, h: float = 1e-4):
    """Central-difference ``d^2 f / dzbar dz`` for ``f`` holomorphic in each slot."""
    return (f(zbar + h, z + h) - f(zbar + h, z - h)
            - f(zbar - h, z + h) + f(zbar - h, z - h)) / (4 * h * h)


def laplace_beltrami(g: PhaseSpaceGeometry, f, zbar, z, step: float = 1e-4):
    """Laplace-Beltrami operator ``g^{-1} d^2 f / dzbar dz`` at one point.

    ``f`` may be a sympy expression in ``ZB, Z``, an object with a
    ``mixed(zbar, z)`` method returning the analytic mixed derivative, or a
    plain callable ``f(zbar, z)`` which is differentiated numerically.
    """
    gz = metric(g, zbar, z)
    if isinstance(f, sp.Expr):
        mixed = complex(sp.diff(f, ZB, Z).subs({ZB: zbar, Z: z}).evalf())
    elif hasattr(f, "mixed"):
        mixed = f.mixed(zbar, z)
    else:
        if step >= 0.1 * _branch_distance(g, zbar, z):
            raise StepTooLarge(f"stencil step {step} too close to the branch locus")
        mixed = mixed_fd(f, zbar, z, step)
    return mixed / gz


def laplace_expr(g: PhaseSpaceGeometry, expr: sp.Expr) -> sp.Expr:
    """Symbolic Laplace-Beltrami operator applied to ``expr(ZB, Z)``."""
    return sp.cancel(sp.diff(expr, ZB, Z) / metric_expr(g))


def unwrapped_log(arg: np.ndarray) -> tuple[np.ndarray, int]:
    """Continuous log along a sampled path starting on the principal branch.

    Returns the log values and the net number of ``2*pi`` corrections.
    """
    arg = np.asarray(arg, dtype=complex)
    _check_nonzero(arg)
    principal = np.log(arg)
    imag = np.unwrap(principal.imag)
    winding = int(np.rint((imag[-1] - principal.imag[-1]) / (2 * np.pi)))
    return principal.real + 1j * imag, winding
