"""Covariant Hamiltonian symbols and their chart derivatives.

Symbols of generator products are built symbolically: every generator acts on
the unnormalized coherent ket ``exp(z L+)|0>`` as a first-order differential
operator in ``z``, so ``<z1|L_1...L_n|z2> / <z1|z2>`` is a rational function of
``(zbar1, z2, l)``. Partial derivatives are compiled once per word and cached.
"""
from __future__ import annotations

import cmath
import enum
import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from qcprop.errors import ConfigError, IncompatibleAlgebra
from qcprop.geometry import (L, Z, ZB, Kind, PhaseSpaceGeometry, check_diagonal,
                             laplace_beltrami, laplace_expr, metric)


class Algebra(str, enum.Enum):
    SU2 = "SU2"
    HW = "HW"
    SU11 = "SU11"


ALGEBRA_FOR_KIND = {Kind.SPHERE: Algebra.SU2, Kind.PLANE: Algebra.HW, Kind.DISK: Algebra.SU11}

_ALIASES = {
    Algebra.SU2: {"J+": ("J+",), "J-": ("J-",), "J0": ("J0",), "Jz": ("J0",)},
    Algebra.HW: {"a": ("a",), "a+": ("a+",), "adag": ("a+",), "a†": ("a+",),
                 "n": ("a+", "a"), "a+a": ("a+", "a"), "a†a": ("a+", "a")},
    Algebra.SU11: {"K+": ("K+",), "K-": ("K-",), "K0": ("K0",)},
}


def canonical_word(algebra: Algebra, generators: Sequence[str]) -> tuple[str, ...]:
    table = _ALIASES[Algebra(algebra)]
    word: list[str] = []
    for name in generators:
        if name not in table:
            raise IncompatibleAlgebra(f"generator {name!r} not in {Algebra(algebra).value}")
        word.extend(table[name])
    return tuple(word)


# -- time dependence --------------------------------------------------------

@dataclass(frozen=True)
class TimeCoefficient:
    """``c`` times one of ``1, exp(i nu t), cos(nu t), sin(nu t)``."""

    c: complex = 1.0
    form: str = "const"
    nu: float = 0.0

    def __post_init__(self):
        if self.form not in ("const", "exp", "cos", "sin"):
            raise ConfigError(f"unknown time form {self.form!r}")
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "nu", float(self.nu))

    def __call__(self, t):
        if self.form == "const":
            return self.c
        if np.ndim(t):
            fn = {"exp": lambda x: np.exp(1j * x), "cos": np.cos, "sin": np.sin}[self.form]
            return self.c * fn(self.nu * np.asarray(t, dtype=float))
        if self.form == "exp":
            return self.c * cmath.exp(1j * self.nu * t)
        if self.form == "cos":
            return self.c * math.cos(self.nu * t)
        return self.c * math.sin(self.nu * t)

    @property
    def constant(self) -> bool:
        return self.form == "const" or self.nu == 0.0


@dataclass(frozen=True)
class Term:
    """One record ``coeff(t) * phi(l) * L_1 ... L_n``."""

    generators: tuple[str, ...]
    coeff: TimeCoefficient = field(default_factory=TimeCoefficient)
    lnorm: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.lnorm not in ("none", "footnote2"):
            raise ConfigError(f"unknown l-normalization {self.lnorm!r}")

    def weight_factor(self, l: float) -> float:
        if self.lnorm == "footnote2":
            if l <= 1:
                raise ConfigError("footnote2 normalization needs weight > 1")
            return 1.0 / (l - 1.0)
        return 1.0


@dataclass(frozen=True)
class HamiltonianSpec:
    algebra: Algebra
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "algebra", Algebra(self.algebra))
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            canonical_word(self.algebra, term.generators)

    @property
    def is_zero(self) -> bool:
        return all(t.coeff.c == 0 for t in self.terms)

    @property
    def is_linear(self) -> bool:
        """True when every term is a single algebra generator (``a+a`` counts as
        a generator of the oscillator algebra)."""
        for t in self.terms:
            word = canonical_word(self.algebra, t.generators)
            if len(word) > 1 and word != ("a+", "a"):
                return False
        return True

    @property
    def time_independent(self) -> bool:
        return all(t.coeff.constant for t in self.terms)

    @classmethod
    def from_records(cls, records, algebra: Algebra | str) -> "HamiltonianSpec":
        terms = []
        for rec in records:
            try:
                coeff = rec.get("coeff", 1.0)
                if isinstance(coeff, dict):
                    coeff = complex(coeff.get("re", 0.0), coeff.get("im", 0.0))
                time = rec.get("time", {"form": "const"})
                terms.append(Term(tuple(rec["generators"]),
                                  TimeCoefficient(coeff, time.get("form", "const"),
                                                  time.get("nu", 0.0)),
                                  rec.get("lnorm", "none")))
            except (KeyError, TypeError, AttributeError) as exc:
                raise ConfigError(f"bad term record {rec!r}: {exc}") from exc
        return cls(Algebra(algebra), tuple(terms))

    def to_records(self) -> list[dict]:
        out = []
        for t in self.terms:
            out.append({"generators": list(t.generators),
                        "coeff": {"re": t.coeff.c.real, "im": t.coeff.c.imag},
                        "time": {"form": t.coeff.form, "nu": t.coeff.nu},
                        "lnorm": t.lnorm})
        return out


def check_compatible(h: HamiltonianSpec, g: PhaseSpaceGeometry) -> None:
    if ALGEBRA_FOR_KIND[g.kind] is not h.algebra:
        raise IncompatibleAlgebra(f"{h.algebra.value} Hamiltonian on a {g.kind.value}")


# -- symbolic calculus -------------------------------------------------------

def _phi_z(algebra: Algebra) -> sp.Expr:
    # d/dz of log K(zb, z) per unit weight
    if algebra is Algebra.SU2:
        return ZB / (1 + ZB * Z)
    if algebra is Algebra.HW:
        return ZB
    return ZB / (1 - ZB * Z)


def _apply(algebra: Algebra, gen: str, r: sp.Expr) -> sp.Expr:
    """Act with a generator on ``K*r`` and return the new ``r`` (``K`` stripped)."""
    d = sp.diff(r, Z) + L * _phi_z(algebra) * r
    if algebra is Algebra.SU2:
        ops = {"J+": d, "J0": Z * d - L / 2 * r, "J-": L * Z * r - Z**2 * d}
    elif algebra is Algebra.SU11:
        ops = {"K+": d, "K0": Z * d + L / 2 * r, "K-": L * Z * r + Z**2 * d}
    else:
        ops = {"a+": d / sp.sqrt(L), "a": sp.sqrt(L) * Z * r}
    return sp.cancel(ops[gen])


@functools.lru_cache(maxsize=None)
def word_expr(algebra: Algebra, word: tuple[str, ...]) -> sp.Expr:
    """Symbolic two-slot symbol of the operator product ``word[0] @ word[1] @ ...``."""
    r = sp.Integer(1)
    # the rightmost operator acts on the ket first, but as differential
    # operators in the ket label the order is reversed
    for gen in word:
        r = _apply(algebra, gen, r)
    return sp.factor(r)


def partial_orders(order: int) -> list[tuple[int, int]]:
    """Partials ``(n_z, n_zbar)`` with total degree up to ``order``."""
    return [(i, n - i) for n in range(order + 1) for i in range(n, -1, -1)]


_compile_lock = threading.Lock()


@functools.lru_cache(maxsize=None)
def _compiled(algebra: Algebra, word: tuple[str, ...], order: int) -> Callable:
    with _compile_lock:
        expr = word_expr(algebra, word)
        exprs = [sp.diff(expr, Z, i, ZB, j) if (i or j) else expr
                 for i, j in partial_orders(order)]
        return sp.lambdify((ZB, Z, L), exprs, modules=[{"sqrt": math.sqrt}, "math"], cse=True)


@dataclass
class SymbolValue:
    """Symbol value with chart gradients (and optional second derivatives)."""

    value: complex
    dz: complex
    dzbar: complex
    dzz: complex = 0j
    dzbzb: complex = 0j
    dzzb: complex = 0j


class BoundHamiltonian:
    """A Hamiltonian bound to a geometry, with fast derivative evaluation."""

    def __init__(self, h: HamiltonianSpec, g: PhaseSpaceGeometry):
        check_compatible(h, g)
        self.h, self.g = h, g
        self._terms = [(t.coeff, t.weight_factor(g.weight),
                        canonical_word(h.algebra, t.generators)) for t in h.terms]

    def partials(self, zbar, z, t: float, order: int = 2):
        """Array of partials ordered as ``partial_orders(order)``."""
        n = len(partial_orders(order))
        shape = np.shape(np.multiply(np.multiply(zbar, z), np.ones_like(t, dtype=float)))
        out = np.zeros((n,) + shape, dtype=complex)
        for coeff, factor, word in self._terms:
            c = coeff(t) * factor
            if np.ndim(c) == 0 and c == 0:
                continue
            vals = _compiled(self.h.algebra, word, order)(zbar, z, self.g.weight)
            for k in range(n):
                out[k] = out[k] + c * vals[k]
        return out

    def value(self, zbar, z, t: float):
        return self.partials(zbar, z, t, 0)[0]

    def symbol(self, zbar, z, t: float) -> SymbolValue:
        p = self.partials(zbar, z, t, 2)
        # order: (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)
        return SymbolValue(p[0], p[1], p[2], p[3], p[5], p[4])

    def expr(self, t: float) -> sp.Expr:
        """Symbolic symbol at time ``t`` with the weight substituted."""
        total = sp.Integer(0)
        w = sp.nsimplify(self.g.weight)
        for coeff, factor, word in self._terms:
            c = coeff(t) * factor
            if c == 0:
                continue
            total += sp.sympify(complex(c)) * word_expr(self.h.algebra, word).subs(L, w)
        return total

    def mixed(self, zbar, z, t: float = 0.0):
        return self.partials(zbar, z, t, 2)[4]


def covariant_symbol(h: HamiltonianSpec, g: PhaseSpaceGeometry, zbar, z, t: float = 0.0) -> SymbolValue:
    """Two-slot covariant symbol ``<z1|H(t)|z2>/<z1|z2>`` with ``zbar1 = zbar``,
    ``z2 = z``, plus analytic chart derivatives."""
    if np.all(np.asarray(zbar) == np.conj(z)):
        check_diagonal(g, z)
    return BoundHamiltonian(h, g).symbol(zbar, z, t)


class Direction(str, enum.Enum):
    TO_CONTRAVARIANT = "ToContravariant"
    TO_COVARIANT = "ToCovariant"


def contravariant_asymptotic(h_cov, g: PhaseSpaceGeometry, zbar, z, t: float = 0.0,
                             direction: Direction | str = Direction.TO_CONTRAVARIANT,
                             step: float = 1e-4):
    """First-order Berezin relation between covariant and contravariant symbols.

    ``ToCovariant`` returns ``(1 + Delta) H`` and ``ToContravariant`` returns
    ``(1 - Delta) H``; both are correct to ``O(1/l^2)``. ``h_cov`` is a
    ``HamiltonianSpec`` (analytic derivatives at time ``t``), a sympy
    expression in ``ZB, Z``, or a callable ``f(zbar, z)``.
    """
    sign = 1 if Direction(direction) is Direction.TO_COVARIANT else -1
    if isinstance(h_cov, HamiltonianSpec):
        bound = BoundHamiltonian(h_cov, g)
        p = bound.partials(zbar, z, t, 2)
        return p[0] + sign * p[4] / metric(g, zbar, z)
    if isinstance(h_cov, sp.Expr):
        value = complex(h_cov.subs({ZB: zbar, Z: z}).evalf())
    else:
        value = h_cov(zbar, z)
    return value + sign * laplace_beltrami(g, h_cov, zbar, z, step)


def shifted_expr(g: PhaseSpaceGeometry, expr: sp.Expr, direction: Direction | str) -> sp.Expr:
    """Symbolic ``(1 +- Delta) expr`` for composing the asymptotic relation."""
    sign = 1 if Direction(direction) is Direction.TO_COVARIANT else -1
    return expr + sign * laplace_expr(g, expr)
