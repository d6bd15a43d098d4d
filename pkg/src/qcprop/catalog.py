"""Bundled example systems with known exact or reference behaviour."""
from __future__ import annotations

import copy

import numpy as np

from qcprop.errors import ConfigError
from qcprop.symbols import Algebra, HamiltonianSpec, Term, TimeCoefficient


def _term(gens, c=1.0, form="const", nu=0.0, lnorm="none") -> Term:
    return Term(tuple(gens), TimeCoefficient(c, form, nu), lnorm)


def su2_linear(A: float = 0.7, f: complex = 0.3 + 0.2j) -> HamiltonianSpec:
    """``2A J0 + f J+ + conj(f) J-``."""
    return HamiltonianSpec(Algebra.SU2, (_term(["J0"], 2 * A), _term(["J+"], f),
                                         _term(["J-"], np.conj(f))))


def oscillator(omega: float = 1.0) -> HamiltonianSpec:
    return HamiltonianSpec(Algebra.HW, (_term(["a+", "a"], omega),))


def parametric_amplifier(omega: float = 0.0, g: float = 0.5) -> HamiltonianSpec:
    """``omega a+a - (g/2)[a+^2 exp(-2 i omega t) + a^2 exp(2 i omega t)]``."""
    return HamiltonianSpec(Algebra.HW, (
        _term(["a+", "a"], omega),
        _term(["a+", "a+"], -g / 2, "exp", -2 * omega),
        _term(["a", "a"], -g / 2, "exp", 2 * omega)))


def footnote2(strength: float = 1.0) -> HamiltonianSpec:
    """Nonlinear spin Hamiltonian ``(J+^2 + J-^2)/(2j - 1)``."""
    return HamiltonianSpec(Algebra.SU2, (_term(["J+", "J+"], strength, lnorm="footnote2"),
                                         _term(["J-", "J-"], strength, lnorm="footnote2")))


def su11_linear(A: float = 0.6, f: complex = 0.1 + 0.05j) -> HamiltonianSpec:
    """``2A K0 + f K+ + conj(f) K-`` (elliptic for ``|f| < A``)."""
    return HamiltonianSpec(Algebra.SU11, (_term(["K0"], 2 * A), _term(["K+"], f),
                                          _term(["K-"], np.conj(f))))


def zero(algebra: Algebra | str) -> HamiltonianSpec:
    return HamiltonianSpec(Algebra(algebra), ())


HAMILTONIANS = {
    "su2_linear": su2_linear,
    "oscillator": oscillator,
    "parametric_amplifier": parametric_amplifier,
    "footnote2": footnote2,
    "su11_linear": su11_linear,
}

_CONFIGS = {
    "su2_linear": {
        "geometry": {"kind": "sphere", "weight": 4},
        "hamiltonian": {"example": "su2_linear"},
        "boundary": {"z_I": 0.4, "zbar_F": [-0.1, 0.5], "tau": 1.0},
    },
    "oscillator": {
        "geometry": {"kind": "plane", "weight": 1.0},
        "hamiltonian": {"example": "oscillator", "params": {"omega": 1.3}},
        "boundary": {"z_I": [0.5, 0.2], "zbar_F": [0.3, -0.6], "tau": 0.9},
    },
    "parametric_amplifier": {
        "geometry": {"kind": "plane", "weight": 1.0},
        "hamiltonian": {"example": "parametric_amplifier", "params": {"omega": 0.8, "g": 0.5}},
        "boundary": {"z_I": [0.3, 0.1], "zbar_F": [0.2, -0.4], "tau": 1.0},
    },
    "footnote2": {
        "geometry": {"kind": "sphere", "weight": 10},
        "hamiltonian": {"example": "footnote2"},
        "boundary": {"z_I": 0.3, "zbar_F": 0.2, "tau": 0.5},
    },
    "su11_linear": {
        "geometry": {"kind": "disk", "weight": 3.0},
        "hamiltonian": {"example": "su11_linear"},
        "boundary": {"z_I": [0.3, 0.1], "zbar_F": [-0.2, 0.25], "tau": 1.0},
    },
}


def example_config(name: str) -> dict:
    """A complete propagate config for a bundled example."""
    if name not in _CONFIGS:
        raise ConfigError(f"unknown example {name!r}; choose from {sorted(_CONFIGS)}")
    return copy.deepcopy(_CONFIGS[name])


def example_names() -> list[str]:
    return sorted(_CONFIGS)
