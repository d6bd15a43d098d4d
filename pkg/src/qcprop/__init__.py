"""Quasiclassical coherent-state propagators on rank-1 Kähler phase spaces."""
from __future__ import annotations

from qcprop.dynamics import BoundaryData, SolverSettings
from qcprop.exact import Representation, exact_amplitude
from qcprop.geometry import PhaseSpaceGeometry
from qcprop.semiclassics import PropagatorResult, propagator_flat_alpha, propagator_qc
from qcprop.symbols import Algebra, HamiltonianSpec, Term, TimeCoefficient

__all__ = [
    "Algebra", "BoundaryData", "HamiltonianSpec", "PhaseSpaceGeometry", "PropagatorResult",
    "Representation", "SolverSettings", "Term", "TimeCoefficient", "exact_amplitude",
    "propagator_flat_alpha", "propagator_qc",
]
__version__ = "0.1.0"
