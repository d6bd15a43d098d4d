"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class PropagatorError(Exception):
    code = "error"


class ConfigError(PropagatorError):
    code = "config"


class BranchPoint(PropagatorError):
    code = "branch_point"


class ChartDomain(PropagatorError):
    code = "chart_domain"


class ChartOverflow(PropagatorError):
    code = "chart_overflow"


class StepTooLarge(PropagatorError):
    code = "step_too_large"


class IncompatibleAlgebra(PropagatorError):
    code = "incompatible_algebra"


class InvalidSpin(PropagatorError):
    code = "invalid_spin"


class TruncationTooSevere(PropagatorError):
    code = "truncation_too_severe"


class MoebiusPole(PropagatorError):
    code = "moebius_pole"


class IntegratorFailure(PropagatorError):
    code = "integrator_failure"


class NoConvergence(PropagatorError):
    code = "no_convergence"


class MultipleSolutionsSuspected(PropagatorError):
    code = "multiple_solutions_suspected"


class DegenerateWronskian(PropagatorError):
    code = "degenerate_wronskian"


class QuadratureUnresolved(PropagatorError):
    code = "quadrature_unresolved"


class CausticPrefactor(PropagatorError):
    code = "caustic_prefactor"


class NotFlat(PropagatorError):
    code = "not_flat"


class FitDegenerate(PropagatorError):
    code = "fit_degenerate"
