"""Python access to the stabilis simulator core.

Probabilities are integer numerators over 2**(b*W); exact quantities such as
the total probability come back as ``fractions.Fraction``.
"""

from fractions import Fraction

from ._core import (
    CapacityViolation,
    Config,
    ConfigError,
    DeltaFormula,
    Error,
    EstimatorTable,
    Infeasible,
    OutOfRange,
    PreconditionViolated,
    Rational,
    Strategy,
    StrategyMismatch,
    TargetMismatch,
    World,
    apply_visibility_floor,
    approx_decision,
    average_with_residue,
    decrease,
    deletion_threshold,
    delta_analytic,
    measure_convergence,
    measure_holding,
    prob_from_numerator,
    verify,
)

_EXACT_FIELDS = ("P", "phi_sq", "phi_minmax", "phi_mu")


def snapshot(world):
    """Metrics of ``world`` with exact fields as Fractions."""
    s = world.snapshot()
    for key in _EXACT_FIELDS:
        s[key] = Fraction(s[key])
    return s


__all__ = [name for name in dir() if not name.startswith("_")]
