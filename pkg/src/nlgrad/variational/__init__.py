"""Integral functionals of the nonlocal gradient: minimization, relaxation, homogenization."""
from .envelope import EnvelopeError, EnvelopeTable, convex_envelope, llt, lower_hull, sample_integrand
from .homogenization import CellResult, cell_average, homogenized_integrand
from .integrands import Integrand, double_well, power, quadratic, two_phase
from .problem import (
    InadmissibleError,
    MinimizeResult,
    VariationalProblem,
    affine_datum,
    descent,
    functional_eval,
    functional_gradient,
    minimize,
    solve_quadratic,
)
from .relaxation import envelope_for, laminate_sequence, minimize_relaxed, relaxed_functional_eval
from .sweeps import (
    bump_source,
    default_mask,
    double_well_envelope_error,
    gamma_sweep_s,
    homogenization_sweep,
    minimize_report,
    relaxation_sweep,
)
