"""Implicit-function solver with Lipschitz perturbation certificates and dry-friction switching times."""

from .dryfriction import (
    Trajectory,
    family_F,
    integrate_system,
    proposition_one_check,
    rotate,
    unrotate,
    verify_assumption_F,
)
from .implicit import (
    FrozenJacobian,
    contraction_scan,
    cross_lipschitz_scan,
    frozen_jacobian,
    implicit_derivative,
    search_alpha,
    solve_implicit,
)
from .models import (
    ContractionCertificate,
    ImplicitProblem,
    OscillatorSpec,
    PerturbedFamily,
    SampleSpec,
    SolverConfig,
    SwitchReport,
    ThetaResult,
)
from .perturbation import (
    empirical_lipschitz_quotient,
    estimate_assumption_constants,
    scan_delta_ladder,
    solve_theta,
    theoretical_modulus,
)
from .problems import get_problem, list_problems, register_problem
from .problems.base import BaseProblem

__all__ = [
    'ImplicitProblem',
    'SolverConfig',
    'ContractionCertificate',
    'FrozenJacobian',
    'PerturbedFamily',
    'SampleSpec',
    'ThetaResult',
    'OscillatorSpec',
    'SwitchReport',
    'Trajectory',
    'frozen_jacobian',
    'solve_implicit',
    'implicit_derivative',
    'contraction_scan',
    'cross_lipschitz_scan',
    'search_alpha',
    'solve_theta',
    'theoretical_modulus',
    'empirical_lipschitz_quotient',
    'estimate_assumption_constants',
    'scan_delta_ladder',
    'rotate',
    'unrotate',
    'integrate_system',
    'family_F',
    'verify_assumption_F',
    'proposition_one_check',
    'BaseProblem',
    'get_problem',
    'list_problems',
    'register_problem',
]

__version__ = "0.1.0"
