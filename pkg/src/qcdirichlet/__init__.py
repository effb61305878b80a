"""Dirichlet solvers for plane Beltrami equations with sources and
divergence-form Poisson equations, built on quasiconformal factorization,
together with integral audits of boundary singularities.
"""

from .fields import (
    BoundaryData,
    ComplexField,
    DomainSpec,
    Grid,
    RealField,
    dilatation_quotient,
    field_from_callable,
    tangent_dilatation,
    wirtinger_derivatives,
)
from .transforms import (
    beurling_transform,
    cauchy_transform,
    log_potential,
    verify_regularity,
)
from .qcmap import (
    QCMap,
    TruncationLadder,
    homeomorphism_probe,
    invert,
    solve_degenerate,
    solve_mu_conformal,
)
from .harmonic import harmonic_conjugate, solve_dirichlet_harmonic
from .beltrami import (
    BeltramiProblem,
    BeltramiSolution,
    pushforward_source,
    residual_report,
    solve_beltrami,
    transfer_boundary,
)
from .poisson import (
    A_from_mu,
    MatrixField,
    PoissonProblem,
    PoissonSolution,
    divergence_identity_check,
    mu_from_A,
    pushforward_density,
    solve_poisson,
    weak_residual,
)
from .criteria import (
    CriterionVerdict,
    OrliczFunction,
    PsiFamily,
    bmo_norm,
    circle_mean,
    condition_equivalence_suite,
    cz_test,
    fmo_growth_check,
    fmo_test,
    lehto_test,
    mean_test,
    orlicz_test,
    psi_condition_test,
)
from .fieldio import export_field, import_field
from .config import parse_config

__version__ = "0.1.0"
