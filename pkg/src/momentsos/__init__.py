"""Moment relaxations for polynomial optimization with rank-based exactness certificates."""

from .certify import (
    Certificate,
    CertifySettings,
    RankReport,
    check_unconstrained_rank,
    check_flatness,
    check_rank_bound,
    certify,
    numerical_rank,
    rank_report,
)
from .extraction import (
    AtomicMeasure,
    ExtractionFailed,
    RecoveryFailed,
    dehomogenize,
    extract_atoms,
    extract_homogeneous_atoms,
    qcqp_recover,
    unconstrained_minimizers,
    verify_moments,
    verify_support,
    witness_polynomial,
)
from .moments import (
    HomMomentSequence,
    MomentSequence,
    dehomogenize_sequence,
    hom_moment_matrix,
    homogenize_sequence,
    localizing_matrix,
    moment_matrix,
    moments_of_atoms,
    riesz,
    truncate,
)
from .oracle import OracleResult, grid_min, multistart_local, oracle
from .poly import (
    Polynomial,
    Pop,
    dehomogenize_poly,
    evaluate,
    homogenize_poly,
    monomial_basis,
)
from .problem import ProblemError, ProblemFile, load_problem, parse_infix, parse_problem
from .relaxation import ConicProgram, PsdBlock, build_Qn, build_unconstrained, build_unconstrained_dual
from .sdp import SolveResult, SolverSettings, solve

__version__ = "0.1.0"
