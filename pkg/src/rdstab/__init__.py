"""Certify or refute robust diffusive stability of coupled positive linear systems."""

from .certificates import (
    CdlfSearch,
    CopositiveCert,
    DiagonalCert,
    find_cdlf,
    find_clclf,
    find_jlclf,
    stein_lyapunov_identity_residual,
    verify_diagonal_cert,
)
from .leslie import (
    LeslieCoupling,
    LeslieMatrix,
    build_s1_s2,
    common_right_vector,
    enumerate_coupling_class,
    row_selections,
    validate_leslie,
)
from .matcore import (
    assemble_coupled,
    is_irreducible,
    is_schur,
    no_supporting_vector,
    spectral_radius,
    symmetric_eigen_max,
)
from .rds import (
    CouplingClass,
    RdsVerdict,
    SystemPair,
    decide_rds,
    find_destabilizer,
    rho_coupled,
    simulate_coupled,
)

__version__ = "0.1.0"
