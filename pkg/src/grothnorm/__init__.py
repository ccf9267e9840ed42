"""Grothendieck, Schur and correlation norms with checkable SDP certificates."""

from .certificates import (
    ContractionDecomposition,
    NormCertificate,
    SchurDecomposition,
    VectorFamilies,
    verify,
)
from .matcore import (
    PSD_TOL,
    TOL_MATCH,
    is_psd,
    parse_matrix,
    pq_norm,
    read_matrix,
    schatten_norm,
    write_matrix,
)
from .norms import (
    contraction_decomp,
    corr_norm_C,
    corr_norm_Cprime,
    corr_problem,
    gamma2,
    gamma2_star,
    orthogonal_witness,
    schur_decomp,
)
from .sdp import TOL_SDP, SdpProblem, SdpSolution, solve

__version__ = "0.1.0"
