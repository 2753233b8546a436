"""L-BFGS under line-search and trust-region strategies, plus multi-batch and Q-learning drivers."""
from .direction import two_loop
from .errors import QNOptError
from .linalg import SpectralFactors, qr_rank_revealing, qr_thin, solve_small, sym_eig
from .linesearch import DriverConfig, WolfeParams, ls_minimize, wolfe_search
from .memory import (
    CompactFactors,
    CurvatureMemory,
    CurvaturePair,
    bfgs_dense,
    compact_rep,
    gamma,
    hessian_inverse_dense,
    try_accept_pair,
)
from .multibatch import (
    CostParams,
    OverlapGradient,
    OverlapSampler,
    combined_gradient,
    cost_ratio,
    multibatch_lbfgs,
    overlap_y,
    sgd_minimize,
)
from .records import CSV_FIELDS, IterationRecord, read_csv, write_csv
from .trustregion import TrConfig, TrSolution, radius_update, solve_subproblem, tr_minimize

__version__ = "0.1.0"
