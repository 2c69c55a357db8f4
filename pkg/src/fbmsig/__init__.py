"""Expected signatures, grid approximation and cubature for fractional
Brownian motion with Hurst parameter above one half."""

from .cubature import (
    AnsatzSolution,
    CubatureFormula,
    empirical_degree,
    formula_from_solution,
    rescale_formula,
    solve_ansatz,
    system_residuals,
    three_path_formula,
    verify_formula,
    word_weight,
    words_of_degree,
)
from .expected import (
    DecayReport,
    ExpectedWord,
    FbmParams,
    KernelConstant,
    QuadratureToleranceError,
    closed_form_value,
    covariance,
    decay_bound_check,
    expected_tensor,
    expected_word,
    scaling_exponent,
)
from .gridapprox import (
    BoundReport,
    CertifiedValue,
    GridCellCovariance,
    SlopeFit,
    approx_expected_word,
    cell_covariance_matrix,
    cell_pair_integral,
    coefficient_bound_check,
    constant_A,
    constant_Atilde,
    convergence_slope,
    sample_fbm,
    sample_fbm_batch,
    signature_gap,
)
from .matchings import (
    compatible_matchings,
    decomposition_bijection_check,
    enumerate_matchings,
    permutation_count,
    refined_count_bound,
)
from .sde import (
    ErrorBoundParams,
    SolveReport,
    VectorFieldSet,
    cubature_weak_value,
    error_bound_shape,
    mc_weak_value,
    ode_along_path,
    run_compare,
)
from .simplexquad import QuadConfig, QuadResult, matching_simplex_integral
from .tensor import (
    PiecewiseLinearPath,
    TruncatedTensor,
    Word,
    chen_concat,
    path_signature,
    segment_exponential,
)

__version__ = "0.1.0"
