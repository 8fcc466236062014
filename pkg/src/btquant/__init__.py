"""Numerical Berezin-Toeplitz quantization on the sphere and the torus.

Construct quantum Hilbert spaces (holomorphic section bases), Toeplitz and
geometric-quantization matrices, coherent states, Berezin symbols and
transforms, then verify the semiclassical theory by level sweeps with
inverse-power fits.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    IllConditioned,
    InvalidModulus,
    IoError,
    KernelZero,
    LevelInvalid,
    NonFiniteIntegrand,
    NonFiniteLog,
    NotPositiveDefinite,
    OracleMissing,
    QuantizationError,
    RankDeficient,
    UnderResolved,
    UnknownSelector,
)
from .geometry import (
    ChartPoint,
    KahlerModel,
    ModelKind,
    Observable,
    QuadratureRule,
    build_quadrature,
    constant_observable,
    derivative_selfcheck,
    integrate,
    laplacian,
    make_model,
    poisson_bracket,
    sample_chart_points,
    standard_observable,
)
from .sections import (
    OrthonormalFrame,
    SectionBasis,
    SphereBasis,
    TorusBasis,
    build_basis,
    gram_matrix,
    inner_product,
    orthonormalize,
    sphere_gram_closed_form,
)
from .operators import (
    OperatorMatrix,
    geometric_quantization,
    hs_inner,
    operator_norm,
    toeplitz,
    toeplitz_from_values,
    trace,
    tuynman_residual,
)
from .coherent import (
    CoherentVector,
    SymbolField,
    adjointness_check,
    bergman_kernel,
    berezin_transform,
    coherent_vector,
    contravariant_reconstruct,
    covariant_symbol,
    embedding_point,
    epsilon,
    epsilon_field,
    kernel_diagonal,
    kernel_pair_product,
    pullback_fs_density,
    symbol_field,
    trace_via_symbol,
    twisted_product,
    two_point_symbol,
)
from .asymptotics import (
    AsymptoticFit,
    LevelSweep,
    PreparedLevel,
    Report,
    ReportRow,
    check_berezin_expansion,
    check_dirac,
    check_norm_limit,
    check_product,
    check_trace_expansion,
    default_levels,
    extract_c1,
    fit_inverse_powers,
    level_frame,
    loglog_slope,
    prepare_level,
    sphere_harmonic_family,
    sup_norm,
    surjectivity_rank,
)
