"""Truncated skew-normal distribution: evaluation, sampling and estimation."""

from .errors import (
    DataOutsideWindowError,
    DegenerateWindowError,
    EstimationFailedError,
    InvalidParameterError,
    NumericalDegeneracyError,
    QuadratureError,
    TsnError,
)
from .estimators import (
    FitResult,
    GridSpec,
    Method,
    MleOptions,
    SampleStats,
    compute_stats,
    fit,
    fit_grid_mle,
    fit_grid_mom,
    fit_mle,
    fit_mom,
    fit_mom_stats,
    fit_mwm,
    fit_mwm_stats,
    solve_location_scale,
)
from .sampling import RngStream, TruncationDirection, sample_sn, sample_tsn, truncation_bounds
from .sn_core import (
    SnParams,
    TruncationWindow,
    TsnModel,
    owen_t,
    sn_cdf,
    sn_pdf,
    sn_quantile,
    std_normal_cdf,
    std_normal_pdf,
    tsn_cdf,
    tsn_loglik,
    tsn_pdf,
)
from .tsn_moments import (
    integrate,
    tsn_mean,
    tsn_phi_weighted_moment,
    tsn_raw_moment,
    tsn_variance,
)

__version__ = "0.1.0"
