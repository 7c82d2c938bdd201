"""freeclt: a numerical laboratory for semicircular central limits of
dependent random-matrix processes."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    NoiseFloorError,
    NonConvergenceError,
    NumericError,
)
from .spectral import (
    ComplexPoint,
    HermitianSample,
    SemicircleLaw,
    SpectralMeasure,
    empirical_stieltjes,
    eigenvalues,
    hermitize,
    ks_distance,
    normalized_trace,
    semicircle_moment,
    semicircle_stieltjes,
    stieltjes_distance,
    stieltjes_distances,
)
from .solver import (
    FixedPointConfig,
    SandwichRadius,
    ScalarRadius,
    continuation_path,
    solve_semicircle_operator,
    solve_semicircle_scalar,
)
from .rng import RngStream
from .ensembles import (
    EnsembleSpec,
    IndexedSample,
    load_indexed,
    replicas,
    sample,
    sample_exchangeable_graphon,
    sample_free_sum_summand,
    sample_gue,
    sample_haar_unitary,
    sample_partitioned_diagonals,
    sample_stationary_field,
    sample_ustat_kernel,
    sample_ustat_outer,
    save_indexed,
)
from .mixing import (
    MixingProfile,
    MixingRow,
    TestDictionary,
    alpha_profile_ar1,
    covariance_gap_check,
    covariance_mixing_bound,
    default_dictionary,
    estimate_free_mixing_j,
    estimate_free_mixing_s,
    estimate_global_mixing,
    estimate_marginal_mixing,
    frozen_l2_norm,
    mixing_profile,
)
from .cltlab import (
    ConvergenceReport,
    FitResult,
    RadiusEstimate,
    ReportRow,
    berry_esseen_sweep,
    estimate_marginal_average,
    estimate_radius_stationary,
    estimate_radius_ustat,
    kargin_condition_check,
    normalized_sum,
    nu_sweep,
    rate_fit,
    single_coordinate_radius,
    ustat_sum,
)
from .runner import ExperimentConfig, RunManifest, parse_config, run
