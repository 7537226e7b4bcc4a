"""Stationary determinantal point processes: spectral simulation, two-step
composite likelihood estimation, plug-in asymptotic covariance, and an
AIC-type model selection criterion, with a replication harness."""

from .errors import (
    ConfigError,
    DegenerateConfiguration,
    DegenerateLikelihood,
    DomainError,
    DppfitError,
    EmptyErosion,
    EstimationError,
    ExistenceViolated,
    InfoNotPD,
    NoPairs,
    NormalizerDegenerate,
    NoTuples,
    PatternFormatError,
    SamplerStall,
    TruncationFailure,
)
from .geometry import RectWindow, area, contains, erode, set_covariance
from .kernels import (
    CorrMatrix,
    Family,
    KernelModel,
    Theta,
    cauchy,
    check_existence,
    corr,
    corr_matrix,
    gaussian,
    grad_log_reduced,
    joint_intensity,
    laplace,
    reduced_joint_intensity,
    spectral_density,
)
from .patterns import PointPattern, close_pairs, close_tuples, count, empirical_pcf, read_csv, write_csv
from .sampler import RngStream, SpectralApprox, build_spectral_approx, sample_dpp, sample_poisson
from .estimator import (
    CLConfig,
    FitResult,
    cl2,
    clp,
    fit_alpha2,
    fit_alphap,
    fit_intensity,
    fit_two_step,
    normalizer_k2,
    normalizer_kp,
    score2,
)
from .inference import (
    AsymptoticBlocks,
    ICReport,
    SandwichResult,
    asymptotic_blocks,
    compare_models,
    ic2,
    info22,
    sandwich,
    sigma11,
    sigma12,
    sigma22,
)
from .harness import ExperimentConfig, ReplicationSummary, cmd_compare, cmd_fit, cmd_replicate, cmd_simulate

__version__ = "0.1.0"
