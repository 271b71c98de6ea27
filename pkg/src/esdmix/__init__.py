"""Eigen-ratio constrained maximum likelihood for mixtures of elliptical distributions."""

from .asymptotics import (
    ContaminatedGaussian,
    GaussianLaw,
    ShiftedMixtureSpec,
    UniformBall,
    UniformCube,
    central_set_containment,
    mc_population_loglik,
    run_consistency_experiment,
    run_separation_experiment,
    sample_mixture,
)
from .em import (
    FitConfig,
    FitResult,
    check_finite_sample_existence,
    e_step,
    fit,
    init_params,
    m_step_gaussian,
    m_step_student_t,
)
from .erc import ErcConfig, feasibility_truncate, optimal_constrained_eigenvalues, satisfies_erc
from .esd import Scatter, density_upper_bound, esd_log_density, mahalanobis_sq, make_scatter
from .generators import DensityGenerator, check_population_tail, eval_log_g, min_sample_size
from .mixture import (
    MixtureParams,
    log_mixture_density,
    map_classify,
    param_distance,
    posterior,
    sample_loglik,
)

__version__ = "0.1.0"
