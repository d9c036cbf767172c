"""scpp: simulation and estimation for Poisson processes with a smooth change-point."""

__version__ = "0.1.0"

from .estimators import EstimateResult, Prior, bayes_estimate, estimate, mle
from .intensity import (Baseline, IntensityModel, cumulative_intensity,
                        eval_intensity, fisher_F, fisher_information_regular,
                        limit_levels)
from .likelihood import (RateSchedule, char_fn_log_lr, hellinger_half_moment,
                         hellinger_increment, lan_central_term,
                         limit_char_fn, log_likelihood, log_lr)
from .limits import (RhoPath, TwoSidedPoissonPath, argsup_zstar,
                     bayes_functional_zstar, eval_zstar_log,
                     limit_functionals, reference_sample_zeta,
                     reference_samples, sample_gaussian_limit,
                     sample_rho_path, sample_zstar_path)
from .sampling import (SampleSet, Trajectory, sample_homogeneous_stream,
                       sample_observations, sample_trajectory,
                       sample_trajectory_inversion)

__all__ = [
    "Baseline", "IntensityModel", "cumulative_intensity", "eval_intensity",
    "fisher_F", "fisher_information_regular", "limit_levels",
    "RateSchedule", "log_likelihood", "log_lr", "lan_central_term",
    "hellinger_half_moment", "hellinger_increment", "char_fn_log_lr",
    "limit_char_fn",
    "Prior", "EstimateResult", "mle", "bayes_estimate", "estimate",
    "TwoSidedPoissonPath", "RhoPath", "sample_zstar_path", "sample_rho_path",
    "sample_gaussian_limit", "eval_zstar_log", "argsup_zstar",
    "bayes_functional_zstar", "limit_functionals", "reference_samples",
    "reference_sample_zeta",
    "SampleSet", "Trajectory", "sample_homogeneous_stream",
    "sample_observations", "sample_trajectory", "sample_trajectory_inversion",
    "__version__",
]
