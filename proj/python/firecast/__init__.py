"""Two-stage wildfire forecasting: gradient boosting feeding a latent Gaussian hurdle model."""

from ._core import (
    BoostConfig,
    ConfigError,
    ConvergenceError,
    DimensionError,
    DomainError,
    IoError,
    Loss,
    ParameterError,
    TreeEnsemble,
    auc,
    crps_from_samples,
    egp_cdf,
    egp_pdf,
    egp_quantile,
    egp_sample,
    egp_sigma_from_eta,
    pc_prior_kappa_approx,
    pc_prior_kappa_exact,
    pc_prior_xi,
    run_pipeline,
    sha256_hex,
    simulate,
    train,
    trunc_poisson_pmf,
    validate_config,
)

__all__ = [name for name in dir() if not name.startswith("_")]
