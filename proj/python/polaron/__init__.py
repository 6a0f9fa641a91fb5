"""Bose polaron quench simulator: mean-field and CI dynamics, fits, single shots."""

from ._polaron import (
    ConfigError,
    PolaronError,
    bec_scales,
    config_keys,
    damped_trajectory,
    fit_effective_parameters,
    frohlich_mass,
    ground_state,
    mean_field_shots,
    normalize_config,
    run_ci,
    run_mean_field,
    run_verb,
    sha256_hex,
)

__all__ = [
    "ConfigError",
    "PolaronError",
    "bec_scales",
    "config_keys",
    "damped_trajectory",
    "fit_effective_parameters",
    "frohlich_mass",
    "ground_state",
    "mean_field_shots",
    "normalize_config",
    "run_ci",
    "run_mean_field",
    "run_verb",
    "sha256_hex",
]
