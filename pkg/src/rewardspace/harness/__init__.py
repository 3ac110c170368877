"""Config-driven experiment harness and CLI."""

from .config import (
    CLASSIFIERS,
    EXPERIMENTS,
    METHODS,
    ExperimentConfig,
    load_config,
    resolve_config,
)
from .oracle import (
    cutoff_success_probability,
    secretary_dp_oracle,
    simulate_cutoff_success,
)
from .runner import (
    ExperimentReport,
    build_environment,
    emit_plot_data,
    engine_options,
    featurize_stage,
    irl_stage,
    recognize_stage,
    run_experiment,
    simulate_cell,
    simulate_stage,
)

__all__ = [
    "CLASSIFIERS",
    "EXPERIMENTS",
    "METHODS",
    "ExperimentConfig",
    "ExperimentReport",
    "build_environment",
    "cutoff_success_probability",
    "emit_plot_data",
    "engine_options",
    "featurize_stage",
    "irl_stage",
    "load_config",
    "recognize_stage",
    "resolve_config",
    "run_experiment",
    "secretary_dp_oracle",
    "simulate_cell",
    "simulate_cutoff_success",
    "simulate_stage",
]
