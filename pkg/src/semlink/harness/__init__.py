"""Experiment orchestration: configs, episodes, sweeps, comparisons and the CLI."""

from .config import ALLOCATORS, AXES, ConfigError, ExperimentConfig, load_config, make_config
from .experiment import (SWEEP_HEADER, Artifacts, EpisodeResult, build_artifacts,
                         compare_allocators, episode_plan, export_importance_map, load_artifacts,
                         run_analog_baseline, run_episode, run_sweep, train_policy,
                         write_training_curve)
