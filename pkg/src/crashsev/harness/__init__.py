"""Experiment matrix: configs, synthetic data, staged pipeline, runner, reports."""

from .config import (BASELINE, FEATURIZERS, MODELS, STAGE_ORDER, ExperimentConfig, Settings,
                     derive_seed)
from .pipeline import (ExperimentData, ExperimentResult, PipelineCache, RunManifest, StageError,
                       enumerate_experiments, execute, run_experiment)
from .report import best_per_view, compute_rankings, emit_report, narrative_lift
from .runner import MatrixResult, run_matrix, simulate_schedule
from .synth import SynthParams, SyntheticData, generate_synthetic

__all__ = [
    "BASELINE", "FEATURIZERS", "MODELS", "STAGE_ORDER", "ExperimentConfig", "ExperimentData",
    "ExperimentResult", "MatrixResult", "PipelineCache", "RunManifest", "Settings", "StageError",
    "SynthParams", "SyntheticData", "best_per_view", "compute_rankings", "derive_seed",
    "emit_report", "enumerate_experiments", "execute", "generate_synthetic", "narrative_lift",
    "run_experiment", "run_matrix", "simulate_schedule",
]
