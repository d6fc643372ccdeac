"""Filter-bank common spatial patterns for EEG mental-workload classification."""
from .classifier import GaussianNbModel
from .config import ExperimentConfig, PipelineConfig, RunConfig, load_run_config
from .csp import (CspTransform, average_covariance, log_variance_features, select_filters,
                  solve_csp, spatial_filter, trial_covariance)
from .data import (ArtifactPolicy, Epoch, Recording, extract_epochs, load_recording,
                   reject_artifacts, split_by_session)
from .filterbank import BandSpec, FilterBank, bandpass, decompose, default_bands
from .pipeline import (EvalReport, ModelKind, TrainedModel, bandpower_features, evaluate,
                       run_experiment, train)
from .selection import FeatureMatrix, mutual_information, rank_features, select_top_n_cv
from .synth import SourceSpec, SynthConfig, generate, ground_truth

__all__ = [
    "GaussianNbModel",
    "ExperimentConfig",
    "PipelineConfig",
    "RunConfig",
    "load_run_config",
    "CspTransform",
    "average_covariance",
    "log_variance_features",
    "select_filters",
    "solve_csp",
    "spatial_filter",
    "trial_covariance",
    "ArtifactPolicy",
    "Epoch",
    "Recording",
    "extract_epochs",
    "load_recording",
    "reject_artifacts",
    "split_by_session",
    "BandSpec",
    "FilterBank",
    "bandpass",
    "decompose",
    "default_bands",
    "EvalReport",
    "ModelKind",
    "TrainedModel",
    "bandpower_features",
    "evaluate",
    "run_experiment",
    "train",
    "FeatureMatrix",
    "mutual_information",
    "rank_features",
    "select_top_n_cv",
    "SourceSpec",
    "SynthConfig",
    "generate",
    "ground_truth",
]

__version__ = "0.1.0"
