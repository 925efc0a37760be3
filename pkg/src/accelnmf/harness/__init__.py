"""Data sources, experiments and the command line interface."""
from .experiment import (
    Curve, ExperimentResult, ExperimentSpec, FileSource, SynthSource,
    normalized_curve, parse_spec_file, run_experiment, time_to_threshold,
)
from .io import load_matrix
from .synth import init_factors, synth_matrix

__all__ = [
    "Curve", "ExperimentResult", "ExperimentSpec", "FileSource", "SynthSource",
    "normalized_curve", "parse_spec_file", "run_experiment", "time_to_threshold",
    "load_matrix", "init_factors", "synth_matrix",
]
