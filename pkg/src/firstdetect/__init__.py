"""First-detection-time statistics for partially distinguishable particles."""

from .detection import DetectionSpec, Mode, ProjectorPair, counting_projector, projectors
from .errors import (
    ConfigError,
    DefectiveMatrix,
    FirstDetectError,
    InsufficientSamples,
    NoDivergence,
    NumericalError,
)
from .lattice import Geometry, LatticeModel, evolution, many_body_hamiltonian
from .manybody import InternalGram, ManyBodyState, Species, initial_state, two_particle_state
from .resonance import degenerate_times, fit_divergence, scan_moduli
from .strobe import (
    Flag,
    StrobeProblem,
    Truncation,
    detection_statistics,
    direct_protocol_oracle,
    mean_first_detection_time,
)
from .sweep import SweepConfig, load_config, reproduce_fig3, run_sweep

__all__ = [
    "ConfigError", "DefectiveMatrix", "DetectionSpec", "FirstDetectError", "Flag", "Geometry",
    "InsufficientSamples", "InternalGram", "LatticeModel", "ManyBodyState", "Mode", "NoDivergence",
    "NumericalError", "ProjectorPair", "Species", "StrobeProblem", "SweepConfig", "Truncation",
    "counting_projector", "degenerate_times", "detection_statistics", "direct_protocol_oracle",
    "evolution", "fit_divergence", "initial_state", "load_config", "many_body_hamiltonian",
    "mean_first_detection_time", "projectors", "reproduce_fig3", "run_sweep", "scan_moduli",
    "two_particle_state",
]
