"""Event-triggered extremum-seeking control as hybrid dynamical systems:
simulation, stability analysis, and a config-driven experiment service."""

__version__ = "0.1.0"

from .hybrid import (
    HybridArc,
    HybridSystem,
    HybridTime,
    HybridTimeDomain,
    SimulationConfig,
    Termination,
    classify_termination,
    flow_step_rk4,
    localize_event,
    simulate,
)
from .plants import (
    CostFunction,
    Dither,
    HarmonicDither,
    QuadraticCost,
    two_tone_dither,
    validate_dither,
)
from .controllers import (
    ClassicalESParams,
    ClosedLoopState,
    LieESParams,
    TargetParams,
    build_classical_averaged,
    build_classical_es,
    build_lie_es,
    build_target,
    hadamard_remainder,
)
from .analysis import (
    AttractorSpec,
    closeness,
    distance_to_attractor,
    dwell_time_check,
    lyapunov_V,
    practical_stability_envelope,
    trigger_stats,
)
from .config import ExperimentConfig, bundled_config, load_config, parse_config
from .experiment import run_experiment, run_sweep

__all__ = [
    "HybridArc",
    "HybridSystem",
    "HybridTime",
    "HybridTimeDomain",
    "SimulationConfig",
    "Termination",
    "classify_termination",
    "flow_step_rk4",
    "localize_event",
    "simulate",
    "CostFunction",
    "Dither",
    "HarmonicDither",
    "QuadraticCost",
    "two_tone_dither",
    "validate_dither",
    "ClassicalESParams",
    "ClosedLoopState",
    "LieESParams",
    "TargetParams",
    "build_classical_averaged",
    "build_classical_es",
    "build_lie_es",
    "build_target",
    "hadamard_remainder",
    "AttractorSpec",
    "closeness",
    "distance_to_attractor",
    "dwell_time_check",
    "lyapunov_V",
    "practical_stability_envelope",
    "trigger_stats",
    "ExperimentConfig",
    "bundled_config",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_sweep",
]
