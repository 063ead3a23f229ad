"""Experiment configuration: schema, YAML parsing, and object construction.

The same pydantic models validate YAML config files handed to the CLI and
JSON request bodies posted to the service, so both clients reject unknown
keys and out-of-range values with key-precise messages.
"""

from __future__ import annotations

import math
from importlib import resources
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .controllers import (
    ClassicalESParams,
    LieESParams,
    TargetParams,
    build_classical_averaged,
    build_classical_es,
    build_lie_es,
    build_target,
    recommended_flow_step,
)
from .errors import ConfigInvalid
from .hybrid import HybridSystem, SimulationConfig
from .plants import HarmonicDither, QuadraticCost

ControllerKind = Literal["target", "lie_es", "classical_es", "classical_avg"]


class HarmonicSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    amplitude: float
    frequency: int = Field(ge=1)
    phase: float = 0.0


class DitherSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    period: float = Field(default=1.0, gt=0)
    channels: List[List[HarmonicSpec]] = Field(
        default_factory=lambda: [
            [HarmonicSpec(amplitude=math.sqrt(2.0), frequency=1)],
            [HarmonicSpec(amplitude=math.sqrt(2.0), frequency=2)],
        ]
    )


class QuadraticCostSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    q: List[List[float]] = Field(
        default_factory=lambda: [
            [math.sqrt(2.0) / 2.0, 0.5],
            [0.5, math.sqrt(2.0) / 2.0],
        ]
    )
    u_star: List[float] = Field(default_factory=lambda: [5.0, -5.0])


class CostSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    quadratic: QuadraticCostSpec = Field(default_factory=QuadraticCostSpec)


class ControllerParamsSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    k: float = Field(default=0.75, gt=0, lt=1)
    rho: float = Field(default=1.0, gt=0)
    epsilon: Optional[float] = Field(default=None, gt=0)
    a: Optional[float] = Field(default=None, gt=0)
    omega: Optional[float] = Field(default=None, gt=0)


class SimulationSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    max_t: float = Field(default=50.0, gt=0)
    max_j: int = Field(default=10000, ge=1)
    flow_step: Optional[float] = Field(default=None, gt=0)
    event_tol: float = Field(default=1e-9, gt=0)
    min_flow_after_jump: float = Field(default=1e-9, ge=0)
    record_every: Optional[int] = Field(default=None, ge=1)


class AnalysisSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dwell: bool = True
    stats: bool = True
    closeness_to_target: bool = False
    envelope: bool = False
    nu: float = Field(default=0.1, gt=0)
    closeness_horizon: float = Field(default=20.0, gt=0)
    closeness_grid: float = Field(default=1e-3, gt=0)
    beta1: Optional[float] = Field(default=None, gt=0)
    beta2: Optional[float] = Field(default=None, gt=0)


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    epsilon: List[float] = Field(default_factory=list)
    a: List[float] = Field(default_factory=list)
    omega: List[float] = Field(default_factory=list)
    rho: List[float] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    controller: ControllerKind = "lie_es"
    cost: CostSpec = Field(default_factory=CostSpec)
    dither: DitherSpec = Field(default_factory=DitherSpec)
    params: ControllerParamsSpec = Field(default_factory=ControllerParamsSpec)
    initial_state: Optional[List[float]] = None
    initial_tau: float = 0.0
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    output_dir: str = "runs"
    seed: int = 0

    @model_validator(mode="after")
    def _check_controller_params(self) -> "ExperimentConfig":
        if self.controller == "lie_es" and self.params.epsilon is None:
            raise ValueError("controller 'lie_es' requires params.epsilon")
        if self.controller == "classical_es" and (
            self.params.a is None or self.params.omega is None
        ):
            raise ValueError("controller 'classical_es' requires params.a and params.omega")
        n = len(self.cost.quadratic.u_star)
        q = self.cost.quadratic.q
        if len(q) != n or any(len(row) != n for row in q):
            raise ValueError(f"cost.quadratic.q must be {n}x{n} to match u_star")
        if len(self.dither.channels) != n and self.controller in ("lie_es", "classical_es"):
            raise ValueError(
                f"dither.channels must have {n} entries to match the cost dimension"
            )
        if self.initial_state is not None and len(self.initial_state) != 4 * n:
            raise ValueError(
                f"initial_state must list the 4n = {4 * n} components (u, y, e_u, e_y)"
            )
        return self


def _format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML experiment config; unknown keys and bad values are rejected
    with the offending key path."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigInvalid(f"top level must be a mapping, got {type(data).__name__}")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(_format_validation_error(exc)) from exc


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(), sort_keys=False)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def bundled_config(name: str = "paper_section5") -> ExperimentConfig:
    """Load one of the configs shipped with the package."""
    text = resources.files("etseek.configs").joinpath(f"{name}.yaml").read_text()
    return parse_config(text)


# ---------------------------------------------------------------------------
# construction of runtime objects from a validated config


def build_cost(cfg: ExperimentConfig) -> QuadraticCost:
    spec = cfg.cost.quadratic
    return QuadraticCost(np.array(spec.q), np.array(spec.u_star))


def build_dither(cfg: ExperimentConfig) -> HarmonicDither:
    chans = cfg.dither.channels
    nh = max(len(c) for c in chans)
    amps = np.zeros((len(chans), nh))
    freqs = np.ones((len(chans), nh))
    phases = np.zeros((len(chans), nh))
    for i, chan in enumerate(chans):
        for h, harm in enumerate(chan):
            amps[i, h] = harm.amplitude
            freqs[i, h] = harm.frequency
            phases[i, h] = harm.phase
    return HarmonicDither(cfg.dither.period, amps, freqs, phases)


def build_system(cfg: ExperimentConfig, cost=None, dither=None) -> HybridSystem:
    cost = cost if cost is not None else build_cost(cfg)
    base = TargetParams(k=cfg.params.k, rho=cfg.params.rho)
    if cfg.controller == "target":
        return build_target(cost, base)
    if cfg.controller == "classical_avg":
        return build_classical_averaged(cost, base)
    dither = dither if dither is not None else build_dither(cfg)
    if cfg.controller == "lie_es":
        return build_lie_es(cost, LieESParams(base, cfg.params.epsilon, dither))
    return build_classical_es(
        cost, ClassicalESParams(base, cfg.params.a, cfg.params.omega, dither)
    )


def resolve_flow_step(cfg: ExperimentConfig) -> float:
    if cfg.simulation.flow_step is not None:
        return cfg.simulation.flow_step
    return recommended_flow_step(
        cfg.controller,
        dither_period=cfg.dither.period,
        epsilon=cfg.params.epsilon,
        omega=cfg.params.omega,
    )


def resolve_sim_config(cfg: ExperimentConfig) -> SimulationConfig:
    step = resolve_flow_step(cfg)
    record = cfg.simulation.record_every
    if record is None:
        # aim for ~1e-3 spacing between recorded samples
        record = max(1, round(1e-3 / step))
    return SimulationConfig(
        max_t=cfg.simulation.max_t,
        max_j=cfg.simulation.max_j,
        flow_step=step,
        event_tol=cfg.simulation.event_tol,
        min_flow_after_jump=cfg.simulation.min_flow_after_jump,
        record_every=record,
    )


def resolve_initial_state(cfg: ExperimentConfig) -> np.ndarray:
    n = len(cfg.cost.quadratic.u_star)
    if cfg.initial_state is None:
        base = np.zeros(4 * n)
    else:
        base = np.array(cfg.initial_state, dtype=float)
    if cfg.controller in ("lie_es", "classical_es"):
        return np.concatenate([base, [cfg.initial_tau]])
    return base
