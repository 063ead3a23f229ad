"""Experiment configuration: parsing, validation, defaults, and resolution
into runtime objects."""

import math

import numpy as np
import pytest

from etseek import ExperimentConfig, bundled_config, parse_config
from etseek.config import (
    build_cost,
    build_dither,
    build_system,
    resolve_flow_step,
    resolve_initial_state,
    resolve_sim_config,
    serialize_config,
)
from etseek.errors import ConfigInvalid


def test_minimal_target_config_fills_defaults():
    cfg = parse_config("controller: target\n")
    assert cfg.controller == "target"
    assert cfg.params.k == 0.75
    assert cfg.params.rho == 1.0
    assert cfg.simulation.max_t == 50.0
    assert cfg.cost.quadratic.u_star == [5.0, -5.0]
    assert cfg.cost.quadratic.q[0][0] == pytest.approx(math.sqrt(2.0) / 2.0)
    # default dither: two channels, harmonics 1 and 2, amplitude sqrt(2)
    assert [c[0].frequency for c in cfg.dither.channels] == [1, 2]


def test_probing_controller_requires_epsilon():
    with pytest.raises(ConfigInvalid, match="epsilon"):
        parse_config("controller: lie_es\n")


def test_classical_controller_requires_a_and_omega():
    with pytest.raises(ConfigInvalid, match="params.a and params.omega"):
        parse_config("controller: classical_es\nparams:\n  a: 0.1\n")


def test_nonpositive_epsilon_rejected_with_key_path():
    text = "controller: lie_es\nparams:\n  epsilon: -0.5\n"
    with pytest.raises(ConfigInvalid, match="epsilon"):
        parse_config(text)


def test_unknown_key_rejected_with_key_path():
    with pytest.raises(ConfigInvalid, match="dither_amplitude"):
        parse_config("controller: target\ndither_amplitude: 3\n")
    with pytest.raises(ConfigInvalid, match="simulation.steps"):
        parse_config("controller: target\nsimulation:\n  steps: 5\n")


def test_non_mapping_or_invalid_yaml_rejected():
    with pytest.raises(ConfigInvalid):
        parse_config("- a\n- b\n")
    with pytest.raises(ConfigInvalid):
        parse_config("controller: [unclosed\n")


def test_mismatched_cost_shape_rejected():
    text = (
        "controller: target\n"
        "cost:\n  quadratic:\n    q: [[1.0]]\n    u_star: [0.0, 0.0]\n"
    )
    with pytest.raises(ConfigInvalid, match="q must be"):
        parse_config(text)


def test_initial_state_length_checked():
    text = "controller: target\ninitial_state: [0, 0, 0]\n"
    with pytest.raises(ConfigInvalid, match="initial_state"):
        parse_config(text)


def test_round_trip_serialization():
    cfg = bundled_config()
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_bundled_reference_config_values():
    cfg = bundled_config()
    assert cfg.controller == "lie_es"
    assert cfg.params.epsilon == 0.04
    assert cfg.params.k == 0.75
    assert cfg.params.rho == 1.0
    assert cfg.simulation.max_t == 50.0
    assert cfg.initial_state == [0.0] * 8
    assert cfg.sweep.epsilon == [0.08, 0.04, 0.02]


def test_build_cost_and_dither():
    cfg = bundled_config()
    cost = build_cost(cfg)
    assert cost.dimension == 2
    assert np.allclose(cost.u_star, [5.0, -5.0])
    dither = build_dither(cfg)
    assert dither.dimension == 2
    assert np.allclose(dither(0.25), [math.sqrt(2.0), 0.0], atol=1e-12)


def test_build_system_dimensions():
    for controller, dim in (
        ("target", 8),
        ("classical_avg", 8),
        ("lie_es", 9),
    ):
        cfg = ExperimentConfig.model_validate(
            {"controller": controller, "params": {"epsilon": 0.04}}
        )
        assert build_system(cfg).dimension == dim
    cfg = ExperimentConfig.model_validate(
        {"controller": "classical_es", "params": {"a": 0.1, "omega": 10.0}}
    )
    assert build_system(cfg).dimension == 9


def test_flow_step_resolution_rules():
    cfg = ExperimentConfig.model_validate(
        {"controller": "lie_es", "params": {"epsilon": 0.04}}
    )
    assert resolve_flow_step(cfg) == pytest.approx(0.04**2 / 40.0)
    cfg = ExperimentConfig.model_validate({"controller": "target"})
    assert resolve_flow_step(cfg) == 0.01
    cfg = ExperimentConfig.model_validate(
        {"controller": "target", "simulation": {"flow_step": 0.5}}
    )
    assert resolve_flow_step(cfg) == 0.5


def test_sim_config_resolution_targets_millisecond_records():
    cfg = ExperimentConfig.model_validate(
        {"controller": "lie_es", "params": {"epsilon": 0.04}}
    )
    sim = resolve_sim_config(cfg)
    assert sim.flow_step * sim.record_every == pytest.approx(1e-3, rel=0.1)


def test_initial_state_resolution_appends_phase():
    cfg = ExperimentConfig.model_validate(
        {"controller": "lie_es", "params": {"epsilon": 0.04}, "initial_tau": 0.5}
    )
    x = resolve_initial_state(cfg)
    assert x.shape == (9,)
    assert x[8] == 0.5
    cfg = ExperimentConfig.model_validate({"controller": "target"})
    assert resolve_initial_state(cfg).shape == (8,)
