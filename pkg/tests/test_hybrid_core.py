"""Simulator core: RK4 stepping, event localization, hybrid-time bookkeeping,
termination classification, and CSV serialization."""

import math

import numpy as np
import pytest

from etseek import (
    HybridArc,
    HybridSystem,
    HybridTime,
    HybridTimeDomain,
    SimulationConfig,
    TargetParams,
    Termination,
    build_target,
    classify_termination,
    flow_step_rk4,
    localize_event,
    simulate,
)
from etseek.errors import (
    InitialOutsideDomain,
    NoCrossingFound,
    StepSizeInvalid,
    ZenoSuspected,
)
from etseek.hybrid import read_arc_csv

from conftest import REFERENCE_U_STAR


def scalar_system(flow, trigger=lambda s: -1.0, jump=lambda s: s.copy()):
    return HybridSystem.from_trigger(
        dimension=1, flow_map=flow, jump_map=jump, trigger=trigger
    )


# ---------------------------------------------------------------------------
# flow_step_rk4


def test_rk4_zero_field_keeps_state():
    sys_ = scalar_system(lambda s: np.zeros(1))
    out = flow_step_rk4(sys_, np.array([3.7]), 0.5)
    assert out[0] == 3.7


def test_rk4_constant_field_is_exact():
    sys_ = scalar_system(lambda s: np.ones(1))
    out = flow_step_rk4(sys_, np.array([0.0]), 0.25)
    assert out[0] == 0.25


def test_rk4_exponential_decay_single_step():
    # one RK4 step of x' = -x from 1 equals the 4th-order Taylor polynomial
    # of exp(-h) exactly; that in turn sits within the h^5/5! local error
    # of exp(-0.1) = 0.904837418...
    sys_ = scalar_system(lambda s: -s)
    out = flow_step_rk4(sys_, np.array([1.0]), 0.1)
    taylor = sum((-0.1) ** k / math.factorial(k) for k in range(5))
    assert abs(out[0] - taylor) <= 1e-15
    assert abs(out[0] - math.exp(-0.1)) <= 1e-7


def test_rk4_fourth_order_convergence():
    # halving the step reduces the endpoint error by ~16x (factor in [8, 32])
    sys_ = scalar_system(lambda s: -s)

    def endpoint_error(h):
        x = np.array([1.0])
        for _ in range(round(1.0 / h)):
            x = flow_step_rk4(sys_, x, h)
        return abs(x[0] - math.exp(-1.0))

    ratio = endpoint_error(0.02) / endpoint_error(0.01)
    assert 8.0 <= ratio <= 32.0


def test_rk4_rejects_nonpositive_step():
    sys_ = scalar_system(lambda s: -s)
    with pytest.raises(StepSizeInvalid):
        flow_step_rk4(sys_, np.array([1.0]), 0.0)


# ---------------------------------------------------------------------------
# localize_event


def test_localize_linear_crossing():
    sys_ = scalar_system(lambda s: np.ones(1), trigger=lambda s: s[0] - 1.0)
    state, dt = localize_event(
        sys_, np.array([0.9]), np.array([1.1]), 0.2, event_tol=1e-9
    )
    assert abs(state[0] - 1.0) <= 1e-9
    assert abs(dt - 0.1) <= 1e-8


def test_localize_degenerate_start_on_boundary():
    sys_ = scalar_system(lambda s: np.ones(1), trigger=lambda s: s[0] - 1.0)
    inside = np.array([1.0 - 1e-12])
    state, dt = localize_event(sys_, inside, np.array([1.2]), 0.2, event_tol=1e-9)
    assert dt == 0.0
    assert state[0] == inside[0]


def test_localize_requires_bracketing():
    sys_ = scalar_system(lambda s: np.ones(1), trigger=lambda s: s[0] - 1.0)
    with pytest.raises(NoCrossingFound):
        localize_event(sys_, np.array([0.5]), np.array([0.6]), 0.1, event_tol=1e-9)


def test_localize_trigger_residual_on_closed_loop(cost, base_params):
    # drive the error through the trigger boundary and check the residual
    system = build_target(cost, base_params)
    x = np.zeros(8)
    x[0:2] = [0.0, 0.0]  # far from u*, so y and e move quickly
    arc = simulate(system, x, SimulationConfig(max_t=10.0, max_j=3, flow_step=1e-3))
    assert arc.jump_count >= 1
    pre_jump = arc.intervals[0].states[-1]
    e = pre_jump[4:8]
    assert abs(e @ e - base_params.rho) <= 1e-6


# ---------------------------------------------------------------------------
# simulate


def test_equilibrium_gives_constant_zero_jump_arc(cost, base_params):
    system = build_target(cost, base_params)
    x0 = np.concatenate([REFERENCE_U_STAR, np.zeros(6)])
    arc = simulate(system, x0, SimulationConfig(max_t=5.0, max_j=100, flow_step=1e-2))
    assert arc.jump_count == 0
    assert arc.termination == Termination.HORIZON_REACHED
    assert np.allclose(arc.intervals[0].states, x0, atol=1e-12)


def test_initial_state_in_jump_set_jumps_at_time_zero(cost, base_params):
    system = build_target(cost, base_params)
    x0 = np.zeros(8)
    x0[4] = 2.0  # ||e||^2 = 4 >= rho
    arc = simulate(system, x0, SimulationConfig(max_t=1.0, max_j=100, flow_step=1e-2))
    assert arc.intervals[0].times[0] == 0.0
    assert arc.intervals[0].times[-1] == 0.0  # jump happened at (0, 0)
    post = arc.intervals[1].states[0]
    assert np.all(post[4:8] == 0.0)


def test_initial_state_outside_both_sets_raises():
    sys_ = HybridSystem(
        dimension=1,
        flow_map=lambda s: np.zeros(1),
        jump_map=lambda s: s.copy(),
        flow_indicator=lambda s: False,
        jump_indicator=lambda s: False,
    )
    with pytest.raises(InitialOutsideDomain):
        simulate(sys_, np.zeros(1), SimulationConfig(max_t=1.0, max_j=1, flow_step=0.1))


def test_left_domain_termination_after_jump():
    # the jump maps the state outside both sets
    sys_ = HybridSystem(
        dimension=1,
        flow_map=lambda s: np.zeros(1),
        jump_map=lambda s: np.array([5.0]),
        flow_indicator=lambda s: False,
        jump_indicator=lambda s: s[0] == 0.0,
    )
    arc = simulate(sys_, np.zeros(1), SimulationConfig(max_t=1.0, max_j=10, flow_step=0.1))
    assert arc.termination == Termination.LEFT_DOMAIN
    assert arc.jump_count == 1


def resetting_clock_system():
    """x' = 1, trigger at x = 1, jump resets to 0: jumps at t = 1, 2, 3, ..."""
    return scalar_system(
        lambda s: np.ones(1),
        trigger=lambda s: s[0] - 1.0,
        jump=lambda s: np.zeros(1),
    )


def test_jump_budget_termination():
    arc = simulate(
        resetting_clock_system(),
        np.zeros(1),
        SimulationConfig(max_t=10.0, max_j=2, flow_step=1e-2),
    )
    assert arc.jump_count == 2
    assert arc.termination == Termination.JUMP_BUDGET_EXHAUSTED
    assert np.allclose(arc.jump_times, [1.0, 2.0], atol=1e-8)


def test_zeno_guard_raises_with_partial_arc():
    # the jump leaves the state on the jump side, so gaps are zero
    sys_ = scalar_system(
        lambda s: np.ones(1), trigger=lambda s: s[0] - 1.0, jump=lambda s: s.copy()
    )
    with pytest.raises(ZenoSuspected) as err:
        simulate(sys_, np.array([2.0]), SimulationConfig(max_t=5.0, max_j=100, flow_step=0.1))
    partial = err.value.partial_arc
    assert partial is not None
    assert partial.termination == Termination.ZENO_SUSPECTED


def test_simulation_config_validation():
    for bad in (
        SimulationConfig(max_t=1.0, max_j=1, flow_step=0.0),
        SimulationConfig(max_t=0.0, max_j=1, flow_step=0.1),
        SimulationConfig(max_t=1.0, max_j=0, flow_step=0.1),
        SimulationConfig(max_t=1.0, max_j=1, flow_step=0.1, event_tol=0.0),
        SimulationConfig(max_t=1.0, max_j=1, flow_step=0.1, record_every=0),
    ):
        with pytest.raises(StepSizeInvalid):
            bad.validate()


def test_domain_well_formed_and_jump_consistent(cost, base_params):
    system = build_target(cost, base_params)
    arc = simulate(
        system, np.zeros(8), SimulationConfig(max_t=20.0, max_j=100, flow_step=1e-3)
    )
    assert arc.jump_count >= 2
    domain = arc.domain  # HybridTimeDomain validates contiguity on construction
    assert domain.max_hybrid_time == pytest.approx(20.0 + arc.jump_count)
    for before, after in zip(arc.intervals[:-1], arc.intervals[1:]):
        assert before.times[-1] == after.times[0]
        reconstructed = system.jump_map(before.states[-1])
        assert np.max(np.abs(reconstructed - after.states[0])) <= 1e-12
    for iv in arc.intervals:
        assert np.all(np.diff(iv.times) > 0)


def test_flow_samples_stay_in_flow_set(cost, base_params):
    system = build_target(cost, base_params)
    arc = simulate(
        system, np.zeros(8), SimulationConfig(max_t=10.0, max_j=100, flow_step=1e-3)
    )
    for iv in arc.intervals:
        residuals = np.sum(iv.states[:, 4:8] ** 2, axis=1) - base_params.rho
        assert np.all(residuals <= 1e-6)


def test_determinism_bit_identical(cost, base_params):
    system = build_target(cost, base_params)
    config = SimulationConfig(max_t=10.0, max_j=100, flow_step=1e-3)
    a = simulate(system, np.zeros(8), config)
    b = simulate(system, np.zeros(8), config)
    assert a.jump_count == b.jump_count
    for ia, ib in zip(a.intervals, b.intervals):
        assert np.array_equal(ia.times, ib.times)
        assert np.array_equal(ia.states, ib.states)


def test_fast_and_python_paths_agree(cost, base_params):
    fast = build_target(cost, base_params)
    slow = HybridSystem.from_trigger(
        dimension=fast.dimension,
        flow_map=fast.flow_map,
        jump_map=fast.jump_map,
        trigger=fast.trigger,
        state_names=fast.state_names,
    )
    assert fast.fast is not None and slow.fast is None
    config = SimulationConfig(max_t=5.0, max_j=100, flow_step=1e-2)
    a = simulate(fast, np.zeros(8), config)
    b = simulate(slow, np.zeros(8), config)
    assert a.jump_count == b.jump_count
    assert np.max(np.abs(a.final_state - b.final_state)) <= 1e-9


FROZEN_REFERENCE_FINAL = np.array(
    # endpoint of the event-triggered target system from the origin at t=50,
    # frozen from an independent adaptive integration (solve_ivp RK45,
    # rtol=atol=1e-12, terminal event on ||e||^2 = rho)
    [
        5.550608061295586,
        -5.550608061295509,
        0.2515167687145305,
        -0.25151676871450873,
        -0.6640155907100137,
        0.6640155907100715,
        0.14333114507559727,
        -0.14333114507556619,
    ]
)


def test_reference_endpoint_matches_independent_integrator(cost, base_params):
    system = build_target(cost, base_params)
    arc = simulate(
        system, np.zeros(8), SimulationConfig(max_t=50.0, max_j=10000, flow_step=1e-2)
    )
    assert arc.jump_count == 10
    assert np.max(np.abs(arc.final_state - FROZEN_REFERENCE_FINAL)) <= 1e-6
    # endpoint u sits on the residual cycle around u*, not at u* itself
    assert np.linalg.norm(arc.final_state[:2] - REFERENCE_U_STAR) == pytest.approx(
        0.7786773878, abs=1e-6
    )


# ---------------------------------------------------------------------------
# hybrid time types


def test_hybrid_time_validation():
    assert HybridTime(1.5, 2).total == 3.5
    with pytest.raises(ValueError):
        HybridTime(-0.1, 0)
    with pytest.raises(ValueError):
        HybridTime(0.0, -1)


def test_hybrid_time_domain_validation():
    good = HybridTimeDomain(((0.0, 1.0, 0), (1.0, 2.5, 1)))
    assert good.max_hybrid_time == 3.5
    assert good.jump_times == (1.0,)
    with pytest.raises(ValueError):
        HybridTimeDomain(((0.0, 1.0, 0), (1.5, 2.0, 1)))  # gap in t
    with pytest.raises(ValueError):
        HybridTimeDomain(((0.0, 1.0, 0), (1.0, 2.0, 2)))  # skipped j
    with pytest.raises(ValueError):
        HybridTimeDomain(((1.0, 0.5, 0),))  # reversed interval


def test_classify_termination_agrees_with_recorded_reason(cost, base_params):
    system = build_target(cost, base_params)
    config = SimulationConfig(max_t=5.0, max_j=100, flow_step=1e-2)
    arc = simulate(system, np.zeros(8), config)
    assert classify_termination(arc, config) == Termination.HORIZON_REACHED
    tight = SimulationConfig(max_t=20.0, max_j=1, flow_step=1e-2)
    arc2 = simulate(system, np.zeros(8), tight)
    assert classify_termination(arc2, tight) == Termination.JUMP_BUDGET_EXHAUSTED


# ---------------------------------------------------------------------------
# CSV serialization


def test_csv_round_trip(tmp_path, cost, base_params):
    system = build_target(cost, base_params)
    arc = simulate(
        system, np.zeros(8), SimulationConfig(max_t=8.0, max_j=100, flow_step=1e-2)
    )
    assert arc.jump_count >= 1
    path = tmp_path / "arc.csv"
    arc.write_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "t,j," + ",".join(arc.state_names)
    back = read_arc_csv(path)
    assert back.jump_count == arc.jump_count
    assert back.state_names == arc.state_names
    for ia, ib in zip(arc.intervals, back.intervals):
        assert ia.j == ib.j
        assert np.array_equal(ia.times, ib.times)  # 17 significant digits round-trip
        assert np.array_equal(ia.states, ib.states)


def test_csv_jump_rows_share_time(tmp_path):
    arc = simulate(
        resetting_clock_system(),
        np.zeros(1),
        SimulationConfig(max_t=2.5, max_j=10, flow_step=1e-2),
    )
    path = tmp_path / "clock.csv"
    arc.write_csv(path)
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    jumps = [
        (a, b)
        for a, b in zip(rows[:-1], rows[1:])
        if int(b[1]) == int(a[1]) + 1
    ]
    assert len(jumps) == arc.jump_count
    for before, after in jumps:
        assert before[0] == after[0]  # equal t on both sides of the jump
