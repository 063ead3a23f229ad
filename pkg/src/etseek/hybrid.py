"""Hybrid dynamical systems: data model, deterministic simulator, arcs.

A system is the quadruple (C, F, D, G), represented by indicator predicates
for the flow and jump sets plus a flow map and a jump map.  Solutions live on
hybrid time domains indexed by (t, j).  The simulator uses fixed-step RK4
with bisection event localization and jumps whenever the jump set is reached
(deterministic jump priority on C ∩ D).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import (
    InitialOutsideDomain,
    NoCrossingFound,
    NonFiniteState,
    StepSizeInvalid,
    ZenoSuspected,
)


@dataclass(frozen=True)
class HybridTime:
    """A point (t, j) in hybrid time."""

    t: float
    j: int

    def __post_init__(self):
        if self.t < 0 or self.j < 0:
            raise ValueError(f"hybrid time must be nonnegative, got ({self.t}, {self.j})")

    @property
    def total(self) -> float:
        return self.t + self.j


@dataclass(frozen=True)
class HybridTimeDomain:
    """Ordered (t_start, t_end, j) triples with contiguous t and consecutive j."""

    intervals: Tuple[Tuple[float, float, int], ...]

    def __post_init__(self):
        prev_end = None
        for idx, (t0, t1, j) in enumerate(self.intervals):
            if t0 > t1:
                raise ValueError(f"interval {idx} has t_start {t0} > t_end {t1}")
            if j != idx:
                raise ValueError(f"interval {idx} has jump index {j}, expected {idx}")
            if prev_end is not None and t0 != prev_end:
                raise ValueError(
                    f"interval {idx} starts at t={t0}, previous interval ended at t={prev_end}"
                )
            prev_end = t1

    @property
    def max_hybrid_time(self) -> float:
        t0, t1, j = self.intervals[-1]
        return t1 + j

    @property
    def jump_times(self) -> Tuple[float, ...]:
        return tuple(t1 for (t0, t1, j) in self.intervals[:-1])


class Termination(enum.Enum):
    HORIZON_REACHED = "HorizonReached"
    JUMP_BUDGET_EXHAUSTED = "JumpBudgetExhausted"
    LEFT_DOMAIN = "LeftDomain"
    ZENO_SUSPECTED = "ZenoSuspected"


@dataclass
class ArcInterval:
    """Samples of one flow interval: times (strictly increasing) and states."""

    j: int
    times: np.ndarray
    states: np.ndarray


@dataclass
class HybridArc:
    """A simulated trajectory on a hybrid time domain."""

    intervals: List[ArcInterval]
    termination: Termination
    state_names: Tuple[str, ...]

    @property
    def dimension(self) -> int:
        return self.intervals[0].states.shape[1]

    @property
    def domain(self) -> HybridTimeDomain:
        return HybridTimeDomain(
            tuple((float(iv.times[0]), float(iv.times[-1]), iv.j) for iv in self.intervals)
        )

    @property
    def jump_count(self) -> int:
        return len(self.intervals) - 1

    @property
    def jump_times(self) -> np.ndarray:
        return np.array([iv.times[-1] for iv in self.intervals[:-1]])

    @property
    def final_time(self) -> float:
        return float(self.intervals[-1].times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.intervals[-1].states[-1].copy()

    @property
    def sample_count(self) -> int:
        return sum(iv.times.size for iv in self.intervals)

    def max_hybrid_time(self) -> float:
        return self.domain.max_hybrid_time

    def project(self, columns: Sequence[int]) -> "HybridArc":
        cols = list(columns)
        return HybridArc(
            intervals=[
                ArcInterval(iv.j, iv.times.copy(), iv.states[:, cols].copy())
                for iv in self.intervals
            ],
            termination=self.termination,
            state_names=tuple(self.state_names[c] for c in cols),
        )

    def write_csv(self, path) -> None:
        """One row per sample; a jump shows up as two rows with equal t and j+1."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "j"] + list(self.state_names))
            for iv in self.intervals:
                for t, x in zip(iv.times, iv.states):
                    writer.writerow([f"{t:.17g}", iv.j] + [f"{v:.17g}" for v in x])


def read_arc_csv(path) -> HybridArc:
    """Inverse of :meth:`HybridArc.write_csv` (termination is not stored)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = tuple(header[2:])
        rows = [(float(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    intervals: List[ArcInterval] = []
    cur_j = None
    ts: List[float] = []
    xs: List[List[float]] = []
    for t, j, x in rows:
        if cur_j is None:
            cur_j = j
        if j != cur_j:
            intervals.append(ArcInterval(cur_j, np.array(ts), np.array(xs)))
            cur_j, ts, xs = j, [], []
        ts.append(t)
        xs.append(x)
    intervals.append(ArcInterval(cur_j, np.array(ts), np.array(xs)))
    return HybridArc(intervals, Termination.HORIZON_REACHED, names)


@dataclass(frozen=True)
class FastHooks:
    """Parameter pack routing a built system through the compiled kernels."""

    kind: int
    pars: np.ndarray
    Q: np.ndarray
    ustar: np.ndarray
    period: float
    amps: np.ndarray
    freqs: np.ndarray
    phases: np.ndarray
    rho: float


@dataclass(frozen=True)
class HybridSystem:
    """Data (C, F, D, G) of a hybrid system.

    The indicators describe closed sets: states on the trigger boundary belong
    to both C and D.  ``trigger``, when present, is a continuous residual that
    is negative strictly inside C, positive strictly inside D, and zero on the
    shared boundary; it is what event localization bisects on.
    """

    dimension: int
    flow_map: Callable[[np.ndarray], np.ndarray]
    jump_map: Callable[[np.ndarray], np.ndarray]
    flow_indicator: Callable[[np.ndarray], bool]
    jump_indicator: Callable[[np.ndarray], bool]
    trigger: Optional[Callable[[np.ndarray], float]] = None
    state_names: Optional[Tuple[str, ...]] = None
    fast: Optional[FastHooks] = None

    @classmethod
    def from_trigger(cls, dimension, flow_map, jump_map, trigger,
                     state_names=None, fast=None) -> "HybridSystem":
        return cls(
            dimension=dimension,
            flow_map=flow_map,
            jump_map=jump_map,
            flow_indicator=lambda s: trigger(s) <= 0.0,
            jump_indicator=lambda s: trigger(s) >= 0.0,
            trigger=trigger,
            state_names=state_names,
            fast=fast,
        )

    def names(self) -> Tuple[str, ...]:
        if self.state_names is not None:
            return self.state_names
        return tuple(f"x{i}" for i in range(self.dimension))


@dataclass(frozen=True)
class SimulationConfig:
    max_t: float
    max_j: int
    flow_step: float
    event_tol: float = 1e-9
    min_flow_after_jump: float = 1e-9
    record_every: int = 1

    def validate(self) -> None:
        if self.flow_step <= 0:
            raise StepSizeInvalid(f"flow_step must be positive, got {self.flow_step}")
        if self.event_tol <= 0:
            raise StepSizeInvalid(f"event_tol must be positive, got {self.event_tol}")
        if self.max_t <= 0:
            raise StepSizeInvalid(f"max_t must be positive, got {self.max_t}")
        if self.max_j < 1:
            raise StepSizeInvalid(f"max_j must be at least 1, got {self.max_j}")
        if self.min_flow_after_jump < 0:
            raise StepSizeInvalid("min_flow_after_jump must be nonnegative")
        if self.record_every < 1:
            raise StepSizeInvalid(f"record_every must be at least 1, got {self.record_every}")


def flow_step_rk4(system: HybridSystem, state: np.ndarray, h: float) -> np.ndarray:
    """One classical RK4 step of the flow map.  No set-membership side effects."""
    if h <= 0:
        raise StepSizeInvalid(f"step size must be positive, got {h}")
    state = np.asarray(state, dtype=float)
    f = system.flow_map
    k1 = np.asarray(f(state), dtype=float)
    k2 = np.asarray(f(state + 0.5 * h * k1), dtype=float)
    k3 = np.asarray(f(state + 0.5 * h * k2), dtype=float)
    k4 = np.asarray(f(state + h * k3), dtype=float)
    out = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state after RK4 step of size {h}")
    return out


def localize_event(system: HybridSystem, inside_state: np.ndarray,
                   outside_state: np.ndarray, h: float,
                   event_tol: float) -> Tuple[np.ndarray, float]:
    """Bisect the step fraction to land on the trigger boundary.

    ``inside_state`` must be on the C side and ``outside_state`` (one RK4 step
    of size ``h`` ahead) on the D side.  Returns a state whose trigger residual
    is within ``event_tol`` of zero and the sub-step time from ``inside_state``.
    Each probe re-integrates a single step of size h*fraction from
    ``inside_state``.
    """
    if system.trigger is None:
        raise NoCrossingFound("system has no trigger function to localize against")
    trig = system.trigger
    r_in = trig(np.asarray(inside_state, dtype=float))
    r_out = trig(np.asarray(outside_state, dtype=float))
    if abs(r_in) <= event_tol:
        return np.asarray(inside_state, dtype=float).copy(), 0.0
    if r_in > 0 or r_out < 0:
        raise NoCrossingFound(
            f"endpoints do not bracket the boundary (residuals {r_in}, {r_out})"
        )
    lo, hi = 0.0, 1.0
    hi_state = np.asarray(outside_state, dtype=float)
    for _ in range(128):
        mid = 0.5 * (lo + hi)
        s_mid = flow_step_rk4(system, inside_state, h * mid)
        r_mid = trig(s_mid)
        if abs(r_mid) <= event_tol:
            return s_mid, h * mid
        if r_mid < 0:
            lo = mid
        else:
            hi = mid
            hi_state = s_mid
    # interval collapsed below float resolution; return the D-side endpoint
    return hi_state, h * hi


def classify_termination(arc: HybridArc, config: SimulationConfig) -> Termination:
    """Recompute the stopping reason from the arc and configuration."""
    if arc.termination == Termination.ZENO_SUSPECTED:
        return Termination.ZENO_SUSPECTED
    if arc.final_time >= config.max_t * (1.0 - 1e-12):
        return Termination.HORIZON_REACHED
    if arc.jump_count >= config.max_j:
        return Termination.JUMP_BUDGET_EXHAUSTED
    return arc.termination


class _ArcBuilder:
    def __init__(self, names: Tuple[str, ...]):
        self.intervals: List[ArcInterval] = []
        self._times: List[float] = []
        self._states: List[np.ndarray] = []
        self._j = 0

    def add(self, t: float, state: np.ndarray) -> None:
        if self._times and t == self._times[-1]:
            self._states[-1] = state.copy()
            return
        self._times.append(t)
        self._states.append(state.copy())

    def add_block(self, ts: np.ndarray, xs: np.ndarray) -> None:
        for t, x in zip(ts, xs):
            self.add(float(t), x)

    def close_interval(self) -> None:
        self.intervals.append(
            ArcInterval(self._j, np.array(self._times), np.array(self._states))
        )
        self._j += 1
        self._times = []
        self._states = []

    def finish(self, names, termination: Termination) -> HybridArc:
        self.close_interval()
        return HybridArc(self.intervals, termination, names)


def simulate(system: HybridSystem, initial: np.ndarray,
             config: SimulationConfig) -> HybridArc:
    """Run the deterministic hybrid simulation.

    Flows with fixed-step RK4 while the state stays in C; on crossing into D
    the boundary is localized by bisection, a sample is recorded there, and
    the jump map is applied.  Jumps take priority on C ∩ D.  Raises
    ``ZenoSuspected`` when an inter-jump flow interval is shorter than the
    configured guard.
    """
    config.validate()
    x = np.array(initial, dtype=float)
    if x.shape != (system.dimension,):
        raise InitialOutsideDomain(
            f"initial state has shape {x.shape}, system dimension is {system.dimension}"
        )
    in_c = system.flow_indicator(x)
    in_d = system.jump_indicator(x)
    if not (in_c or in_d):
        raise InitialOutsideDomain("initial state lies in neither the flow nor the jump set")

    names = system.names()
    builder = _ArcBuilder(names)
    t = 0.0
    j = 0
    interval_start_t = 0.0
    pending_jump = False
    builder.add(t, x)
    termination: Optional[Termination] = None

    while True:
        if t >= config.max_t * (1.0 - 1e-15):
            termination = Termination.HORIZON_REACHED
            break
        if pending_jump or system.jump_indicator(x):
            if j >= config.max_j:
                termination = Termination.JUMP_BUDGET_EXHAUSTED
                break
            gap = t - interval_start_t
            if j > 0 and gap < config.min_flow_after_jump:
                builder.close_interval()
                partial = HybridArc(builder.intervals, Termination.ZENO_SUSPECTED, names)
                raise ZenoSuspected(
                    f"inter-jump flow time {gap:.3e} below guard "
                    f"{config.min_flow_after_jump:.3e} at t={t}, j={j}",
                    partial_arc=partial,
                )
            builder.close_interval()
            x = np.asarray(system.jump_map(x), dtype=float)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"non-finite state after jump at t={t}, j={j}")
            j += 1
            interval_start_t = t
            pending_jump = False
            builder.add(t, x)
            if not (system.flow_indicator(x) or system.jump_indicator(x)):
                termination = Termination.LEFT_DOMAIN
                break
            continue
        if not system.flow_indicator(x):
            termination = Termination.LEFT_DOMAIN
            break

        if system.fast is not None:
            x, t, crossed = _flow_segment_fast(system, x, t, config, builder)
        else:
            x, t, crossed = _flow_segment_python(system, x, t, config, builder)
        if crossed:
            pending_jump = True

    builder.add(t, x)
    return builder.finish(names, termination)


def _flow_segment_fast(system, x, t, config, builder):
    fh = system.fast
    t_end = config.max_t
    max_steps = int(np.ceil((t_end - t) / config.flow_step)) + 2
    nrec_max = max_steps // config.record_every + 2
    rec_t = np.empty(nrec_max)
    rec_x = np.empty((nrec_max, x.size))
    next_out = np.empty(x.size)
    state = x.copy()
    nrec, t_new, status = kernels.advance(
        fh.kind, fh.pars, fh.Q, fh.ustar, fh.period, fh.amps, fh.freqs, fh.phases,
        state, t, config.flow_step, t_end, fh.rho, config.record_every,
        rec_t, rec_x, next_out,
    )
    builder.add_block(rec_t[:nrec], rec_x[:nrec])
    if status == kernels.ADVANCE_NONFINITE:
        raise NonFiniteState(f"non-finite state during flow near t={t_new}")
    if status == kernels.ADVANCE_CROSSED:
        hh = min(config.flow_step, t_end - t_new)
        boundary, dt = localize_event(system, state, next_out, hh, config.event_tol)
        t_new += dt
        builder.add(t_new, boundary)
        return boundary, t_new, True
    builder.add(t_new, state)
    return state, t_new, False


def _flow_segment_python(system, x, t, config, builder):
    trig = system.trigger
    t_end = config.max_t
    steps = 0
    state = x.copy()
    while t < t_end * (1.0 - 1e-15):
        hh = min(config.flow_step, t_end - t)
        nxt = flow_step_rk4(system, state, hh)
        entered = trig(nxt) >= 0.0 if trig is not None else system.jump_indicator(nxt)
        if entered:
            if trig is not None:
                boundary, dt = localize_event(system, state, nxt, hh, config.event_tol)
            else:
                boundary, dt = nxt, hh
            t += dt
            builder.add(t, boundary)
            return boundary, t, True
        state = nxt
        t += hh
        steps += 1
        if steps % config.record_every == 0:
            builder.add(t, state)
    builder.add(t, state)
    return state, t, False
