"""Closed-loop hybrid systems: the event-triggered target system, the two
extremum-seeking variants, and the averaged comparison system.

State layout is the flat vector (u, y, e_u, e_y) of dimension 4n, with the
dither phase tau appended as a trailing scalar for the ES variants.  The held
samples are derived quantities: u_hat = u - e_u, y_hat = y - e_y.  All four
systems share the trigger rule ||e||^2 >= rho and a jump map that zeroes e.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import simpson

from .errors import DimensionMismatch, DitherInvalid
from .hybrid import FastHooks, HybridSystem
from .kernels import KIND_CLASSICAL_AVG, KIND_CLASSICAL_ES, KIND_LIE_ES, KIND_TARGET
from .plants import CostFunction, Dither, HarmonicDither, QuadraticCost, validate_dither


@dataclass(frozen=True)
class TargetParams:
    """Feedback gain and trigger threshold of the target system."""

    k: float = 0.75
    rho: float = 1.0

    def __post_init__(self):
        # k in (0,1) keeps the leading Lyapunov coefficient 1-k positive
        if not (0.0 < self.k < 1.0):
            raise ValueError(f"k must lie in (0, 1), got {self.k}")
        if self.rho <= 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass(frozen=True)
class LieESParams:
    base: TargetParams
    epsilon: float
    dither: Dither

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class ClassicalESParams:
    base: TargetParams
    a: float
    omega: float
    dither: Dither

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")


def state_names(n: int, with_tau: bool) -> Tuple[str, ...]:
    names = (
        [f"u{i+1}" for i in range(n)]
        + [f"y{i+1}" for i in range(n)]
        + [f"eu{i+1}" for i in range(n)]
        + [f"ey{i+1}" for i in range(n)]
    )
    if with_tau:
        names.append("tau")
    return tuple(names)


@dataclass(frozen=True)
class ClosedLoopState:
    """Structured view of a flat closed-loop state vector."""

    u: np.ndarray
    y: np.ndarray
    e_u: np.ndarray
    e_y: np.ndarray
    tau: Optional[float] = None

    @property
    def u_hat(self) -> np.ndarray:
        return self.u - self.e_u

    @property
    def y_hat(self) -> np.ndarray:
        return self.y - self.e_y

    def flat(self) -> np.ndarray:
        parts = [self.u, self.y, self.e_u, self.e_y]
        if self.tau is not None:
            parts.append(np.array([self.tau]))
        return np.concatenate(parts)


def split_state(state: np.ndarray, n: int) -> ClosedLoopState:
    state = np.asarray(state, dtype=float)
    if state.size == 4 * n:
        tau = None
    elif state.size == 4 * n + 1:
        tau = float(state[4 * n])
    else:
        raise DimensionMismatch(
            f"state of size {state.size} is not 4n or 4n+1 for n={n}"
        )
    return ClosedLoopState(
        u=state[0:n].copy(),
        y=state[n : 2 * n].copy(),
        e_u=state[2 * n : 3 * n].copy(),
        e_y=state[3 * n : 4 * n].copy(),
        tau=tau,
    )


def _error_trigger(n: int, rho: float):
    def trigger(state: np.ndarray) -> float:
        e = state[2 * n : 4 * n]
        return float(e @ e - rho)

    return trigger


def _jump_zero_errors(n: int):
    def jump(state: np.ndarray) -> np.ndarray:
        out = np.array(state, dtype=float)
        out[2 * n : 4 * n] = 0.0
        return out

    return jump


def _fast_hooks(kind, cost, dither, k, rho, amp, taudot) -> Optional[FastHooks]:
    if not isinstance(cost, QuadraticCost):
        return None
    if kind in (KIND_LIE_ES, KIND_CLASSICAL_ES) and not isinstance(dither, HarmonicDither):
        return None
    if isinstance(dither, HarmonicDither):
        period = dither.period
        amps = np.ascontiguousarray(dither.amplitudes, dtype=float)
        freqs = np.ascontiguousarray(dither.frequencies, dtype=float)
        phases = np.ascontiguousarray(dither.phases, dtype=float)
    else:
        period, amps = 1.0, np.zeros((cost.dimension, 1))
        freqs, phases = np.ones((cost.dimension, 1)), np.zeros((cost.dimension, 1))
    return FastHooks(
        kind=kind,
        pars=np.array([k, amp, taudot], dtype=float),
        Q=np.ascontiguousarray(cost.Q, dtype=float),
        ustar=np.ascontiguousarray(cost.u_star, dtype=float),
        period=float(period),
        amps=amps,
        freqs=freqs,
        phases=phases,
        rho=float(rho),
    )


def build_target(cost: CostFunction, p: TargetParams) -> HybridSystem:
    """Target system H: flow (f, f) with f = (-k(y - e_y), grad_phi(u - e_u) - y),
    jump (x, 0), trigger ||e||^2 >= rho."""
    n = cost.dimension

    def flow(state: np.ndarray) -> np.ndarray:
        u = state[0:n]
        y = state[n : 2 * n]
        e_u = state[2 * n : 3 * n]
        e_y = state[3 * n : 4 * n]
        udot = -p.k * (y - e_y)
        ydot = cost.gradient(u - e_u) - y
        return np.concatenate([udot, ydot, udot, ydot])

    return HybridSystem.from_trigger(
        dimension=4 * n,
        flow_map=flow,
        jump_map=_jump_zero_errors(n),
        trigger=_error_trigger(n, p.rho),
        state_names=state_names(n, with_tau=False),
        fast=_fast_hooks(KIND_TARGET, cost, None, p.k, p.rho, 0.0, 0.0),
    )


def probing_output(cost: CostFunction, dither: Dither, u_hat: np.ndarray,
                   tau: float, amplitude: float) -> np.ndarray:
    """g = phi(u_hat + amplitude * v(tau)) * v(tau) / amplitude."""
    v = dither(tau)
    return (cost.value(u_hat + amplitude * v) / amplitude) * v


def _build_es(cost: CostFunction, dither: Dither, k: float, rho: float,
              amplitude: float, taudot: float, kind: int) -> HybridSystem:
    n = cost.dimension
    if dither.dimension != n:
        raise DimensionMismatch(
            f"dither dimension {dither.dimension} does not match cost dimension {n}"
        )
    report = validate_dither(dither)
    if not report.passed:
        raise DitherInvalid(
            f"dither moment residuals {report.mean_residual:.2e}, "
            f"{report.second_moment_residual:.2e} exceed {report.tolerance:.0e}"
        )

    def flow(state: np.ndarray) -> np.ndarray:
        u = state[0:n]
        y = state[n : 2 * n]
        e_u = state[2 * n : 3 * n]
        e_y = state[3 * n : 4 * n]
        tau = state[4 * n]
        udot = -k * (y - e_y)
        g = probing_output(cost, dither, u - e_u, tau, amplitude)
        ydot = g - y
        return np.concatenate([udot, ydot, udot, ydot, [taudot]])

    def jump(state: np.ndarray) -> np.ndarray:
        out = np.array(state, dtype=float)
        out[2 * n : 4 * n] = 0.0  # tau carries over unchanged
        return out

    return HybridSystem.from_trigger(
        dimension=4 * n + 1,
        flow_map=flow,
        jump_map=jump,
        trigger=_error_trigger(n, rho),
        state_names=state_names(n, with_tau=True),
        fast=_fast_hooks(kind, cost, dither, k, rho, amplitude, taudot),
    )


def build_lie_es(cost: CostFunction, p: LieESParams) -> HybridSystem:
    """Lie-bracket ES: probing amplitude epsilon, phase rate 1/epsilon^2."""
    return _build_es(
        cost, p.dither, p.base.k, p.base.rho,
        amplitude=p.epsilon, taudot=1.0 / p.epsilon**2, kind=KIND_LIE_ES,
    )


def build_classical_es(cost: CostFunction, p: ClassicalESParams) -> HybridSystem:
    """Classical ES: probing amplitude a and phase rate omega tuned independently."""
    return _build_es(
        cost, p.dither, p.base.k, p.base.rho,
        amplitude=p.a, taudot=p.omega, kind=KIND_CLASSICAL_ES,
    )


def build_classical_averaged(cost: CostFunction, p: TargetParams) -> HybridSystem:
    """Averaged comparison system: target flow on (u, y), errors frozen during
    flow and zeroed at jumps."""
    n = cost.dimension

    def flow(state: np.ndarray) -> np.ndarray:
        u = state[0:n]
        y = state[n : 2 * n]
        e_u = state[2 * n : 3 * n]
        e_y = state[3 * n : 4 * n]
        udot = -p.k * (y - e_y)
        ydot = cost.gradient(u - e_u) - y
        return np.concatenate([udot, ydot, np.zeros(2 * n)])

    return HybridSystem.from_trigger(
        dimension=4 * n,
        flow_map=flow,
        jump_map=_jump_zero_errors(n),
        trigger=_error_trigger(n, p.rho),
        state_names=state_names(n, with_tau=False),
        fast=_fast_hooks(KIND_CLASSICAL_AVG, cost, None, p.k, p.rho, 0.0, 0.0),
    )


def hadamard_remainder(cost: CostFunction, u_hat: np.ndarray, tau: float,
                       epsilon: float, dither: Dither,
                       quad_points: int = 33) -> np.ndarray:
    """Quadrature of R_eps = int_0^1 v v^T (grad_phi(u_hat + eps*lam*v) - grad_phi(u_hat)) dlam.

    Together with the first two expansion terms this reconstructs the probing
    output exactly: g = v*phi(u_hat)/eps + v v^T grad_phi(u_hat) + R_eps.
    """
    if quad_points < 16:
        raise ValueError("quad_points must be at least 16")
    u_hat = np.asarray(u_hat, dtype=float)
    v = dither(tau)
    if epsilon == 0.0:
        return np.zeros_like(u_hat)
    npts = quad_points + (1 - quad_points % 2)  # odd count for Simpson
    lams = np.linspace(0.0, 1.0, npts)
    g0 = cost.gradient(u_hat)
    diffs = np.array([cost.gradient(u_hat + epsilon * lam * v) - g0 for lam in lams])
    integrand = (diffs @ v)[:, None] * v[None, :]
    return simpson(integrand, x=lams, axis=0)


def recommended_flow_step(system_kind: str, dither_period: float = 1.0,
                          epsilon: Optional[float] = None,
                          omega: Optional[float] = None) -> float:
    """Step-size rule: at least 40 samples per dither period in t for the
    oscillatory systems, 0.01 for the non-oscillatory ones."""
    if system_kind == "lie_es":
        if epsilon is None:
            raise ValueError("epsilon required for lie_es step rule")
        return epsilon**2 * dither_period / 40.0
    if system_kind == "classical_es":
        if omega is None:
            raise ValueError("omega required for classical_es step rule")
        return dither_period / (40.0 * omega)
    return 0.01
