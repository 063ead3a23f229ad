"""Cost functions and periodic dither signals.

Costs expose value, gradient, a global Lipschitz constant for the gradient,
and (when known) the minimizer.  Dithers are T-periodic vector signals whose
zero-mean and identity-second-moment conditions can be checked numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson

from .errors import DimensionMismatch


class CostFunction:
    """Interface for a smooth, strongly convex cost on R^n.

    Subclasses must set ``dimension`` and ``lipschitz_grad`` and implement
    ``value`` and ``gradient``.  ``minimizer`` is optional; analyses that
    need it raise ``MinimizerUnknown`` when it is absent.
    """

    dimension: int
    lipschitz_grad: float
    minimizer: Optional[np.ndarray] = None

    def value(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, u: np.ndarray) -> np.ndarray:
        # Central-difference fallback; override when a closed form exists.
        n = self.dimension
        h = 1e-5
        H = np.empty((n, n))
        for i in range(n):
            step = np.zeros(n)
            step[i] = h
            H[:, i] = (self.gradient(u + step) - self.gradient(u - step)) / (2 * h)
        return 0.5 * (H + H.T)

    def value_many(self, U: np.ndarray) -> np.ndarray:
        return np.array([self.value(u) for u in U])

    def gradient_many(self, U: np.ndarray) -> np.ndarray:
        return np.array([self.gradient(u) for u in U])

    def _check_dim(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dimension,):
            raise DimensionMismatch(
                f"expected vector of length {self.dimension}, got shape {u.shape}"
            )
        return u


class QuadraticCost(CostFunction):
    """phi(u) = 1/2 (u - u*)^T Q (u - u*) with Q symmetric positive definite."""

    def __init__(self, Q: np.ndarray, u_star: np.ndarray):
        Q = np.asarray(Q, dtype=float)
        u_star = np.asarray(u_star, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got shape {Q.shape}")
        if u_star.shape != (Q.shape[0],):
            raise DimensionMismatch(
                f"u_star shape {u_star.shape} incompatible with Q shape {Q.shape}"
            )
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        eigvals = np.linalg.eigvalsh(Q)
        if eigvals[0] <= 0:
            raise ValueError(f"Q must be positive definite, smallest eigenvalue {eigvals[0]}")
        self.Q = Q
        self.u_star = u_star
        self.dimension = Q.shape[0]
        self.lipschitz_grad = float(eigvals[-1])
        self.strong_convexity = float(eigvals[0])
        self.minimizer = u_star

    def value(self, u: np.ndarray) -> float:
        d = self._check_dim(u) - self.u_star
        return float(0.5 * d @ self.Q @ d)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        d = self._check_dim(u) - self.u_star
        return self.Q @ d

    def hessian(self, u: np.ndarray) -> np.ndarray:
        return self.Q.copy()

    def value_many(self, U: np.ndarray) -> np.ndarray:
        D = np.asarray(U, dtype=float) - self.u_star
        return 0.5 * np.einsum("ki,ij,kj->k", D, self.Q, D)

    def gradient_many(self, U: np.ndarray) -> np.ndarray:
        D = np.asarray(U, dtype=float) - self.u_star
        return D @ self.Q.T


def finite_difference_gradient(cost: CostFunction, u: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``cost.value`` at ``u``."""
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    for i in range(u.size):
        step = np.zeros_like(u)
        step[i] = h
        g[i] = (cost.value(u + step) - cost.value(u - step)) / (2 * h)
    return g


class Dither:
    """T-periodic vector signal v(tau)."""

    def __init__(self, period: float, dimension: int, signal: Callable[[float], np.ndarray]):
        if period <= 0:
            raise ValueError("period must be positive")
        self.period = float(period)
        self.dimension = int(dimension)
        self._signal = signal

    def __call__(self, tau: float) -> np.ndarray:
        return np.asarray(self._signal(tau % self.period), dtype=float)


class HarmonicDither(Dither):
    """Dither built from per-channel sine harmonics.

    Channel i evaluates to sum_h amp[i,h] * sin(2*pi*freq[i,h]*tau/T + phase[i,h]),
    with integer frequency multiples so every channel is T-periodic.
    """

    def __init__(self, period: float, amplitudes, frequencies, phases=None):
        amplitudes = np.atleast_2d(np.asarray(amplitudes, dtype=float))
        frequencies = np.atleast_2d(np.asarray(frequencies, dtype=float))
        if phases is None:
            phases = np.zeros_like(amplitudes)
        phases = np.atleast_2d(np.asarray(phases, dtype=float))
        if not (amplitudes.shape == frequencies.shape == phases.shape):
            raise DimensionMismatch("amplitude/frequency/phase arrays must share a shape")
        if not np.allclose(frequencies, np.round(frequencies)):
            raise ValueError("harmonic frequencies must be integer multiples of 1/T")
        self.amplitudes = amplitudes
        self.frequencies = frequencies
        self.phases = phases
        super().__init__(period, amplitudes.shape[0], self._eval)

    def _eval(self, tau: float) -> np.ndarray:
        arg = 2.0 * np.pi * self.frequencies * tau / self.period + self.phases
        return np.sum(self.amplitudes * np.sin(arg), axis=1)

    def __call__(self, tau: float) -> np.ndarray:
        # sin is periodic already; skip the modulo to keep evaluation cheap
        return self._eval(tau)


def two_tone_dither() -> HarmonicDither:
    """The default 2-channel dither sqrt(2)*(sin(2*pi*tau), sin(4*pi*tau)), T = 1."""
    s2 = np.sqrt(2.0)
    return HarmonicDither(1.0, [[s2], [s2]], [[1.0], [2.0]])


@dataclass(frozen=True)
class DitherMomentReport:
    mean_residual: float
    second_moment_residual: float
    tolerance: float = 1e-6

    @property
    def passed(self) -> bool:
        return (
            self.mean_residual <= self.tolerance
            and self.second_moment_residual <= self.tolerance
        )


def validate_dither(d: Dither, quadrature_points: int = 512, tolerance: float = 1e-6) -> DitherMomentReport:
    """Check the zero-mean and identity-second-moment conditions by quadrature.

    Uses composite Simpson on a uniform grid over one period.  Returns the
    max-norm residual of each condition.
    """
    if quadrature_points < 64:
        raise ValueError("quadrature_points must be at least 64")
    npts = quadrature_points + (quadrature_points % 2)  # Simpson wants an even interval count
    taus = np.linspace(0.0, d.period, npts + 1)
    V = np.array([d(t) for t in taus])  # (npts+1, n)
    mean = simpson(V, x=taus, axis=0)
    outer = V[:, :, None] * V[:, None, :]
    second = simpson(outer, x=taus, axis=0) / d.period
    n = d.dimension
    return DitherMomentReport(
        mean_residual=float(np.max(np.abs(mean))),
        second_moment_residual=float(np.max(np.abs(second - np.eye(n)))),
        tolerance=tolerance,
    )
