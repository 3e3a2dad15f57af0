"""Transition matrices of switching Laplacian flows, contraction rates and
the Lyapunov-exponent test for local exponential synchronizability."""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from .errors import DivergenceError
from .graph import SwitchingSchedule, laplacian
from .simulator import rk4_step

__all__ = [
    "TransitionMatrix",
    "SyncCertificate",
    "matrix_exponential",
    "transition_matrix",
    "contraction_rate",
    "window_contraction_rates",
    "consensus_rate_over_horizon",
    "estimate_lyapunov_exponent",
    "check_sync_condition",
]


def matrix_exponential(m: ArrayLike) -> NDArray[np.float64]:
    """Dense matrix exponential (Pade scaling and squaring)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exponential needs finite entries")
    return scipy.linalg.expm(m)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """State-transition matrix of ``x' = -L(t) x`` from ``t1`` to ``t2``."""

    matrix: NDArray[np.float64]
    t1: float
    t2: float

    def is_row_stochastic(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        return bool(np.all(m >= -tol) and np.allclose(m.sum(axis=1), 1.0, rtol=0.0, atol=tol))


def transition_matrix(s: SwitchingSchedule, t1: float, t2: float) -> TransitionMatrix:
    """Ordered product of ``expm(-L_k * duration_k)`` over ``[t1, t2]``, newest factor leftmost."""
    if t2 < t1:
        raise ValueError(f"t2={t2} precedes t1={t1}")
    if t1 < 0:
        raise ValueError("t1 must be non-negative")
    phi = np.eye(s.n_nodes)
    laps = {}
    for k, dt in s.segments(t1, t2):
        if k not in laps:
            laps[k] = laplacian(s.graphs[k])
        phi = matrix_exponential(-laps[k] * dt) @ phi
    return TransitionMatrix(phi, float(t1), float(t2))


def _complement_basis(n: int) -> NDArray[np.float64]:
    # Orthonormal basis of the orthogonal complement of the all-ones vector.
    return scipy.linalg.null_space(np.ones((1, n)))


def contraction_rate(phi: TransitionMatrix | ArrayLike) -> float:
    """Largest gain of ``phi.T`` on vectors orthogonal to the all-ones vector.

    Returns values below 1 when the transition contracts disagreement. A
    disconnected, unbalanced transition can give a value above 1.
    """
    m = phi.matrix if isinstance(phi, TransitionMatrix) else np.asarray(phi, dtype=float)
    n = m.shape[0]
    if n == 1:
        return 0.0
    q = _complement_basis(n)
    return float(np.linalg.norm(m.T @ q, 2))


def window_contraction_rates(
    s: SwitchingSchedule, T: float, t_start: float, k_windows: int
) -> list[float]:
    """Contraction rate of each of ``k_windows`` consecutive length-``T`` windows."""
    if not T > 0:
        raise ValueError("window length T must be positive")
    if k_windows < 1:
        raise ValueError("k_windows must be a positive integer")
    end = t_start + k_windows * T
    if end > s.horizon + 1e-9:
        raise ValueError(
            f"schedule covers [0, {s.horizon}] but {k_windows} windows of length {T} need t up to {end}"
        )
    return [
        contraction_rate(transition_matrix(s, t_start + k * T, t_start + (k + 1) * T))
        for k in range(k_windows)
    ]


def consensus_rate_over_horizon(
    s: SwitchingSchedule, T: float, t_start: float, k_windows: int
) -> float:
    """Maximum window contraction rate over a finite number of windows.

    This is a lower bound for the supremum over all windows, exact when the
    schedule is periodic with a period covered by the windows.
    """
    return max(window_contraction_rates(s, T, t_start, k_windows))


def estimate_lyapunov_exponent(
    field: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    w0: ArrayLike,
    horizon: float,
    delta0: float = 1e-7,
    *,
    step: float = 1e-3,
    renorm_every: int = 10,
    discard: float = 0.2,
    bound: float = 1e6,
    direction: ArrayLike | None = None,
) -> float:
    """Largest Lyapunov exponent of ``w' = field(w)`` by two-trajectory renormalization.

    A reference trajectory and a companion displaced by ``delta0`` are
    integrated with RK4. Every ``renorm_every`` steps the separation is
    measured, its log growth rate recorded, and the companion pulled back to
    distance ``delta0`` along the current separation. The estimate is the mean
    rate after dropping the first ``discard`` fraction of intervals.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not delta0 > 0:
        raise ValueError("delta0 must be positive")
    w = np.array(w0, dtype=float)
    if direction is None:
        direction = np.ones_like(w)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    v = w + delta0 * d

    def rhs(_t, x):
        return np.asarray(field(x), dtype=float)

    n_intervals = int(round(horizon / (step * renorm_every)))
    if n_intervals < 2:
        raise ValueError("horizon too short for the renormalization interval")
    span = step * renorm_every
    rates = np.empty(n_intervals)
    t = 0.0
    for k in range(n_intervals):
        for _ in range(renorm_every):
            w = rk4_step(rhs, w, t, step)
            v = rk4_step(rhs, v, t, step)
            t += step
        if np.linalg.norm(w) > bound or np.linalg.norm(v) > bound:
            raise DivergenceError("flow diverged", t)
        sep = v - w
        dist = np.linalg.norm(sep)
        if dist == 0.0:
            raise DivergenceError("trajectories collapsed onto each other", t)
        rates[k] = math.log(dist / delta0) / span
        v = w + sep * (delta0 / dist)
    start = int(math.floor(discard * n_intervals))
    return float(rates[start:].mean())


@dataclass(frozen=True)
class SyncCertificate:
    nu_max: float
    alpha_star: float
    T: float
    satisfied: bool

    @property
    def margin(self) -> float:
        """``nu_max + ln(alpha_star) / T``; negative means satisfied."""
        return self.nu_max + math.log(self.alpha_star) / self.T


def check_sync_condition(nu_max: float, alpha_star: float, T: float) -> SyncCertificate:
    if not alpha_star > 0:
        raise ValueError(f"alpha_star must be positive, got {alpha_star}")
    if not T > 0:
        raise ValueError("T must be positive")
    value = nu_max + math.log(alpha_star) / T
    return SyncCertificate(float(nu_max), float(alpha_star), float(T), bool(value < 0))
