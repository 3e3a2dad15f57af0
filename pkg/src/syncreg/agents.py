"""Agent and exosystem models, regulator solutions, linearization and gain checks.

The three built-in agents and the harmonic exosystem are the ones of the
three-agent example. Their regulator solutions are exact closed forms
parameterized by the exosystem frequency ``tau``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "AgentModel",
    "Exosystem",
    "RegulatorSolution",
    "Linearization",
    "GainSet",
    "GainReport",
    "linearize",
    "jacobian_fd",
    "regulator_residual",
    "is_hurwitz",
    "composite_matrix",
    "characteristic_polynomial",
    "check_gains",
    "verify_gains",
    "builtin_agent",
    "builtin_exosystem",
    "BUILTIN_AGENTS",
]

Vec = NDArray[np.float64]
Mat = NDArray[np.float64]

FD_STEP = 1e-5
HURWITZ_MARGIN = 1e-9
SPECTRUM_TOL = 1e-8


def _vec(a) -> Vec:
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass(frozen=True, eq=False)
class AgentModel:
    """Control-affine agent ``x' = f(x) + g(x) u``, ``y = h(x)``.

    ``jac_f`` and ``jac_h`` are optional analytic Jacobians; when present they
    take precedence over finite differences.
    """

    name: str
    n: int
    m: int
    p: int
    f: Callable[[Vec], Vec]
    g: Callable[[Vec], Mat]
    h: Callable[[Vec], Vec]
    jac_f: Callable[[Vec], Mat] | None = None
    jac_h: Callable[[Vec], Mat] | None = None

    def __post_init__(self):
        zero = np.zeros(self.n)
        if _vec(self.f(zero)).shape != (self.n,):
            raise ValueError(f"{self.name}: f must return a vector of length {self.n}")
        if np.asarray(self.g(zero), dtype=float).shape != (self.n, self.m):
            raise ValueError(f"{self.name}: g must return an {self.n}x{self.m} matrix")
        if _vec(self.h(zero)).shape != (self.p,):
            raise ValueError(f"{self.name}: h must return a vector of length {self.p}")
        if np.any(_vec(self.f(zero)) != 0) or np.any(_vec(self.h(zero)) != 0):
            raise ValueError(f"{self.name}: the origin must be an equilibrium with zero output")

    def rhs(self, x: Vec, u: Vec) -> Vec:
        return _vec(self.f(x)) + np.asarray(self.g(x), dtype=float) @ _vec(u)

    def output(self, x: Vec) -> Vec:
        return _vec(self.h(x))


@dataclass(frozen=True, eq=False)
class Exosystem:
    """Autonomous reference generator ``w' = s(w)`` with output map ``q``.

    Agents regulate ``h(x) + q(w)`` to zero. Linear generators may also
    carry ``matrix`` so that ``s(w) == matrix @ w``.
    """

    s_dim: int
    s: Callable[[Vec], Vec]
    q: Callable[[Vec], Vec]
    name: str = "exosystem"
    matrix: Mat | None = None

    def __post_init__(self):
        if np.any(_vec(self.s(np.zeros(self.s_dim))) != 0):
            raise ValueError("exosystem must have an equilibrium at the origin")


@dataclass(frozen=True, eq=False)
class RegulatorSolution:
    """Maps ``pi`` (exo-state to agent state) and ``c`` (exo-state to input)."""

    s_dim: int
    pi: Callable[[Vec], Vec]
    c: Callable[[Vec], Vec]
    jac_pi: Callable[[Vec], Mat] | None = None

    def __post_init__(self):
        zero = np.zeros(self.s_dim)
        if np.any(_vec(self.pi(zero)) != 0) or np.any(_vec(self.c(zero)) != 0):
            raise ValueError("regulator solution must satisfy pi(0) = 0 and c(0) = 0")


@dataclass(frozen=True, eq=False)
class Linearization:
    A: Mat
    B: Mat
    C: Mat


@dataclass(frozen=True, eq=False)
class GainSet:
    """State-feedback gain ``K`` (m x n) and optional observer gain ``L`` (n x p)."""

    K: Mat
    L: Mat | None = None

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))
        if self.L is not None:
            L = np.asarray(self.L, dtype=float)
            if L.ndim == 1:
                L = L[:, None]
            object.__setattr__(self, "L", L)

    @property
    def has_observer(self) -> bool:
        return self.L is not None


def jacobian_fd(fun: Callable[[Vec], Vec], x0: ArrayLike, step: float = FD_STEP) -> Mat:
    """Central-difference Jacobian of ``fun`` at ``x0``."""
    x0 = _vec(x0)
    f0 = _vec(fun(x0))
    jac = np.empty((f0.size, x0.size))
    for k in range(x0.size):
        dx = np.zeros_like(x0)
        dx[k] = step
        jac[:, k] = (_vec(fun(x0 + dx)) - _vec(fun(x0 - dx))) / (2 * step)
    return jac


def linearize(model: AgentModel, step: float = FD_STEP) -> Linearization:
    """Linear approximation ``(A, B, C)`` of ``model`` at the origin."""
    if not step > 0:
        raise ValueError("finite-difference step must be positive")
    zero = np.zeros(model.n)
    A = np.asarray(model.jac_f(zero), dtype=float) if model.jac_f else jacobian_fd(model.f, zero, step)
    B = np.asarray(model.g(zero), dtype=float).reshape(model.n, model.m)
    C = np.asarray(model.jac_h(zero), dtype=float) if model.jac_h else jacobian_fd(model.h, zero, step)
    for name, mat in (("A", A), ("B", B), ("C", C)):
        if not np.all(np.isfinite(mat)):
            raise ValueError(f"{model.name}: non-finite entries in linearization {name}")
    return Linearization(A.reshape(model.n, model.n), B, C.reshape(model.p, model.n))


def regulator_residual(
    model: AgentModel,
    exo: Exosystem,
    sol: RegulatorSolution,
    w0: ArrayLike,
    *,
    analytic: bool | None = None,
    step: float = FD_STEP,
) -> tuple[Vec, Vec]:
    """Residuals of the regulator equations at ``w0``.

    Returns ``(r_dyn, r_out)`` with ``r_dyn = Dpi(w0) s(w0) - f(pi) - g(pi) c``
    and ``r_out = h(pi) + q(w0)``. ``Dpi`` comes from the analytic Jacobian
    when available (or when ``analytic=True``) and from central differences
    otherwise.
    """
    w0 = _vec(w0)
    if analytic is None:
        analytic = sol.jac_pi is not None
    if analytic:
        if sol.jac_pi is None:
            raise ValueError("regulator solution has no analytic Jacobian")
        dpi = np.asarray(sol.jac_pi(w0), dtype=float).reshape(model.n, exo.s_dim)
    else:
        dpi = jacobian_fd(sol.pi, w0, step)
    x = _vec(sol.pi(w0))
    r_dyn = dpi @ _vec(exo.s(w0)) - model.rhs(x, sol.c(w0))
    r_out = model.output(x) + _vec(exo.q(w0))
    return r_dyn, r_out


def is_hurwitz(M: ArrayLike, margin: float = HURWITZ_MARGIN) -> bool:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return bool(np.max(np.linalg.eigvals(M).real) < -margin)


def composite_matrix(lin: Linearization, gains: GainSet) -> Mat:
    """Plant/observer closed-loop matrix ``[[A, BK], [-LC, A + BK + LC]]``."""
    A, B, C = lin.A, lin.B, lin.C
    BK = B @ gains.K
    LC = gains.L @ C
    return np.block([[A, BK], [-LC, A + BK + LC]])


def characteristic_polynomial(M: ArrayLike) -> Vec:
    """Monic characteristic polynomial coefficients (highest power first).

    Faddeev-LeVerrier recursion; it avoids eigenvalues, which are
    ill-conditioned for defective matrices. Intended for small matrices.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    coeffs = np.empty(n + 1)
    coeffs[0] = 1.0
    Mk = np.zeros_like(M)
    eye = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(M @ Mk) / k
    return coeffs


@dataclass
class GainReport:
    name: str
    state_feedback_hurwitz: bool
    observer_hurwitz: bool | None = None
    composite_hurwitz: bool | None = None
    spectrum_match: bool | None = None
    spectrum_error: float | None = None
    spectra: dict[str, Vec] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        checks = [self.state_feedback_hurwitz, self.observer_hurwitz, self.composite_hurwitz, self.spectrum_match]
        return all(c for c in checks if c is not None)


def check_gains(lin: Linearization, gains: GainSet, name: str = "", margin: float = HURWITZ_MARGIN) -> GainReport:
    """Hurwitz tests for ``A+BK``, ``A+LC`` and the composite matrix.

    Spectral equality of the composite with the union of the two designed
    spectra is tested on characteristic polynomials, coefficient-wise, at a
    relative tolerance of ``SPECTRUM_TOL``.
    """
    A, B, C = lin.A, lin.B, lin.C
    n = A.shape[0]
    if gains.K.shape != (B.shape[1], n):
        raise ValueError(f"K has shape {gains.K.shape}, expected {(B.shape[1], n)}")
    acl = A + B @ gains.K
    report = GainReport(name, is_hurwitz(acl, margin), spectra={"A+BK": np.linalg.eigvals(acl)})
    if gains.L is None:
        return report
    if gains.L.shape != (n, C.shape[0]):
        raise ValueError(f"L has shape {gains.L.shape}, expected {(n, C.shape[0])}")
    aobs = A + gains.L @ C
    comp = composite_matrix(lin, gains)
    report.observer_hurwitz = is_hurwitz(aobs, margin)
    report.composite_hurwitz = is_hurwitz(comp, margin)
    report.spectra["A+LC"] = np.linalg.eigvals(aobs)
    report.spectra["composite"] = np.linalg.eigvals(comp)
    expected = np.polymul(characteristic_polynomial(acl), characteristic_polynomial(aobs))
    got = characteristic_polynomial(comp)
    err = float(np.max(np.abs(got - expected) / np.maximum(1.0, np.abs(expected))))
    report.spectrum_error = err
    report.spectrum_match = err <= SPECTRUM_TOL
    return report


def verify_gains(lin: Linearization, gains: GainSet) -> bool:
    return check_gains(lin, gains).ok


# ---------------------------------------------------------------------------
# Built-in models


def builtin_exosystem(tau: float) -> Exosystem:
    """Harmonic oscillator ``w' = [[0, tau], [-tau, 0]] w`` with ``q(w) = -w[0]``.

    The negative sign makes ``h(x) + q(w)`` equal to ``y - w[0]``, under which
    the built-in regulator solutions are exact.
    """
    if tau == 0:
        raise ValueError("tau must be non-zero")
    S = np.array([[0.0, tau], [-tau, 0.0]])
    return Exosystem(
        s_dim=2,
        s=lambda w: S @ w,
        q=lambda w: np.array([-w[0]]),
        name=f"harmonic(tau={tau:g})",
        matrix=S,
    )


def _agent1(tau):
    model = AgentModel(
        "agent1", 1, 1, 1,
        f=lambda x: np.array([x[0] ** 2]),
        g=lambda x: np.ones((1, 1)),
        h=lambda x: np.array([x[0]]),
        jac_f=lambda x: np.array([[2 * x[0]]]),
        jac_h=lambda x: np.array([[1.0]]),
    )
    sol = RegulatorSolution(
        2,
        pi=lambda w: np.array([w[0]]),
        c=lambda w: np.array([tau * w[1] - w[0] ** 2]),
        jac_pi=lambda w: np.array([[1.0, 0.0]]),
    )
    return model, sol, GainSet(K=[[-5.0]])


def _agent2(tau):
    model = AgentModel(
        "agent2", 2, 1, 1,
        f=lambda x: np.array([-x[0] + x[1], x[0] ** 2]),
        g=lambda x: np.array([[0.0], [1.0]]),
        h=lambda x: np.array([x[0]]),
        jac_f=lambda x: np.array([[-1.0, 1.0], [2 * x[0], 0.0]]),
        jac_h=lambda x: np.array([[1.0, 0.0]]),
    )
    sol = RegulatorSolution(
        2,
        pi=lambda w: np.array([w[0], w[0] + tau * w[1]]),
        c=lambda w: np.array([tau * w[1] - tau**2 * w[0] - w[0] ** 2]),
        jac_pi=lambda w: np.array([[1.0, 0.0], [1.0, tau]]),
    )
    return model, sol, GainSet(K=[[-12.0, -8.0]], L=[[-8.0], [-20.0]])


def _agent3(tau):
    model = AgentModel(
        "agent3", 2, 1, 1,
        f=lambda x: np.array([x[1], -x[0] + x[1] - x[0] ** 3]),
        g=lambda x: np.array([[0.0], [1.0]]),
        h=lambda x: np.array([x[0]]),
        jac_f=lambda x: np.array([[0.0, 1.0], [-1.0 - 3 * x[0] ** 2, 1.0]]),
        jac_h=lambda x: np.array([[1.0, 0.0]]),
    )
    sol = RegulatorSolution(
        2,
        pi=lambda w: np.array([w[0], tau * w[1]]),
        c=lambda w: np.array([w[0] ** 3 + (1 - tau**2) * w[0] - tau * w[1]]),
        jac_pi=lambda w: np.array([[1.0, 0.0], [0.0, tau]]),
    )
    return model, sol, GainSet(K=[[-11.0, -8.0]], L=[[-10.0], [-30.0]])


BUILTIN_AGENTS: dict[str, Callable[[float], tuple[AgentModel, RegulatorSolution, GainSet]]] = {
    "agent1": _agent1,
    "agent2": _agent2,
    "agent3": _agent3,
}


def builtin_agent(name: str, tau: float) -> tuple[AgentModel, RegulatorSolution, GainSet]:
    """Model, regulator solution and default gains of a built-in agent."""
    if name not in BUILTIN_AGENTS:
        raise ValueError(f"unknown agent {name!r}; known agents: {', '.join(sorted(BUILTIN_AGENTS))}")
    if tau == 0:
        raise ValueError("tau must be non-zero")
    return BUILTIN_AGENTS[name](float(tau))
