"""Fixed-step RK4 simulation of the closed loops under a switching graph.

The composite state is laid out as::

    [ w_1 .. w_N | w_0 (leader mode only) | x_1 .. x_N | z_i for output-feedback agents ]

The active graph is held constant over each step; switching instants must
fall on the integration grid.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .agents import AgentModel, Exosystem, GainSet, RegulatorSolution
from .controllers import OUTPUT_FEEDBACK, ControllerConfig, coupling_term
from .errors import ConfigError, DivergenceError
from .graph import TIME_TOL, SwitchingSchedule, adjacency_matrix, augment_with_leader

__all__ = [
    "AgentSpec",
    "InitSpec",
    "Scenario",
    "SimResult",
    "SyncErrors",
    "rk4_step",
    "simulate",
    "simulate_exosystems",
    "tracking_errors",
    "pairwise_sync_error",
    "fit_exponential_rate",
    "summarize",
    "DIVERGENCE_BOUND",
]

DIVERGENCE_BOUND = 1e6


def rk4_step(
    rhs: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    state: NDArray[np.float64],
    t: float,
    h: float,
) -> NDArray[np.float64]:
    """One classical fourth-order Runge-Kutta step of ``state' = rhs(t, state)``."""
    if not h > 0:
        raise ValueError("step must be positive")
    k1 = rhs(t, state)
    k2 = rhs(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = rhs(t + h, state + h * k3)
    out = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("divergence", t + h)
    return out


@dataclass(frozen=True, eq=False)
class AgentSpec:
    model: AgentModel
    solution: RegulatorSolution
    gains: GainSet


@dataclass(frozen=True)
class InitSpec:
    """Initial conditions, either drawn uniformly or given explicitly.

    Explicit values are per-agent sequences; missing observer states and a
    missing leader state default to zero.
    """

    mode: str = "seeded_uniform"
    low: float = -1.0
    high: float = 1.0
    seed: int = 0
    x: tuple | None = None
    z: tuple | None = None
    w: tuple | None = None
    w0: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("seeded_uniform", "explicit"):
            raise ValueError(f"unknown init mode {self.mode!r}")
        if self.mode == "seeded_uniform" and not self.low <= self.high:
            raise ValueError("init range must satisfy low <= high")
        if self.mode == "explicit" and (self.x is None or self.w is None):
            raise ValueError("explicit init needs x and w")


@dataclass(frozen=True, eq=False)
class Scenario:
    agents: tuple[AgentSpec, ...]
    exo: Exosystem
    schedule: SwitchingSchedule
    controller: ControllerConfig
    t_end: float
    step: float = 1e-3
    init: InitSpec = field(default_factory=InitSpec)
    seed: int | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) != self.schedule.n_nodes:
            raise ConfigError(
                f"{len(self.agents)} agents but the schedule's graphs have {self.schedule.n_nodes} nodes"
            )
        if len(self.controller.modes) != len(self.agents):
            raise ConfigError("controller configuration does not match the agent list")
        if not self.step > 0 or not self.t_end > 0:
            raise ConfigError("step and t_end must be positive")
        _check_grid(self.schedule, self.step)
        _n_steps(self.t_end, self.step)


def _n_steps(t_end: float, step: float) -> int:
    n = round(t_end / step)
    if abs(n * step - t_end) > TIME_TOL * max(1.0, t_end):
        raise ConfigError(f"step {step} does not divide t_end {t_end}")
    return int(n)


def _check_grid(schedule: SwitchingSchedule, step: float) -> None:
    ratio = schedule.dwell_time / step
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"step {step} does not divide the dwell time {schedule.dwell_time}")
    for t in schedule.switch_times:
        r = t / step
        if abs(r - round(r)) > 1e-9 * max(1.0, r):
            raise ConfigError(f"switching instant {t} is not on the integration grid (step {step})")


def _step_modes(schedule: SwitchingSchedule, step: float, n_steps: int) -> NDArray[np.int64]:
    """Graph index used on each step ``[k h, (k+1) h)``."""
    starts = [int(round(t / step)) for t in schedule.switch_times] + [n_steps]
    modes = np.empty(n_steps, dtype=np.int64)
    for k0, k1, idx in zip(starts, starts[1:], schedule.indices):
        modes[max(k0, 0):max(min(k1, n_steps), 0)] = idx
    return modes


@dataclass
class _Layout:
    n_agents: int
    s_dim: int
    leader: bool
    x_slices: list[slice]
    z_slices: list[slice | None]
    size: int

    @property
    def w_slice(self) -> slice:
        return slice(0, self.n_agents * self.s_dim)

    @property
    def w0_slice(self) -> slice | None:
        if not self.leader:
            return None
        start = self.n_agents * self.s_dim
        return slice(start, start + self.s_dim)


def _layout(agents: Sequence[AgentSpec], modes: Sequence[str], s_dim: int, leader: bool) -> _Layout:
    pos = len(agents) * s_dim + (s_dim if leader else 0)
    x_slices = []
    for a in agents:
        x_slices.append(slice(pos, pos + a.model.n))
        pos += a.model.n
    z_slices: list[slice | None] = []
    for a, mode in zip(agents, modes):
        if mode == OUTPUT_FEEDBACK:
            z_slices.append(slice(pos, pos + a.model.n))
            pos += a.model.n
        else:
            z_slices.append(None)
    return _Layout(len(agents), s_dim, leader, x_slices, z_slices, pos)


def init_rng(seed: int) -> np.random.Generator:
    """Generator for initial conditions (independent of the schedule stream)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def _initial_state(sc: Scenario, lay: _Layout) -> NDArray[np.float64]:
    state = np.zeros(lay.size)
    init = sc.init
    n, s = lay.n_agents, lay.s_dim
    if init.mode == "seeded_uniform":
        rng = init_rng(init.seed)

        def draw(k):
            return rng.uniform(init.low, init.high, size=k)

        state[lay.w_slice] = draw(n * s)
        if lay.leader:
            state[lay.w0_slice] = draw(s)
        for sl in lay.x_slices:
            state[sl] = draw(sl.stop - sl.start)
        for sl in lay.z_slices:
            if sl is not None:
                state[sl] = draw(sl.stop - sl.start)
        return state

    def put(sl, value, what):
        v = np.atleast_1d(np.asarray(value, dtype=float))
        if v.size != sl.stop - sl.start:
            raise ConfigError(f"explicit init: {what} has {v.size} entries, expected {sl.stop - sl.start}")
        state[sl] = v

    if len(init.w) != n or len(init.x) != n:
        raise ConfigError("explicit init needs one x and one w entry per agent")
    for i in range(n):
        put(slice(i * s, (i + 1) * s), init.w[i], f"w[{i + 1}]")
        put(lay.x_slices[i], init.x[i], f"x[{i + 1}]")
    if lay.leader and init.w0 is not None:
        put(lay.w0_slice, init.w0, "w0")
    if init.z is not None:
        if len(init.z) != n:
            raise ConfigError("explicit init of z needs one entry per agent")
        for i, sl in enumerate(lay.z_slices):
            if sl is not None and init.z[i] is not None:
                put(sl, init.z[i], f"z[{i + 1}]")
    return state


def _exo_drift(exo: Exosystem, w_rows: NDArray[np.float64]) -> NDArray[np.float64]:
    if exo.matrix is not None:
        return w_rows @ np.asarray(exo.matrix).T
    return np.array([exo.s(w) for w in w_rows], dtype=float).reshape(w_rows.shape)


def _make_rhs(sc: Scenario, lay: _Layout):
    n, s = lay.n_agents, lay.s_dim
    exo = sc.exo
    agents = sc.agents
    x_sl, z_sl = lay.x_slices, lay.z_slices
    w_end = n * s
    leader = lay.leader

    def rhs(state, adjacency):
        d = np.empty_like(state)
        if leader:
            w_all = state[: w_end + s].reshape(n + 1, s)
            # Augmented numbering puts the leader first.
            w_aug = np.vstack([w_all[n:], w_all[:n]])
            dw_aug = _exo_drift(exo, w_aug) + coupling_term(w_aug, adjacency)
            d[:w_end] = dw_aug[1:].ravel()
            d[w_end : w_end + s] = dw_aug[0]
            w = w_all[:n]
        else:
            w = state[:w_end].reshape(n, s)
            d[:w_end] = (_exo_drift(exo, w) + coupling_term(w, adjacency)).ravel()
        for i, a in enumerate(agents):
            m, sol, K = a.model, a.solution, a.gains.K
            x = state[x_sl[i]]
            wi = w[i]
            zs = z_sl[i]
            feedback_state = x if zs is None else state[zs]
            u = np.atleast_1d(sol.c(wi)) + K @ (feedback_state - np.atleast_1d(sol.pi(wi)))
            d[x_sl[i]] = m.rhs(x, u)
            if zs is not None:
                z = state[zs]
                d[zs] = m.rhs(z, u) + a.gains.L @ (m.output(z) - m.output(x))
        return d

    return rhs


@dataclass(eq=False)
class SimResult:
    """Trajectories on the grid ``times``.

    ``sigma[k]`` is the 0-based graph index in force on ``[t_k, t_k + h)``;
    the final grid point repeats the last step's index. ``e`` is measured
    against each agent's own exosystem copy; ``e_leader`` against the leader.
    """

    times: NDArray[np.float64]
    sigma: NDArray[np.int64]
    w: NDArray[np.float64]
    x: list[NDArray[np.float64]]
    z: list[NDArray[np.float64] | None]
    y: NDArray[np.float64] | None
    e: NDArray[np.float64] | None
    schedule: SwitchingSchedule
    modes: tuple[str, ...] = ()
    agent_names: tuple[str, ...] = ()
    w0: NDArray[np.float64] | None = None
    e_leader: NDArray[np.float64] | None = None
    seed: int | None = None

    @property
    def n_agents(self) -> int:
        return self.w.shape[1]


def _integrate(rhs, state, adjacencies, modes, step, n_steps, t0=0.0):
    traj = np.empty((n_steps + 1, state.size))
    traj[0] = state
    for k in range(n_steps):
        adj = adjacencies[modes[k]]
        t = t0 + k * step
        state = rk4_step(lambda _t, x: rhs(x, adj), state, t, step)
        if np.max(np.abs(state)) > DIVERGENCE_BOUND:
            raise DivergenceError("divergence: state norm exceeded bound", t + step)
        traj[k + 1] = state
    return traj


def _adjacencies(schedule: SwitchingSchedule, leader: bool, leader_edges) -> list[NDArray[np.float64]]:
    if leader:
        edges = [(0, k, w) for k, w in dict(leader_edges).items()]
        return [adjacency_matrix(augment_with_leader(g, edges).as_digraph()) for g in schedule.graphs]
    return [adjacency_matrix(g) for g in schedule.graphs]


def simulate(sc: Scenario) -> SimResult:
    """Integrate the stacked closed loop of ``sc`` from 0 to ``sc.t_end``."""
    if sc.schedule.horizon < sc.t_end - TIME_TOL:
        raise ConfigError(f"schedule ends at {sc.schedule.horizon}, before t_end={sc.t_end}")
    n_steps = _n_steps(sc.t_end, sc.step)
    leader = sc.controller.leader
    lay = _layout(sc.agents, sc.controller.modes, sc.exo.s_dim, leader)
    state0 = _initial_state(sc, lay)
    modes = _step_modes(sc.schedule, sc.step, n_steps)
    adjs = _adjacencies(sc.schedule, leader, sc.controller.leader_edges)
    traj = _integrate(_make_rhs(sc, lay), state0, adjs, modes, sc.step, n_steps)

    n, s = lay.n_agents, lay.s_dim
    times = np.arange(n_steps + 1) * sc.step
    w = traj[:, lay.w_slice].reshape(-1, n, s)
    x = [traj[:, sl] for sl in lay.x_slices]
    z = [None if sl is None else traj[:, sl] for sl in lay.z_slices]
    y = np.stack([np.array([a.model.output(xk) for xk in xi]) for a, xi in zip(sc.agents, x)], axis=1)
    w0 = traj[:, lay.w0_slice] if leader else None
    result = SimResult(
        times=times,
        sigma=np.append(modes, modes[-1]),
        w=w,
        x=x,
        z=z,
        y=y,
        e=None,
        schedule=sc.schedule,
        modes=sc.controller.modes,
        agent_names=tuple(a.model.name for a in sc.agents),
        w0=w0,
        seed=sc.seed,
    )
    result.e = tracking_errors(result, sc.exo)
    if leader:
        result.e_leader = tracking_errors(result, sc.exo, reference="leader")
    return result


def simulate_exosystems(
    schedule: SwitchingSchedule,
    exo: Exosystem,
    w_init: ArrayLike,
    step: float,
    t_end: float,
    *,
    leader_edges=None,
    w0_init: ArrayLike | None = None,
) -> SimResult:
    """Coupled exosystems alone (no plants).

    With ``leader_edges`` (augmented-label edges ``(0, i[, w])``) a leader
    starting at ``w0_init`` (default zero) drives the followers.
    """
    _check_grid(schedule, step)
    if schedule.horizon < t_end - TIME_TOL:
        raise ConfigError(f"schedule ends at {schedule.horizon}, before t_end={t_end}")
    n_steps = _n_steps(t_end, step)
    w_init = np.atleast_2d(np.asarray(w_init, dtype=float))
    n, s = w_init.shape
    if n != schedule.n_nodes or s != exo.s_dim:
        raise ConfigError("w_init must have one row of length s_dim per schedule node")
    leader = leader_edges is not None
    parts = [w_init.ravel()]
    if leader:
        parts.append(np.zeros(s) if w0_init is None else np.asarray(w0_init, dtype=float).ravel())
    state0 = np.concatenate(parts)
    lay = _Layout(n, s, leader, [], [], state0.size)
    modes = _step_modes(schedule, step, n_steps)
    adjs = _adjacencies(schedule, leader, _leader_map(leader_edges))
    traj = _integrate(_make_rhs(_ExoOnly(exo), lay), state0, adjs, modes, step, n_steps)
    return SimResult(
        times=np.arange(n_steps + 1) * step,
        sigma=np.append(modes, modes[-1]),
        w=traj[:, : n * s].reshape(-1, n, s),
        x=[],
        z=[],
        y=None,
        e=None,
        schedule=schedule,
        w0=traj[:, n * s :] if leader else None,
    )


@dataclass
class _ExoOnly:
    exo: Exosystem
    agents: tuple = ()


def _leader_map(leader_edges) -> dict[int, float]:
    """Follower label -> weight from edges ``(0, i[, w])`` or an existing mapping."""
    if leader_edges is None:
        return {}
    if isinstance(leader_edges, dict):
        return {int(k[1] if isinstance(k, tuple) else k): float(v) for k, v in leader_edges.items()}
    return {int(e[1]): float(e[2]) if len(e) == 3 else 1.0 for e in leader_edges}


def tracking_errors(r: SimResult, exo: Exosystem, reference: str = "own") -> NDArray[np.float64]:
    """``h(x_i) + q(w_i)`` per agent (``reference="own"``) or ``h(x_i) + q(w_0)`` (``"leader"``).

    Shape ``(len(times), N, p)``.
    """
    if r.y is None:
        raise ValueError("result carries no agent outputs")
    if reference == "own":
        q = np.array([[exo.q(wi) for wi in wk] for wk in r.w], dtype=float)
        return r.y + q.reshape(r.y.shape)
    if reference == "leader":
        if r.w0 is None:
            raise ValueError("result has no leader trajectory")
        q0 = np.array([exo.q(wk) for wk in r.w0], dtype=float)
        return r.y + q0.reshape(len(r.times), 1, -1)
    raise ValueError(f"unknown reference {reference!r}")


class SyncErrors(NamedTuple):
    y: NDArray[np.float64] | None
    w: NDArray[np.float64]


def _max_pairwise(v: NDArray[np.float64]) -> NDArray[np.float64]:
    # v: (T, N, d)
    n = v.shape[1]
    out = np.zeros(v.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            out = np.maximum(out, np.linalg.norm(v[:, i] - v[:, j], axis=-1))
    return out


def pairwise_sync_error(r: SimResult) -> SyncErrors:
    """Per-step maxima over agent pairs of ``|y_i - y_j|`` and ``|w_i - w_j|``."""
    return SyncErrors(None if r.y is None else _max_pairwise(r.y), _max_pairwise(r.w))


def fit_exponential_rate(times: ArrayLike, series: ArrayLike, tail: float = 0.5) -> float:
    """Least-squares slope of ``log(series)`` over the trailing ``tail`` fraction of the time span."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if times.shape != series.shape:
        raise ValueError("times and series must have the same shape")
    if not 0 < tail <= 1:
        raise ValueError("tail must lie in (0, 1]")
    if times.size == 0:
        raise ValueError("window empty")
    t_lo = times[-1] - tail * (times[-1] - times[0])
    mask = times >= t_lo - TIME_TOL
    if mask.sum() < 2:
        raise ValueError("window empty")
    logs = np.log(np.clip(series[mask], 1e-300, None))
    slope, _ = np.polyfit(times[mask], logs, 1)
    return float(slope)


def summarize(r: SimResult, tail: float = 0.2, fit_tail: float = 0.8) -> dict:
    """Headline numbers of a run; each is recomputable from the trajectory CSV.

    ``max_tail_*`` are maxima over the trailing ``tail`` fraction of the run;
    ``w_sync_rate`` is the exponential rate of the pairwise exosystem
    disagreement fitted over the trailing ``fit_tail`` fraction.
    """
    sync = pairwise_sync_error(r)
    t = r.times
    mask = t >= t[-1] - tail * (t[-1] - t[0]) - TIME_TOL
    out = {
        "seed": r.seed,
        "t_end": float(t[-1]),
        "w_sync_rate": fit_exponential_rate(t, sync.w, fit_tail) if r.n_agents > 1 else math.nan,
        "max_tail_w_sync": float(sync.w[mask].max()),
    }
    if sync.y is not None:
        out["max_tail_y_sync"] = float(sync.y[mask].max())
        out["max_tail_error"] = float(np.abs(r.e[mask]).max())
    if r.e_leader is not None:
        out["max_tail_leader_error"] = float(np.abs(r.e_leader[mask]).max())
    return out
