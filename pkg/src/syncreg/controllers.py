"""Distributed state- and output-feedback regulators and the coupled exosystem."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .agents import AgentModel, Exosystem, GainSet, RegulatorSolution
from .graph import Digraph, LeaderAugmentedGraph, adjacency_matrix

__all__ = [
    "STATE_FEEDBACK",
    "OUTPUT_FEEDBACK",
    "ControllerConfig",
    "coupled_exo_rhs",
    "coupling_term",
    "leader_coupled_exo_rhs",
    "state_feedback_control",
    "output_feedback_control",
    "observer_rhs",
]

STATE_FEEDBACK = "state_feedback"
OUTPUT_FEEDBACK = "output_feedback"


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    """Per-agent feedback modes, gains and regulator solutions.

    ``leader_edges`` maps follower labels ``1..N`` to the weight of their edge
    from leader node 0; it is only used when ``leader`` is true.
    """

    modes: tuple[str, ...]
    gains: tuple[GainSet, ...]
    solutions: tuple[RegulatorSolution, ...]
    leader: bool = False
    leader_edges: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "gains", tuple(self.gains))
        object.__setattr__(self, "solutions", tuple(self.solutions))
        if not len(self.modes) == len(self.gains) == len(self.solutions):
            raise ValueError("modes, gains and solutions must have one entry per agent")
        for i, (mode, g) in enumerate(zip(self.modes, self.gains)):
            if mode not in (STATE_FEEDBACK, OUTPUT_FEEDBACK):
                raise ValueError(f"agent {i + 1}: unknown feedback mode {mode!r}")
            if mode == OUTPUT_FEEDBACK and g.L is None:
                raise ValueError(f"agent {i + 1}: output feedback requires an observer gain L")


def coupling_term(w_all: NDArray[np.float64], adjacency: NDArray[np.float64]) -> NDArray[np.float64]:
    """Row ``i`` is ``sum_j a_ij (w_j - w_i)``, i.e. ``-(L w)_i``."""
    return adjacency @ w_all - adjacency.sum(axis=1)[:, None] * w_all


def coupled_exo_rhs(w_all: ArrayLike, g_active: Digraph, exo: Exosystem) -> NDArray[np.float64]:
    """Derivatives of the coupled exosystems, one row per agent."""
    w_all = np.atleast_2d(np.asarray(w_all, dtype=float))
    drift = np.array([exo.s(w) for w in w_all], dtype=float).reshape(w_all.shape)
    return drift + coupling_term(w_all, adjacency_matrix(g_active))


def leader_coupled_exo_rhs(
    w_all: ArrayLike, g_active: LeaderAugmentedGraph, exo: Exosystem
) -> NDArray[np.float64]:
    """As :func:`coupled_exo_rhs` with row 0 the leader, which receives nothing."""
    return coupled_exo_rhs(w_all, g_active.as_digraph(), exo)


def state_feedback_control(
    x_i: ArrayLike, w_i: ArrayLike, gains: GainSet, sol: RegulatorSolution
) -> NDArray[np.float64]:
    """``c(w) + K (x - pi(w))``."""
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    w_i = np.atleast_1d(np.asarray(w_i, dtype=float))
    return np.atleast_1d(sol.c(w_i)) + gains.K @ (x_i - np.atleast_1d(sol.pi(w_i)))


def output_feedback_control(
    z_i: ArrayLike, w_i: ArrayLike, gains: GainSet, sol: RegulatorSolution
) -> NDArray[np.float64]:
    """Same law as :func:`state_feedback_control` with the observer state in place of ``x``."""
    return state_feedback_control(z_i, w_i, gains, sol)


def observer_rhs(
    z_i: ArrayLike, y_i: ArrayLike, u_i: ArrayLike, model: AgentModel, gains: GainSet
) -> NDArray[np.float64]:
    """``f(z) + g(z) u + L (h(z) - y)``."""
    if gains.L is None:
        raise ValueError(f"{model.name}: observer needs an output-injection gain L")
    z_i = np.atleast_1d(np.asarray(z_i, dtype=float))
    innovation = model.output(z_i) - np.atleast_1d(np.asarray(y_i, dtype=float))
    return model.rhs(z_i, u_i) + gains.L @ innovation


def default_modes(gains: Sequence[GainSet]) -> tuple[str, ...]:
    """Output feedback wherever an observer gain is available."""
    return tuple(OUTPUT_FEEDBACK if g.L is not None else STATE_FEEDBACK for g in gains)
