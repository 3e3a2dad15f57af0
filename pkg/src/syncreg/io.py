"""Scenario files (JSON) and trajectory CSV files.

Scenario files label agents ``1..N`` and the leader ``0``, and number graphs
``1..P``; the Python objects they produce use 0-based indices.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Mapping
from importlib import resources
from pathlib import Path

import numpy as np

from .agents import GainSet, builtin_agent, builtin_exosystem
from .controllers import OUTPUT_FEEDBACK, STATE_FEEDBACK, ControllerConfig
from .errors import ConfigError
from .graph import Digraph, SwitchingSchedule, cycling_schedule, random_schedule
from .simulator import AgentSpec, InitSpec, Scenario, SimResult

__all__ = [
    "bundled_scenarios",
    "resolve_config",
    "load_config",
    "parse_scenario",
    "build_scenario",
    "schedule_rng",
    "write_csv",
    "read_csv",
    "csv_columns",
]

DEFAULT_STEP = 1e-3
DEFAULT_RANGE = (-1.0, 1.0)

_SECTIONS = {
    "top": {"name", "description", "agents", "exosystem", "graphs", "schedule", "controller", "integration", "init"},
    "agent": {"name", "gains"},
    "gains": {"K", "L"},
    "exosystem": {"tau"},
    "schedule": {"mode", "dwell", "t_end", "seed", "intervals"},
    "controller": {"mode", "leader", "leader_edges"},
    "integration": {"step"},
    "init": {"mode", "range", "seed", "x", "z", "w", "w0"},
}
_ANCHORS = {k: k for k in ("exosystem", "schedule", "controller", "integration", "init")}
_REQUIRED = {
    "top": {"agents", "exosystem", "graphs", "schedule"},
    "agent": {"name"},
    "exosystem": {"tau"},
    "schedule": {"mode", "dwell", "t_end"},
}


def bundled_scenarios() -> list[str]:
    root = resources.files("syncreg") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(path: str | Path) -> Path:
    """Return ``path`` if it exists, else the bundled scenario of that file name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("syncreg") / "scenarios" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"scenario file {str(path)!r} not found (bundled: {', '.join(bundled_scenarios())})")


class _Text:
    """Maps keys back to line numbers for error messages."""

    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def line_of(self, key: str, after: str | None = None) -> int | None:
        """Line of the first ``"key"``, searching from the ``"after"`` key when given."""
        start = max(self.text.find(f'"{after}"'), 0) if after else 0
        pos = self.text.find(f'"{key}"', start)
        if pos < 0 and start:
            pos = self.text.find(f'"{key}"')
        return None if pos < 0 else self.text.count("\n", 0, pos) + 1

    def error(self, message: str, key: str | None = None, after: str | None = None) -> ConfigError:
        line = self.line_of(key, after) if key else None
        where = f"{self.source}:{line}" if line else self.source
        return ConfigError(f"{where}: {message}")


def load_config(path: str | Path) -> tuple[dict, _Text]:
    p = resolve_config(path)
    text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{p}:1: top level must be an object")
    return data, _Text(text, str(p))


def parse_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    """Read and validate a scenario file; ``seed`` overrides every seed in it."""
    data, text = load_config(path)
    return build_scenario(data, seed=seed, _text=text)


def _check_keys(obj, section: str, text: _Text, label: str | None = None):
    label = label or section
    if not isinstance(obj, Mapping):
        raise text.error(f"{label} must be an object", section if section != "top" else None)
    unknown = set(obj) - _SECTIONS[section]
    if unknown:
        key = sorted(unknown)[0]
        raise text.error(f"unknown key {key!r} in {label} (allowed: {', '.join(sorted(_SECTIONS[section]))})", key, _ANCHORS.get(section))
    missing = _REQUIRED.get(section, set()) - set(obj)
    if missing:
        raise text.error(f"missing key {sorted(missing)[0]!r} in {label}", section if section != "top" else None)


def _number(value, key: str, text: _Text, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise text.error(f"{key} must be a number, got {value!r}", key)
    if positive and not value > 0:
        raise text.error(f"{key} must be positive, got {value!r}", key)
    return float(value)


def schedule_rng(seed: int) -> np.random.Generator:
    """Generator used to draw random switching signals (independent of the init stream)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def _parse_graphs(raw, n: int, text: _Text) -> list[Digraph]:
    if not isinstance(raw, list) or not raw:
        raise text.error("graphs must be a non-empty list of edge lists", "graphs")
    graphs = []
    for gi, edges in enumerate(raw, start=1):
        if not isinstance(edges, list):
            raise text.error(f"graph {gi} must be a list of edges", "graphs")
        conv = []
        for e in edges:
            if not isinstance(e, list) or len(e) not in (2, 3):
                raise text.error(f"graph {gi}: edge {e!r} must be [from, to] or [from, to, weight]", "graphs")
            i, j = e[0], e[1]
            if not (isinstance(i, int) and isinstance(j, int) and 1 <= i <= n and 1 <= j <= n):
                raise text.error(f"graph {gi}: edge {e!r} must join agents 1..{n}", "graphs")
            conv.append((i - 1, j - 1, float(e[2]) if len(e) == 3 else 1.0))
        try:
            graphs.append(Digraph(n, conv))
        except ValueError as exc:
            raise text.error(f"graph {gi}: {exc}", "graphs") from None
    return graphs


def _parse_schedule(raw, graphs, seed_override, text: _Text) -> tuple[SwitchingSchedule, int | None]:
    _check_keys(raw, "schedule", text)
    dwell = _number(raw["dwell"], "dwell", text, positive=True)
    t_end = _number(raw["t_end"], "t_end", text, positive=True)
    mode = raw["mode"]
    seed = seed_override if seed_override is not None else raw.get("seed")
    try:
        if mode == "random":
            if seed is None:
                raise text.error("random schedule needs a seed", "schedule")
            return random_schedule(graphs, dwell, t_end, schedule_rng(int(seed))), int(seed)
        if mode == "cyclic":
            return cycling_schedule(graphs, dwell, t_end), seed
        if mode == "explicit":
            intervals = raw.get("intervals")
            if not isinstance(intervals, list) or not intervals:
                raise text.error("explicit schedule needs a non-empty 'intervals' list", "intervals")
            times, idx = [], []
            for item in intervals:
                if not isinstance(item, list) or len(item) != 2:
                    raise text.error(f"interval {item!r} must be [t_start, graph_index]", "intervals")
                k = item[1]
                if not isinstance(k, int) or not 1 <= k <= len(graphs):
                    raise text.error(f"graph index {k!r} outside 1..{len(graphs)}", "intervals")
                times.append(_number(item[0], "intervals", text))
                idx.append(k - 1)
            return SwitchingSchedule(graphs, times, idx, dwell, t_end), seed
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise text.error(f"schedule: {exc}", "schedule") from None
    raise text.error(f"unknown schedule mode {mode!r} (random, cyclic, explicit)", "mode", "schedule")


def _parse_gains(raw, default: GainSet, label: str, text: _Text) -> GainSet:
    if raw is None:
        return default
    _check_keys(raw, "gains", text, f"{label} gains")
    K = np.atleast_2d(np.asarray(raw.get("K", default.K), dtype=float))
    L = raw.get("L", default.L)
    if L is not None:
        L = np.asarray(L, dtype=float)
        L = L[:, None] if L.ndim == 1 else L
    return GainSet(K=K, L=L)


def _parse_init(raw, n_agents: int, seed_override, text: _Text) -> InitSpec:
    if raw is None:
        raw = {}
    _check_keys(raw, "init", text)
    mode = raw.get("mode", "seeded_uniform")
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    if mode == "seeded_uniform":
        lo, hi = raw.get("range", DEFAULT_RANGE)
        return InitSpec("seeded_uniform", float(lo), float(hi), int(seed))
    if mode == "explicit":
        def per_agent(key):
            v = raw.get(key)
            if v is None:
                return None
            if not isinstance(v, list) or len(v) != n_agents:
                raise text.error(f"init.{key} must list one entry per agent", key)
            return tuple(v)

        if raw.get("x") is None or raw.get("w") is None:
            raise text.error("explicit init needs 'x' and 'w'", "init")
        return InitSpec("explicit", seed=int(seed), x=per_agent("x"), z=per_agent("z"), w=per_agent("w"),
                        w0=None if raw.get("w0") is None else tuple(raw["w0"]))
    raise text.error(f"unknown init mode {mode!r} (seeded_uniform, explicit)", "mode", "init")


def build_scenario(data: dict, seed: int | None = None, *, _text: _Text | None = None) -> Scenario:
    """Validate a decoded scenario document and materialize it."""
    text = _text or _Text(json.dumps(data, indent=1), "<scenario>")
    _check_keys(data, "top", text)
    _check_keys(data["exosystem"], "exosystem", text)
    tau = _number(data["exosystem"]["tau"], "tau", text)
    if tau == 0:
        raise text.error("tau must be non-zero", "tau")
    exo = builtin_exosystem(tau)

    if not isinstance(data["agents"], list) or not data["agents"]:
        raise text.error("agents must be a non-empty list", "agents")
    specs = []
    for i, entry in enumerate(data["agents"], start=1):
        _check_keys(entry, "agent", text, f"agent {i}")
        try:
            model, sol, gains = builtin_agent(entry["name"], tau)
        except ValueError as exc:
            raise text.error(str(exc), entry["name"] if isinstance(entry["name"], str) else "agents") from None
        specs.append(AgentSpec(model, sol, _parse_gains(entry.get("gains"), gains, f"agent {i}", text)))
    n = len(specs)

    graphs = _parse_graphs(data["graphs"], n, text)
    schedule, sched_seed = _parse_schedule(data["schedule"], graphs, seed, text)

    ctrl = data.get("controller", {})
    _check_keys(ctrl, "controller", text)
    mode = ctrl.get("mode", "mixed")
    modes = []
    for i, a in enumerate(specs, start=1):
        if mode == STATE_FEEDBACK:
            modes.append(STATE_FEEDBACK)
        elif mode == OUTPUT_FEEDBACK:
            if a.gains.L is None:
                raise text.error(f"agent {i} ({a.model.name}): output feedback requires an observer gain L", "mode", "controller")
            modes.append(OUTPUT_FEEDBACK)
        elif mode == "mixed":
            modes.append(OUTPUT_FEEDBACK if a.gains.L is not None else STATE_FEEDBACK)
        else:
            raise text.error(f"unknown controller mode {mode!r} (state_feedback, output_feedback, mixed)", "mode", "controller")
    leader = bool(ctrl.get("leader", False))
    leader_edges: dict[int, float] = {}
    for e in ctrl.get("leader_edges", []) or []:
        if not isinstance(e, list) or len(e) not in (2, 3):
            raise text.error(f"leader edge {e!r} must be [0, i] or [0, i, weight]", "leader_edges")
        if e[1] == 0:
            raise text.error("leader has no in-edges", "leader_edges")
        if e[0] != 0 or not isinstance(e[1], int) or not 1 <= e[1] <= n:
            raise text.error(f"leader edge {e!r} must run from 0 to an agent 1..{n}", "leader_edges")
        w = float(e[2]) if len(e) == 3 else 1.0
        if not w > 0:
            raise text.error(f"leader edge {e!r} needs a positive weight", "leader_edges")
        leader_edges[e[1]] = w
    if leader and not leader_edges:
        raise text.error("leader mode needs at least one leader edge", "leader_edges")
    try:
        controller = ControllerConfig(
            tuple(modes), tuple(a.gains for a in specs), tuple(a.solution for a in specs),
            leader=leader, leader_edges=leader_edges,
        )
    except ValueError as exc:
        raise text.error(str(exc), "controller") from None

    integ = data.get("integration", {})
    _check_keys(integ, "integration", text)
    step = _number(integ.get("step", DEFAULT_STEP), "step", text, positive=True)

    init = _parse_init(data.get("init"), n, seed, text)
    try:
        return Scenario(
            agents=tuple(specs), exo=exo, schedule=schedule, controller=controller,
            t_end=schedule.horizon, step=step, init=init,
            seed=sched_seed if sched_seed is not None else init.seed,
            name=str(data.get("name", "")),
        )
    except ConfigError as exc:
        raise text.error(str(exc), "step", "integration") from None


# ---------------------------------------------------------------------------
# Trajectory CSV


def csv_columns(r: SimResult) -> list[str]:
    cols = ["t", "sigma"]
    p = r.y.shape[2]
    s = r.w.shape[2]
    for i in range(r.n_agents):
        a = i + 1
        cols += [f"y_{a}"] if p == 1 else [f"y_{a}_{k + 1}" for k in range(p)]
        cols += [f"e_{a}"] if p == 1 else [f"e_{a}_{k + 1}" for k in range(p)]
        cols += [f"w_{a}_{k + 1}" for k in range(s)]
        if r.z[i] is not None:
            cols.append(f"zerr_{a}")
    if r.w0 is not None:
        cols += [f"w0_{k + 1}" for k in range(s)]
    return cols


def _csv_matrix(r: SimResult) -> np.ndarray:
    blocks = [r.times[:, None], (r.sigma + 1)[:, None].astype(float)]
    for i in range(r.n_agents):
        blocks += [r.y[:, i, :], r.e[:, i, :], r.w[:, i, :]]
        if r.z[i] is not None:
            blocks.append(np.linalg.norm(r.z[i] - r.x[i], axis=1)[:, None])
    if r.w0 is not None:
        blocks.append(r.w0)
    return np.hstack(blocks)


def write_csv(r: SimResult, path: str | Path) -> None:
    """Write the trajectory table: header row, then one row per grid point."""
    if r.y is None:
        raise ValueError("write_csv needs a closed-loop result with agent outputs")
    cols = csv_columns(r)
    mat = _csv_matrix(r)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in mat:
            writer.writerow([str(int(row[1])) if k == 1 else format(v, ".17g") for k, v in enumerate(row)])


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    mat = np.array(rows, dtype=float).reshape(-1, len(header))
    out = {name: mat[:, k] for k, name in enumerate(header)}
    out["sigma"] = out["sigma"].astype(int)
    return out
