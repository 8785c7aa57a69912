"""Scenario initialisation, the synchronous simulation loop and metrics.

Randomness: every step owns two streams keyed on ``(seed, step, purpose)``,
one for leader sampling and one for the random steps.  Agent ``i`` reads
row ``i`` of the step's uniform block, so its draws do not depend on the
order in which agents are processed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dynamics import (
    AgentState,
    InfluenceConfig,
    Policy,
    Task,
    advance_swarm,
    swarm_velocities,
    update_tasks,
)
from .errors import ConfigError, ConnectivityLost
from .geometry import MAX_STEP_DRAWS, Disk, minimal_enclosing_circle
from .graph import component_count, pairwise_distances, rng_adjacency, visibility_adjacency
from .steering import (
    SteeringConfig,
    SteeringMode,
    goal_heading,
    leader_velocity,
    observer_direction,
    sample_leaders,
)

HEX_GRID = "hexGrid"
UNIFORM_DISK = "uniformDisk"
PLACEMENT_ATTEMPTS = 100

_INIT_STREAM = 0
_LEADER_STREAM = 1
_STEP_STREAM = 2


@dataclass(frozen=True)
class ScenarioConfig:
    agent_count: int = 1
    placement: str = HEX_GRID
    spacing: float | None = None  # hexGrid; default 0.8 * V_a
    placement_radius: float | None = None  # uniformDisk; default V_a / 2
    tasks: tuple[Task, ...] = ()
    policy: Policy = Policy.FLEXIBLE
    repulsion_enabled: bool = True
    influence: InfluenceConfig = field(default_factory=InfluenceConfig)
    steering: SteeringConfig = field(default_factory=SteeringConfig)
    satisfaction_window: int = 10
    steps: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        object.__setattr__(self, "tasks", tuple(self.tasks))
        va = self.influence.visibility
        if self.spacing is None:
            object.__setattr__(self, "spacing", 0.8 * va)
        if self.placement_radius is None:
            object.__setattr__(self, "placement_radius", va / 2)
        if self.agent_count < 1:
            raise ConfigError("agentCount must be at least 1")
        if self.placement not in (HEX_GRID, UNIFORM_DISK):
            raise ConfigError(f"unknown placement {self.placement!r}")
        if not 0 < self.spacing < va:
            raise ConfigError(f"hexGrid spacing {self.spacing} must lie in (0, V_a={va})")
        if not self.placement_radius >= 0:
            raise ConfigError("placementRadius must be non-negative")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.satisfaction_window < 1:
            raise ConfigError("satisfactionWindow must be at least 1")
        if (self.steering.mode is SteeringMode.INFORMED_AGENTS
                and self.steering.informed_count > self.agent_count):
            raise ConfigError("informedCount exceeds agentCount")


@dataclass(frozen=True)
class StepMetrics:
    step: int
    bounding_circle: Disk
    distance_to_goal: float
    tasks_satisfied: int
    tasks_active: int
    visibility_edge_count: int
    effective_edge_count: int
    connected: bool


@dataclass
class SimulationState:
    step: int
    positions: np.ndarray
    tasks: tuple[Task, ...]
    dist: np.ndarray
    visible: np.ndarray
    neighbors: np.ndarray  # the policy's neighbor graph; doubles as NLN memory
    components: int = 1

    @property
    def connected(self) -> bool:
        return self.components == 1

    def agent(self, i: int, policy: Policy) -> AgentState:
        memory = frozenset()
        if Policy(policy) is Policy.NEVER_LOSE:
            memory = frozenset(np.flatnonzero(self.neighbors[i]).tolist())
        return AgentState(i, self.positions[i].copy(), memory)


def random_stream(seed: int, step: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng([purpose, step, seed])


def hex_grid(n: int, spacing: float) -> np.ndarray:
    """The ``n`` triangular-lattice sites nearest the origin, ordered by
    distance then angle."""
    rings = 0
    while 3 * rings * (rings + 1) + 1 < n:
        rings += 1
    rng_ = np.arange(-rings - 1, rings + 2)
    q, r = np.meshgrid(rng_, rng_, indexing="ij")
    q, r = q.ravel(), r.ravel()
    x = spacing * (q + 0.5 * r)
    y = spacing * (math.sqrt(3) / 2 * r)
    key_d = np.round(np.hypot(x, y) / spacing, 9)
    key_a = np.round(np.mod(np.arctan2(y, x), 2 * np.pi), 9)
    order = np.lexsort((key_a, key_d))[:n]
    return np.stack([x[order], y[order]], axis=1)


def _snapshot(positions, policy: Policy, visibility: float, memory=None):
    dist = pairwise_distances(positions)
    visible = visibility_adjacency(dist, visibility)
    if policy is Policy.FLEXIBLE:
        nbrs = rng_adjacency(dist, visible)
    else:
        nbrs = visible if memory is None else (memory | visible)
    return dist, visible, nbrs


def _place(config: ScenarioConfig) -> np.ndarray:
    n, va = config.agent_count, config.influence.visibility
    if config.placement == HEX_GRID:
        return hex_grid(n, config.spacing)
    rng = random_stream(config.seed, 0, _INIT_STREAM)
    for _ in range(PLACEMENT_ATTEMPTS):
        rad = config.placement_radius * np.sqrt(rng.random(n))
        ang = 2 * np.pi * rng.random(n)
        pts = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        if component_count(visibility_adjacency(pairwise_distances(pts), va)) == 1:
            return pts
    raise ConfigError(
        f"no connected uniformDisk placement of {n} agents in radius "
        f"{config.placement_radius} with V_a={va} after {PLACEMENT_ATTEMPTS} attempts"
    )


def init_scenario(config: ScenarioConfig) -> SimulationState:
    positions = _place(config)
    dist, visible, nbrs = _snapshot(positions, config.policy, config.influence.visibility)
    state = SimulationState(0, positions, tuple(config.tasks), dist, visible, nbrs,
                            component_count(visible))
    if not state.connected:
        raise ConfigError(
            f"initial visibility graph is disconnected ({state.components} components)"
        )
    return state


def leader_assignment(state: SimulationState, config: ScenarioConfig, step: int):
    rng = random_stream(config.seed, step, _LEADER_STREAM)
    return sample_leaders(rng, config.steering, len(state.positions), step)


def step_velocities(state: SimulationState, config: ScenarioConfig, leaders) -> np.ndarray:
    """Per-agent velocity for the coming step: influence velocity for
    followers, goal attraction for the current leaders."""
    p = state.positions
    v = swarm_velocities(p, state.dist, state.visible, state.tasks, config.influence,
                         repulsion=config.repulsion_enabled, step=state.step)
    steering = config.steering
    if leaders:
        if steering.mode is SteeringMode.EXTERNAL_OBSERVER:
            heading = observer_direction(p, steering.goal)
            for i in leaders:
                v[i] = leader_velocity(heading, steering)
        else:
            for i in leaders:
                v[i] = leader_velocity(goal_heading(p[i], steering.goal), steering)
    return v


def step_simulation(state: SimulationState, config: ScenarioConfig):
    """Advance every agent synchronously from the frozen snapshot in ``state``."""
    step = state.step + 1
    assignment = leader_assignment(state, config, step)
    v = step_velocities(state, config, assignment.leaders)
    uniforms = random_stream(config.seed, step, _STEP_STREAM).random(
        (len(state.positions), MAX_STEP_DRAWS, 2)
    )
    new_positions = advance_swarm(state.positions, state.neighbors, v, config.influence, uniforms)
    tasks = tuple(update_tasks(state.tasks, new_positions, config.satisfaction_window))
    memory = state.neighbors if config.policy is Policy.NEVER_LOSE else None
    dist, visible, nbrs = _snapshot(new_positions, config.policy, config.influence.visibility, memory)
    new_state = SimulationState(step, new_positions, tasks, dist, visible, nbrs,
                                component_count(visible))
    if not new_state.connected:
        raise ConnectivityLost(step, new_state.components)
    return new_state, compute_metrics(new_state, config)


def compute_metrics(state: SimulationState, config: ScenarioConfig) -> StepMetrics:
    circle = minimal_enclosing_circle(state.positions)
    gx, gy = config.steering.goal
    return StepMetrics(
        step=state.step,
        bounding_circle=circle,
        distance_to_goal=math.hypot(circle.center[0] - gx, circle.center[1] - gy),
        tasks_satisfied=sum(1 for t in state.tasks if not t.active or t.satisfied_streak > 0),
        tasks_active=sum(1 for t in state.tasks if t.active),
        visibility_edge_count=int(np.count_nonzero(state.visible)) // 2,
        effective_edge_count=int(np.count_nonzero(state.neighbors)) // 2,
        connected=state.connected,
    )


def simulate(config: ScenarioConfig) -> Iterator[tuple[SimulationState, StepMetrics]]:
    """Yield the initial state and then one ``(state, metrics)`` per step."""
    state = init_scenario(config)
    yield state, compute_metrics(state, config)
    for _ in range(config.steps):
        state, metrics = step_simulation(state, config)
        yield state, metrics


def run_scenario(config: ScenarioConfig, trajectory: bool = False):
    metrics, frames = [], [] if trajectory else None
    for state, m in simulate(config):
        metrics.append(m)
        if frames is not None:
            frames.append(state.positions.copy())
    return metrics, frames
