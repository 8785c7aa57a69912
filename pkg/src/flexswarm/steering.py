"""Broadcast steering through anonymous leaders.

An external observer broadcasts a unit heading from the swarm centroid to the
goal; each agent hears it with some probability per step and, for that step,
trades its usual influence velocity for pure goal attraction.  Alternatively
a fixed handful of informed agents know where the goal is.  Either way the
leader is confined to the same allowable region as everyone else.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import InfluenceConfig, Policy, confined_step, policy_neighbors
from .errors import ConfigError
from .graph import build_visibility_graph

ARRIVAL_EPS = 1e-9


class SteeringMode(str, enum.Enum):
    OFF = "off"
    EXTERNAL_OBSERVER = "externalObserver"
    INFORMED_AGENTS = "informedAgents"


@dataclass(frozen=True)
class SteeringConfig:
    mode: SteeringMode = SteeringMode.OFF
    goal: tuple[float, float] = (0.0, 0.0)
    reception_probability: float = 0.5
    informed_count: int = 1
    leader_gain: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", SteeringMode(self.mode))
        if not 0.0 <= self.reception_probability <= 1.0:
            raise ConfigError(f"receptionProbability {self.reception_probability} outside [0, 1]")
        if self.informed_count < 0:
            raise ConfigError("informedCount must be non-negative")
        if self.leader_gain < 0:
            raise ConfigError("leaderGain must be non-negative")


@dataclass(frozen=True)
class LeaderAssignment:
    step: int
    leaders: frozenset[int]


def _heading(src, dst) -> np.ndarray:
    diff = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    dist = math.hypot(diff[0], diff[1])
    if dist <= ARRIVAL_EPS:
        return np.zeros(2)
    return diff / dist


def observer_direction(positions, goal) -> np.ndarray:
    """Broadcast payload: unit vector from the swarm centroid toward the goal."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(p) == 0:
        raise ValueError("no agents to observe")
    return _heading(p.mean(axis=0), goal)


def goal_heading(position, goal) -> np.ndarray:
    """What an informed agent knows: the unit direction from itself to the goal."""
    return _heading(position, goal)


def sample_leaders(rng, config: SteeringConfig, n: int, step: int) -> LeaderAssignment:
    if config.mode is SteeringMode.EXTERNAL_OBSERVER:
        heard = rng.random(n) < config.reception_probability
        return LeaderAssignment(step, frozenset(np.flatnonzero(heard).tolist()))
    if config.mode is SteeringMode.INFORMED_AGENTS:
        return LeaderAssignment(step, frozenset(range(min(config.informed_count, n))))
    return LeaderAssignment(step, frozenset())


def leader_velocity(heading, steering: SteeringConfig) -> np.ndarray:
    # attraction only: the agent then steps against this, i.e. along heading
    return -steering.leader_gain * np.asarray(heading, dtype=float)


def leader_step(i: int, positions, heading, policy: Policy, config: InfluenceConfig,
                steering: SteeringConfig, rng, *, memory=frozenset()) -> np.ndarray:
    """Move leader ``i`` along ``heading`` inside its allowable region.

    ``heading`` is the received broadcast direction, or ``goal_heading`` for
    an informed agent; goal coordinates never reach this function.
    """
    graph = build_visibility_graph(positions, config.visibility)
    nbrs = policy_neighbors(i, positions, graph, policy, memory)
    return confined_step(i, positions, nbrs, leader_velocity(heading, steering), config, rng)
