"""Influence functions, the attraction/repulsion step and its confinement to
the allowable region, plus task bookkeeping.

Two routes compute the same motion: ``agent_step`` moves one agent using the
scalar geometry API, ``advance_swarm`` moves every agent at once from padded
neighbor arrays.  The engine runs the batched route; the tests hold the two
against each other.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import geometry as geo
from .errors import ConfigError
from .graph import VisibilityGraph, build_visibility_graph, effective_neighbors, never_lose_neighbor_set


class Policy(str, enum.Enum):
    FLEXIBLE = "flexibleRNG"
    NEVER_LOSE = "neverLoseNeighbor"


@dataclass(frozen=True)
class InfluenceConfig:
    visibility: float = 2.0
    delta: float = 0.05
    r_max: float = 0.1
    repulsion_gain: float = 1.0
    attraction_gain: float = 1.0
    zero_velocity_epsilon: float = 1e-12

    def __post_init__(self):
        if not self.visibility > 0:
            raise ConfigError("V_a must be positive")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        if self.r_max < 0 or self.repulsion_gain < 0 or self.attraction_gain < 0:
            raise ConfigError("r_max and gains must be non-negative")
        if not self.zero_velocity_epsilon > 0:
            raise ConfigError("zeroVelocityEpsilon must be positive")
        if not self.delta + self.r_max < self.visibility / 2:
            raise ConfigError(
                f"delta + r_max = {self.delta + self.r_max} must stay below V_a/2 = {self.visibility / 2}"
            )


@dataclass(frozen=True)
class Task:
    position: tuple[float, float]
    demand: int = 1
    sensing_radius: float = 1.0
    active: bool = True
    satisfied_streak: int = 0

    def __post_init__(self):
        if self.demand < 1:
            raise ConfigError("task demand must be at least 1")
        if not self.sensing_radius > 0:
            raise ConfigError("task sensing radius must be positive")


@dataclass
class AgentState:
    index: int
    position: np.ndarray
    nln_memory: frozenset[int] = field(default_factory=frozenset)


def repulsion_force(distance, config: InfluenceConfig):
    """Linear decay from ``repulsion_gain`` at contact to zero at V_a."""
    d = np.asarray(distance, dtype=float)
    out = config.repulsion_gain * np.maximum(0.0, 1.0 - d / config.visibility)
    return float(out) if out.ndim == 0 else out


def attraction_force(distance, config: InfluenceConfig):
    d = np.asarray(distance, dtype=float)
    out = np.where(d <= config.visibility, config.attraction_gain, 0.0)
    return float(out) if out.ndim == 0 else out


# -- coincident agents ------------------------------------------------------

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
    x = ((x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
    x = ((x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
    return x ^ (x >> np.uint64(31))


def tiebreak_direction(i, j, step: int) -> np.ndarray:
    """Stand-in for the unit vector from agent i to agent j when they coincide.

    Derived from the unordered pair and the step counter only, and
    antisymmetric: ``tiebreak_direction(j, i) == -tiebreak_direction(i, j)``.
    """
    i = np.atleast_1d(np.asarray(i, dtype=np.int64))
    j = np.atleast_1d(np.asarray(j, dtype=np.int64))
    lo = np.minimum(i, j).astype(np.uint64)
    hi = np.maximum(i, j).astype(np.uint64)
    with np.errstate(over="ignore"):
        h = _splitmix(_splitmix(_splitmix(lo) ^ hi) ^ np.uint64(step))
    ang = (h >> np.uint64(11)).astype(np.float64) * (2.0 * math.pi / 2.0**53)
    u = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    sign = np.where(i < j, 1.0, -1.0)[:, None]
    return u * sign


def influence_velocity(i: int, positions, tasks: Sequence[Task], config: InfluenceConfig,
                       *, repulsion: bool = True, step: int = 0) -> np.ndarray:
    """Velocity of agent ``i`` before normalisation: repulsion pointing at its
    visible neighbors minus attraction pointing at the active tasks it
    senses.  The agent then steps *against* this vector."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    v = np.zeros(2)
    if repulsion:
        for j in range(len(p)):
            if j == i:
                continue
            diff = p[j] - p[i]
            dist = math.hypot(diff[0], diff[1])
            if dist > config.visibility + geo.GEO_EPS:
                continue
            u = diff / dist if dist > 0 else tiebreak_direction(i, j, step)[0]
            v += repulsion_force(dist, config) * u
    for task in tasks:
        if not task.active:
            continue
        diff = np.asarray(task.position, dtype=float) - p[i]
        dist = math.hypot(diff[0], diff[1])
        if dist == 0.0 or dist > config.visibility:
            continue
        v -= attraction_force(dist, config) * (diff / dist)
    return v


def proposed_position(position, velocity, config: InfluenceConfig) -> np.ndarray:
    p = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    speed = math.hypot(v[0], v[1])
    if speed <= config.zero_velocity_epsilon:
        return p.copy()
    return p - config.delta * (v / speed)


def allowable_region(i: int, positions, neighbors, visibility: float) -> geo.AllowableRegion:
    """Intersection of the pair disks shared with ``neighbors``; a lone agent
    gets a disk of radius V_a/2 around itself."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    if not neighbors:
        return geo.AllowableRegion.of([geo.Disk(tuple(p[i].tolist()), visibility / 2)])
    return geo.AllowableRegion.of(
        [geo.pair_disk(p[i], p[j], visibility) for j in sorted(neighbors)]
    )


def policy_neighbors(i: int, positions, graph: VisibilityGraph, policy: Policy,
                     memory=frozenset()) -> frozenset[int]:
    if Policy(policy) is Policy.FLEXIBLE:
        return effective_neighbors(i, positions, graph)
    return never_lose_neighbor_set(i, memory, graph)


def confined_step(i: int, positions, neighbors, velocity, config: InfluenceConfig, rng) -> np.ndarray:
    """Steps 2-5 of the local motion rule for a given velocity."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    region = allowable_region(i, p, neighbors, config.visibility)
    target = proposed_position(p[i], velocity, config)
    moved = geo.project_ray_to_region(p[i], target, region)
    return geo.sample_point_near(rng, moved, config.r_max, region)


def agent_step(i: int, positions, tasks: Sequence[Task], policy: Policy, config: InfluenceConfig,
               rng, *, memory=frozenset(), repulsion: bool = True, step: int = 0) -> np.ndarray:
    """One agent's move from a frozen snapshot (scalar reference route)."""
    graph = build_visibility_graph(positions, config.visibility)
    nbrs = policy_neighbors(i, positions, graph, policy, memory)
    v = influence_velocity(i, positions, tasks, config, repulsion=repulsion, step=step)
    return confined_step(i, positions, nbrs, v, config, rng)


# -- batched route ----------------------------------------------------------

def swarm_velocities(positions: np.ndarray, dist: np.ndarray, visible: np.ndarray,
                     tasks: Sequence[Task], config: InfluenceConfig,
                     *, repulsion: bool = True, step: int = 0) -> np.ndarray:
    n = len(positions)
    v = np.zeros((n, 2))
    if repulsion and n > 1:
        ii, jj = np.nonzero(visible)
        d = dist[ii, jj]
        unit = positions[jj] - positions[ii]
        touching = d == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            unit /= d[:, None]
        if touching.any():
            unit[touching] = tiebreak_direction(ii[touching], jj[touching], step)
        w = repulsion_force(d, config)
        v[:, 0] += np.bincount(ii, w * unit[:, 0], minlength=n)
        v[:, 1] += np.bincount(ii, w * unit[:, 1], minlength=n)
    for task in tasks:
        if not task.active:
            continue
        diff = np.asarray(task.position, dtype=float)[None, :] - positions
        d = np.hypot(diff[:, 0], diff[:, 1])
        sensed = (d > 0) & (d <= config.visibility)
        if not sensed.any():
            continue
        f = np.where(sensed, attraction_force(d, config), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            v -= np.where(sensed[:, None], f[:, None] * diff / d[:, None], 0.0)
    return v


def padded_neighbors(neighbor_mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense neighbor lists ``(index, valid)`` of shape (n, k_max).

    Rows without neighbors get their own index as the single valid entry,
    whose pair disk degenerates to the lone-agent disk around itself.
    """
    n = neighbor_mask.shape[0]
    counts = neighbor_mask.sum(axis=1)
    k_max = max(int(counts.max()) if n else 0, 1)
    order = np.argsort(~neighbor_mask, axis=1, kind="stable")[:, :k_max]
    valid = np.take_along_axis(neighbor_mask, order, axis=1)
    lone = counts == 0
    order[lone, 0] = np.flatnonzero(lone)
    valid[lone, 0] = True
    return order, valid


def advance_swarm(positions: np.ndarray, neighbor_mask: np.ndarray, velocities: np.ndarray,
                  config: InfluenceConfig, uniforms: np.ndarray) -> np.ndarray:
    """Batched steps 2-5 for every agent; ``uniforms`` is (n, MAX_STEP_DRAWS, 2)."""
    p = np.asarray(positions, dtype=float)
    idx, valid = padded_neighbors(neighbor_mask)
    centers = (p[:, None, :] + p[idx]) / 2.0
    radius = config.visibility / 2.0
    speed = np.hypot(velocities[:, 0], velocities[:, 1])
    moving = speed > config.zero_velocity_epsilon
    target = p.copy()
    target[moving] = p[moving] - config.delta * velocities[moving] / speed[moving, None]
    moved = geo.project_rays(p, target, centers, radius, valid)
    return geo.perturb_within(moved, config.r_max, uniforms, centers, radius, valid)


def update_tasks(tasks: Sequence[Task], positions, satisfaction_window: int = 10) -> list[Task]:
    """Advance each active task's satisfaction streak; a task that stays
    satisfied for ``satisfaction_window`` consecutive steps is retired."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    out = []
    for task in tasks:
        if not task.active:
            out.append(task)
            continue
        d = np.hypot(*(p - np.asarray(task.position, dtype=float)).T)
        met = int(np.count_nonzero(d <= task.sensing_radius)) >= task.demand
        streak = task.satisfied_streak + 1 if met else 0
        out.append(replace(task, satisfied_streak=streak, active=streak < satisfaction_window))
    return out

