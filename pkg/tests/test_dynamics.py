import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexswarm.dynamics import (
    InfluenceConfig,
    Policy,
    Task,
    advance_swarm,
    agent_step,
    allowable_region,
    attraction_force,
    influence_velocity,
    policy_neighbors,
    repulsion_force,
    swarm_velocities,
    tiebreak_direction,
    update_tasks,
)
from flexswarm.errors import ConfigError
from flexswarm.geometry import MAX_STEP_DRAWS, region_contains
from flexswarm.graph import build_visibility_graph, pairwise_distances, rng_adjacency, visibility_adjacency

from . import oracles


class FixedDraws:
    """Stand-in random stream that hands out a prepared uniform block."""

    def __init__(self, block):
        self.block = np.asarray(block, dtype=float)

    def random(self, shape):
        assert tuple(shape) == self.block.shape
        return self.block


def no_draws():
    return FixedDraws(np.zeros((MAX_STEP_DRAWS, 2)))


# -- influence functions --------------------------------------------------------

def test_repulsion_examples():
    assert repulsion_force(2.0, InfluenceConfig(visibility=2.0)) == 0.0
    assert repulsion_force(0.0, InfluenceConfig(repulsion_gain=1)) == 1.0
    assert repulsion_force(1.0, InfluenceConfig(visibility=2.0, repulsion_gain=2)) == 1.0


def test_attraction_examples():
    cfg = InfluenceConfig(visibility=2.0)
    assert attraction_force(2.5, cfg) == 0.0
    assert attraction_force(1.0, cfg) == 1.0
    assert attraction_force(2.0, InfluenceConfig(visibility=2.0, attraction_gain=3)) == 3.0


def test_config_guards_step_budget():
    with pytest.raises(ConfigError):
        InfluenceConfig(visibility=2.0, delta=0.5, r_max=0.5)
    InfluenceConfig(visibility=4.0, delta=0.05, r_max=1.5)


# -- velocity sign audit ------------------------------------------------------

def test_velocity_alone_is_zero():
    assert influence_velocity(0, [(0, 0)], [], InfluenceConfig()).tolist() == [0.0, 0.0]


def test_neighbor_east_pushes_west():
    cfg = InfluenceConfig(r_max=0.0)
    pts = np.array([(0.0, 0.0), (1.0, 0.0)])
    v = influence_velocity(0, pts, [], cfg)
    assert v[0] > 0 and v[1] == 0
    new = agent_step(0, pts, [], Policy.FLEXIBLE, cfg, no_draws())
    assert np.hypot(*(new - pts[1])) > 1.0


def test_task_north_pulls_north():
    cfg = InfluenceConfig(r_max=0.0)
    task = Task((0.0, 1.0))
    v = influence_velocity(0, [(0, 0)], [task], cfg)
    assert v[1] < 0 and v[0] == 0
    new = agent_step(0, [(0, 0)], [task], Policy.FLEXIBLE, cfg, no_draws())
    assert np.hypot(*(new - (0, 1))) < 1.0


def test_inactive_or_distant_tasks_ignored():
    cfg = InfluenceConfig()
    tasks = [Task((0, 1), active=False), Task((0, 5))]
    assert influence_velocity(0, [(0, 0)], tasks, cfg).tolist() == [0.0, 0.0]


def test_coincident_agents_split_apart():
    d01 = tiebreak_direction(0, 1, 7)[0]
    d10 = tiebreak_direction(1, 0, 7)[0]
    assert np.hypot(*d01) == pytest.approx(1.0)
    assert d01.tolist() == (-d10).tolist()
    cfg = InfluenceConfig(r_max=0.0)
    pts = np.zeros((2, 2))
    a = agent_step(0, pts, [], Policy.FLEXIBLE, cfg, no_draws(), step=7)
    b = agent_step(1, pts, [], Policy.FLEXIBLE, cfg, no_draws(), step=7)
    assert np.hypot(*(a - b)) == pytest.approx(2 * cfg.delta)


# -- agent step -----------------------------------------------------------------

def test_single_agent_stays_put():
    out = agent_step(0, [(1.5, -2.0)], [], Policy.FLEXIBLE, InfluenceConfig(r_max=0.0), no_draws())
    assert out.tolist() == [1.5, -2.0]


def test_two_agents_back_off_by_delta():
    cfg = InfluenceConfig(visibility=2.0, delta=0.05, r_max=0.0)
    pts = np.array([(0.0, 0.0), (1.0, 0.0)])
    a = agent_step(0, pts, [], Policy.FLEXIBLE, cfg, no_draws())
    b = agent_step(1, pts, [], Policy.FLEXIBLE, cfg, no_draws())
    assert a == pytest.approx([-0.05, 0.0]) and b == pytest.approx([1.05, 0.0])
    assert np.hypot(*(a - b)) == pytest.approx(min(2.0, 1.0 + 2 * cfg.delta))


def test_boundary_agent_slides_along_rim():
    # agents at full range: each sits on its pair disk's rim; the outward
    # push cannot leave the disk, so the agent stays put on the boundary
    cfg = InfluenceConfig(visibility=2.0, r_max=0.0)
    pts = np.array([(0.0, 0.0), (2.0, 0.0)])
    out = agent_step(0, pts, [], Policy.FLEXIBLE, cfg, no_draws())
    assert out == pytest.approx([0.0, 0.0], abs=1e-12)
    # an oblique push from the rim lands on the rim again
    pts3 = np.array([(0.0, 0.0), (2.0, 0.0), (0.0, 1.9)])
    out = agent_step(0, pts3, [], Policy.NEVER_LOSE, cfg, no_draws())
    region = allowable_region(0, pts3, {1, 2}, 2.0)
    assert region_contains(out, region)
    assert min(abs(np.hypot(*(out - np.array(d.center))) - d.radius) for d in region.disks) <= 1e-9


# -- scalar route vs batched route ----------------------------------------------

def batched_step(pts, tasks, policy, cfg, block, memory=None, repulsion=True, step=0):
    dist = pairwise_distances(pts)
    visible = visibility_adjacency(dist, cfg.visibility)
    if policy is Policy.FLEXIBLE:
        nbrs = rng_adjacency(dist, visible)
    else:
        nbrs = visible if memory is None else memory | visible
    v = swarm_velocities(pts, dist, visible, tasks, cfg, repulsion=repulsion, step=step)
    return advance_swarm(pts, nbrs, v, cfg, block)


@pytest.mark.parametrize("policy", list(Policy))
@pytest.mark.parametrize("seed", range(6))
def test_batched_route_matches_agent_step(policy, seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, 25))
    cfg = InfluenceConfig(visibility=2.0, r_max=float(gen.choice([0.0, 0.1, 0.5])))
    pts = gen.uniform(0, 0.8 * math.sqrt(n), (n, 2))
    tasks = [Task(tuple(gen.uniform(0, 2, 2)), active=bool(gen.integers(2))) for _ in range(2)]
    block = gen.random((n, MAX_STEP_DRAWS, 2))
    memory = None
    if policy is Policy.NEVER_LOSE:
        extra = np.triu(gen.random((n, n)) < 0.05, 1)
        memory = extra | extra.T
    batched = batched_step(pts, tasks, policy, cfg, block, memory, step=seed)
    for i in range(n):
        mem = frozenset(np.flatnonzero(memory[i]).tolist()) if memory is not None else frozenset()
        if memory is not None:
            # scalar route needs every remembered pair to still be visible to build its disks
            mem = frozenset(j for j in mem if np.hypot(*(pts[i] - pts[j])) <= cfg.visibility)
            if mem != frozenset(np.flatnonzero(memory[i]).tolist()):
                continue
        one = agent_step(i, pts, tasks, policy, cfg, FixedDraws(block[i]), memory=mem, step=seed)
        assert one == pytest.approx(batched[i], abs=1e-12)


# -- invariants over a stepped swarm --------------------------------------------------

def swarm_case(seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, 30))
    policy = Policy.FLEXIBLE if gen.integers(2) else Policy.NEVER_LOSE
    cfg = InfluenceConfig(visibility=2.0, delta=0.05, r_max=float(gen.choice([0.0, 0.1, 0.5])))
    # random connected-ish cloud; disconnected pieces are fine for per-step invariants
    pts = gen.uniform(0, 0.7 * math.sqrt(n), (n, 2))
    return gen, pts, policy, cfg


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_step_invariants(seed, repulsion):
    gen, pts, policy, cfg = swarm_case(seed)
    n = len(pts)
    tasks = [Task(tuple(gen.uniform(0, 2, 2)))]
    block = gen.random((n, MAX_STEP_DRAWS, 2))
    dist = pairwise_distances(pts)
    visible = visibility_adjacency(dist, cfg.visibility)
    nbrs = rng_adjacency(dist, visible) if policy is Policy.FLEXIBLE else visible
    new = batched_step(pts, tasks, policy, cfg, block, repulsion=repulsion)
    moved = np.hypot(*(new - pts).T)
    assert np.all(moved <= cfg.delta + cfg.r_max + 1e-12)
    graph = build_visibility_graph(pts, cfg.visibility)
    for i in range(n):
        mine = policy_neighbors(i, pts, graph, policy)
        assert mine == frozenset(np.flatnonzero(nbrs[i]).tolist())
        disks = [((pts[i] + pts[j]) / 2, cfg.visibility / 2) for j in mine] or [(pts[i], cfg.visibility / 2)]
        # projected points sit on a disk rim, up to float round-off
        assert oracles.in_disks(tuple(new[i]), [(tuple(c), r) for c, r in disks], eps=1e-12)
        for j in mine:
            assert oracles.dist(new[i], new[j]) <= cfg.visibility + 1e-12


def test_repulsion_pair_grows_to_range():
    cfg = InfluenceConfig(visibility=2.0, delta=0.05, r_max=0.0)
    pts = np.array([(0.0, 0.0), (0.3, 0.0)])
    block = np.zeros((2, MAX_STEP_DRAWS, 2))
    last = 0.3
    for _ in range(60):
        pts = batched_step(pts, [], Policy.FLEXIBLE, cfg, block)
        d = float(np.hypot(*(pts[0] - pts[1])))
        assert last - 1e-12 <= d <= cfg.visibility
        last = d
    assert last == pytest.approx(cfg.visibility)


def test_lone_agent_walks_to_task():
    cfg = InfluenceConfig(visibility=2.0, delta=0.05, r_max=0.0)
    task = Task((1.0, 1.0))
    p = np.array([(0.0, 0.0)])
    block = np.zeros((1, MAX_STEP_DRAWS, 2))
    d = oracles.dist(p[0], task.position)
    while d > cfg.delta:
        p = batched_step(p, [task], Policy.FLEXIBLE, cfg, block)
        nd = oracles.dist(p[0], task.position)
        assert nd < d
        d = nd


def test_step_is_deterministic():
    gen, pts, policy, cfg = swarm_case(99)
    block = gen.random((len(pts), MAX_STEP_DRAWS, 2))
    a = batched_step(pts, [], policy, cfg, block)
    b = batched_step(pts.copy(), [], policy, cfg, block.copy())
    assert a.tobytes() == b.tobytes()


# -- tasks ------------------------------------------------------------------------

def test_task_unmet_demand_keeps_streak_zero():
    (t,) = update_tasks([Task((0, 0), demand=2)], [(0, 0), (5, 5)])
    assert t.satisfied_streak == 0 and t.active


def test_task_retires_after_window():
    tasks = [Task((0, 0), demand=1)]
    for k in range(1, 4):
        tasks = update_tasks(tasks, [(0.1, 0)], satisfaction_window=3)
        assert tasks[0].satisfied_streak == k
    assert not tasks[0].active
    # retired tasks stay retired
    assert not update_tasks(tasks, [(9, 9)], satisfaction_window=3)[0].active


def test_task_streak_resets_when_agent_leaves():
    window = 5
    tasks = [Task((0, 0), demand=3)]
    inside = [(0, 0), (0.1, 0), (0, 0.1)]
    for _ in range(window - 1):
        tasks = update_tasks(tasks, inside, window)
    assert tasks[0].satisfied_streak == window - 1
    tasks = update_tasks(tasks, inside[:2] + [(3, 3)], window)
    assert tasks[0].satisfied_streak == 0 and tasks[0].active
