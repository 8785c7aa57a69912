"""Visibility graphs, relative-neighborhood pruning and connectivity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .geometry import GEO_EPS


@dataclass(frozen=True)
class VisibilityGraph:
    """Symmetric adjacency over agent indices, no self-loops."""

    adjacency: np.ndarray  # (n, n) bool

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.adjacency[i]).tolist())

    def edges(self) -> set[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return set(zip(i.tolist(), j.tolist()))

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2


def pairwise_distances(positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    return cdist(p, p)


def visibility_adjacency(dist: np.ndarray, visibility: float) -> np.ndarray:
    # closed test; GEO_EPS absorbs round-off for pairs held exactly at range
    adj = dist <= visibility + GEO_EPS
    np.fill_diagonal(adj, False)
    return adj


def build_visibility_graph(positions, visibility: float) -> VisibilityGraph:
    if visibility <= 0:
        raise ValueError("visibility range must be positive")
    return VisibilityGraph(visibility_adjacency(pairwise_distances(positions), visibility))


def rng_adjacency(dist: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """Keep the visible edges (i, j) that have no witness k strictly closer
    to both endpoints than they are to each other."""
    n = dist.shape[0]
    keep = np.zeros_like(adjacency)
    ii, jj = np.nonzero(np.triu(adjacency, 1))
    if len(ii) == 0:
        return keep
    d = dist[ii, jj][:, None]
    # chunked so dense early swarms do not allocate E x n at once
    blocked = np.empty(len(ii), dtype=bool)
    chunk = max(1, 4_000_000 // max(n, 1))
    for lo in range(0, len(ii), chunk):
        hi = lo + chunk
        blocked[lo:hi] = (
            (dist[ii[lo:hi]] < d[lo:hi]) & (dist[jj[lo:hi]] < d[lo:hi])
        ).any(axis=1)
    ii, jj = ii[~blocked], jj[~blocked]
    keep[ii, jj] = True
    keep[jj, ii] = True
    return keep


def effective_neighbors(i: int, positions, graph: VisibilityGraph) -> frozenset[int]:
    """Relative-neighborhood subset of agent ``i``'s visible neighbors.

    A witness k may be any agent, but one that is strictly closer to both ends
    of a visible edge is itself visible, so this is computable locally.
    """
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    d_i = np.hypot(*(p - p[i]).T)
    out = set()
    for j in graph.neighbors(i):
        d_j = np.hypot(*(p - p[j]).T)
        d_ij = d_i[j]
        if not np.any((d_i < d_ij) & (d_j < d_ij)):
            out.add(j)
    return frozenset(out)


def never_lose_neighbor_set(i: int, memory, graph: VisibilityGraph) -> frozenset[int]:
    """Every agent ``i`` has ever seen, including the ones visible now."""
    return frozenset(memory) | graph.neighbors(i)


def component_count(adjacency: np.ndarray) -> int:
    if adjacency.shape[0] == 0:
        return 0
    ii, jj = np.nonzero(adjacency)
    n = adjacency.shape[0]
    g = csr_matrix((np.ones(len(ii), dtype=np.int8), (ii, jj)), shape=(n, n))
    count, _ = connected_components(g, directed=False)
    return int(count)


def is_connected(graph: VisibilityGraph) -> bool:
    if graph.n < 1:
        raise ValueError("graph has no vertices")
    return component_count(graph.adjacency) == 1
