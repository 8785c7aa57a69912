"""Planar primitives: pair disks, disk-intersection regions, ray projection
onto such regions, random steps inside them, and the minimal enclosing circle.

Points are handled as float64 arrays of shape ``(2,)``.  The batched kernels
(``ray_exit_parameters``, ``project_rays``, ``perturb_within``) take a leading
batch axis so the engine can move a whole swarm with one call; the scalar
functions are thin wrappers around them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import ContractError

GEO_EPS = 1e-9
# draws attempted by the random step before falling back to projection
MAX_STEP_DRAWS = 8


class Disk(NamedTuple):
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class AllowableRegion:
    """Intersection of one or more closed disks."""

    disks: tuple[Disk, ...]

    def __post_init__(self):
        if len(self.disks) == 0:
            raise ContractError("an allowable region needs at least one disk")
        for d in self.disks:
            if not (math.isfinite(d.radius) and d.radius >= 0):
                raise ContractError(f"bad disk radius {d.radius!r}")

    @classmethod
    def of(cls, disks: Sequence[Disk]) -> "AllowableRegion":
        return cls(tuple(disks))

    @property
    def centers(self) -> np.ndarray:
        return np.array([d.center for d in self.disks], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([d.radius for d in self.disks], dtype=float)


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"non-finite point {p!r}")
    return arr


def pair_disk(p_i, p_j, visibility: float) -> Disk:
    """Disk of radius ``visibility / 2`` centred on the midpoint of a visible pair.

    Two agents that both stay inside it remain within ``visibility`` of each
    other.
    """
    a, b = as_point(p_i), as_point(p_j)
    dist = float(np.hypot(*(a - b)))
    if dist > visibility + GEO_EPS:
        raise ContractError(
            f"pair at distance {dist} is not visible (range {visibility})"
        )
    mid = (a + b) / 2.0
    return Disk((float(mid[0]), float(mid[1])), visibility / 2.0)


def region_contains(point, region: AllowableRegion, eps: float = GEO_EPS) -> bool:
    p = as_point(point)
    d = np.hypot(*(region.centers - p).T)
    return bool(np.all(d <= region.radii + eps))


def ray_exit_parameters(origins, directions, centers, radii) -> np.ndarray:
    """Exit parameter of the ray ``origin + t * direction`` for each disk.

    Shapes: origins and directions ``(M, 2)``, centers ``(M, K, 2)``, radii
    broadcastable to ``(M, K)``.  Returns ``(M, K)`` values of the largest
    ``t >= 0`` with the ray point still inside the disk, clamped at 0 when
    the origin sits (numerically) outside and points away.  Zero-length
    directions give ``inf``.
    """
    w = origins[:, None, :] - centers
    d = directions[:, None, :]
    a = np.einsum("mkj,mkj->mk", d, d)
    a = np.broadcast_to(a, w.shape[:2])
    b = 2.0 * np.einsum("mkj,mkj->mk", w, d)
    c = np.einsum("mkj,mkj->mk", w, w) - np.asarray(radii, dtype=float) ** 2
    s = np.sqrt(np.maximum(b * b - 4.0 * a * c, 0.0))
    # stable root selection: avoid cancellation in -b + s when b > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t_back = (s - b) / (2.0 * a)
        denom = b + s
        t_fwd = np.where(denom > 0, -2.0 * c / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.where(b < 0, t_back, t_fwd)
    t = np.where(a > 0, t, np.inf)
    return np.maximum(t, 0.0)


def project_rays(origins, targets, centers, radii, mask=None) -> np.ndarray:
    """Batched ray projection: furthest point of ``[origin, target]`` inside
    every (unmasked) disk of the row.  Rows whose target is reachable return
    the target itself."""
    origins = np.asarray(origins, dtype=float)
    targets = np.asarray(targets, dtype=float)
    direction = targets - origins
    t = ray_exit_parameters(origins, direction, centers, radii)
    if mask is not None:
        t = np.where(mask, t, np.inf)
    t_min = t.min(axis=1) if t.shape[1] else np.full(len(origins), np.inf)
    reach = t_min >= 1.0
    scale = np.where(reach, 1.0, t_min)[:, None]
    out = origins + scale * direction
    out[reach] = targets[reach]
    return out


def project_ray_to_region(origin, target, region: AllowableRegion) -> np.ndarray:
    """Move from ``origin`` toward ``target`` as far as the region allows."""
    o, tgt = as_point(origin), as_point(target)
    if not region_contains(o, region):
        raise ContractError(f"ray origin {o.tolist()} lies outside the region")
    out = project_rays(o[None], tgt[None], region.centers[None], region.radii[None])
    return out[0]


def inside_disks(points, centers, radii, mask=None, eps: float = 0.0) -> np.ndarray:
    """Membership of ``points`` (M, T, 2) in all disks ``centers`` (M, K, 2).

    Returns a boolean ``(M, T)`` array.  The default ``eps=0`` is the exact
    test used when choosing random steps.
    """
    diff = points[:, :, None, :] - centers[:, None, :, :]
    d2 = np.einsum("mtkj,mtkj->mtk", diff, diff)
    r = np.asarray(radii, dtype=float) + eps
    r2 = np.broadcast_to(r * r, centers.shape[:2])[:, None, :]
    ok = d2 <= r2
    if mask is not None:
        ok |= ~mask[:, None, :]
    return ok.all(axis=2)


def step_offsets(uniforms, r_max: float) -> np.ndarray:
    """Map uniform pairs ``(u_angle, u_length)`` to displacement vectors with
    uniform direction and length uniform on ``[0, r_max]``."""
    u = np.asarray(uniforms, dtype=float)
    ang = 2.0 * np.pi * u[..., 0]
    length = r_max * u[..., 1]
    return np.stack([length * np.cos(ang), length * np.sin(ang)], axis=-1)


def perturb_within(bases, r_max: float, uniforms, centers, radii, mask=None) -> np.ndarray:
    """Batched random step that never leaves the region.

    ``uniforms`` has shape ``(M, MAX_STEP_DRAWS, 2)``.  The first candidate
    inside the region is taken; if all fail, the last candidate is projected
    back along the ray from the base.
    """
    bases = np.asarray(bases, dtype=float)
    if r_max == 0.0:
        return bases.copy()
    cand = bases[:, None, :] + step_offsets(uniforms, r_max)
    ok = inside_disks(cand, centers, radii, mask)
    out = np.empty_like(bases)
    hit = ok.any(axis=1)
    first = ok.argmax(axis=1)
    rows = np.nonzero(hit)[0]
    out[rows] = cand[rows, first[rows]]
    miss = np.nonzero(~hit)[0]
    if len(miss):
        m = None if mask is None else mask[miss]
        r = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:2])[miss]
        out[miss] = project_rays(bases[miss], cand[miss, -1], centers[miss], r, m)
    return out


def sample_point_near(rng, base, r_max: float, region: AllowableRegion) -> np.ndarray:
    """Random step of length at most ``r_max`` from ``base``, kept in ``region``.

    ``rng`` only needs a numpy-style ``random(shape)`` method; exactly
    ``(MAX_STEP_DRAWS, 2)`` uniforms are drawn per call.
    """
    b = as_point(base)
    if r_max < 0:
        raise ContractError("r_max must be non-negative")
    if not region_contains(b, region):
        raise ContractError(f"base {b.tolist()} lies outside the region")
    if r_max == 0.0:
        return b
    u = np.asarray(rng.random((MAX_STEP_DRAWS, 2)), dtype=float)
    return perturb_within(b[None], r_max, u[None], region.centers[None], region.radii[None])[0]


# -- minimal enclosing circle ---------------------------------------------

def _contains(circle, p) -> bool:
    cx, cy, r = circle
    return math.hypot(p[0] - cx, p[1] - cy) <= r + 1e-12 * max(1.0, r)


def _diameter(a, b):
    cx, cy = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    return (cx, cy, max(math.hypot(a[0] - cx, a[1] - cy), math.hypot(b[0] - cx, b[1] - cy)))


def _circumcircle(a, b, c):
    # translate for precision
    ox, oy = (a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        # collinear: the widest pair spans the other point
        pairs = [(a, b), (a, c), (b, c)]
        return max((_diameter(p, q) for p, q in pairs), key=lambda k: k[2])
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = max(math.hypot(x - px, y - py) for px, py in ((ax, ay), (bx, by), (cx, cy)))
    return (x + ox, y + oy, r)


def _circle_with_two(points, p, q):
    circle = _diameter(p, q)
    for r in points:
        if not _contains(circle, r):
            circle = _circumcircle(p, q, r)
    return circle


def _circle_with_one(points, p):
    circle = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _contains(circle, q):
            if circle[2] == 0.0:
                circle = _diameter(p, q)
            else:
                circle = _circle_with_two(points[:i], p, q)
    return circle


def _hull_candidates(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 4:
        return pts
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return pts  # degenerate (collinear) input
    return pts[np.sort(hull.vertices)]


# fixed, seed-independent visiting order; keeps expected linear work without
# making results depend on anything but the input
_ORDER_RNG_SEED = 0x5EC


def minimal_enclosing_circle(points) -> Disk:
    """Smallest closed disk containing every point (incremental Welzl)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ContractError("minimal enclosing circle of an empty point set")
    cand = _hull_candidates(pts)
    order = np.random.default_rng(_ORDER_RNG_SEED).permutation(len(cand))
    seq = [tuple(p) for p in cand[order].tolist()]
    circle = None
    for i, p in enumerate(seq):
        if circle is None or not _contains(circle, p):
            circle = _circle_with_one(seq[:i], p)
    cx, cy, r = circle
    return Disk((cx, cy), r)
