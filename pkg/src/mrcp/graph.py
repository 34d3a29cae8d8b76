"""Robot poses, communication graphs, and camera footprint overlap.

Camera convention used throughout the package: a pose's rotation maps body
coordinates to world coordinates, and the body frame is the camera frame
with +z along the optical axis, +x to the image right, +y image down. The
world frame is z-up with the ground plane at constant z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

ORTHO_TOL = 1e-9


class GeometryError(ValueError):
    """A camera footprint is undefined (ray never reaches the ground)."""


def project_to_rotation(m: np.ndarray) -> np.ndarray:
    """Nearest proper rotation to ``m`` in the Frobenius norm."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=np.float64)
    return (
        r.shape == (3, 3)
        and np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


@dataclass(frozen=True)
class RobotPose:
    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(r)):
            raise ValueError("pose contains non-finite values")
        if not is_rotation(r):
            raise ValueError("pose rotation is not orthonormal with det +1")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", r)

    @classmethod
    def from_stored(cls, rotation, position) -> "RobotPose":
        """Build a pose from reduced-precision storage, re-projecting onto SO(3)."""
        return cls(np.asarray(position, dtype=np.float64), project_to_rotation(rotation))

    @property
    def optical_axis(self) -> np.ndarray:
        return self.rotation[:, 2]


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> RobotPose:
    """Pose at ``position`` whose optical axis points at ``target``."""
    position = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - position
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    n = np.linalg.norm(right)
    if n < 1e-12:
        raise GeometryError("look_at: forward direction parallel to up vector")
    right /= n
    down = np.cross(fwd, right)
    return RobotPose(position, np.column_stack([right, down, fwd]))


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph with canonical (sorted) neighbor lists."""

    n_nodes: int
    edges: frozenset
    neighbors: tuple = field(init=False)

    def __post_init__(self):
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.n_nodes} nodes")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(canon))
        nbrs = [[] for _ in range(self.n_nodes)]
        for i, j in canon:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(x)) for x in nbrs))

    def directed_edges(self) -> list:
        """All (src, dst) pairs, sorted by destination then source."""
        return [(i, j) for j in range(self.n_nodes) for i in self.neighbors[j]]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def relabel(self, perm: Sequence[int]) -> "CommGraph":
        """Graph with node ``k`` renamed ``perm[k]``."""
        return CommGraph(self.n_nodes, frozenset((perm[i], perm[j]) for i, j in self.edges))

    def hop_distances(self, src: int) -> np.ndarray:
        dist = np.full(self.n_nodes, np.inf)
        dist[src] = 0
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in self.neighbors[u]:
                    if dist[v] == np.inf:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist


def complete_graph(n: int) -> CommGraph:
    return CommGraph(n, frozenset(combinations(range(n), 2)))


def path_graph(n: int) -> CommGraph:
    return CommGraph(n, frozenset((i, i + 1) for i in range(n - 1)))


def build_graph(poses: Sequence[RobotPose], distance_threshold: float) -> CommGraph:
    """Link every pair of robots no farther apart than ``distance_threshold`` meters."""
    if len(poses) < 1:
        raise ValueError("build_graph needs at least one pose")
    if not distance_threshold > 0:
        raise ValueError("distance threshold must be positive")
    pos = np.array([p.position for p in poses])
    if not np.all(np.isfinite(pos)):
        raise ValueError("non-finite robot position")
    edges = set()
    for i, j in combinations(range(len(poses)), 2):
        if np.linalg.norm(pos[i] - pos[j]) <= distance_threshold:
            edges.add((i, j))
    return CommGraph(len(poses), frozenset(edges))


def relative_pose(pose_i: RobotPose, pose_j: RobotPose) -> tuple[np.ndarray, np.ndarray]:
    """Pose of robot j expressed in robot i's body frame."""
    ri_t = pose_i.rotation.T
    return ri_t @ pose_j.rotation, ri_t @ (pose_j.position - pose_i.position)


@dataclass(frozen=True)
class CameraIntrinsics:
    hfov: float
    vfov: float
    width: int
    height: int

    def __post_init__(self):
        if not (0 < self.hfov < np.pi and 0 < self.vfov < np.pi):
            raise ValueError("field-of-view angles must lie in (0, pi)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def fx(self) -> float:
        return 0.5 * self.width / np.tan(0.5 * self.hfov)

    @property
    def fy(self) -> float:
        return 0.5 * self.height / np.tan(0.5 * self.vfov)

    def pixel_rays(self) -> np.ndarray:
        """Unit ray directions in the camera frame through pixel centres, (H, W, 3)."""
        u = (np.arange(self.width) + 0.5 - 0.5 * self.width) / self.fx
        v = (np.arange(self.height) + 0.5 - 0.5 * self.height) / self.fy
        uu, vv = np.meshgrid(u, v)
        d = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


def ground_footprint(pose: RobotPose, intrinsics: CameraIntrinsics, ground_height: float) -> np.ndarray:
    """Ground-plane quadrilateral (4×2, xy) seen by the camera's image corners."""
    tx = np.tan(0.5 * intrinsics.hfov)
    ty = np.tan(0.5 * intrinsics.vfov)
    corners = np.array([[-tx, -ty, 1.0], [tx, -ty, 1.0], [tx, ty, 1.0], [-tx, ty, 1.0]])
    pts = []
    for c in corners:
        d = pose.rotation @ c
        if d[2] >= -1e-12:
            raise GeometryError("camera frustum does not intersect the ground plane")
        t = (ground_height - pose.position[2]) / d[2]
        if t <= 0:
            raise GeometryError("ground plane is behind the camera")
        pts.append((pose.position + t * d)[:2])
    return np.array(pts)


def _inside_convex(poly: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    inside_pos = np.ones(xs.shape, dtype=bool)
    inside_neg = np.ones(xs.shape, dtype=bool)
    for k in range(len(poly)):
        (x0, y0), (x1, y1) = poly[k], poly[(k + 1) % len(poly)]
        cross = (x1 - x0) * (ys - y0) - (y1 - y0) * (xs - x0)
        inside_pos &= cross >= 0
        inside_neg &= cross <= 0
    return inside_pos | inside_neg


def fov_overlap_ratio(
    poses: Sequence[RobotPose],
    intrinsics: CameraIntrinsics,
    ground_height: float = 0.0,
    grid_resolution: float = 0.05,
) -> float:
    """Area of the union of ground footprints over the sum of their areas.

    Footprints are rasterised on a square grid of ``grid_resolution``
    meters; the result lies in (0, 1] and is smaller when views overlap more.
    """
    if not grid_resolution > 0:
        raise ValueError("grid resolution must be positive")
    polys = [ground_footprint(p, intrinsics, ground_height) for p in poses]
    allpts = np.vstack(polys)
    lo = allpts.min(axis=0) - grid_resolution
    hi = allpts.max(axis=0) + grid_resolution
    xs = np.arange(lo[0], hi[0], grid_resolution) + 0.5 * grid_resolution
    ys = np.arange(lo[1], hi[1], grid_resolution) + 0.5 * grid_resolution
    gx, gy = np.meshgrid(xs, ys)
    union = np.zeros(gx.shape, dtype=bool)
    total = 0
    for poly in polys:
        mask = _inside_convex(poly, gx, gy)
        total += int(mask.sum())
        union |= mask
    if total == 0:
        raise GeometryError("footprints smaller than one grid cell")
    return float(union.sum()) / total


def fov_shared_fraction(poses, intrinsics, ground_height: float = 0.0, grid_resolution: float = 0.05) -> float:
    """Fraction of summed footprint area that is seen by more than one camera: 1 - overlap ratio."""
    return 1.0 - fov_overlap_ratio(poses, intrinsics, ground_height, grid_resolution)
