"""Primitive scenes and a vectorised ray caster."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..graph import CameraIntrinsics, RobotPose

CLASS_NAMES = ("sky", "ground", "sphere", "box")
SKY, GROUND, SPHERE, BOX = range(4)

SKY_COLOR = np.array([0.55, 0.70, 0.90])
GROUND_COLOR = np.array([0.42, 0.44, 0.38])
LIGHT_DIR = np.array([0.3, 0.2, 1.0]) / np.linalg.norm([0.3, 0.2, 1.0])
AMBIENT = 0.25
FOG_DISTANCE = 25.0  # aerial perspective: colours fade toward the sky with range


@dataclass
class Sphere:
    center: np.ndarray
    radius: float
    class_id: int = SPHERE
    color: np.ndarray = field(default_factory=lambda: np.array([0.8, 0.3, 0.2]))


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray
    class_id: int = BOX
    color: np.ndarray = field(default_factory=lambda: np.array([0.2, 0.4, 0.8]))


@dataclass
class SceneSpec:
    objects: list = field(default_factory=list)
    ground_height: Optional[float] = 0.0
    background_class: int = SKY
    max_depth: float = 40.0
    num_classes: int = len(CLASS_NAMES)


def random_scene(rng: np.random.Generator, n_objects: tuple[int, int] = (6, 10), extent: float = 14.0,
                 max_depth: float = 40.0) -> SceneSpec:
    """Spheres and boxes resting on the ground, scattered over a disk of radius ``extent``."""
    objs = []
    for _ in range(int(rng.integers(n_objects[0], n_objects[1] + 1))):
        rad = extent * np.sqrt(rng.uniform())
        ang = rng.uniform(0, 2 * np.pi)
        cx, cy = rad * np.cos(ang), rad * np.sin(ang)
        jitter = rng.uniform(-0.1, 0.1, size=3)
        if rng.uniform() < 0.5:
            r = rng.uniform(1.0, 2.5)
            objs.append(Sphere(np.array([cx, cy, r]), r, SPHERE,
                               np.clip(np.array([0.8, 0.3, 0.2]) + jitter, 0, 1)))
        else:
            half = rng.uniform(0.6, 2.0, size=2)
            height = rng.uniform(1.0, 4.0)
            objs.append(Box(np.array([cx - half[0], cy - half[1], 0.0]),
                            np.array([cx + half[0], cy + half[1], height]), BOX,
                            np.clip(np.array([0.2, 0.4, 0.8]) + jitter, 0, 1)))
    return SceneSpec(objs, 0.0, SKY, max_depth)


def _hit_sphere(o, d, s: Sphere):
    oc = o - s.center
    b = d @ oc
    c = oc @ oc - s.radius ** 2
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = -b - sq
    t = np.where(t > 1e-9, t, -b + sq)
    t = np.where(ok & (t > 1e-9), t, np.inf)
    pts = o + np.where(np.isfinite(t), t, 0.0)[..., None] * d
    normal = (pts - s.center) / s.radius
    return t, normal


def _hit_box(o, d, bx: Box):
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(np.abs(d) < 1e-15, 1e-15, d)
        t1 = (bx.lo - o) / safe
        t2 = (bx.hi - o) / safe
    tmin = np.minimum(t1, t2)
    tmax = np.maximum(t1, t2)
    near = tmin.max(axis=-1)
    far = tmax.min(axis=-1)
    axis = tmin.argmax(axis=-1)
    hit = (near <= far) & (far > 1e-9)
    t = np.where(hit, np.where(near > 1e-9, near, far), np.inf)
    normal = np.zeros(d.shape)
    sign = -np.sign(np.take_along_axis(d, axis[..., None], axis=-1))[..., 0]
    np.put_along_axis(normal, axis[..., None], sign[..., None], axis=-1)
    return t, normal


def cast(scene: SceneSpec, origin: np.ndarray, dirs: np.ndarray):
    """Nearest hit along unit rays ``dirs`` (…, 3) from ``origin``.

    Returns (distance, class id, rgb). Hit colours are blended toward the sky
    with range. Rays that hit nothing closer than
    ``max_depth`` get the background class, the sky colour, and ``max_depth``.
    """
    shape = dirs.shape[:-1]
    best = np.full(shape, np.inf)
    cls = np.full(shape, scene.background_class, dtype=np.int64)
    color = np.broadcast_to(SKY_COLOR, shape + (3,)).copy()

    if scene.ground_height is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(dirs[..., 2] < -1e-12, (scene.ground_height - origin[2]) / dirs[..., 2], np.inf)
        t = np.where(t > 1e-9, t, np.inf)
        closer = t < best
        best = np.where(closer, t, best)
        cls = np.where(closer, GROUND, cls)
        shade = AMBIENT + (1 - AMBIENT) * max(0.0, LIGHT_DIR[2])
        color = np.where(closer[..., None], GROUND_COLOR * shade, color)

    for obj in scene.objects:
        t, normal = _hit_sphere(origin, dirs, obj) if isinstance(obj, Sphere) else _hit_box(origin, dirs, obj)
        closer = t < best
        best = np.where(closer, t, best)
        cls = np.where(closer, obj.class_id, cls)
        lam = np.clip(normal @ LIGHT_DIR, 0.0, None)
        shaded = obj.color * (AMBIENT + (1 - AMBIENT) * lam)[..., None]
        color = np.where(closer[..., None], shaded, color)

    far = best >= scene.max_depth
    best = np.where(far, scene.max_depth, best)
    cls = np.where(far, scene.background_class, cls)
    fog = np.exp(-best / FOG_DISTANCE)[..., None]
    color = np.where(far[..., None], SKY_COLOR, fog * color + (1 - fog) * SKY_COLOR)
    return best, cls, color


def render_view(scene: SceneSpec, pose: RobotPose, intrinsics: CameraIntrinsics):
    """Render one camera: rgb (3, H, W), ray-distance depth (H, W), class ids (H, W)."""
    rays = intrinsics.pixel_rays() @ pose.rotation.T
    depth, cls, color = cast(scene, pose.position, rays)
    return np.moveaxis(color, -1, 0), depth, cls


def render_views(scene: SceneSpec, poses: Sequence[RobotPose], intrinsics: CameraIntrinsics):
    """Synchronised capture from every pose, as a :class:`FrameSample`."""
    from .dataset import FrameSample

    if intrinsics.width < 1 or intrinsics.height < 1:
        raise ValueError("degenerate intrinsics")
    rgb, depth, seg = zip(*(render_view(scene, p, intrinsics) for p in poses))
    pose_rows = np.array([np.concatenate([p.rotation.reshape(-1), p.position]) for p in poses])
    return FrameSample(
        rgb=np.stack(rgb).astype(np.float32),
        depth=np.stack(depth).astype(np.float32),
        seg=np.stack(seg).astype(np.uint16),
        pose=pose_rows.astype(np.float32),
    )
