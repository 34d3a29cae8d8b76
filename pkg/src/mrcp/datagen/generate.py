from __future__ import annotations

import numpy as np

from ..autodiff import RngState
from ..graph import CameraIntrinsics
from .dataset import DatasetManifest, FrameSample
from .formations import formation_preset
from .scene import CLASS_NAMES, random_scene, render_views


def generate_frames(
    preset: str = "circle_inward",
    n_agents: int = 5,
    n_frames: int = 8,
    height: int = 64,
    width: int = 64,
    seed: int = 0,
    radius: float = 6.0,
    altitude: float = 8.0,
    fov_deg: float = 60.0,
    max_depth: float = 40.0,
) -> tuple[list, DatasetManifest]:
    """Render ``n_frames`` random scenes seen by a formation.

    Each frame draws its own scene and a global yaw for the formation from
    an independent substream of ``seed``. Poses are rounded to float32
    before rendering so the stored poses are exactly the rendered ones.
    """
    intr = CameraIntrinsics(np.radians(fov_deg), np.radians(fov_deg), width, height)
    root = RngState(seed)
    frames = []
    for idx in range(n_frames):
        rng = root.stream(idx)
        scene = random_scene(rng, max_depth=max_depth)
        yaw = rng.uniform(0, 2 * np.pi)
        poses = formation_preset(preset, n_agents, radius, altitude, seed=seed + idx, yaw_offset=yaw)
        rows = np.array([np.concatenate([p.rotation.reshape(-1), p.position]) for p in poses]).astype(np.float32)
        stored = FrameSample(np.empty((0,)), np.empty((0,)), np.empty((0,)), rows).robot_poses()
        frame = render_views(scene, stored, intr)
        frame.pose = rows
        frame.formation = preset
        frames.append(frame)
    manifest = DatasetManifest(n_frames, n_agents, height, width, len(CLASS_NAMES), preset, seed,
                               max_depth, intr.hfov, intr.vfov)
    return frames, manifest
