"""Team formations: robots equally spaced on a circle."""

from __future__ import annotations

import numpy as np

from ..graph import RobotPose, look_at

PRESETS = ("circle_inward", "circle_outward", "pose_varied")


def formation_preset(name: str, n_agents: int = 5, radius: float = 6.0, altitude: float = 8.0,
                     seed: int = 0, yaw_offset: float = 0.0) -> list:
    """Poses for a named formation.

    circle_inward aims every optical axis at the ground point below the circle
    centre. circle_outward points radially outward with the same downward
    tilt. pose_varied is the inward circle with per-robot altitude and aim
    jitter drawn from ``seed``.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown formation {name!r}; expected one of {PRESETS}")
    if n_agents < 2:
        raise ValueError("a formation needs at least two robots")
    rng = np.random.default_rng(seed)
    poses = []
    for k in range(n_agents):
        theta = yaw_offset + 2 * np.pi * k / n_agents
        radial = np.array([np.cos(theta), np.sin(theta), 0.0])
        if name == "pose_varied":
            alt = altitude * rng.uniform(0.8, 1.3)
            pos = radius * radial + np.array([0.0, 0.0, alt])
            tangent = np.array([-radial[1], radial[0], 0.0])
            target = tangent * radius * np.tan(rng.uniform(-0.26, 0.26))
            poses.append(look_at(pos, target))
            continue
        pos = radius * radial + np.array([0.0, 0.0, altitude])
        if name == "circle_inward":
            target = np.zeros(3)
        else:
            target = pos + radius * radial - np.array([0.0, 0.0, altitude])
        poses.append(look_at(pos, target))
    return poses
