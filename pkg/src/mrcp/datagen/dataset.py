"""MRCPDATA on-disk dataset format.

Layout (all little-endian)::

    b"MRCPDATA"  u32 version
    u32 frames  u32 agents  u32 height  u32 width  u32 classes
    u64 seed  f64 max_depth  f64 hfov  f64 vfov
    u32 len(preset)  preset bytes (utf-8)
    per frame, per agent:
        f32[12] pose (rotation row-major, then position)
        f32[3*H*W] rgb   f32[H*W] depth   u16[H*W] seg
    u32 CRC32 of every preceding byte

A ``key = value`` text sidecar (``<path>.manifest``) repeats the manifest
for humans and records the noise spec.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..graph import RobotPose

MAGIC = b"MRCPDATA"
VERSION = 1
_HEAD = struct.Struct("<8sI5IQ3d")


class FormatError(ValueError):
    pass


@dataclass
class FrameSample:
    """One synchronised capture of all robots."""

    rgb: np.ndarray  # (N, 3, H, W) float32 in [0, 1]
    depth: np.ndarray  # (N, H, W) float32 meters along the ray
    seg: np.ndarray  # (N, H, W) uint16 class ids
    pose: np.ndarray  # (N, 12) float32: rotation row-major, position
    formation: str = ""

    @property
    def n_agents(self) -> int:
        return self.rgb.shape[0]

    def robot_poses(self) -> list:
        return [RobotPose.from_stored(row[:9].reshape(3, 3), row[9:]) for row in self.pose.astype(np.float64)]

    def equals(self, other: "FrameSample") -> bool:
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in ((self.rgb, other.rgb), (self.depth, other.depth), (self.seg, other.seg),
                         (self.pose, other.pose))
        )


@dataclass
class DatasetManifest:
    frame_count: int
    agent_count: int
    height: int
    width: int
    class_count: int
    preset: str
    seed: int
    max_depth: float
    hfov: float
    vfov: float
    noise: str = "none"
    offsets: list = field(default_factory=list)

    def frame_bytes(self) -> int:
        hw = self.height * self.width
        return self.agent_count * (12 * 4 + 3 * hw * 4 + hw * 4 + hw * 2)

    def to_text(self) -> str:
        keys = ("frame_count", "agent_count", "height", "width", "class_count", "preset", "seed",
                "max_depth", "hfov", "vfov", "noise")
        lines = ["# MRCPDATA manifest"] + [f"{k} = {getattr(self, k)}" for k in keys]
        if self.offsets:
            lines.append(f"first_offset = {self.offsets[0]}")
            lines.append(f"frame_stride = {self.frame_bytes()}")
        return "\n".join(lines) + "\n"


def write_dataset(frames: Sequence[FrameSample], manifest: DatasetManifest, path) -> DatasetManifest:
    path = Path(path)
    if not frames:
        raise ValueError("no frames to write")
    n, _, h, w = frames[0].rgb.shape
    for f in frames:
        if f.rgb.shape != (n, 3, h, w) or f.depth.shape != (n, h, w) or f.seg.shape != (n, h, w) \
                or f.pose.shape != (n, 12):
            raise ValueError("frames have inconsistent dimensions")
    manifest.frame_count, manifest.agent_count, manifest.height, manifest.width = len(frames), n, h, w
    preset = manifest.preset.encode("utf-8")
    header = _HEAD.pack(MAGIC, VERSION, len(frames), n, h, w, manifest.class_count, manifest.seed,
                        manifest.max_depth, manifest.hfov, manifest.vfov)
    header += struct.pack("<I", len(preset)) + preset

    chunks = [header]
    offsets = []
    pos = len(header)
    for f in frames:
        offsets.append(pos)
        for a in range(n):
            chunk = b"".join([
                f.pose[a].astype("<f4").tobytes(),
                f.rgb[a].astype("<f4").tobytes(),
                f.depth[a].astype("<f4").tobytes(),
                f.seg[a].astype("<u2").tobytes(),
            ])
            chunks.append(chunk)
            pos += len(chunk)
    body = b"".join(chunks)
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    manifest.offsets = offsets
    Path(str(path) + ".manifest").write_text(manifest.to_text())
    return manifest


def read_dataset(path) -> tuple[list, DatasetManifest]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size + 8:
        raise FormatError("file too short for an MRCPDATA header")
    magic, version, nf, na, h, w, k, seed, max_depth, hfov, vfov = _HEAD.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("CRC mismatch (file truncated or corrupted)")
    pos = _HEAD.size
    (plen,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    preset = raw[pos:pos + plen].decode("utf-8")
    pos += plen
    manifest = DatasetManifest(nf, na, h, w, k, preset, seed, max_depth, hfov, vfov)
    sidecar = Path(str(path) + ".manifest")
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            key, sep, val = line.partition("=")
            if sep and key.strip() == "noise":
                manifest.noise = val.strip()
    if len(body) != pos + nf * manifest.frame_bytes():
        raise FormatError("payload size does not match manifest counts")

    hw = h * w
    frames = []
    for _ in range(nf):
        manifest.offsets.append(pos)
        poses, rgbs, depths, segs = [], [], [], []
        for _ in range(na):
            poses.append(np.frombuffer(raw, "<f4", 12, pos)); pos += 48
            rgbs.append(np.frombuffer(raw, "<f4", 3 * hw, pos).reshape(3, h, w)); pos += 12 * hw
            depths.append(np.frombuffer(raw, "<f4", hw, pos).reshape(h, w)); pos += 4 * hw
            segs.append(np.frombuffer(raw, "<u2", hw, pos).reshape(h, w)); pos += 2 * hw
        frames.append(FrameSample(
            rgb=np.stack(rgbs).astype(np.float32),
            depth=np.stack(depths).astype(np.float32),
            seg=np.stack(segs).astype(np.uint16),
            pose=np.stack(poses).astype(np.float32),
            formation=preset,
        ))
    return frames, manifest
