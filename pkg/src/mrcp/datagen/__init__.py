from .corrupt import NoiseSpec, corrupt, corrupt_frame
from .dataset import DatasetManifest, FormatError, FrameSample, read_dataset, write_dataset
from .formations import PRESETS, formation_preset
from .generate import generate_frames
from .scene import CLASS_NAMES, Box, SceneSpec, Sphere, random_scene, render_view, render_views

__all__ = [
    "CLASS_NAMES",
    "Box",
    "DatasetManifest",
    "FormatError",
    "FrameSample",
    "NoiseSpec",
    "PRESETS",
    "SceneSpec",
    "Sphere",
    "corrupt",
    "corrupt_frame",
    "formation_preset",
    "generate_frames",
    "random_scene",
    "read_dataset",
    "render_view",
    "render_views",
    "write_dataset",
]
