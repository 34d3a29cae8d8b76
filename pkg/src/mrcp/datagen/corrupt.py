"""Image corruptions applied to the first few cameras of a frame."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy import ndimage

KINDS = ("gaussian", "shot", "impulse", "gaussian_blur", "motion_blur", "severe")


class NoiseConfigError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    """Which corruptions to draw from and their magnitudes.

    One kind is chosen uniformly per frame from ``kinds``. ``severe`` is a
    Gaussian blur with a random kernel size in ``severe_kernel`` followed by
    additive Gaussian noise of ``severe_sigma``.
    """

    kinds: tuple = ("severe",)
    gaussian_sigma: float = 0.05
    shot_scale: float = 50.0
    impulse_prob: float = 0.02
    blur_kernel: int = 7
    motion_length: int = 9
    motion_angle: Optional[float] = None
    severe_kernel: tuple = (1, 100)
    severe_sigma: float = 0.1

    def __post_init__(self):
        if not self.kinds:
            raise NoiseConfigError("at least one corruption kind is required")
        for k in self.kinds:
            if k not in KINDS:
                raise NoiseConfigError(f"unknown corruption kind {k!r}; expected one of {KINDS}")
        if self.gaussian_sigma < 0 or self.severe_sigma < 0:
            raise NoiseConfigError("noise sigma must be non-negative")
        if self.shot_scale <= 0:
            raise NoiseConfigError("shot scale must be positive")
        if not 0 <= self.impulse_prob <= 1:
            raise NoiseConfigError("impulse probability must lie in [0, 1]")
        if self.blur_kernel < 1 or self.motion_length < 1:
            raise NoiseConfigError("kernel sizes must be >= 1")
        lo, hi = self.severe_kernel
        if not 1 <= lo <= hi:
            raise NoiseConfigError("severe kernel range must satisfy 1 <= lo <= hi")

    def describe(self) -> str:
        parts = [f"kinds={','.join(self.kinds)}"]
        for f in fields(self)[1:]:
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = "-".join(str(x) for x in v)
            parts.append(f"{f.name}={v}")
        return ";".join(parts)

    @classmethod
    def parse(cls, text: str) -> "NoiseSpec":
        """Inverse of :meth:`describe`; also accepts a bare preset name."""
        text = text.strip()
        if text in PRESETS:
            return PRESETS[text]
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for item in filter(None, text.split(";")):
            key, _, val = item.partition("=")
            key = key.strip()
            if key not in types:
                raise NoiseConfigError(f"unknown noise field {key!r}")
            if key == "kinds":
                kwargs[key] = tuple(v for v in val.split(",") if v)
            elif key == "severe_kernel":
                kwargs[key] = tuple(int(v) for v in val.split("-"))
            elif key == "motion_angle":
                kwargs[key] = None if val == "None" else float(val)
            elif key in ("blur_kernel", "motion_length"):
                kwargs[key] = int(val)
            else:
                kwargs[key] = float(val)
        return cls(**kwargs)


PRESETS = {
    "severe": NoiseSpec(kinds=("severe",)),
    "industrial": NoiseSpec(kinds=("motion_blur", "gaussian", "shot", "impulse")),
}


def gaussian_kernel(size: int) -> np.ndarray:
    """Normalised 1-D Gaussian of odd length ``size`` with OpenCV's default sigma."""
    size = int(size) | 1
    if size == 1:
        return np.ones(1)
    sigma = 0.3 * ((size - 1) * 0.5 - 1) + 0.8
    x = np.arange(size) - (size - 1) / 2
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def motion_kernel(length: int, angle: float) -> np.ndarray:
    length = max(int(length), 1)
    k = np.zeros((length, length))
    c = (length - 1) / 2
    for s in np.linspace(-c, c, 4 * length):
        x = int(round(c + s * np.cos(angle)))
        y = int(round(c + s * np.sin(angle)))
        k[y, x] = 1.0
    return k / k.sum()


def gaussian_blur(image: np.ndarray, size: int) -> np.ndarray:
    k = gaussian_kernel(size)
    out = ndimage.convolve1d(image, k, axis=-1, mode="reflect")
    return ndimage.convolve1d(out, k, axis=-2, mode="reflect")


def corrupt(image: np.ndarray, spec: NoiseSpec, rng: np.random.Generator, kind: Optional[str] = None) -> np.ndarray:
    """Corrupt one (3, H, W) image in [0, 1]; result is clamped to [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if kind is None:
        kind = spec.kinds[int(rng.integers(len(spec.kinds)))]
    if kind == "gaussian":
        out = img + rng.normal(0.0, spec.gaussian_sigma, img.shape) if spec.gaussian_sigma > 0 else img.copy()
    elif kind == "shot":
        out = rng.poisson(img * spec.shot_scale) / spec.shot_scale
    elif kind == "impulse":
        hit = rng.random(img.shape) < spec.impulse_prob
        salt = rng.random(img.shape) < 0.5
        out = np.where(hit, salt.astype(np.float64), img)
    elif kind == "gaussian_blur":
        out = gaussian_blur(img, spec.blur_kernel)
    elif kind == "motion_blur":
        angle = spec.motion_angle if spec.motion_angle is not None else rng.uniform(0, np.pi)
        k = motion_kernel(spec.motion_length, angle)
        out = np.stack([ndimage.convolve(ch, k, mode="nearest") for ch in img])
    elif kind == "severe":
        lo, hi = spec.severe_kernel
        out = gaussian_blur(img, int(rng.integers(lo, hi + 1)))
        out = out + rng.normal(0.0, spec.severe_sigma, img.shape)
    else:
        raise NoiseConfigError(f"unknown corruption kind {kind!r}")
    return np.clip(out, 0.0, 1.0)


def corrupt_frame(rgb: np.ndarray, spec: NoiseSpec, n_corrupt: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of an (N, 3, H, W) frame with cameras 0..n_corrupt-1 corrupted.

    A single corruption kind is drawn for the whole frame.
    """
    n = rgb.shape[0]
    if not 0 <= n_corrupt <= n:
        raise NoiseConfigError(f"cannot corrupt {n_corrupt} of {n} cameras")
    out = np.array(rgb, dtype=np.float64)
    if n_corrupt == 0:
        return out
    kind = spec.kinds[int(rng.integers(len(spec.kinds)))]
    for i in range(n_corrupt):
        out[i] = corrupt(out[i], spec, rng, kind)
    return out
