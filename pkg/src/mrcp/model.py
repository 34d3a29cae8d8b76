"""Multi-robot perception network and its single-robot baselines.

Every robot runs the same encoder on its own image. Then L rounds of
message passing over the communication graph happen, each followed by mean
aggregation. Finally each robot decodes ``[h0 ∥ hL]`` into a dense
prediction. All nodes share a single parameter set.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .autodiff import DimensionError, ParamStore, RngState, Tensor, uniform_init
from .autodiff import functional as F
from .autodiff.tensor import as_tensor
from .graph import CommGraph, RobotPose, relative_pose
from . import messages as msg

VARIANTS = ("baseline", "baseline-mp", "mp", "mp-pose", "mp-att")
GNN_VARIANTS = ("mp", "mp-pose", "mp-att")
TASKS = ("depth", "segmentation")
ENCODER_STRIDE = 8

RELU_GAIN = 6.0


class ConfigurationError(ValueError):
    pass


@dataclass
class ModelConfig:
    variant: str = "mp-pose"
    levels: int = 1
    channels: int = 32
    heads: int = 4
    height: int = 64
    width: int = 64
    task: str = "depth"
    num_classes: int = 4
    n_agents: int = 5
    share_levels: bool = True
    depth_scale: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.task not in TASKS:
            raise ConfigurationError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.levels not in (1, 2):
            raise ConfigurationError(f"levels must be 1 or 2, got {self.levels}")
        if self.heads < 1:
            raise ConfigurationError("heads must be at least 1")
        if self.channels < 2 or self.channels % 2:
            raise ConfigurationError("channels must be an even number >= 2")
        if self.height % ENCODER_STRIDE or self.width % ENCODER_STRIDE:
            raise ConfigurationError(f"image size {self.height}x{self.width} must be divisible by {ENCODER_STRIDE}")
        if self.task == "segmentation" and self.num_classes < 2:
            raise ConfigurationError("segmentation needs at least 2 classes")
        if self.depth_scale <= 0:
            raise ConfigurationError("depth_scale must be positive")

    @property
    def out_channels(self) -> int:
        return 1 if self.task == "depth" else self.num_classes

    @property
    def feature_hw(self) -> tuple[int, int]:
        return self.height // ENCODER_STRIDE, self.width // ENCODER_STRIDE

    def to_dict(self) -> dict:
        return asdict(self)


# (name, cin_key, cout_key, stride)
_ENCODER = (("conv0", "in", 16, 2), ("conv1", 16, 32, 2), ("conv2", 32, "C", 2), ("conv3", "C", "C", 1))


def _level_prefix(cfg: ModelConfig, base: str, level: int) -> str:
    return base if cfg.share_levels or cfg.levels == 1 else f"{base}.level{level}"


def init_params(cfg: ModelConfig, seed: int = 0) -> ParamStore:
    """Seeded initialisation: Kaiming-uniform conv weights, ±sqrt(1/fan_in) elsewhere."""
    rng = RngState(seed).stream(0)
    store = ParamStore()
    c = cfg.channels
    in_ch = 3 * cfg.n_agents if cfg.variant == "baseline-mp" else 3
    out_ch = cfg.out_channels * (cfg.n_agents if cfg.variant == "baseline-mp" else 1)

    def resolve(v):
        return {"in": in_ch, "C": c}.get(v, v)

    for name, ci, co, _ in _ENCODER:
        ci, co = resolve(ci), resolve(co)
        store.add(f"encoder.{name}.weight", uniform_init(rng, (co, ci, 3, 3), ci * 9, RELU_GAIN))
        store.add(f"encoder.{name}.bias", uniform_init(rng, (co,), ci * 9))

    half = c // 2
    dec = (("up0", 2 * c, c, True), ("refine0", c, c, False), ("up1", c, half, True),
           ("refine1", half, half, False), ("up2", half, out_ch, True))
    for name, ci, co, up in dec:
        if up:
            store.add(f"decoder.{name}.weight", uniform_init(rng, (ci, co, 4, 4), ci * 4, RELU_GAIN))
            store.add(f"decoder.{name}.bias", uniform_init(rng, (co,), ci * 4))
        else:
            store.add(f"decoder.{name}.weight", uniform_init(rng, (co, ci, 3, 3), ci * 9, RELU_GAIN))
            store.add(f"decoder.{name}.bias", uniform_init(rng, (co,), ci * 9))

    level_ids = [0] if cfg.share_levels else list(range(cfg.levels))
    if cfg.variant == "mp-pose":
        for lv in level_ids:
            msg.init_film(store, _level_prefix(cfg, "film", lv), c, rng)
    elif cfg.variant == "mp-att":
        for lv in level_ids:
            for d in range(cfg.heads):
                msg.init_attention_head(store, f"{_level_prefix(cfg, 'attn', lv)}.head{d}", c, cfg.feature_hw, rng)
    return store


def encode_observation(x, params: ParamStore) -> Tensor:
    """Image(s) (3, H, W) or (B, 3, H, W) to features (…, C, H/8, W/8)."""
    h = as_tensor(x)
    for k, (name, _, _, stride) in enumerate(_ENCODER):
        h = F.conv2d(h, params[f"encoder.{name}.weight"], params[f"encoder.{name}.bias"], stride=stride, padding=1)
        if k < len(_ENCODER) - 1:
            h = F.relu(h)
    return h


def decode(h0, hl, params: ParamStore, task: str, depth_scale: float = 1.0) -> Tensor:
    """Decode the skip pair ``[h0 ∥ hL]`` back to full resolution.

    Three stride-2 transposed convolutions restore ×8, with a stride-1
    refinement convolution after each of the first two. The depth head is a
    scaled softplus; segmentation returns raw logits.
    """
    h0, hl = as_tensor(h0), as_tensor(hl)
    if h0.shape != hl.shape:
        raise DimensionError(f"decode: skip pair shapes differ {h0.shape} vs {hl.shape}")
    axis = h0.ndim - 3
    x = F.concat([h0, hl], axis=axis)
    for name in ("up0", "refine0", "up1", "refine1", "up2"):
        w, b = params[f"decoder.{name}.weight"], params[f"decoder.{name}.bias"]
        if name.startswith("up"):
            x = F.conv_transpose2d(x, w, b, stride=2, padding=1)
        else:
            x = F.conv2d(x, w, b, stride=1, padding=1)
        if name != "up2":
            x = F.relu(x)
    if task == "depth":
        x = F.softplus(x)
        if depth_scale != 1.0:
            x = x * depth_scale
    return x


def _pose_codes(poses: Sequence[RobotPose], edges) -> np.ndarray:
    return np.stack([msg.encode_continuous_pose(*relative_pose(poses[i], poses[j])) for i, j in edges])


def message_passing_round(
    graph: CommGraph,
    features,
    variant: str,
    params: ParamStore,
    cfg: ModelConfig,
    level: int = 0,
    poses: Optional[Sequence[RobotPose]] = None,
) -> Tensor:
    """One level: build every directed message, then average at each receiver.

    ``h_j' = (1/|N(j)|) * sum_{i in N(j)} m_ij``; nodes without neighbors keep
    their feature. Incoming messages are summed in value-sorted order so the
    result does not depend on node labels.
    """
    features = as_tensor(features)
    if features.ndim != 4 or features.shape[0] != graph.n_nodes:
        raise DimensionError(f"features {features.shape} do not match a {graph.n_nodes}-node graph")
    edges = graph.directed_edges()
    if not edges:
        return features
    src = [i for i, _ in edges]
    dst = [j for _, j in edges]
    h_src = features[src]

    if variant == "mp":
        msgs = h_src
    elif variant == "mp-pose":
        if poses is None:
            raise ConfigurationError("mp-pose needs robot poses")
        codes = _pose_codes(poses, edges)
        scale, shift = msg.film_generate(codes, params, _level_prefix(cfg, "film", level))
        msgs = msg.film_message(h_src, scale, shift)
    elif variant == "mp-att":
        h_dst = features[dst]
        prefix = _level_prefix(cfg, "attn", level)
        per_head = []
        for d in range(cfg.heads):
            scores = msg.edge_attention_scores(h_src, h_dst, params, f"{prefix}.head{d}")
            per_head.append(_softmax_by_destination(scores, dst, graph.n_nodes))
        msgs = F.scale_rows(msg.head_mean(per_head), h_src)
    else:
        raise ConfigurationError(f"variant {variant!r} does not pass messages")

    out = []
    start = 0
    for j in range(graph.n_nodes):
        deg = graph.degree(j)
        if deg == 0:
            out.append(features[j])
            continue
        incoming = msgs[start:start + deg]
        start += deg
        out.append(F.canonical_sum(incoming, axis=0) * (1.0 / deg))
    return F.stack(out, axis=0)


def _softmax_by_destination(scores: Tensor, dst: Sequence[int], n_nodes: int) -> Tensor:
    """Softmax of edge scores within each receiver's (contiguous) incoming block."""
    parts = []
    start = 0
    for j in range(n_nodes):
        cnt = sum(1 for d in dst if d == j)
        if cnt:
            parts.append(msg.attention_weights(scores[start:start + cnt]))
            start += cnt
    return F.concat(parts, axis=0)


def forward(
    graph: Optional[CommGraph],
    observations,
    cfg: ModelConfig,
    params: ParamStore,
    poses: Optional[Sequence[RobotPose]] = None,
) -> Tensor:
    """Predictions for every robot, shape (N, out_channels, H, W)."""
    x = as_tensor(observations)
    if x.ndim != 4 or x.shape[1:] != (3, cfg.height, cfg.width):
        raise DimensionError(f"observations {x.shape} do not match (N, 3, {cfg.height}, {cfg.width})")
    if cfg.variant == "baseline":
        return baseline_forward(x, params, cfg)
    if cfg.variant == "baseline-mp":
        return baseline_mp_forward(x, params, cfg)
    if graph is None or graph.n_nodes != x.shape[0]:
        raise ConfigurationError("graph node count must equal the number of observations")
    if cfg.variant == "mp-pose" and poses is None:
        raise ConfigurationError("variant mp-pose requires robot poses")
    if cfg.variant != "mp-pose":
        poses = None

    h0 = encode_observation(x, params)
    h = h0
    for level in range(cfg.levels):
        h = message_passing_round(graph, h, cfg.variant, params, cfg, level, poses)
    return decode(h0, h, params, cfg.task, cfg.depth_scale)


def baseline_forward(x, params: ParamStore, cfg: ModelConfig) -> Tensor:
    """Single-robot network: encode and decode each image with skip pair (h0, h0)."""
    h0 = encode_observation(x, params)
    return decode(h0, h0, params, cfg.task, cfg.depth_scale)


def baseline_mp_forward(images, params: ParamStore, cfg: ModelConfig) -> Tensor:
    """Stacked-input baseline: all N images as one 3N-channel input, N output heads."""
    images = as_tensor(images)
    n = images.shape[0]
    if n != cfg.n_agents:
        raise DimensionError(f"baseline-mp was built for {cfg.n_agents} robots, got {n}")
    stacked = F.reshape(images, (1, 3 * n, cfg.height, cfg.width))
    h0 = encode_observation(stacked, params)
    out = decode(h0, h0, params, cfg.task, cfg.depth_scale)
    return F.reshape(out, (n, cfg.out_channels, cfg.height, cfg.width))


def predictions(out: Tensor, task: str) -> np.ndarray:
    """Network output to depth maps (N, H, W) or class maps (N, H, W)."""
    if task == "depth":
        return out.data[:, 0]
    return np.argmax(out.data, axis=1)


def check_params_match(cfg: ModelConfig, arrays: dict) -> None:
    expected = init_params(cfg, 0)
    missing = set(expected) - set(arrays)
    extra = set(arrays) - set(expected)
    if missing or extra:
        raise ConfigurationError(
            f"checkpoint does not match {cfg.variant} config: missing={sorted(missing)[:4]} extra={sorted(extra)[:4]}")
    for k in expected:
        if expected[k].shape != arrays[k].shape:
            raise ConfigurationError(f"checkpoint tensor {k!r} has shape {arrays[k].shape}, expected {expected[k].shape}")

