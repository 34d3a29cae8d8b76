"""Training and evaluation loops."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .. import model as M
from ..autodiff import RngState, Tape, adam_step, backward
from ..autodiff import functional as F
from ..checkpoint import load_checkpoint, save_checkpoint
from ..datagen import NoiseSpec, corrupt_frame, read_dataset
from ..graph import CommGraph, build_graph, complete_graph
from ..losses import LossConfig, depth_loss, seg_loss, total_loss
from ..metrics import ConfusionAccumulator, DepthAccumulator, MetricBundle
from .config import ConfigError, TrainConfig, parse_config_text

# substream ids under the training seed
_SPLIT, _ORDER, _NOISE = 1, 2, 3
LOG_COLUMNS = ("epoch", "noisy_cameras", "train_loss", "abs_rel", "sq_rel", "rmse", "miou")

Predictor = Callable[[object, np.ndarray], np.ndarray]


@dataclass
class EpisodeLog:
    """Append-only table with one row per (epoch, noisy-camera setting)."""

    variant: str = ""
    rows: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    def append(self, epoch: int, setting: int, train_loss: float, bundle: MetricBundle) -> None:
        self.rows.append((epoch, setting, train_loss, bundle.abs_rel, bundle.sq_rel, bundle.rmse, bundle.miou))

    def to_tsv(self) -> str:
        lines = ["variant\t" + "\t".join(LOG_COLUMNS)]
        for r in self.rows:
            vals = [str(r[0]), str(r[1])] + [repr(float(v)) for v in r[2:]]
            lines.append(self.variant + "\t" + "\t".join(vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_tsv(cls, text: str) -> "EpisodeLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split("\t")[1:] != list(LOG_COLUMNS):
            raise ValueError("not an episode log (header mismatch)")
        log = cls()
        for ln in lines[1:]:
            parts = ln.split("\t")
            log.variant = parts[0]
            log.rows.append((int(parts[1]), int(parts[2]), *(float(v) for v in parts[3:])))
        return log

    def final(self) -> dict:
        """Metrics of the last epoch keyed by noisy-camera count."""
        if not self.rows:
            return {}
        last = max(r[0] for r in self.rows)
        return {r[1]: MetricBundle(*r[3:]) for r in self.rows if r[0] == last}


@dataclass
class TrainResult:
    params: object
    model_cfg: M.ModelConfig
    log: EpisodeLog
    losses: list
    train_idx: list
    eval_idx: list


def split_indices(n_frames: int, seed: int, fraction: float = 0.8) -> tuple[list, list]:
    """Deterministic train/eval split of frame indices."""
    perm = RngState(seed).stream(_SPLIT).permutation(n_frames)
    n_train = int(round(fraction * n_frames))
    n_train = min(max(n_train, 1), n_frames - 1) if n_frames > 1 else n_frames
    return sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist())


def frame_graph(frame, threshold: float) -> CommGraph:
    n = frame.rgb.shape[0]
    return complete_graph(n) if threshold <= 0 else build_graph(frame.robot_poses(), threshold)


def task_loss(out, frame, images: np.ndarray, task: str, loss_cfg: LossConfig):
    n = images.shape[0]
    per_node = []
    for i in range(n):
        if task == "depth":
            per_node.append(depth_loss(images[i], out[i, 0], frame.depth[i].astype(np.float64), loss_cfg))
        else:
            per_node.append(seg_loss(out[i], frame.seg[i].astype(np.int64)))
    return total_loss(per_node)


def auto_depth_scale(frames: Sequence, idx: Sequence[int]) -> float:
    """Output scale putting the zero-weight prediction at the mean training depth."""
    mean = float(np.mean([frames[i].depth.astype(np.float64).mean() for i in idx]))
    return float(mean / np.log(2.0))


def _model_cfg(cfg: TrainConfig, manifest, depth_scale: float) -> M.ModelConfig:
    try:
        return cfg.model_config(manifest.height, manifest.width, manifest.class_count,
                                manifest.agent_count, depth_scale)
    except (M.ConfigurationError, ValueError) as exc:
        raise ConfigError(f"config does not fit dataset: {exc}") from exc


def train_frames(cfg: TrainConfig, frames: Sequence, manifest) -> TrainResult:
    """Run the full training loop on in-memory frames."""
    cfg.validate(manifest.agent_count)
    if len(frames) < 2:
        raise ConfigError("need at least two frames for a train/eval split")
    for fr in frames:
        if fr.rgb.shape != (manifest.agent_count, 3, manifest.height, manifest.width):
            raise ConfigError(f"frame shape {fr.rgb.shape} does not match the manifest")
    train_idx, eval_idx = split_indices(len(frames), cfg.seed, cfg.split)
    scale = cfg.depth_scale if cfg.depth_scale > 0 else (
        auto_depth_scale(frames, train_idx) if cfg.task == "depth" else 1.0)
    mcfg = _model_cfg(cfg, manifest, scale)
    noise = NoiseSpec.parse(cfg.noise)
    loss_cfg = cfg.loss_config()
    params = M.init_params(mcfg, cfg.seed)
    # the single-robot baseline is trained on clean images only
    train_noisy = 0 if cfg.variant == "baseline" else cfg.train_noisy
    settings = cfg.eval_settings()

    root = RngState(cfg.seed)
    log = EpisodeLog(cfg.variant)
    losses = []
    step = 0
    done = False
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = root.stream(_ORDER, epoch).permutation(train_idx).tolist()
        epoch_losses = []
        for b in range(0, len(order), cfg.batch_size):
            batch = order[b:b + cfg.batch_size]
            params.zero_grad()
            step_loss = 0.0
            for k, fi in enumerate(batch):
                frame = frames[fi]
                rng = root.stream(_NOISE, step, k)
                n_noisy = int(rng.integers(0, train_noisy + 1))
                images = corrupt_frame(frame.rgb, noise, n_noisy, rng)
                with Tape() as tape:
                    out = M.forward(frame_graph(frame, cfg.graph_threshold), images, mcfg, params,
                                    frame.robot_poses())
                    loss = task_loss(out, frame, images, cfg.task, loss_cfg)
                    scaled = F.mul(loss, 1.0 / len(batch))
                backward(scaled, tape)
                step_loss += float(loss.data) / len(batch)
            adam_step(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
            losses.append(step_loss)
            epoch_losses.append(step_loss)
            step += 1
            if cfg.max_steps and step >= cfg.max_steps:
                done = True
                break
        metrics = evaluate_frames(params, mcfg, frames, eval_idx, settings, noise, cfg.eval_seed,
                                  manifest.max_depth, cfg.graph_threshold)
        mean_loss = float(np.mean(epoch_losses))
        for s in settings:
            log.append(epoch, s, mean_loss, metrics[s])
        log.wall_time.append(time.perf_counter() - t0)
        if done:
            break
    return TrainResult(params, mcfg, log, losses, train_idx, eval_idx)


def run_training(cfg: TrainConfig) -> TrainResult:
    """Train from ``cfg.dataset`` and write checkpoint, config sidecar and logs to ``cfg.out_dir``."""
    if not cfg.dataset:
        raise ConfigError("config has no dataset path")
    frames, manifest = read_dataset(cfg.dataset)
    result = train_frames(cfg, frames, manifest)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.ckpt"
    save_checkpoint(ckpt, result.params)
    sidecar = cfg.to_text() + f"# resolved\nresolved_depth_scale = {result.model_cfg.depth_scale!r}\n"
    Path(str(ckpt) + ".cfg").write_text(sidecar)
    (out / "log.tsv").write_text(result.log.to_tsv())
    (out / "timing.tsv").write_text(
        "epoch\twall_seconds\n" + "".join(f"{i}\t{t:.3f}\n" for i, t in enumerate(result.log.wall_time)))
    return result


def evaluate_frames(
    params,
    mcfg: M.ModelConfig,
    frames: Sequence,
    idx: Sequence[int],
    settings: Sequence[int],
    noise: NoiseSpec,
    eval_seed: int,
    max_depth: Optional[float],
    graph_threshold: float = 0.0,
    predictor: Optional[Predictor] = None,
) -> dict:
    """Metrics per noisy-camera setting over frames ``idx``.

    Corruption is seeded per (frame, setting) from ``eval_seed`` so every
    variant sees the same noisy images. ``predictor(frame, images)`` may
    replace the model; it returns (N, H, W) depths or class ids.
    """
    root = RngState(eval_seed)
    out = {}
    for s in settings:
        dacc = DepthAccumulator(max_depth)
        cacc = ConfusionAccumulator(mcfg.num_classes)
        for fi in idx:
            frame = frames[fi]
            images = corrupt_frame(frame.rgb, noise, s, root.stream(fi, s))
            if predictor is not None:
                pred = np.asarray(predictor(frame, images))
            else:
                res = M.forward(frame_graph(frame, graph_threshold), images, mcfg, params, frame.robot_poses())
                pred = M.predictions(res, mcfg.task)
            if mcfg.task == "depth":
                dacc.update(pred.astype(np.float64), frame.depth.astype(np.float64))
            else:
                cacc.update(pred, frame.seg)
        if mcfg.task == "depth":
            out[s] = MetricBundle(*dacc.result())
        else:
            out[s] = MetricBundle(miou=cacc.miou())
    return out


def evaluate_checkpoint(checkpoint, dataset, variant: Optional[str] = None,
                        noisy_cameras: Sequence[int] = (0, 1, 2), predictor: Optional[Predictor] = None) -> dict:
    """Evaluate a saved checkpoint on the eval split of ``dataset``.

    The training config is read from the ``<checkpoint>.cfg`` sidecar.
    """
    sidecar = Path(str(checkpoint) + ".cfg")
    if not sidecar.exists():
        raise ConfigError(f"missing config sidecar {sidecar}")
    text = sidecar.read_text()
    scale = 1.0
    body = []
    for line in text.splitlines():
        if line.startswith("resolved_depth_scale"):
            scale = float(line.partition("=")[2])
        else:
            body.append(line)
    cfg = parse_config_text("\n".join(body))
    if variant is not None and variant != cfg.variant:
        raise ConfigError(f"checkpoint was trained as {cfg.variant!r}, not {variant!r}")
    frames, manifest = read_dataset(dataset)
    mcfg = _model_cfg(cfg, manifest, scale)
    arrays = load_checkpoint(checkpoint)
    M.check_params_match(mcfg, arrays)
    params = M.init_params(mcfg, 0)
    params.load(arrays)
    for s in noisy_cameras:
        if not 0 <= s <= manifest.agent_count:
            raise ConfigError(f"noisy camera count {s} outside [0, {manifest.agent_count}]")
    _, eval_idx = split_indices(len(frames), cfg.seed, cfg.split)
    return evaluate_frames(params, mcfg, frames, eval_idx, list(noisy_cameras), NoiseSpec.parse(cfg.noise),
                           cfg.eval_seed, manifest.max_depth, cfg.graph_threshold, predictor)

