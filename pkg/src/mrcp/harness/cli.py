"""Command-line entry point: ``mrcp {gen-data,train,eval,bandwidth,report}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..autodiff import RngState
from ..checkpoint import CheckpointError
from ..datagen import PRESETS, FormatError, NoiseSpec, corrupt_frame, generate_frames, write_dataset
from ..datagen.corrupt import NoiseConfigError
from ..graph import complete_graph
from ..model import VARIANTS, ConfigurationError, ModelConfig
from .bandwidth import simulate_exchange
from .config import ConfigError, TrainConfig, load_config
from .report import results_table
from .train import EpisodeLog, evaluate_checkpoint, run_training

RUNTIME_ERRORS = (ConfigError, ConfigurationError, FormatError, CheckpointError, NoiseConfigError, OSError, ValueError)


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrcp", description="Multi-robot collaborative perception toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="render a synthetic multi-robot dataset")
    g.add_argument("--preset", choices=PRESETS, default="circle_inward")
    g.add_argument("--agents", type=int, default=5)
    g.add_argument("--frames", type=int, default=8)
    g.add_argument("--height", type=int, default=64)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--radius", type=float, default=6.0)
    g.add_argument("--altitude", type=float, default=8.0)
    g.add_argument("--fov", type=float, default=60.0, help="field of view in degrees")
    g.add_argument("--max-depth", type=float, default=40.0)
    g.add_argument("--noise", default=None, help="bake corruption into the stored images (preset or spec)")
    g.add_argument("--noisy-cameras", type=int, default=0, help="cameras to corrupt when --noise is set")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train one variant from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
    t.add_argument("--dataset")
    t.add_argument("--out-dir")
    t.add_argument("--variant", choices=VARIANTS)
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset's eval split")
    e.add_argument("checkpoint")
    e.add_argument("dataset")
    e.add_argument("--variant", choices=VARIANTS)
    e.add_argument("--noisy-cameras", type=int, nargs="+", default=[0, 1, 2])

    b = sub.add_parser("bandwidth", help="bytes exchanged per frame")
    b.add_argument("--config", help="training config; model fields are taken from it")
    b.add_argument("--agents", type=int, default=5)
    b.add_argument("--height", type=int, default=64)
    b.add_argument("--width", type=int, default=64)
    b.add_argument("--payload-width", type=int, default=4)

    r = sub.add_parser("report", help="results table from episode logs")
    r.add_argument("logs", nargs="+")
    return p


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value
    for flag in ("dataset", "out_dir", "variant", "seed", "epochs"):
        if getattr(args, flag) is not None:
            out[flag] = getattr(args, flag)
    return out


def _config_or_usage(path: str, overrides: dict | None = None) -> TrainConfig:
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    return load_config(path, overrides)


def cmd_gen_data(args) -> int:
    frames, manifest = generate_frames(args.preset, args.agents, args.frames, args.height, args.width, args.seed,
                                       args.radius, args.altitude, args.fov, args.max_depth)
    if args.noise:
        spec = NoiseSpec.parse(args.noise)
        for i, fr in enumerate(frames):
            fr.rgb = corrupt_frame(fr.rgb, spec, args.noisy_cameras, RngState(args.seed).stream(99, i))
        manifest.noise = f"{spec.describe()} cameras={args.noisy_cameras}"
    write_dataset(frames, manifest, args.out)
    print(f"wrote {args.out}: {manifest.frame_count} frames, {manifest.agent_count} agents, "
          f"{manifest.height}x{manifest.width}")
    return 0


def cmd_train(args) -> int:
    cfg = _config_or_usage(args.config, _overrides(args))
    result = run_training(cfg)
    print(results_table([result.log]), end="")
    print(f"checkpoint: {Path(cfg.out_dir) / 'model.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    metrics = evaluate_checkpoint(args.checkpoint, args.dataset, args.variant, args.noisy_cameras)
    log = EpisodeLog(args.variant or "checkpoint")
    for s, bundle in metrics.items():
        log.append(0, s, float("nan"), bundle)
    print(results_table([log]), end="")
    return 0


def cmd_bandwidth(args) -> int:
    if args.config:
        tc = _config_or_usage(args.config)
        cfg = tc.model_config(args.height, args.width, 4, args.agents)
    else:
        cfg = ModelConfig(height=args.height, width=args.width, n_agents=args.agents)
    print(simulate_exchange(complete_graph(args.agents), cfg, args.payload_width).to_text(), end="")
    return 0


def cmd_report(args) -> int:
    logs = [EpisodeLog.from_tsv(Path(p).read_text()) for p in args.logs]
    print(results_table(logs), end="")
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "bandwidth": cmd_bandwidth, "report": cmd_report}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, bad flags exit 2
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mrcp {args.command}: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"mrcp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
