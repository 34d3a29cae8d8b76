"""Segmentation mIoU gap between mp-pose and mp for inward and outward formations."""

import argparse

import numpy as np

from mrcp.datagen import formation_preset, generate_frames
from mrcp.graph import CameraIntrinsics, fov_overlap_ratio
from mrcp.harness import TrainConfig, train_frames


def mean_miou(preset, variant, seed, args):
    data = generate_frames(preset, n_agents=5, n_frames=args.frames, height=args.size, width=args.size, seed=seed)
    cfg = TrainConfig(variant=variant, task="segmentation", channels=16, epochs=args.epochs, seed=seed,
                      eval_noisy="0,1,2")
    final = train_frames(cfg, *data).log.final()
    return float(np.mean([final[s].miou for s in (0, 1, 2)]))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seeds", default="0,1,2")
    args = ap.parse_args()

    intr = CameraIntrinsics(np.radians(60), np.radians(60), args.size, args.size)
    for preset in ("circle_inward", "circle_outward"):
        ratio = fov_overlap_ratio(formation_preset(preset, 5), intr)
        gaps = []
        for seed in (int(s) for s in args.seeds.split(",")):
            pose, plain = mean_miou(preset, "mp-pose", seed, args), mean_miou(preset, "mp", seed, args)
            gaps.append(pose - plain)
            print(f"{preset} seed {seed}: mp-pose {pose:.4f} mp {plain:.4f} gap {gaps[-1]:+.4f}", flush=True)
        print(f"{preset}: overlap ratio {ratio:.3f}, mean gap {np.mean(gaps):+.4f}")


if __name__ == "__main__":
    main()
