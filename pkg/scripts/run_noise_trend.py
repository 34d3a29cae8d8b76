"""Train baseline and mp-pose on circle_inward and compare RMSE as cameras are corrupted."""

import argparse
import time
from pathlib import Path

from mrcp.datagen import generate_frames
from mrcp.harness import TrainConfig, results_table, train_frames


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variants", default="baseline,mp,mp-pose,mp-att")
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=80)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--levels", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/noise_trend")
    args = ap.parse_args()

    data = generate_frames("circle_inward", n_agents=5, n_frames=args.frames, height=args.size,
                           width=args.size, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logs = []
    for variant in args.variants.split(","):
        cfg = TrainConfig(variant=variant, channels=32, epochs=args.epochs, lr=args.lr, levels=args.levels,
                          seed=args.seed, eval_noisy="0,1,2")
        start = time.perf_counter()
        res = train_frames(cfg, *data)
        print(f"{variant}: {time.perf_counter() - start:.0f} s", flush=True)
        (out / f"{variant}.tsv").write_text(res.log.to_tsv())
        logs.append(res.log)
    print(results_table(logs))


if __name__ == "__main__":
    main()
