"""Summarise the training logs written by the fig3 preset.

Prints, per agent, the seed-averaged episode reward over consecutive
50-episode windows and the mean EE of the last 100 episodes.

    python3 scripts/learning_curves.py results/fig3
"""

import glob
import os
import sys

import numpy as np

from risnoma.rl import TrainingLog


def main(root):
    logs = {}
    for path in sorted(glob.glob(os.path.join(root, "logs", "*.csv"))):
        variant = os.path.basename(path).split("_g")[0]
        logs.setdefault(variant, []).append(TrainingLog.read_csv(path))
    for variant, runs in logs.items():
        reward = np.mean([r.column("cumulative_reward") for r in runs], axis=0)
        ee = np.mean([r.column("mean_ee")[-100:].mean() for r in runs])
        blocks = reward[: len(reward) // 50 * 50].reshape(-1, 50).mean(axis=1)
        print(f"{variant:<8} seeds={len(runs)} tail EE={ee:.4f}")
        print("         reward per 50 episodes:", " ".join(f"{b:.3f}" for b in blocks))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "results/fig3")
