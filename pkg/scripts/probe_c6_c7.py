"""Dry-run of the mutation-fraction and best-of-N alignment checks.

Uses the cached epoch snapshots so nothing is retrained; seeds mirror the
acceptance suite exactly, so the printed numbers are the ones the suite
will reproduce.
"""

import time
from pathlib import Path

import numpy as np

from evolab.data import load_mnist_dir
from evolab.landscape import limit_equivalence, mutation_sweep
from evolab.nn.model import ModelConfig, build_model, unflatten

ROOT = Path(__file__).resolve().parent.parent
SNAP = ROOT / ".cache" / "probe"


def balanced(data, per_class):
    picks = [np.flatnonzero(data.labels == c)[:per_class] for c in range(10)]
    return data.take(np.sort(np.concatenate(picks)))


def main():
    train, _ = load_mnist_dir(ROOT / ".cache" / "synth-mnist")
    sub = balanced(train, 205)
    mc = ModelConfig()

    for tag, fname, seed in [("init", "epoch0.npy", 0), ("epoch10", "epoch10.npy", 1)]:
        model = unflatten(np.load(SNAP / fname), mc)
        t0 = time.perf_counter()
        res = mutation_sweep(model, sub, samples=512,
                             rng=np.random.default_rng((7, seed)),
                             context="random_init" if seed == 0 else "optimum")
        print(f"mutations {tag}: beneficial {res.beneficial_fraction():.4f} "
              f"({time.perf_counter() - t0:.0f}s)", flush=True)

    tiny = build_model(ModelConfig(latent_maps=2, linear_width=4), 0)
    t0 = time.perf_counter()
    res = limit_equivalence(tiny, sub, n_list=(1, 4, 16, 64, 256), trials=50,
                            rng=np.random.default_rng((6, 0)))
    angles = res.mean_angles
    print(f"limit-equivalence means: "
          f"{ {n: round(a, 2) for n, a in angles.items()} } "
          f"skipped={res.skipped_trials} ({time.perf_counter() - t0:.0f}s)")
    ns = sorted(angles)
    mono = all(angles[b] <= angles[a] + 1.0 for a, b in zip(ns, ns[1:]))
    gap = angles[1] - angles[256]
    print(f"monotone(1°): {mono}  gap(1 vs 256): {gap:.2f}°")


if __name__ == "__main__":
    main()
