"""Dry-run of the flatness-ordering check, one replica per archetype.

Trains replica 0 of each archetype exactly as the acceptance suite will
(same init seed, same rng tuple), sweeps the +/-0.5 points, and prints the
pooled median loss increase so the robust-wide < brittle-narrow ordering
can be confirmed before committing to the 3-replica run.
"""

import time
from pathlib import Path

import numpy as np

from evolab.data import load_mnist_dir
from evolab.landscape import archetype, flatness_sweep
from evolab.nn.model import build_model
from evolab.optim import sgd_train

ROOT = Path(__file__).resolve().parent.parent
SNAP = ROOT / ".cache" / "probe"
GRID = np.array([-0.5, 0.0, 0.5])
OCC = frozenset({8, 9})


def balanced(data, per_class):
    picks = [np.flatnonzero(data.labels == c)[:per_class] for c in range(10)]
    return data.take(np.sort(np.concatenate(picks)))


def main():
    train, _ = load_mnist_dir(ROOT / ".cache" / "synth-mnist")
    sub = balanced(train, 205)
    for ai, name in enumerate(["robust_wide", "brittle_narrow", "brittle_wide"]):
        mc, sc = archetype(name)
        replica = 0
        t0 = time.perf_counter()
        model = build_model(mc, replica)
        model, _ = sgd_train(model, train, sc, OCC,
                             np.random.default_rng((10, ai, replica)))
        trained = time.perf_counter() - t0
        np.save(SNAP / f"arch_{name}_r0.npy",
                np.concatenate([p.ravel() for p in model.params]))
        sweep = flatness_sweep(model, sub, occluded=OCC, grid=GRID,
                               sampling_replicas=5,
                               rng=np.random.default_rng((10, ai, replica, 1)))
        inc = np.concatenate([sweep.losses[:, 0], sweep.losses[:, 2]])
        inc = inc - sweep.base_loss
        print(f"{name}: base {sweep.base_loss:.4f} median increase at |t|=0.5 "
              f"{float(np.median(inc)):.4f} (train {trained:.0f}s, "
              f"sweep {time.perf_counter() - t0 - trained:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
