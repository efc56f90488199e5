"""Feasibility numbers for the greedy-search training criterion.

Maps the SGD trajectory onto the fitness subset (loss/acc per epoch,
parameter displacement from init) and scans init seeds for gradient norm
on that subset.
"""

from pathlib import Path

import numpy as np

from evolab.data import load_mnist_dir, filtered_indices
from evolab.nn.model import ModelConfig, build_model, flatten, unflatten
from evolab.nn.net import batch_gradient, evaluate

train, _ = load_mnist_dir("/root/pkg/.cache/synth-mnist")
mc = ModelConfig()

# same subset construction as the fitness builder (seed 0)
idx = filtered_indices(train, frozenset())
pick = np.sort(np.random.default_rng(0).choice(idx, 2048, replace=False))
imgs, labs = train.images[pick], train.labels[pick]

print("== SGD snapshots on the 2048-sample fitness subset ==")
base = build_model(mc, 0)
theta0 = None
for e in range(11):
    p = Path(f"/root/pkg/.cache/probe/epoch{e}.npy")
    if not p.exists():
        continue
    flat = np.load(p)
    if theta0 is None:
        theta0 = flat.copy()
    m = unflatten(flat, mc)
    loss, acc = evaluate(m, imgs, labs, batch_size=256)
    disp = float(np.linalg.norm(flat - theta0))
    print(f"epoch {e:2d}: loss {loss:.4f}  acc {acc:.4f}  |theta-theta0| {disp:.3f}")

print("\n== init-seed scan: loss / acc / grad norm on subset ==")
rows = []
for seed in range(20):
    m = build_model(mc, seed)
    loss, acc = evaluate(m, imgs, labs, batch_size=256)
    g = batch_gradient(m, imgs[:1024], labs[:1024])
    gn = float(np.linalg.norm(g))
    rows.append((seed, loss, acc, gn))
    print(f"seed {seed:2d}: loss {loss:.4f}  acc {acc:.4f}  |g| {gn:.4f}")

best = max(rows, key=lambda r: r[3])
print(f"\nsteepest init: seed {best[0]} |g|={best[3]:.4f}")
