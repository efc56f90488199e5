"""Regenerate per-epoch SGD parameter snapshots for experiment planning.

Default config, seed 0 everywhere; epoch k snapshot is the state after k
full epochs (epoch0 = init). Also prints subset/test metrics per epoch.
"""

import time
from pathlib import Path

import numpy as np

from evolab.data import filtered_indices, load_mnist_dir
from evolab.nn.model import ModelConfig, build_model, flatten
from evolab.nn.net import evaluate
from evolab.optim import SgdConfig, sgd_train

OUT = Path("/root/pkg/.cache/probe")
OUT.mkdir(parents=True, exist_ok=True)

train, test = load_mnist_dir("/root/pkg/.cache/synth-mnist")
mc = ModelConfig()
idx = filtered_indices(train, frozenset())
pick = np.sort(np.random.default_rng(0).choice(idx, 2048, replace=False))
imgs, labs = train.images[pick], train.labels[pick]

t0 = time.time()
model = build_model(mc, 0)
np.save(OUT / "epoch0.npy", flatten(model))
rng = np.random.default_rng(0)
cfg = SgdConfig(learning_rate=0.002, batch_size=32, epochs=1)
for epoch in range(1, 11):
    model, _ = sgd_train(model, train, cfg, rng=rng)
    np.save(OUT / f"epoch{epoch}.npy", flatten(model))
    sl, sa = evaluate(model, imgs, labs, batch_size=256)
    tl, ta = evaluate(model, test.images, test.labels)
    print(f"epoch {epoch:2d}: subset {sl:.4f}/{sa:.4f}  "
          f"test {tl:.4f}/{ta:.4f}  ({time.time()-t0:.0f}s)", flush=True)
