"""Rebuild the synthetic corpus and check SGD takeoff + init gradient norm.

Calibration target (full 60k train set, default config, seed 0):
train-subset accuracy roughly 15-40% after epoch 1 and >=80% after epoch 2,
matching the reference SGD curve the greedy-search budget is based on.
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from synth_digits import write_corpus_dir

from evolab.data import filtered_indices, load_mnist_dir
from evolab.nn.model import ModelConfig, build_model
from evolab.nn.net import batch_gradient, evaluate
from evolab.optim import SgdConfig, sgd_train

ROOT = Path("/root/pkg/.cache/synth-mnist")

t0 = time.time()
write_corpus_dir(ROOT)
print(f"corpus ready ({time.time()-t0:.0f}s)", flush=True)

train, test = load_mnist_dir(ROOT)
mc = ModelConfig()

idx = filtered_indices(train, frozenset())
pick = np.sort(np.random.default_rng(0).choice(idx, 2048, replace=False))
imgs, labs = train.images[pick], train.labels[pick]

model = build_model(mc, 0)
loss, acc = evaluate(model, imgs, labs, batch_size=256)
g = batch_gradient(model, imgs[:1024], labs[:1024])
print(f"init: subset loss {loss:.4f} acc {acc:.4f} |g| {np.linalg.norm(g):.4f}",
      flush=True)

rng = np.random.default_rng(0)
cfg = SgdConfig(learning_rate=0.002, batch_size=32, epochs=1)
for epoch in range(1, 4):
    model, _ = sgd_train(model, train, cfg, rng=rng)
    loss, acc = evaluate(model, imgs, labs, batch_size=256)
    gn = np.linalg.norm(batch_gradient(model, imgs[:1024], labs[:1024]))
    print(f"epoch {epoch}: subset loss {loss:.4f} acc {acc:.4f} |g| {gn:.4f} "
          f"({time.time()-t0:.0f}s)", flush=True)

loss_t, acc_t = evaluate(model, test.images, test.labels)
print(f"test after 3 epochs: loss {loss_t:.4f} acc {acc_t:.4f}", flush=True)
