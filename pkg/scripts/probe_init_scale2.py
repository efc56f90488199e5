"""Narrow down init scale: takeoff epoch and displacement-to-40%."""

import time

import numpy as np

from evolab.data import filtered_indices, load_mnist_dir
from evolab.nn.model import ModelConfig, build_model, flatten
from evolab.nn.net import batch_gradient, evaluate
from evolab.optim import SgdConfig, sgd_train

train, test = load_mnist_dir("/root/pkg/.cache/synth-mnist")
mc = ModelConfig()
idx = filtered_indices(train, frozenset())
pick = np.sort(np.random.default_rng(0).choice(idx, 2048, replace=False))
imgs, labs = train.images[pick], train.labels[pick]

for scale in (1.25, 1.35):
    t0 = time.time()
    model = build_model(mc, 0)
    for i in range(0, len(model.params), 2):
        model.params[i] *= scale
    theta0 = flatten(model)
    loss, acc = evaluate(model, imgs, labs, batch_size=256)
    gn = np.linalg.norm(batch_gradient(model, imgs[:1024], labs[:1024]))
    print(f"scale {scale}: init loss {loss:.4f} acc {acc:.4f} |g| {gn:.4f}",
          flush=True)
    rng = np.random.default_rng(0)
    cfg = SgdConfig(learning_rate=0.002, batch_size=32, epochs=1)
    for epoch in range(1, 5):
        model, _ = sgd_train(model, train, cfg, rng=rng)
        loss, acc = evaluate(model, imgs, labs, batch_size=256)
        disp = float(np.linalg.norm(flatten(model) - theta0))
        print(f"scale {scale} epoch {epoch}: loss {loss:.4f} acc {acc:.4f} "
              f"disp {disp:.3f} ({time.time()-t0:.0f}s)", flush=True)
