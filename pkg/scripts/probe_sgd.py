"""Background probe: full SGD run with the numpy trainer, saving per-epoch
parameter snapshots for follow-up landscape probes."""
import sys, time
from pathlib import Path

sys.path.insert(0, "/root/pkg/src")
import numpy as np
from evolab.data import load_mnist_dir
from evolab.nn.model import ModelConfig, build_model, flatten
from evolab.nn.net import evaluate
from evolab.optim import SgdConfig, sgd_train

out = Path("/root/pkg/.cache/probe")
out.mkdir(parents=True, exist_ok=True)
train, test = load_mnist_dir("/root/pkg/.cache/synth-mnist")
cfg = ModelConfig()
model = build_model(cfg, 0)
np.save(out / "epoch0.npy", flatten(model))
rng = np.random.default_rng((0, 1))
sc = SgdConfig(epochs=1)
t0 = time.time()
for epoch in range(1, 11):
    model, trace = sgd_train(model, train, sc, rng=rng)
    loss, acc = evaluate(model, test.images, test.labels)
    np.save(out / f"epoch{epoch}.npy", flatten(model))
    print(f"epoch {epoch}: test loss {loss:.4f} acc {acc:.4f} "
          f"({time.time()-t0:.0f}s)", flush=True)
print("done", flush=True)
