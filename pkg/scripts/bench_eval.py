"""Time a 2048-sample evaluation of the default model at several batch sizes."""
import sys, time

sys.path.insert(0, "/root/pkg/src")
import numpy as np
from evolab.data import load_mnist_dir
from evolab.nn.model import ModelConfig, build_model
from evolab.nn import net

train, _ = load_mnist_dir("/root/pkg/.cache/synth-mnist")
sub = train.take(np.arange(2048))
model = build_model(ModelConfig(), 7)

for bs in (256, 512, 1024, 2048):
    # warm-up then best-of-3
    net.evaluate(model, sub.images, sub.labels, batch_size=bs)
    best = min(
        (lambda t0: (net.evaluate(model, sub.images, sub.labels, batch_size=bs),
                     time.perf_counter() - t0)[1])(time.perf_counter())
        for _ in range(3)
    )
    print(f"batch {bs:5d}: {best*1000:7.1f} ms", flush=True)
