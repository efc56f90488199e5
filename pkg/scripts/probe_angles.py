"""Pick the snapshot for the gradient-angle experiment.

For epoch-0/1/2 snapshots: minibatch gradient pairwise angles at B=4 and
B=1024 — modal 5-degree bin of B=4 and both medians.
"""

import numpy as np

from evolab.data import load_mnist_dir
from evolab.landscape import minibatch_angle_experiment
from evolab.nn.model import ModelConfig, unflatten
from evolab.errors import InputError

train, _ = load_mnist_dir("/root/pkg/.cache/synth-mnist")
mc = ModelConfig()

for epoch in (0, 1, 2):
    flat = np.load(f"/root/pkg/.cache/probe/epoch{epoch}.npy")
    model = unflatten(flat, mc)
    sets = minibatch_angle_experiment(
        model, train, batch_sizes=(4, 1024), pairs_per_size=210,
        rng=np.random.default_rng((0, 2)),
    )
    a4, a1024 = sets[4].angles, sets[1024].angles
    hist, edges = np.histogram(a4, bins=np.arange(0.0, 185.0, 5.0))
    modal = edges[int(hist.argmax())]
    print(f"epoch {epoch}: B4 modal bin [{modal:.0f},{modal+5:.0f}) "
          f"median {np.median(a4):.1f}  B1024 median {np.median(a1024):.1f}  "
          f"gap {np.median(a4)-np.median(a1024):.1f}", flush=True)
