"""Background probe: full GO-EA trajectory on the 2048-sample fitness subset.

Logs every generation so the exact generation where training-subset accuracy
crosses 40% is known; saves the final flattened parameters.
"""
import sys, time
from pathlib import Path

sys.path.insert(0, "/root/pkg/src")
import numpy as np
from evolab.data import load_mnist_dir
from evolab.nn.model import ModelConfig, build_model, flatten
from evolab.optim import GoeaConfig, goea_fitness_builder, goea_train

OUT = Path("/root/pkg/.cache/goea")
OUT.mkdir(parents=True, exist_ok=True)

train, _ = load_mnist_dir("/root/pkg/.cache/synth-mnist")
mc = ModelConfig()
fitness = goea_fitness_builder(train, (), 2048, 0, mc, eval_batch_size=16)
model = build_model(mc, 0)
t0 = time.time()

def watch(gen, loss, acc):
    print(f"gen {gen}: loss {loss:.4f} acc {acc:.4f} ({time.time()-t0:.0f}s)",
          flush=True)
    return acc >= 0.50

cfg = GoeaConfig(edit_distance=0.01, population=20, generations=1000,
                 master_seed=0, acceptance="sequential",
                 fitness_subset_size=2048)
final, trace = goea_train(model, fitness, cfg, on_generation=watch)
np.save(OUT / "final_params.npy", flatten(final))
accepted = [r for r in trace.rows if r.accepted]
print(f"done: {len(trace.rows)-1} evals, {len(accepted)-1} accepted, "
      f"final acc {trace.final_accuracy():.4f}", flush=True)
