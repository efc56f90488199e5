"""Dry-run of the transfer ceiling/recovery and orthogonality checks.

Runs the full occluded-training -> reveal -> fine-tune story once with the
acceptance suite's seeds, prints the phase metrics, then samples update
vectors at the reveal point against the full 10-class loss.
"""

import time
from pathlib import Path

import numpy as np

from evolab.data import load_mnist_dir
from evolab.landscape import transfer_run, valid_vector_angles
from evolab.nn.model import ModelConfig, unflatten
from evolab.optim import SgdConfig

ROOT = Path(__file__).resolve().parent.parent
SNAP = ROOT / ".cache" / "probe"


def balanced(data, per_class):
    picks = [np.flatnonzero(data.labels == c)[:per_class] for c in range(10)]
    return data.take(np.sort(np.concatenate(picks)))


def main():
    train, test = load_mnist_dir(ROOT / ".cache" / "synth-mnist")
    mc = ModelConfig()
    t0 = time.perf_counter()
    trace = transfer_run(mc, SgdConfig(0.002, 32, 10), train, test,
                         occluded={8, 9}, fine_tune_epochs=5,
                         rng=np.random.default_rng((11, 0)), init_seed=0)
    print(f"transfer run: {time.perf_counter() - t0:.0f}s", flush=True)
    for r in trace.rows:
        print(f"  {r.phase:18s} ep{r.epoch:2d} loss {r.loss:.4f} "
              f"known {r.acc_known:.4f} revealed {r.acc_revealed:.4f} "
              f"all {r.acc_all:.4f}")
    np.save(SNAP / "reveal_params.npy", trace.reveal_params)

    phase1 = [r for r in trace.rows if r.phase == "occluded_training"][-1]
    final = [r for r in trace.rows if r.phase == "fine_tune"][-1]
    print(f"c11: phase1 all-10 {phase1.acc_all:.4f} (need <= 0.80), "
          f"final {final.acc_all:.4f} (need > phase1)")

    model = unflatten(trace.reveal_params, mc)
    sub = balanced(train, 205)
    t0 = time.perf_counter()
    res = valid_vector_angles(model, sub, occluded=(), n_samples=120,
                              eps=0.01, rng=np.random.default_rng((8, 0)))
    nb = int(np.sqrt(2 * len(res.beneficial.angles))) + 1
    print(f"c8: status {res.status!r} ks={res.ks} "
          f"mean(beneficial) {float(np.mean(res.beneficial.angles)):.3f} "
          f"mean(all) {float(np.mean(res.all.angles)):.3f} "
          f"~{nb} beneficial of 120 ({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
