"""The two trainers: minibatch SGD and fixed-population greedy random search.

The random-search trainer mutates a flat parameter vector by a scalar step
along seeded unit directions; every direction is reconstructable from the
(master seed, generation, individual) triple, so populations can be shared
across workers by exchanging integers instead of vectors.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .data import BatchPlan, Dataset, batches, filtered_indices
from .errors import ConfigError, ContractViolation, InputError, NumericError
from .nn.model import Model, ModelConfig, flatten, unflatten
from .nn.net import backward, cross_entropy, evaluate, forward


@dataclass(frozen=True)
class SgdConfig:
    """Plain SGD; momentum is intentionally absent."""

    learning_rate: float = 0.002
    batch_size: int = 32
    epochs: int = 10

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")


ACCEPTANCE_MODES = ("sequential", "best_of_generation")


@dataclass(frozen=True)
class GoeaConfig:
    """Greedy random-search settings (population walk on the loss)."""

    edit_distance: float = 0.01
    population: int = 20
    generations: int = 100
    master_seed: int = 0
    acceptance: str = "sequential"
    fitness_subset_size: int | str = 2048

    def __post_init__(self) -> None:
        if self.edit_distance < 0:
            raise ConfigError(f"edit_distance must be >= 0, got {self.edit_distance}")
        if self.population < 1:
            raise ConfigError(f"population must be >= 1, got {self.population}")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")
        if self.acceptance not in ACCEPTANCE_MODES:
            raise ConfigError(
                f"acceptance must be one of {ACCEPTANCE_MODES}, got {self.acceptance!r}"
            )
        ok_subset = self.fitness_subset_size == "full" or (
            isinstance(self.fitness_subset_size, int) and self.fitness_subset_size >= 1
        )
        if not ok_subset:
            raise ConfigError(
                "fitness_subset_size must be a positive integer or 'full', "
                f"got {self.fitness_subset_size!r}"
            )


class TraceRow(NamedTuple):
    step: int
    loss: float
    accuracy: float  # NaN when the step carried no evaluation
    accepted: bool | None  # None for gradient steps (no accept/reject)
    elapsed_seconds: float


CSV_HEADER = ("step", "loss", "accuracy", "accepted", "elapsed_seconds")


@dataclass
class TrainTrace:
    """Per-step training record with strictly increasing step indices."""

    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        if self.rows and row.step <= self.rows[-1].step:
            raise ContractViolation(
                f"step {row.step} does not increase past {self.rows[-1].step}"
            )
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def accepted_losses(self) -> list[float]:
        """Loss values of the initial state and every accepted step, in order."""
        return [r.loss for r in self.rows if r.accepted]

    def final_accuracy(self) -> float:
        for r in reversed(self.rows):
            if not math.isnan(r.accuracy):
                return r.accuracy
        return float("nan")

    def to_csv(self, path: str | Path, include_timing: bool = False) -> None:
        """Write the trace; timings are omitted by default so that reruns of
        the same seeded run produce byte-identical files."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([
                    r.step,
                    repr(r.loss),
                    "" if math.isnan(r.accuracy) else repr(r.accuracy),
                    "" if r.accepted is None else int(r.accepted),
                    repr(r.elapsed_seconds) if include_timing else "",
                ])

    @classmethod
    def read_csv(cls, path: str | Path) -> "TrainTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_HEADER:
                raise InputError(f"{path}: unexpected trace header {header}")
            for rec in reader:
                step, loss, acc, accepted, elapsed = rec
                trace.append(TraceRow(
                    int(step),
                    float(loss),
                    float(acc) if acc else float("nan"),
                    None if accepted == "" else bool(int(accepted)),
                    float(elapsed) if elapsed else float("nan"),
                ))
        return trace


def sgd_train(
    model: Model,
    dataset: Dataset,
    config: SgdConfig,
    occluded: Iterable[int] = (),
    rng: np.random.Generator | int = 0,
    eval_data: Dataset | None = None,
) -> tuple[Model, TrainTrace]:
    """Minibatch SGD; returns a trained copy plus the per-batch trace.

    Each epoch reshuffles the occlusion-filtered training set. When
    ``eval_data`` is given, held-out accuracy is recorded on the last row of
    every epoch. A non-finite training loss aborts with a numeric error
    naming the step.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    occ = frozenset(int(c) for c in occluded)
    out = model.copy()
    trace = TrainTrace()
    t0 = time.perf_counter()
    step = 0
    for epoch in range(config.epochs):
        perm_seed = int(rng.integers(np.iinfo(np.int64).max))
        plan = BatchPlan(config.batch_size, seed=perm_seed, occluded=occ)
        last_row_of_epoch = None
        for images, labels in batches(dataset, plan):
            try:
                logits, cache = forward(out, images, mode="train", rng=rng)
            except ContractViolation:
                # diverged parameters surface as non-finite logits
                raise NumericError(
                    f"training became non-finite at step {step + 1}"
                ) from None
            loss = cross_entropy(logits, labels, occ)
            if not math.isfinite(loss):
                raise NumericError(f"training loss became non-finite at step {step + 1}")
            grads = backward(out, cache, labels, occ)
            for p, g in zip(out.params, grads):
                p -= config.learning_rate * g
            step += 1
            last_row_of_epoch = TraceRow(
                step, float(loss), float("nan"), None, time.perf_counter() - t0
            )
            trace.append(last_row_of_epoch)
        if eval_data is not None and last_row_of_epoch is not None:
            _, acc = evaluate(out, eval_data.images, eval_data.labels, occ)
            trace.rows[-1] = last_row_of_epoch._replace(
                accuracy=acc, elapsed_seconds=time.perf_counter() - t0
            )
    return out, trace


def sample_direction(
    dim: int, master_seed: int, generation: int, individual: int
) -> np.ndarray:
    """Unit vector uniform on the sphere, a pure function of its arguments."""
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    g = np.random.default_rng((master_seed, generation, individual))
    v = g.standard_normal(dim)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise NumericError("degenerate zero-norm direction draw")
    return v / norm


FitnessFn = Callable[[np.ndarray], "float | tuple[float, float]"]


def _eval_fitness(fitness: FitnessFn, theta: np.ndarray, step: int) -> tuple[float, float]:
    res = fitness(theta)
    loss, acc = res if isinstance(res, tuple) else (res, float("nan"))
    loss = float(loss)
    if not math.isfinite(loss):
        raise NumericError(f"fitness became non-finite at step {step}")
    return loss, float(acc)


def goea_train(
    model: Model | np.ndarray,
    fitness: FitnessFn,
    config: GoeaConfig,
    on_generation: Callable[[int, float, float], bool] | None = None,
) -> tuple[Model | np.ndarray, TrainTrace]:
    """Fixed-population greedy random search over a flat parameter vector.

    Per generation, ``population`` candidates theta + edit_distance * u are
    scored by ``fitness`` (lower is better). In ``sequential`` mode each
    candidate is compared with the current state and adopted immediately on
    strict improvement; in ``best_of_generation`` mode all candidates score
    against the generation-start state and only the single best is adopted,
    again on strict improvement. Step 0 records the starting state.

    ``fitness`` may return a bare loss or a (loss, accuracy) pair.
    ``on_generation(generation, best_loss, last_accuracy)`` may return True
    to stop early. Returns the same kind it was given (model or vector).
    """
    as_model = isinstance(model, Model)
    theta = flatten(model) if as_model else np.array(model, dtype=np.float64).ravel()
    dim = theta.size
    eps = config.edit_distance
    trace = TrainTrace()
    t0 = time.perf_counter()
    cur_loss, cur_acc = _eval_fitness(fitness, theta, 0)
    trace.append(TraceRow(0, cur_loss, cur_acc, True, time.perf_counter() - t0))
    step = 0
    for gen in range(1, config.generations + 1):
        if config.acceptance == "sequential":
            for ind in range(1, config.population + 1):
                cand = theta + eps * sample_direction(dim, config.master_seed, gen, ind)
                step += 1
                loss, acc = _eval_fitness(fitness, cand, step)
                accepted = loss < cur_loss
                if accepted:
                    theta, cur_loss, cur_acc = cand, loss, acc
                trace.append(TraceRow(step, loss, acc, accepted,
                                      time.perf_counter() - t0))
        else:
            pending: list[TraceRow] = []
            best_ind, best_loss, best_acc = 0, math.inf, float("nan")
            for ind in range(1, config.population + 1):
                cand = theta + eps * sample_direction(dim, config.master_seed, gen, ind)
                step += 1
                loss, acc = _eval_fitness(fitness, cand, step)
                pending.append(TraceRow(step, loss, acc, False,
                                        time.perf_counter() - t0))
                if loss < best_loss:
                    best_ind, best_loss, best_acc = ind, loss, acc
            if best_loss < cur_loss:
                theta = theta + eps * sample_direction(
                    dim, config.master_seed, gen, best_ind
                )
                cur_loss, cur_acc = best_loss, best_acc
                i = best_ind - 1
                pending[i] = pending[i]._replace(accepted=True)
            for row in pending:
                trace.append(row)
        if on_generation is not None and on_generation(gen, cur_loss, cur_acc):
            break
    if as_model:
        return unflatten(theta, model.config), trace
    return theta, trace


def goea_fitness_builder(
    dataset: Dataset,
    occluded: Iterable[int],
    subset_size: int | str,
    seed: int,
    model_config: ModelConfig,
    eval_batch_size: int = 1024,
) -> Callable[[np.ndarray], tuple[float, float]]:
    """Cross-entropy fitness over a frozen evaluation subset.

    The subset is drawn once from the occlusion-filtered dataset with the
    given seed and never redrawn, which is what makes the search's accepted
    losses comparable across steps. ``subset_size`` may be "full".
    ``model_config`` tells the closure how to interpret flat vectors.
    """
    idx = filtered_indices(dataset, frozenset(int(c) for c in occluded))
    if subset_size != "full":
        if not isinstance(subset_size, (int, np.integer)) or subset_size < 1:
            raise ConfigError(f"subset_size must be a positive integer or 'full', "
                              f"got {subset_size!r}")
        if subset_size > idx.size:
            raise InputError(
                f"subset_size {subset_size} exceeds the {idx.size} usable samples"
            )
        pick = np.random.default_rng(seed).choice(idx.size, size=subset_size,
                                                  replace=False)
        idx = idx[np.sort(pick)]
    images = dataset.images[idx]
    labels = dataset.labels[idx]
    occ = frozenset(int(c) for c in occluded)

    def fitness(theta: np.ndarray) -> tuple[float, float]:
        m = unflatten(theta, model_config)
        return evaluate(m, images, labels, occ, batch_size=eval_batch_size)

    return fitness
