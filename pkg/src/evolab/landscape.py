"""Loss-landscape experiments: gradient-angle studies, flatness sweeps,
mutation statistics, update-vector geometry, occlusion transfer, robustness.

Every procedure here is pure given (model snapshot, dataset, seeds) and
returns plain result records; persistence and plotting live in the CLI
layer. Directions that scale with the model use filter-wise weight-norm
scaling; per-layer mutation scales use each layer's weight-entry standard
deviation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .data import Dataset, corrupt_images, filtered_indices
from .errors import InputError
from .mathx import AngleSampleSet, angle_between, ks_two_sample, pairwise_angles
from .nn.model import Model, ModelConfig, flatten, unflatten
from .nn.net import NoiseSpec, batch_gradient, evaluate
from .optim import SgdConfig, sgd_train

DEFAULT_GRID = np.linspace(-1.0, 1.0, 41)
DEFAULT_N_LIST = (1, 4, 16, 64, 256)
TRANSFER_OCCLUSION = frozenset({8, 9})


# --------------------------------------------------------------------------
# result records


@dataclass
class SweepResult:
    """Loss/accuracy profiles over a perturbation grid, one row per replica."""

    grid: np.ndarray  # (T,)
    losses: np.ndarray  # (R, T)
    accuracies: np.ndarray  # (R, T)
    base_loss: float
    base_accuracy: float

    def degradation_at(self, t: float) -> float:
        """Median (over replicas) loss increase at the grid point nearest t."""
        j = int(np.argmin(np.abs(self.grid - t)))
        return float(np.median(self.losses[:, j]) - self.base_loss)


class MutationRecord(NamedTuple):
    d_loss: float
    d_accuracy: float
    beneficial: bool


@dataclass
class MutationSweepResult:
    records: list[MutationRecord]
    context: str  # random_init | transfer_start | optimum

    def beneficial_fraction(self) -> float:
        return sum(r.beneficial for r in self.records) / len(self.records)

    def neutral_fraction(self) -> float:
        return sum(r.d_loss == 0.0 for r in self.records) / len(self.records)


class ValidVectorAngles(NamedTuple):
    beneficial: AngleSampleSet
    all: AngleSampleSet
    ks: tuple[float, float] | None
    status: str  # "ok" | reason the KS comparison was skipped


class LimitEquivalenceResult(NamedTuple):
    mean_angles: dict[int, float]  # N -> mean angle(best direction, -gradient)
    skipped_trials: int


class PhaseRow(NamedTuple):
    phase: str  # occluded_training | reveal | fine_tune
    epoch: int
    loss: float
    acc_known: float  # samples whose label was never occluded
    acc_revealed: float  # samples whose label was occluded in phase 1
    acc_all: float


@dataclass
class TransferPhaseTrace:
    occluded: frozenset[int]
    rows: list[PhaseRow] = field(default_factory=list)
    phase1_params: np.ndarray | None = None
    reveal_params: np.ndarray | None = None
    final_model: Model | None = None
    sweeps: list[SweepResult] = field(default_factory=list)


class RobustnessResult(NamedTuple):
    accuracies: dict[tuple[str, float], float]  # (mode, fraction) -> mean acc
    baseline: float


# --------------------------------------------------------------------------
# directions


def filter_normalized_direction(model: Model, rng: np.random.Generator) -> np.ndarray:
    """Gaussian direction rescaled filter-by-filter to the model's own norms.

    Convolution tensors are scaled per output channel, linear weights per
    output row, biases as whole vectors. A zero-norm model slice leaves the
    raw Gaussian slice in place and records a warning.
    """
    pieces = []
    for p in model.params:
        g = rng.standard_normal(p.shape)
        if p.ndim == 1:
            slices = [(slice(None),)]
        else:
            slices = [(o,) for o in range(p.shape[0])]
        for s in slices:
            ref = float(np.linalg.norm(p[s]))
            cur = float(np.linalg.norm(g[s]))
            if ref == 0.0:
                warnings.warn(
                    "zero-norm model slice; leaving direction slice unscaled",
                    RuntimeWarning,
                    stacklevel=2,
                )
            elif cur > 0.0:
                g[s] *= ref / cur
        pieces.append(g)
    return flatten(pieces)


def _with_flat(model: Model, flat: np.ndarray) -> Model:
    return unflatten(flat, model.config)


def _subset_eval(
    model: Model, dataset: Dataset, occluded: Iterable[int]
) -> tuple[float, float]:
    return evaluate(model, dataset.images, dataset.labels, occluded)


# --------------------------------------------------------------------------
# experiments


def flatness_sweep(
    model: Model,
    dataset: Dataset,
    occluded: Iterable[int] = (),
    grid: Sequence[float] | np.ndarray = DEFAULT_GRID,
    sampling_replicas: int = 5,
    rng: np.random.Generator | int = 0,
    directions: Sequence[np.ndarray] | None = None,
) -> SweepResult:
    """Loss/accuracy profiles along filter-normalized random directions.

    The grid must be symmetric around 0 and contain 0, so every replica's
    profile pins exactly to the unperturbed model there. ``directions`` may
    inject explicit flat vectors (replacing the random draws) for tests.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if 0.0 not in grid or not np.allclose(np.sort(grid), np.sort(-grid)):
        raise InputError("grid must be symmetric around 0 and contain 0")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if directions is None:
        directions = [
            filter_normalized_direction(model, rng) for _ in range(sampling_replicas)
        ]
    theta = flatten(model)
    base_loss, base_acc = _subset_eval(model, dataset, occluded)
    losses = np.empty((len(directions), grid.size))
    accs = np.empty_like(losses)
    for r, d in enumerate(directions):
        for j, t in enumerate(grid):
            if t == 0.0:
                losses[r, j], accs[r, j] = base_loss, base_acc
                continue
            m = _with_flat(model, theta + t * d)
            losses[r, j], accs[r, j] = _subset_eval(m, dataset, occluded)
    return SweepResult(grid, losses, accs, base_loss, base_acc)


def minibatch_angle_experiment(
    model: Model,
    dataset: Dataset,
    batch_sizes: Sequence[int] = (4, 16, 64, 256, 1024),
    pairs_per_size: int = 45,
    rng: np.random.Generator | int = 0,
    occluded: Iterable[int] = (),
) -> dict[int, AngleSampleSet]:
    """Pairwise angles between gradients of disjoint random minibatches.

    The model is never updated. For each batch size, enough disjoint batches
    are drawn that the number of unordered pairs reaches ``pairs_per_size``.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    occ = frozenset(int(c) for c in occluded)
    idx = filtered_indices(dataset, occ)
    out: dict[int, AngleSampleSet] = {}
    for b in batch_sizes:
        k = 2
        while k * (k - 1) // 2 < pairs_per_size:
            k += 1
        if k * b > idx.size:
            raise InputError(
                f"need {k} disjoint batches of {b}, dataset offers {idx.size} samples"
            )
        chosen = rng.choice(idx.size, size=k * b, replace=False)
        grads = np.stack([
            batch_gradient(
                model,
                dataset.images[idx[chosen[i * b : (i + 1) * b]]],
                dataset.labels[idx[chosen[i * b : (i + 1) * b]]],
                occ,
            )
            for i in range(k)
        ])
        angles = pairwise_angles(grads)[:pairs_per_size]
        out[int(b)] = AngleSampleSet(angles, label=f"B={b}")
    return out


def _layer_scales(model: Model) -> list[float]:
    """One mutation scale per parameter tensor: its entries' std deviation."""
    return [float(np.std(p)) for p in model.params]


def mutation_sweep(
    model: Model,
    dataset: Dataset,
    occluded: Iterable[int] = (),
    samples: int = 200,
    rng: np.random.Generator | int = 0,
    scale: float = 1.0,
    context: str = "random_init",
) -> MutationSweepResult:
    """Classify random per-layer-scaled mutations as beneficial or not.

    Each sample adds ``scale`` times a Gaussian perturbation whose per-layer
    standard deviation matches that layer's weight-entry std; the loss delta
    against the unperturbed model on the given dataset decides the flag.
    """
    if samples < 100:
        raise InputError(f"samples must be >= 100, got {samples}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    occ = frozenset(int(c) for c in occluded)
    base_loss, base_acc = _subset_eval(model, dataset, occ)
    scales = _layer_scales(model)
    records = []
    for _ in range(samples):
        perturbed = [
            p + scale * s * rng.standard_normal(p.shape)
            for p, s in zip(model.params, scales)
        ]
        m = Model(model.config, perturbed)
        loss, acc = _subset_eval(m, dataset, occ)
        d_loss = loss - base_loss
        records.append(MutationRecord(d_loss, acc - base_acc, d_loss < 0.0))
    return MutationSweepResult(records, context)


def valid_vector_angles(
    model: Model,
    dataset: Dataset,
    occluded: Iterable[int] = (),
    n_samples: int = 100,
    eps: float = 0.01,
    rng: np.random.Generator | int = 0,
    directions: Sequence[np.ndarray] | None = None,
) -> ValidVectorAngles:
    """Geometry of loss-improving unit directions versus all directions.

    Samples unit directions, flags each beneficial iff it strictly lowers
    the loss at step ``eps``, then compares the within-set pairwise-angle
    distributions with a two-sample KS test. ``directions`` may inject
    explicit vectors for degenerate checks.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    occ = frozenset(int(c) for c in occluded)
    theta = flatten(model)
    if directions is None:
        if n_samples < 2:
            raise InputError(f"n_samples must be >= 2, got {n_samples}")
        draws = rng.standard_normal((n_samples, theta.size))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
    else:
        draws = np.asarray(list(directions), dtype=np.float64)
    base_loss, _ = _subset_eval(model, dataset, occ)
    flags = np.empty(draws.shape[0], dtype=bool)
    for i, d in enumerate(draws):
        loss, _ = _subset_eval(_with_flat(model, theta + eps * d), dataset, occ)
        flags[i] = loss < base_loss
    all_set = AngleSampleSet(pairwise_angles(draws), label="all")
    n_ben = int(flags.sum())
    if n_ben >= 2:
        ben_set = AngleSampleSet(pairwise_angles(draws[flags]), label="beneficial")
    else:
        ben_set = AngleSampleSet(np.empty(0), label="beneficial")
    # the KS test needs two observations per sample, i.e. two pairwise
    # angles per set, which takes three vectors — not just two
    if ben_set.angles.size >= 2 and all_set.angles.size >= 2:
        ks = ks_two_sample(ben_set.angles, all_set.angles)
        status = "ok"
    else:
        ks = None
        status = (f"only {n_ben} beneficial vector(s) "
                  f"({ben_set.angles.size} pairwise angle(s)); KS skipped")
    return ValidVectorAngles(ben_set, all_set, ks, status)


def limit_equivalence_curve(
    theta: np.ndarray,
    loss_fn: Callable[[np.ndarray], float],
    gradient: np.ndarray,
    n_list: Sequence[int] = DEFAULT_N_LIST,
    eps: float = 1e-3,
    trials: int = 20,
    rng: np.random.Generator | int = 0,
) -> LimitEquivalenceResult:
    """Mean angle between the best-of-N sampled direction and -gradient.

    Per trial, max(n_list) unit directions are drawn once; for each N the
    direction with the lowest loss at theta + eps*d among the first N is
    selected. A zero gradient skips the trial.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    n_list = sorted(int(n) for n in n_list)
    if not n_list or n_list[0] < 1:
        raise InputError("n_list must contain positive integers")
    gnorm = float(np.linalg.norm(gradient))
    if gnorm == 0.0:
        return LimitEquivalenceResult({n: float("nan") for n in n_list}, trials)
    descent = -gradient
    sums = {n: 0.0 for n in n_list}
    for _ in range(trials):
        draws = rng.standard_normal((n_list[-1], theta.size))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
        losses = np.array([loss_fn(theta + eps * d) for d in draws])
        for n in n_list:
            best = int(np.argmin(losses[:n]))
            sums[n] += angle_between(draws[best], descent)
    return LimitEquivalenceResult({n: sums[n] / trials for n in n_list}, 0)


def limit_equivalence(
    model: Model,
    dataset: Dataset,
    n_list: Sequence[int] = DEFAULT_N_LIST,
    eps: float | None = None,
    trials: int = 20,
    rng: np.random.Generator | int = 0,
    occluded: Iterable[int] = (),
) -> LimitEquivalenceResult:
    """Model-level wrapper over :func:`limit_equivalence_curve`.

    The gradient and all candidate losses use the same frozen dataset, and
    ``eps`` defaults to 1e-3 of the flattened parameter norm.
    """
    occ = frozenset(int(c) for c in occluded)
    theta = flatten(model)
    if eps is None:
        eps = 1e-3 * float(np.linalg.norm(theta))
    g = batch_gradient(model, dataset.images, dataset.labels, occ)

    def loss_fn(flat: np.ndarray) -> float:
        loss, _ = _subset_eval(_with_flat(model, flat), dataset, occ)
        return loss

    return limit_equivalence_curve(theta, loss_fn, g, n_list, eps, trials, rng)


def _group_metrics(
    model: Model,
    test: Dataset,
    occluded: frozenset[int],
    mask: frozenset[int],
) -> tuple[float, float, float, float]:
    """(loss, acc_known, acc_revealed, acc_all) with logits masked by ``mask``."""
    revealed = np.isin(test.labels, sorted(occluded))
    loss, acc_all = evaluate(model, test.images, test.labels, mask)
    _, acc_known = evaluate(
        model, test.images[~revealed], test.labels[~revealed], mask
    )
    if revealed.any():
        _, acc_revealed = evaluate(
            model, test.images[revealed], test.labels[revealed], mask
        )
    else:
        acc_revealed = float("nan")
    return loss, acc_known, acc_revealed, acc_all


def transfer_run(
    model_config: ModelConfig,
    sgd_config: SgdConfig,
    train: Dataset,
    test: Dataset,
    occluded: Iterable[int] = TRANSFER_OCCLUSION,
    fine_tune_epochs: int = 5,
    flatness_every_epoch: bool = False,
    rng: np.random.Generator | int = 0,
    init_seed: int = 0,
    sweep_data: Dataset | None = None,
) -> TransferPhaseTrace:
    """Occluded training, reveal, fine-tune — the three-phase transfer study.

    Phase 1 trains with the occlusion applied to batches and to the loss;
    its per-epoch metrics mask the occluded logits (so the all-class
    accuracy has a hard ceiling at the known-class share). The reveal row
    re-scores the same parameters with the occlusion lifted. Fine-tuning
    then continues on all classes. Optional flatness sweeps run after each
    fine-tune epoch on ``sweep_data`` (defaults to the test set).
    """
    from .nn.model import build_model  # local to avoid import cycle noise

    occ = frozenset(int(c) for c in occluded)
    if not occ:
        raise InputError("transfer needs a nonempty occlusion set")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    trace = TransferPhaseTrace(occluded=occ)
    model = build_model(model_config, init_seed)

    per_epoch = SgdConfig(sgd_config.learning_rate, sgd_config.batch_size, 1)
    for epoch in range(1, sgd_config.epochs + 1):
        model, _ = sgd_train(model, train, per_epoch, occ, rng)
        loss, a_known, a_rev, a_all = _group_metrics(model, test, occ, mask=occ)
        trace.rows.append(
            PhaseRow("occluded_training", epoch, loss, a_known, a_rev, a_all)
        )
    trace.phase1_params = flatten(model)

    loss, a_known, a_rev, a_all = _group_metrics(model, test, occ, mask=frozenset())
    trace.rows.append(PhaseRow("reveal", 0, loss, a_known, a_rev, a_all))
    trace.reveal_params = flatten(model)

    sweep_on = sweep_data if sweep_data is not None else test
    for epoch in range(1, fine_tune_epochs + 1):
        model, _ = sgd_train(model, train, per_epoch, frozenset(), rng)
        loss, a_known, a_rev, a_all = _group_metrics(
            model, test, occ, mask=frozenset()
        )
        trace.rows.append(PhaseRow("fine_tune", epoch, loss, a_known, a_rev, a_all))
        if flatness_every_epoch:
            trace.sweeps.append(
                flatness_sweep(
                    model, sweep_on,
                    rng=np.random.default_rng(int(rng.integers(2**63))),
                )
            )
    trace.final_model = model
    return trace


def robustness_eval(
    model: Model,
    dataset: Dataset,
    occluded: Iterable[int] = (),
    fractions: Sequence[float] = (0.1, 0.25, 0.5),
    rng: np.random.Generator | int = 0,
    repeats: int = 3,
) -> RobustnessResult:
    """Accuracy under pixel zeroing and first-block feature zeroing.

    Each (mode, fraction) cell averages eval-mode accuracy over ``repeats``
    independent corruption seeds; fraction 0 is the exact uncorrupted
    baseline.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if repeats < 1:
        raise InputError(f"repeats must be >= 1, got {repeats}")
    occ = frozenset(int(c) for c in occluded)
    _, baseline = _subset_eval(model, dataset, occ)
    table: dict[tuple[str, float], float] = {}
    for f in fractions:
        if not (0.0 <= f <= 1.0):
            raise InputError(f"fraction must be in [0, 1], got {f}")
        for mode in ("image", "feature"):
            if f == 0.0:
                table[(mode, 0.0)] = baseline
                continue
            accs = []
            for _ in range(repeats):
                sub = np.random.default_rng(int(rng.integers(2**63)))
                if mode == "image":
                    imgs = corrupt_images(dataset.images, f, sub)
                    _, acc = evaluate(model, imgs, dataset.labels, occ)
                else:
                    _, acc = evaluate(
                        model, dataset.images, dataset.labels, occ,
                        noise=NoiseSpec(feature_fraction=f), rng=sub,
                    )
                accs.append(acc)
            table[(mode, float(f))] = float(np.mean(accs))
    return RobustnessResult(table, baseline)


_ARCHETYPES = {
    "robust_wide": (dict(latent_maps=16, linear_width=48, dropout=0.25,
                         input_dropout=0.1), 4),
    "brittle_narrow": (dict(latent_maps=4, linear_width=12, dropout=0.0,
                            input_dropout=0.0), 128),
    "brittle_wide": (dict(latent_maps=16, linear_width=48, dropout=0.0,
                          input_dropout=0.0), 128),
}


def archetype(name: str, epochs: int = 10) -> tuple[ModelConfig, SgdConfig]:
    """Named hyperparameter bundles for the three reference models."""
    try:
        cfg_kwargs, batch = _ARCHETYPES[name]
    except KeyError:
        raise InputError(
            f"unknown archetype {name!r}; choose from {sorted(_ARCHETYPES)}"
        ) from None
    return ModelConfig(**cfg_kwargs), SgdConfig(0.002, batch, epochs)
