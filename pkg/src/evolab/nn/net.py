"""Forward pass, restricted-softmax cross-entropy, exact backward pass.

The forward pass is a pure function of (model, batch, mode, noise, rng) and
returns a cache that the backward pass consumes to produce the exact
gradient of the mean cross-entropy, reusing the forward's dropout and
corruption masks.

Class occlusion restricts the softmax to the non-occluded classes: occluded
logits take part in neither the numerator nor the normalizer, and occluded
classes can never be predicted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ContractViolation, InputError
from . import ops
from .model import IMAGE_SIDE, N_CLASSES, Model, ModelConfig, flatten


@dataclass(frozen=True)
class NoiseSpec:
    """Optional corruption applied during the forward pass.

    ``input_fraction`` zeroes that fraction of pixels per image;
    ``feature_fraction`` zeroes that fraction of the first block's output
    activations per image, without rescaling. Both default to 0 (off).
    """

    input_fraction: float = 0.0
    feature_fraction: float = 0.0

    def __post_init__(self) -> None:
        for name in ("input_fraction", "feature_fraction"):
            f = getattr(self, name)
            if not (0.0 <= f <= 1.0):
                raise InputError(f"{name} must be in [0, 1], got {f}")

    @property
    def active(self) -> bool:
        return self.input_fraction > 0.0 or self.feature_fraction > 0.0


class ForwardCache:
    """Intermediates retained by :func:`forward` for the backward pass.

    ``conv_cols`` holds the forward's gathered window matrices when the batch
    is small enough (see ``COLS_CACHE_MAX_BYTES``) so the backward pass can
    skip regathering them; entries are None past the memory cap, in which
    case the backward rebuilds from ``conv_inputs``.
    """

    __slots__ = (
        "config", "mode", "n", "x0", "relu_masks", "pool_idx", "pool_shapes",
        "drop_masks", "corrupt_mult", "conv_inputs", "conv_cols", "fc_inputs",
    )

    def __init__(self, config: ModelConfig, mode: str, n: int):
        self.config = config
        self.mode = mode
        self.n = n
        self.relu_masks: list[np.ndarray] = []
        self.pool_idx: list[np.ndarray] = []
        self.pool_shapes: list[tuple] = []
        self.drop_masks: dict[int, np.ndarray] = {}
        self.corrupt_mult: np.ndarray | None = None
        self.conv_inputs: list[np.ndarray] = []
        self.conv_cols: list[np.ndarray | None] = []
        self.fc_inputs: list[np.ndarray] = []


# past this many bytes of window matrices, the cache stops holding them and
# the backward pass regathers instead (keeps huge-batch gradients in RAM)
COLS_CACHE_MAX_BYTES = 256 * 1024 * 1024


# (weight index, bias index, pad) for the four convolution stages
_CONV_STAGES = ((0, 1, 2), (2, 3, 2), (4, 5, 1), (6, 7, 1))


def forward(
    model: Model,
    batch: np.ndarray,
    mode: str = "eval",
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network; returns (logits, cache).

    ``mode`` is "train" (dropout active, inverted scaling) or "eval"
    (dropout off). Corruption noise applies in either mode when the spec
    carries a nonzero fraction. ``rng`` is required whenever dropout or
    corruption actually draws randomness.
    """
    if mode not in ("train", "eval"):
        raise InputError(f"mode must be 'train' or 'eval', got {mode!r}")
    noise = noise or NoiseSpec()
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4 or x.shape[1:] != (1, IMAGE_SIDE, IMAGE_SIDE):
        raise InputError(
            f"batch must have shape (B, 1, {IMAGE_SIDE}, {IMAGE_SIDE}), got {x.shape}"
        )
    cfg = model.config
    train = mode == "train"
    needs_rng = noise.active or (
        train and (cfg.dropout > 0.0 or cfg.input_dropout > 0.0)
    )
    if needs_rng and rng is None:
        raise InputError("dropout or corruption requested but no rng given")

    cache = ForwardCache(cfg, mode, x.shape[0])
    p = model.params

    if noise.input_fraction > 0.0:
        mult = ops.corrupt_positions(
            np.ones_like(x), noise.input_fraction, rng
        )
        x = x * mult
    if train and cfg.input_dropout > 0.0:
        m = ops.dropout_mask(x.shape, cfg.input_dropout, rng)
        x = x * m
        cache.drop_masks[-1] = m

    h = x
    cols_budget = COLS_CACHE_MAX_BYTES
    for stage, (wi, bi, pad) in enumerate(_CONV_STAGES):
        cache.conv_inputs.append(h)
        z, cols = ops.conv2d(h, p[wi], p[bi], pad, return_cols=True)
        if cols.nbytes <= cols_budget:
            cols_budget -= cols.nbytes
            cache.conv_cols.append(cols)
        else:
            cache.conv_cols.append(None)
        del cols
        mask = z > 0.0
        cache.relu_masks.append(mask)
        h = z * mask
        if stage < 2:
            cache.pool_shapes.append(h.shape)
            h, idx = ops.maxpool2(h)
            cache.pool_idx.append(idx)
        if train and cfg.dropout > 0.0:
            m = ops.dropout_mask(h.shape, cfg.dropout, rng)
            h = h * m
            cache.drop_masks[stage] = m
        if stage == 0 and noise.feature_fraction > 0.0:
            mult = ops.corrupt_positions(
                np.ones_like(h), noise.feature_fraction, rng
            )
            h = h * mult
            cache.corrupt_mult = mult

    flat = h.reshape(h.shape[0], -1)
    cache.fc_inputs.append(flat)
    z5 = flat @ p[8].T + p[9]
    mask5 = z5 > 0.0
    cache.relu_masks.append(mask5)
    h5 = z5 * mask5
    if train and cfg.dropout > 0.0:
        m = ops.dropout_mask(h5.shape, cfg.dropout, rng)
        h5 = h5 * m
        cache.drop_masks[4] = m
    cache.fc_inputs.append(h5)
    logits = h5 @ p[10].T + p[11]
    if not np.all(np.isfinite(logits)):
        raise ContractViolation("forward produced non-finite logits")
    return logits, cache


def _keep_classes(occluded: Iterable[int]) -> np.ndarray:
    occ = set(int(c) for c in occluded)
    if not occ <= set(range(N_CLASSES)):
        raise InputError(f"occluded classes must be within 0..9, got {sorted(occ)}")
    keep = np.array([c for c in range(N_CLASSES) if c not in occ], dtype=np.intp)
    if keep.size == 0:
        raise InputError("cannot occlude every class")
    return keep


def _restricted_log_softmax(
    logits: np.ndarray, keep: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Log-softmax over the kept columns; returns (log-probs, kept logits)."""
    kl = logits[:, keep]
    m = kl.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(kl - m).sum(axis=1, keepdims=True))
    return kl - lse, kl


def cross_entropy(
    logits: np.ndarray,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
) -> float:
    """Mean cross-entropy with the softmax restricted to non-occluded classes.

    Training batches must not contain occluded labels; passing one is a
    contract violation, not a soft error.
    """
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or logits.shape[1] != N_CLASSES:
        raise InputError(f"logits must be (B, {N_CLASSES}), got {logits.shape}")
    if y.shape != (logits.shape[0],):
        raise InputError("labels length must match the batch size")
    keep = _keep_classes(occluded)
    col = np.full(N_CLASSES, -1, dtype=np.intp)
    col[keep] = np.arange(keep.size)
    if np.any(col[y] < 0):
        raise ContractViolation("batch contains a label from an occluded class")
    logp, _ = _restricted_log_softmax(logits, keep)
    return float(-logp[np.arange(y.size), col[y]].mean())


def cross_entropy_grad(
    logits: np.ndarray,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
) -> np.ndarray:
    """Gradient of :func:`cross_entropy` w.r.t. the logits (full 10 columns,
    zeros at occluded ones)."""
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    keep = _keep_classes(occluded)
    col = np.full(N_CLASSES, -1, dtype=np.intp)
    col[keep] = np.arange(keep.size)
    if np.any(col[y] < 0):
        raise ContractViolation("batch contains a label from an occluded class")
    logp, _ = _restricted_log_softmax(logits, keep)
    g = np.exp(logp)
    g[np.arange(y.size), col[y]] -= 1.0
    g /= y.size
    out = np.zeros_like(logits)
    out[:, keep] = g
    return out


def accuracy(
    logits: np.ndarray,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
) -> float:
    """Fraction of samples whose restricted argmax matches the true label.

    The argmax runs over non-occluded classes only, so any sample whose true
    label is occluded counts as wrong.
    """
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.intp)
    keep = _keep_classes(occluded)
    pred = keep[np.argmax(logits[:, keep], axis=1)]
    return float(np.mean(pred == y))


def backward(
    model: Model,
    cache: ForwardCache,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
) -> list[np.ndarray]:
    """Exact gradient of cross_entropy(forward(...)) w.r.t. every parameter.

    Reuses the dropout/corruption masks recorded in ``cache``; the result is
    shape-congruent with ``model.params``.
    """
    if cache.config != model.config:
        raise ContractViolation("cache was produced for a different architecture")
    y = np.asarray(labels, dtype=np.intp)
    if y.shape != (cache.n,):
        raise ContractViolation(
            f"cache holds a batch of {cache.n}, got {y.size} labels"
        )
    p = model.params
    train = cache.mode == "train"
    cfg = model.config

    # output layer
    h5 = cache.fc_inputs[1]
    logits = h5 @ p[10].T + p[11]
    dlogits = cross_entropy_grad(logits, y, occluded)
    grads: list[np.ndarray | None] = [None] * len(p)
    grads[10] = dlogits.T @ h5
    grads[11] = dlogits.sum(axis=0)
    dh5 = dlogits @ p[10]

    if train and cfg.dropout > 0.0:
        dh5 = dh5 * cache.drop_masks[4]
    dz5 = dh5 * cache.relu_masks[4]
    flat = cache.fc_inputs[0]
    grads[8] = dz5.T @ flat
    grads[9] = dz5.sum(axis=0)
    dflat = dz5 @ p[8]
    dh = dflat.reshape(
        cache.n, cfg.channels[3], IMAGE_SIDE // 4, IMAGE_SIDE // 4
    )

    for stage in (3, 2, 1, 0):
        wi, bi, pad = _CONV_STAGES[stage]
        if stage == 0 and cache.corrupt_mult is not None:
            dh = dh * cache.corrupt_mult
        if train and cfg.dropout > 0.0:
            dh = dh * cache.drop_masks[stage]
        if stage < 2:
            dh = ops.maxpool2_backward(
                dh, cache.pool_idx[stage], cache.pool_shapes[stage]
            )
        dz = dh * cache.relu_masks[stage]
        dx, dw, db = ops.conv2d_backward(
            dz, cache.conv_inputs[stage], p[wi], pad,
            cols=cache.conv_cols[stage], need_dx=stage > 0,
        )
        grads[wi] = dw
        grads[bi] = db
        dh = dx

    return [g for g in grads]  # type: ignore[misc]


def evaluate(
    model: Model,
    images: np.ndarray,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    batch_size: int = 512,
) -> tuple[float, float]:
    """Eval-mode (loss, accuracy) over a whole image set, in fixed chunks.

    Accuracy covers every sample (occluded-label samples are forced wrong);
    the loss is averaged over samples whose label is not occluded, and is
    NaN when there are none.
    """
    y = np.asarray(labels, dtype=np.intp)
    keep = _keep_classes(occluded)
    valid = np.isin(y, keep)
    n = y.size
    loss_sum = 0.0
    n_valid = 0
    n_correct = 0
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        logits, _ = forward(model, images[lo:hi], mode="eval", noise=noise, rng=rng)
        yb = y[lo:hi]
        vb = valid[lo:hi]
        if vb.any():
            loss_sum += cross_entropy(logits[vb], yb[vb], occluded) * int(vb.sum())
            n_valid += int(vb.sum())
        pred = keep[np.argmax(logits[:, keep], axis=1)]
        n_correct += int(np.sum(pred == yb))
    loss = loss_sum / n_valid if n_valid else float("nan")
    return loss, n_correct / n


def batch_gradient(
    model: Model,
    images: np.ndarray,
    labels: Sequence[int],
    occluded: Iterable[int] = (),
) -> np.ndarray:
    """Flattened eval-mode gradient of the mean loss on one batch."""
    logits, cache = forward(model, images, mode="eval")
    del logits
    return flatten(backward(model, cache, labels, occluded))
