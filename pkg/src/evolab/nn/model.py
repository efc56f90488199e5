"""ConvNet architecture: configuration, construction, parameter plumbing.

The network is the fixed family

    784-[LM.C5-P2]-[2LM.C5-P2]-[LM.C3]-[(LM/2).C3]-[(49*LM/2).L.LW]-[LW.L.10]-10

where LM is the number of latent maps in the first convolution and LW the
hidden linear width. 5x5 convolutions use padding 2 and 3x3 use padding 1,
all with stride 1, so spatial size only changes at the two 2x2 max-pools.
With the defaults (LM=8, LW=24) the network has exactly 9854 parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError, InputError

IMAGE_SIDE = 28
N_CLASSES = 10
POOLED_SIDE = IMAGE_SIDE // 4  # after the two 2x2 max-pools


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and regularization knobs.

    ``latent_maps`` must be even and >= 2: the four convolution stages use
    the channel ratio LM : 2*LM : LM : LM/2.
    """

    latent_maps: int = 8
    linear_width: int = 24
    dropout: float = 0.1
    input_dropout: float = 0.1

    def __post_init__(self) -> None:
        lm, lw = self.latent_maps, self.linear_width
        if lm < 2 or lm % 2 != 0:
            raise ConfigError(f"latent_maps must be even and >= 2, got {lm}")
        if lw < 1:
            raise ConfigError(f"linear_width must be >= 1, got {lw}")
        for name in ("dropout", "input_dropout"):
            p = getattr(self, name)
            if not (0.0 <= p < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {p}")

    @property
    def channels(self) -> tuple[int, int, int, int]:
        lm = self.latent_maps
        return (lm, 2 * lm, lm, lm // 2)

    @property
    def feature_dim(self) -> int:
        return POOLED_SIDE * POOLED_SIDE * self.channels[3]


class LayerSpec(NamedTuple):
    name: str
    shape: tuple[int, ...]
    kind: str  # "conv_w" | "conv_b" | "fc_w" | "fc_b"
    fan_in: int


def layer_specs(config: ModelConfig) -> list[LayerSpec]:
    """Ordered parameter tensors of the architecture (weights then bias)."""
    c1, c2, c3, c4 = config.channels
    lw = config.linear_width
    feat = config.feature_dim
    return [
        LayerSpec("conv1_w", (c1, 1, 5, 5), "conv_w", 25),
        LayerSpec("conv1_b", (c1,), "conv_b", 25),
        LayerSpec("conv2_w", (c2, c1, 5, 5), "conv_w", c1 * 25),
        LayerSpec("conv2_b", (c2,), "conv_b", c1 * 25),
        LayerSpec("conv3_w", (c3, c2, 3, 3), "conv_w", c2 * 9),
        LayerSpec("conv3_b", (c3,), "conv_b", c2 * 9),
        LayerSpec("conv4_w", (c4, c3, 3, 3), "conv_w", c3 * 9),
        LayerSpec("conv4_b", (c4,), "conv_b", c3 * 9),
        LayerSpec("fc1_w", (lw, feat), "fc_w", feat),
        LayerSpec("fc1_b", (lw,), "fc_b", feat),
        LayerSpec("fc2_w", (N_CLASSES, lw), "fc_w", lw),
        LayerSpec("fc2_b", (N_CLASSES,), "fc_b", lw),
    ]


def param_count(config: ModelConfig) -> int:
    """Total trainable parameter count of the architecture."""
    return sum(int(np.prod(spec.shape)) for spec in layer_specs(config))


@dataclass
class Model:
    """Parameter tensors plus the config that shaped them."""

    config: ModelConfig
    params: list[np.ndarray]

    def copy(self) -> "Model":
        return Model(self.config, [p.copy() for p in self.params])

    def n_params(self) -> int:
        return sum(p.size for p in self.params)


# Gain on the fan-in-scaled uniform init. A bare 1/sqrt(fan_in) start keeps
# logits so close to zero that early gradients vanish and the first epochs
# stall; this gain leaves the start symmetric (near-uniform logits) while
# giving the loss a usable slope from step one.
INIT_GAIN = 1.35


def build_model(config: ModelConfig, seed: int) -> Model:
    """Construct a model with seeded fan-in-scaled uniform weights.

    Weights are uniform on ±INIT_GAIN/sqrt(fan_in), biases zero, so a
    freshly built model emits near-uniform logits but trains without a
    long warm-up plateau.
    """
    rng = np.random.default_rng(seed)
    params: list[np.ndarray] = []
    for spec in layer_specs(config):
        if spec.kind.endswith("_b"):
            params.append(np.zeros(spec.shape, dtype=np.float64))
        else:
            bound = INIT_GAIN / np.sqrt(spec.fan_in)
            params.append(rng.uniform(-bound, bound, size=spec.shape))
    return Model(config=config, params=params)


class FlatSlice(NamedTuple):
    name: str
    offset: int
    length: int
    shape: tuple[int, ...]


def flat_layout(config: ModelConfig) -> list[FlatSlice]:
    """Deterministic layout of the flattened parameter vector."""
    out: list[FlatSlice] = []
    offset = 0
    for spec in layer_specs(config):
        length = int(np.prod(spec.shape))
        out.append(FlatSlice(spec.name, offset, length, spec.shape))
        offset += length
    return out


def flatten(model_or_params: Model | list[np.ndarray]) -> np.ndarray:
    """Concatenate parameter tensors into one float64 vector.

    Layer order then row-major within each layer; the exact inverse of
    :func:`unflatten`.
    """
    params = (
        model_or_params.params
        if isinstance(model_or_params, Model)
        else model_or_params
    )
    return np.concatenate([np.asarray(p, dtype=np.float64).ravel() for p in params])


def unflatten(flat: np.ndarray, config: ModelConfig) -> Model:
    """Rebuild a model from a flat parameter vector."""
    flat = np.asarray(flat, dtype=np.float64).ravel()
    expected = param_count(config)
    if flat.size != expected:
        raise InputError(
            f"flat vector has {flat.size} entries, architecture needs {expected}"
        )
    params = []
    for piece in flat_layout(config):
        chunk = flat[piece.offset : piece.offset + piece.length]
        params.append(chunk.reshape(piece.shape).copy())
    return Model(config=config, params=params)
