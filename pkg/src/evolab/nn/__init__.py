"""Minimal ConvNet engine: architecture, forward pass, exact backprop."""

from .model import (
    LayerSpec,
    Model,
    ModelConfig,
    build_model,
    flat_layout,
    flatten,
    layer_specs,
    param_count,
    unflatten,
)
from .net import (
    NoiseSpec,
    accuracy,
    backward,
    batch_gradient,
    cross_entropy,
    cross_entropy_grad,
    evaluate,
    forward,
)

__all__ = [
    "LayerSpec",
    "Model",
    "ModelConfig",
    "NoiseSpec",
    "accuracy",
    "backward",
    "batch_gradient",
    "build_model",
    "cross_entropy",
    "cross_entropy_grad",
    "evaluate",
    "flat_layout",
    "flatten",
    "forward",
    "layer_specs",
    "param_count",
    "unflatten",
]
