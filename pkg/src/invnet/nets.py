"""Dense feed-forward networks built on the autodiff tape."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import Rng

ACTIVATIONS = ("identity", "relu", "silu")


@dataclass(frozen=True)
class DenseNetSpec:
    """MLP shape: ``width`` neurons in each of ``depth`` hidden layers.

    The activation applies to hidden layers only; the output layer is affine.
    """

    in_dim: int
    width: int
    depth: int
    activation: str
    out_dim: int

    def __post_init__(self):
        if self.width < 1 or self.depth < 0:
            raise ValueError("DenseNetSpec needs width >= 1 and depth >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("DenseNetSpec needs positive in/out dims")

    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.in_dim] + [self.width] * self.depth + [self.out_dim]
        return list(zip(dims[:-1], dims[1:]))


def _xavier_uniform(rng: Rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class DenseNet:
    """Weights plus forward pass for a DenseNetSpec.

    ``zero_last=True`` zeroes the output layer so the net starts as the zero
    map (used by coupling subnets so flows start at the identity).
    """

    def __init__(self, spec: DenseNetSpec, rng: Rng, zero_last: bool = False):
        self.spec = spec
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        self.call_count = 0
        pairs = spec.layer_dims()
        for li, (fi, fo) in enumerate(pairs):
            last = li == len(pairs) - 1
            w = np.zeros((fi, fo)) if (zero_last and last) else _xavier_uniform(rng, fi, fo)
            self.weights.append(Tensor(w))
            self.biases.append(Tensor(np.zeros(fo)))
        self._act = {"identity": None, "relu": ad.relu, "silu": ad.silu}[spec.activation]

    def params(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_params(self) -> int:
        return sum(p.data.size for p in self.params())

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.data.shape[1] != self.spec.in_dim:
            raise ValueError(
                f"input shape {x.data.shape} does not match in_dim {self.spec.in_dim}"
            )
        self.call_count += 1
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.add(ad.matmul(h, w), b)
            if i < last and self._act is not None:
                h = self._act(h)
        return h

    __call__ = forward


def dense_forward(net: DenseNet, x: Tensor) -> Tensor:
    """Forward pass; hidden layers activated, final layer affine."""
    return net.forward(x)
