"""Network architectures: MLP over features, CNN/TCNN over spectrograms.

MLP hidden layouts are tied to the input width n: [ceil(n/2)],
[ceil(n/2), ceil(n/4)] or [ceil(n/4)]. CNNs stack 2, 4 or 6 conv layers
(each conv -> batch norm -> ReLU), with 1-3 max-pool layers placed after
conv ceil(c*i/p) for i = 1..p, then one dense layer to the output. The
TCNN is the same body with an embedding-sized output (16 or 32) instead of
class logits. Odd sides pool with floor semantics (12 -> 6 -> 3 -> 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError
from .layers import BatchNorm, Conv2d, Dense, Flatten, Layer, MaxPool2d, Param, ReLU

N_CLASSES = 4
EMBEDDING_CHOICES = (16, 32)
CONV_COUNT_CHOICES = (2, 4, 6)
FILTER_CHOICES = (8, 16, 32, 64)
POOL_COUNT_CHOICES = (1, 2, 3)


def mlp_hidden_choices(n_inputs: int) -> tuple:
    half = math.ceil(n_inputs / 2)
    quarter = math.ceil(n_inputs / 4)
    return ((half,), (half, quarter), (quarter,))


def pool_positions(n_convs: int, n_pools: int) -> list[int]:
    """Pools sit after conv ceil(c*i/p), i = 1..p (1-based conv indices)."""
    return [math.ceil(n_convs * i / n_pools) for i in range(1, n_pools + 1)]


def pooled_side(side: int, n_pools: int) -> int:
    for _ in range(n_pools):
        side //= 2
    return side


@dataclass(frozen=True)
class NetworkConfig:
    """Declarative architecture; validated against the allowed design space."""

    kind: str  # mlp | cnn | tcnn
    n_inputs: int = 0  # mlp: feature count
    hidden_sizes: tuple = ()  # mlp only
    n_bands: int = 0  # cnn/tcnn: square image side
    conv_filters: tuple = ()  # cnn/tcnn: filters per conv layer
    n_pools: int = 0  # cnn/tcnn
    output_size: int = N_CLASSES  # 4 classes, or embedding width for tcnn
    allow_override: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        object.__setattr__(self, "conv_filters", tuple(self.conv_filters))
        if self.kind not in ("mlp", "cnn", "tcnn"):
            raise ConfigError(f"unknown network kind {self.kind!r}")
        if self.kind == "mlp":
            if self.n_inputs < 1:
                raise ConfigError("mlp needs n_inputs >= 1")
            if self.output_size != N_CLASSES:
                raise ConfigError("mlp output size is the 4 classes")
            if not self.allow_override and self.hidden_sizes not in mlp_hidden_choices(self.n_inputs):
                raise ConfigError(
                    f"mlp hidden sizes must be one of "
                    f"{mlp_hidden_choices(self.n_inputs)} for {self.n_inputs} "
                    f"inputs (got {self.hidden_sizes}); set allow_override to relax"
                )
            return
        if self.n_bands < 2:
            raise ConfigError(f"{self.kind} needs a square image side >= 2")
        if not self.allow_override:
            if len(self.conv_filters) not in CONV_COUNT_CHOICES:
                raise ConfigError(
                    f"conv layer count must be one of {CONV_COUNT_CHOICES}, "
                    f"got {len(self.conv_filters)}"
                )
            bad = [f for f in self.conv_filters if f not in FILTER_CHOICES]
            if bad:
                raise ConfigError(f"filter counts must be in {FILTER_CHOICES}, got {bad}")
            if self.n_pools not in POOL_COUNT_CHOICES:
                raise ConfigError(
                    f"pooling layer count must be one of {POOL_COUNT_CHOICES}, "
                    f"got {self.n_pools}"
                )
        if pooled_side(self.n_bands, self.n_pools) < 1:
            raise ConfigError(
                f"{self.n_pools} pools collapse a {self.n_bands}x{self.n_bands} "
                f"image below 1x1"
            )
        if self.kind == "cnn":
            if self.output_size != N_CLASSES:
                raise ConfigError("cnn output size is the 4 classes")
        else:
            if self.output_size not in EMBEDDING_CHOICES and not self.allow_override:
                raise ConfigError(
                    f"embedding size must be one of {EMBEDDING_CHOICES}, got "
                    f"{self.output_size}; set allow_override to relax"
                )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_inputs": self.n_inputs,
            "hidden_sizes": list(self.hidden_sizes),
            "n_bands": self.n_bands,
            "conv_filters": list(self.conv_filters),
            "n_pools": self.n_pools,
            "output_size": self.output_size,
            "allow_override": self.allow_override,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        return NetworkConfig(
            kind=d["kind"],
            n_inputs=d.get("n_inputs", 0),
            hidden_sizes=tuple(d.get("hidden_sizes", ())),
            n_bands=d.get("n_bands", 0),
            conv_filters=tuple(d.get("conv_filters", ())),
            n_pools=d.get("n_pools", 0),
            output_size=d.get("output_size", N_CLASSES),
            allow_override=d.get("allow_override", False),
        )


@dataclass
class Network:
    """An ordered layer stack plus enough metadata to rebuild it."""

    config: NetworkConfig
    layers: list = field(default_factory=list)

    def forward(self, x: np.ndarray, mode: str = "eval") -> np.ndarray:
        if mode not in ("train", "eval"):
            raise ContractError(f"mode must be train or eval, got {mode!r}")
        out = np.asarray(x, dtype=np.float64)
        for i, layer in enumerate(self.layers):
            try:
                out = layer.forward(out, mode)
            except ContractError as err:
                raise ContractError(f"layer {i} ({type(layer).__name__}): {err}") from None
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        grad = dout
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self) -> list[Param]:
        return [p for layer in self.layers for p in layer.params()]

    def buffers(self) -> list[np.ndarray]:
        return [b for layer in self.layers for b in layer.buffers()]

    def snapshot(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.params()] + [b.copy() for b in self.buffers()]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        params = self.params()
        buffers = self.buffers()
        for param, stored in zip(params, snapshot[: len(params)]):
            param.value[...] = stored
        for buffer, stored in zip(buffers, snapshot[len(params) :]):
            buffer[...] = stored


def build_network(config: NetworkConfig, rng: np.random.Generator) -> Network:
    """Instantiate a network with He-initialized weights drawn from rng."""
    layers: list[Layer] = []
    if config.kind == "mlp":
        widths = [config.n_inputs, *config.hidden_sizes]
        for n_in, n_out in zip(widths[:-1], widths[1:]):
            layers.append(Dense(n_in, n_out, rng))
            layers.append(ReLU())
        layers.append(Dense(widths[-1], config.output_size, rng))
        return Network(config, layers)

    side = config.n_bands
    channels = 1
    pools_placed = pool_positions(len(config.conv_filters), config.n_pools)
    for i, n_filters in enumerate(config.conv_filters, start=1):
        layers.append(Conv2d(channels, n_filters, rng))
        layers.append(BatchNorm(n_filters))
        layers.append(ReLU())
        channels = n_filters
        for _ in range(pools_placed.count(i)):
            layers.append(MaxPool2d())
            side //= 2
    layers.append(Flatten())
    layers.append(Dense(channels * side * side, config.output_size, rng))
    return Network(config, layers)
