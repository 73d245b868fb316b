"""
Structured feed-forward networks: a net is an ordered sequence of affine layers (W_k, B_k),
kept apart from the function it realizes under a chosen activation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from constants import ActivationKind
from errors import InputShapeError, InvalidActivationError, ShapeError


Layer = Tuple[np.ndarray, np.ndarray]


# -----------------------
# Activation
# -----------------------

@dataclass(frozen=True)
class Activation:
    '''leaky ReLU max{x, beta x} with beta in [0, inf) minus {1}, or softplus ln(1 + e^x)'''
    kind: ActivationKind
    beta: float = 0.0

    def __post_init__(self):
        if self.kind is ActivationKind.LEAKY_RELU:
            beta = float(self.beta)
            if not np.isfinite(beta) or beta < 0.0 or beta == 1.0:
                raise InvalidActivationError(f"leaky ReLU slope must lie in [0, inf) without 1, got beta={self.beta}")
            object.__setattr__(self, "beta", beta)
        else:
            #softplus carries no slope
            object.__setattr__(self, "beta", 0.0)

    @classmethod
    def leaky_relu(cls, beta: float = 0.0) -> Activation:
        return cls(ActivationKind.LEAKY_RELU, beta)

    @classmethod
    def softplus(cls) -> Activation:
        return cls(ActivationKind.SOFTPLUS)

    @property
    def is_leaky(self) -> bool:
        return self.kind is ActivationKind.LEAKY_RELU

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.is_leaky:
            return np.maximum(x, self.beta * x)
        return np.logaddexp(0.0, x)

    def describe(self) -> str:
        if self.is_leaky:
            return f"leaky_relu(beta={self.beta})"
        return "softplus"


# -----------------------
# Architecture descriptor
# -----------------------

@dataclass(frozen=True)
class ArchitectureDescriptor:
    '''layer widths (l_0, ..., l_L)'''
    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(l) for l in self.dims)
        if len(dims) < 2:
            raise ShapeError(f"architecture needs at least input and output widths, got {dims}")
        if any(l < 1 for l in dims):
            raise ShapeError(f"architecture widths must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def depth(self) -> int:
        return len(self.dims) - 1

    @property
    def hidden_layers(self) -> int:
        return len(self.dims) - 2

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    @property
    def width(self) -> int:
        '''max entry of the descriptor'''
        return max(self.dims)

    def dim_at(self, n: int) -> int:
        '''l_n for n <= L, 0 beyond the output layer'''
        if n < 0:
            raise ShapeError(f"layer index must be nonnegative, got {n}")
        return self.dims[n] if n <= self.depth else 0

    @property
    def param_count(self) -> int:
        return sum(self.dims[k] * (self.dims[k - 1] + 1) for k in range(1, len(self.dims)))

    def __iter__(self):
        return iter(self.dims)

    def __len__(self):
        return len(self.dims)

    def __getitem__(self, k):
        return self.dims[k]


# -----------------------
# Networks
# -----------------------

def _frozen(arr, ndim: int, what: str, k: int) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    if out.ndim != ndim:
        raise ShapeError(f"layer {k}: {what} must be {ndim}-dimensional, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Ann:
    '''Immutable sequence of affine layers with consistent inner dimensions'''
    layers: Tuple[Layer, ...]

    def __post_init__(self):
        raw = tuple(self.layers)
        if len(raw) < 1:
            raise ShapeError("a network needs at least one layer")

        layers = []
        for k, layer in enumerate(raw, start=1):
            if len(layer) != 2:
                raise ShapeError(f"layer {k}: expected a (W, B) pair")
            W = _frozen(layer[0], 2, "W", k)
            B = _frozen(layer[1], 1, "B", k)
            if W.shape[0] < 1 or W.shape[1] < 1:
                raise ShapeError(f"layer {k}: zero width is not allowed, W has shape {W.shape}")
            if B.shape[0] != W.shape[0]:
                raise ShapeError(f"layer {k}: B has length {B.shape[0]}, expected {W.shape[0]}")
            if layers and W.shape[1] != layers[-1][0].shape[0]:
                raise ShapeError(
                    f"layer {k}: W has {W.shape[1]} columns but layer {k - 1} outputs {layers[-1][0].shape[0]}"
                )
            layers.append((W, B))
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.layers[0][0].shape[1],) + tuple(W.shape[0] for W, _ in self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ann) or self.depth != other.depth:
            return False
        return all(
            np.array_equal(W1, W2) and np.array_equal(B1, B2)
            for (W1, B1), (W2, B2) in zip(self.layers, other.layers)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Ann(dims={self.dims})"


def affine_net(W, B=None) -> Ann:
    '''depth-1 net x -> Wx + B'''
    W = np.asarray(W, dtype=np.float64)
    if B is None:
        B = np.zeros(W.shape[0])
    return Ann(((W, B),))


def zero_net(input_dim: int, output_dim: int) -> Ann:
    return affine_net(np.zeros((output_dim, input_dim)))


def random_net(rng: np.random.Generator, dims: Sequence[int], scale: float = 1.0) -> Ann:
    '''Gaussian weights and biases for the given widths'''
    dims = ArchitectureDescriptor(tuple(dims)).dims
    return Ann(tuple(
        (scale * rng.standard_normal((dims[k], dims[k - 1])), scale * rng.standard_normal(dims[k]))
        for k in range(1, len(dims))
    ))


def describe(net: Ann) -> ArchitectureDescriptor:
    return ArchitectureDescriptor(net.dims)


def param_count(net: Ann) -> int:
    '''sum over layers of l_k (l_{k-1} + 1)'''
    return sum(W.size + B.size for W, B in net.layers)


def realize(net: Ann, act: Activation, x) -> np.ndarray:
    '''
    Evaluates the net: activation after every layer but the last.
    x is one input of length l_0 or a batch with one input per row.
    '''
    h = np.asarray(x, dtype=np.float64)
    if h.ndim not in (1, 2) or h.shape[-1] != net.input_dim:
        raise InputShapeError(f"net expects inputs of length {net.input_dim}, got shape {h.shape}")

    last = net.depth - 1
    for k, (W, B) in enumerate(net.layers):
        h = h @ W.T + B
        if k < last:
            h = act(h)
    return h
