"""
Network algebra: composition, powers, extensions, parallelizations, fan-in/fan-out nets,
sums and scalar multiplication. Every operation returns a fresh net; the descriptor
functions at the bottom compute the resulting architectures without building anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from ann_core import Activation, Ann, affine_net, realize
from constants import Defaults, Tolerances
from errors import CompositionError, DepthError, DomainError, ShapeError


# -----------------------
# Identity nets
# -----------------------

@dataclass(frozen=True, eq=False)
class IdentityNet:
    '''depth-2 net with descriptor (m, dm, m) that realizes the identity under act'''
    net: Ann
    act: Activation

    def __post_init__(self):
        dims = self.net.dims
        if self.net.depth != 2 or dims[0] != dims[2]:
            raise ShapeError(f"identity nets have descriptor (m, k, m), got {dims}")
        if dims[1] % dims[0] != 0:
            raise ShapeError(f"identity hidden width {dims[1]} is not a multiple of {dims[0]}")

        probes = np.random.default_rng(Defaults.SEED).uniform(-10.0, 10.0, (Defaults.IDENTITY_PROBES, dims[0]))
        out = realize(self.net, self.act, probes)
        if not np.allclose(out, probes, rtol=Tolerances.IDENTITY_PROBE, atol=Tolerances.IDENTITY_PROBE):
            raise DomainError(f"net with descriptor {dims} does not realize the identity under {self.act.describe()}")

    @property
    def dim(self) -> int:
        return self.net.input_dim

    @property
    def width_factor(self) -> int:
        return self.net.dims[1] // self.net.dims[0]


def unit_identity(act: Activation) -> IdentityNet:
    '''scalar identity from phi(x) - phi(-x); leaky ReLU needs the (1 + beta)^-1 output scaling'''
    block = Ann((
        (np.array([[1.0], [-1.0]]), np.zeros(2)),
        (np.array([[1.0, -1.0]]), np.zeros(1)),
    ))
    if act.is_leaky:
        block = scalar_mul(1.0 / (1.0 + act.beta), block)
    return IdentityNet(block, act)


def identity_stack(unit: IdentityNet, k: int) -> IdentityNet:
    '''I_k = P_k(J, ..., J)'''
    if k < 1:
        raise DomainError(f"identity dimension must be positive, got {k}")
    return IdentityNet(parallelize_same_depth([unit.net] * k), unit.act)


def identity_net(dim: int, act: Activation) -> IdentityNet:
    return identity_stack(unit_identity(act), dim)


# -----------------------
# Composition, powers, extensions
# -----------------------

def compose(front: Ann, back: Ann) -> Ann:
    '''front after back; the last layer of back and the first of front fuse into one'''
    if front.input_dim != back.output_dim:
        raise CompositionError(f"cannot compose: front expects {front.input_dim} inputs, back outputs {back.output_dim}")
    W1, B1 = front.layers[0]
    WL, BL = back.layers[-1]
    fused = (W1 @ WL, W1 @ BL + B1)
    return Ann(back.layers[:-1] + (fused,) + front.layers[1:])


def power(net: Ann, n: int) -> Ann:
    if n < 0:
        raise DomainError(f"power needs n >= 0, got {n}")
    if net.input_dim != net.output_dim:
        raise ShapeError(f"powers need a square net, got {net.input_dim} -> {net.output_dim}")
    result = affine_net(np.eye(net.output_dim))
    for _ in range(n):
        result = compose(net, result)
    return result


def extend(target_depth: int, ident: IdentityNet, net: Ann) -> Ann:
    '''E_{L,id}(net) = id^(L - depth) after net'''
    if target_depth < net.depth:
        raise DepthError(f"cannot extend a depth-{net.depth} net to depth {target_depth}")
    if net.output_dim != ident.dim:
        raise ShapeError(f"net outputs {net.output_dim} values but the identity net acts on {ident.dim}")
    if target_depth == net.depth:
        return Ann(net.layers)
    return compose(power(ident.net, target_depth - net.depth), net)


# -----------------------
# Parallelizations
# -----------------------

def parallelize_same_depth(nets: Sequence[Ann]) -> Ann:
    nets = list(nets)
    if not nets:
        raise ShapeError("parallelization needs at least one net")
    depth = nets[0].depth
    if any(net.depth != depth for net in nets):
        raise DepthError(f"parallelization needs equal depths, got {[net.depth for net in nets]}")
    if len(nets) == 1:
        return Ann(nets[0].layers)
    return Ann(tuple(
        (block_diag(*[net.layers[k][0] for net in nets]), np.concatenate([net.layers[k][1] for net in nets]))
        for k in range(depth)
    ))


def parallelize_mixed(nets: Sequence[Ann], idents: Sequence[IdentityNet]) -> Ann:
    '''extend every net to the largest depth with its own identity net, then parallelize'''
    nets, idents = list(nets), list(idents)
    if len(nets) != len(idents):
        raise ShapeError(f"got {len(nets)} nets but {len(idents)} identity nets")
    if not nets:
        raise ShapeError("parallelization needs at least one net")
    for k, (net, ident) in enumerate(zip(nets, idents)):
        if net.output_dim != ident.dim:
            raise ShapeError(f"net {k} outputs {net.output_dim} values but its identity net acts on {ident.dim}")
    depth = max(net.depth for net in nets)
    return parallelize_same_depth([extend(depth, ident, net) for net, ident in zip(nets, idents)])


# -----------------------
# Fan nets, scalars, sums
# -----------------------

def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if value < 1:
            raise DomainError(f"{name} must be positive, got {value}")


def sum_net(m: int, n: int) -> Ann:
    '''S_{m,n}: (x_1, ..., x_n) -> x_1 + ... + x_n with x_i in R^m'''
    _check_positive(m=m, n=n)
    return affine_net(np.tile(np.eye(m), (1, n)))


def copy_net(m: int, n: int) -> Ann:
    '''T_{m,n}: x -> (x, ..., x), n copies'''
    _check_positive(m=m, n=n)
    return affine_net(np.tile(np.eye(m), (n, 1)))


def fan_nets(m: int, n: int) -> Tuple[Ann, Ann]:
    return sum_net(m, n), copy_net(m, n)


def scalar_mul(alpha: float, net: Ann) -> Ann:
    W, B = net.layers[-1]
    return Ann(net.layers[:-1] + ((alpha * W, alpha * B),))


def sum_same_depth(nets: Sequence[Ann]) -> Ann:
    nets = list(nets)
    if not nets:
        raise ShapeError("a sum needs at least one net")
    first = nets[0]
    if any(net.depth != first.depth for net in nets):
        raise DepthError(f"sums of equal depth need equal depths, got {[net.depth for net in nets]}")
    if any(net.input_dim != first.input_dim or net.output_dim != first.output_dim for net in nets):
        raise ShapeError(f"summands must share input and output sizes, got {[(net.input_dim, net.output_dim) for net in nets]}")
    n = len(nets)
    inner = compose(parallelize_same_depth(nets), copy_net(first.input_dim, n))
    return compose(sum_net(first.output_dim, n), inner)


def sum_mixed_depth(nets: Sequence[Ann], ident: IdentityNet, coeffs: Optional[Sequence[float]] = None) -> Ann:
    '''sum over i of coeffs[i] * nets[i], shorter summands extended with ident'''
    nets = list(nets)
    if not nets:
        raise ShapeError("a sum needs at least one net")
    if coeffs is None:
        coeffs = [1.0] * len(nets)
    if len(coeffs) != len(nets):
        raise ShapeError(f"got {len(nets)} nets but {len(coeffs)} coefficients")
    first = nets[0]
    if any(net.input_dim != first.input_dim or net.output_dim != first.output_dim for net in nets):
        raise ShapeError(f"summands must share input and output sizes, got {[(net.input_dim, net.output_dim) for net in nets]}")
    if first.output_dim != ident.dim:
        raise ShapeError(f"summands output {first.output_dim} values but the identity net acts on {ident.dim}")
    depth = max(net.depth for net in nets)
    return sum_same_depth([extend(depth, ident, scalar_mul(h, net)) for h, net in zip(coeffs, nets)])


# -----------------------
# Architecture arithmetic
# -----------------------

Dims = Tuple[int, ...]


def composed_dims(front: Dims, back: Dims) -> Dims:
    '''(l_0, ..., l_{L-1}, k_1, ..., k_K) for front with (k_0, ..., k_K) and back with (l_0, ..., l_L)'''
    if front[0] != back[-1]:
        raise CompositionError(f"cannot compose descriptors {front} after {back}")
    return tuple(back[:-1]) + tuple(front[1:])


def power_dims(dims: Dims, n: int) -> Dims:
    if n == 0:
        return (dims[-1], dims[-1])
    out = tuple(dims)
    for _ in range(n - 1):
        out = composed_dims(dims, out)
    return out


def extended_dims(target_depth: int, ident_dims: Dims, dims: Dims) -> Dims:
    depth = len(dims) - 1
    if target_depth < depth:
        raise DepthError(f"cannot extend a depth-{depth} descriptor to depth {target_depth}")
    if target_depth == depth:
        return tuple(dims)
    return composed_dims(power_dims(ident_dims, target_depth - depth), dims)


def parallel_dims(all_dims: Sequence[Dims]) -> Dims:
    if len({len(dims) for dims in all_dims}) != 1:
        raise DepthError(f"parallelization needs equal depths, got {list(all_dims)}")
    return tuple(sum(col) for col in zip(*all_dims))


def sum_dims(all_dims: Sequence[Dims]) -> Dims:
    '''descriptor of a same-depth sum: hidden widths add, ends stay'''
    merged = parallel_dims(all_dims)
    return (all_dims[0][0],) + merged[1:-1] + (all_dims[0][-1],)


def sum_mixed_dims(all_dims: Sequence[Dims], ident_dims: Dims) -> Dims:
    depth = max(len(dims) - 1 for dims in all_dims)
    return sum_dims([extended_dims(depth, ident_dims, dims) for dims in all_dims])


def parallel_mixed_dims(all_dims: Sequence[Dims], all_ident_dims: Sequence[Dims]) -> Dims:
    depth = max(len(dims) - 1 for dims in all_dims)
    return parallel_dims([extended_dims(depth, i, dims) for dims, i in zip(all_dims, all_ident_dims)])


def identity_stack_dims(width_factor: int, k: int) -> Dims:
    return (k, width_factor * k, k)


def dims_param_count(dims: Dims) -> int:
    return sum(dims[k] * (dims[k - 1] + 1) for k in range(1, len(dims)))


# -----------------------
# Size bounds
# -----------------------

def composition_param_bound(front: Ann, back: Ann) -> int:
    '''P(front) + P(back) + k_1 l_{L-1}'''
    k1 = front.dims[1]
    l_prev = back.dims[-2]
    return dims_param_count(front.dims) + dims_param_count(back.dims) + k1 * l_prev


def extension_param_bound(target_depth: int, ident: IdentityNet, net: Ann) -> Fraction:
    P = dims_param_count(net.dims)
    if net.depth == target_depth:
        return Fraction(P)
    d, l = ident.dim, ident.net.dims[1]
    return max(Fraction(1), Fraction(l, d)) * P + ((target_depth - net.depth - 1) * l + d) * (l + 1)


def size_estimate_holds(dims: Dims) -> bool:
    '''max{L, |||D|||} <= P <= 2 L |||D|||^2'''
    P = dims_param_count(dims)
    L = len(dims) - 1
    width = max(dims)
    return max(L, width) <= P <= 2 * L * width * width
