"""
Exact maximum networks under leaky ReLU phi(x) = max{x, beta x}.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from ann_calculus import compose, parallelize_same_depth
from ann_core import Activation, Ann
from constants import Tolerances
from errors import DomainError, InvalidActivationError


def check_beta(beta: float) -> float:
    beta = float(beta)
    if not np.isfinite(beta) or beta < 0.0:
        raise InvalidActivationError(f"leaky ReLU slope must be nonnegative, got beta={beta}")
    if abs(1.0 - beta) < Tolerances.BETA_SINGULAR:
        raise InvalidActivationError(f"max networks need beta away from 1, got beta={beta}")
    return beta


def pair_constants(beta: float) -> Tuple[float, float]:
    '''gamma = |1-b| / ((1-b)(1-b^2)), delta = |1-b| / (1-b)'''
    beta = check_beta(beta)
    gamma = abs(1.0 - beta) / ((1.0 - beta) * (1.0 - beta * beta))
    delta = abs(1.0 - beta) / (1.0 - beta)
    return gamma, delta


def pair_block(beta: float) -> Ann:
    '''(x1, x2) -> max{x1, x2}, descriptor (2, 4, 1)'''
    gamma, delta = pair_constants(beta)
    w1 = np.array([
        [delta, -delta],
        [-delta, delta],
        [0.0, delta],
        [0.0, -delta],
    ])
    w2 = np.array([[gamma, gamma * beta, gamma * (1.0 - beta), gamma * (beta - 1.0)]])
    return Ann(((w1, np.zeros(4)), (w2, np.zeros(1))))


def passthrough_block(beta: float) -> Ann:
    '''x -> x as ((1, -1)^T, 0), ((1+b)^-1 (1, -1), 0)'''
    beta = check_beta(beta)
    return Ann((
        (np.array([[1.0], [-1.0]]), np.zeros(2)),
        (np.array([[1.0, -1.0]]) / (1.0 + beta), np.zeros(1)),
    ))


def pairwise_max_layer(n: int, beta: float) -> Ann:
    '''
    (x1, ..., xn) -> (max{x1, x2}, max{x3, x4}, ...), the last coordinate passed
    through when n is odd. Descriptor (n, 2n, ceil(n/2)).
    '''
    if n < 2:
        raise DomainError(f"pairwise max layer needs n >= 2, got {n}")
    blocks = [pair_block(beta)] * (n // 2)
    if n % 2:
        blocks.append(passthrough_block(beta))
    return parallelize_same_depth(blocks)


def max_net(m: int, beta: float) -> Ann:
    '''x -> max_i x_i with depth ceil(log2 m) + 1, built as Psi_m = Psi_ceil(m/2) after Phi_m'''
    if m < 2:
        raise DomainError(f"max network needs m >= 2 inputs, got {m}")
    net = pairwise_max_layer(m, beta)
    k = (m + 1) // 2
    while k >= 2:
        net = compose(pairwise_max_layer(k, beta), net)
        k = (k + 1) // 2
    return net


def max_depth(m: int) -> int:
    #ceil(log2 m) without floating point
    return (m - 1).bit_length() + 1


def max_activation(beta: float) -> Activation:
    return Activation.leaky_relu(check_beta(beta))
