"""
Full-history recursive multilevel fixed point (MLFP) estimator.

U_n(x)(a) = sum_{l<n} M^-(n-l) sum_{i=1}^{M^(n-l)} [ F(X, U_l^(theta,l,i)(X)) - 1_{l>0} F(X, U_{l-1}^(theta,-l,i)(X)) ]
with X = X_a^(theta,l,i)(x). Evaluated directly on batches of states, or compiled into one
network whose realization is the same function for the same per-theta noise draws.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ann_calculus import (
    IdentityNet,
    composed_dims,
    compose,
    copy_net,
    dims_param_count,
    identity_stack,
    identity_stack_dims,
    parallel_dims,
    parallel_mixed_dims,
    parallelize_mixed,
    parallelize_same_depth,
    sum_mixed_depth,
    sum_mixed_dims,
    sum_same_depth,
)
from ann_core import Activation, Ann, realize, zero_net
from constants import Defaults
from errors import BudgetError, CompositionError, DomainError, NoContractionError, ScheduleError, ShapeError
from streams import ThetaKey, theta_stream


logger = logging.getLogger(__name__)

Dims = Tuple[int, ...]
Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


# -----------------------
# Random fields
# -----------------------

@dataclass(eq=False)
class RandomFieldSpec:
    '''
    x -> X_a^theta(x): one noise draw xi^theta per theta (shared by every action and state),
    pushed through transition(x_batch, xi, a). net_form(xi, a) gives the same map as a net.
    Draws are cached for the length of one evaluation or compilation and dropped afterwards.
    '''
    master_seed: int
    x_dim: int
    a_count: int
    noise: Callable[[np.random.Generator], np.ndarray]
    transition: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    net_form: Optional[Callable[[np.ndarray, int], Ann]] = None
    cache: bool = True
    _draws: Dict[ThetaKey, np.ndarray] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.x_dim < 1 or self.a_count < 1:
            raise DomainError(f"random field needs d >= 1 and |A| >= 1, got d={self.x_dim}, |A|={self.a_count}")

    def xi(self, theta: ThetaKey) -> np.ndarray:
        draw = self._draws.get(theta)
        if draw is None:
            draw = np.atleast_1d(np.asarray(self.noise(theta_stream(self.master_seed, theta)), dtype=np.float64))
            draw.setflags(write=False)
            if self.cache:
                self._draws[theta] = draw
        return draw

    @property
    def cached_draws(self) -> int:
        return len(self._draws)

    def forget_draws(self):
        self._draws.clear()

    def sample(self, theta: ThetaKey, a: int, x: np.ndarray) -> np.ndarray:
        return self.transition(x, self.xi(theta), a)

    def x_net(self, theta: ThetaKey, a: int) -> Ann:
        if self.net_form is None:
            raise DomainError("random field carries no network form; it cannot be compiled")
        return self.net_form(self.xi(theta), a)


def net_evaluator(F_net: Ann, act: Activation) -> Evaluator:
    '''(y, r) batches -> realize(F)(y, r) as a flat vector'''
    def evaluate(y: np.ndarray, r: np.ndarray) -> np.ndarray:
        return realize(F_net, act, np.hstack([y, r]))[:, 0]
    return evaluate


class CallCounter:
    '''wraps an evaluator and counts its invocations'''
    def __init__(self, F: Evaluator):
        self.F = F
        self.calls = 0

    def __call__(self, y: np.ndarray, r: np.ndarray) -> np.ndarray:
        self.calls += 1
        return self.F(y, r)


# -----------------------
# Schedule
# -----------------------

def min_budget(lambda_ell_sup: float, a_count: int) -> int:
    '''smallest integer M >= 2 with M > ((1 + lambda_ell (2|A| - 1)) / (1 - lambda_ell))^2'''
    if lambda_ell_sup >= 1.0:
        raise NoContractionError(f"lambda * ell = {lambda_ell_sup} must be below 1")
    if lambda_ell_sup < 0.0 or a_count < 1:
        raise DomainError(f"need lambda * ell >= 0 and |A| >= 1, got {lambda_ell_sup}, {a_count}")
    #decimal reading of lambda_ell keeps boundary cases like 0.9 -> 361 exact
    q = Fraction(repr(float(lambda_ell_sup)))
    ratio = ((1 + q * (2 * a_count - 1)) / (1 - q)) ** 2
    return max(2, math.floor(ratio) + 1)


def contraction_rate(lambda_ell: float, a_count: int, M: int) -> float:
    '''alpha = [b + sqrt(b^2 + 4 M^-1/2 lambda_ell (|A| - 1))] / 2, b = lambda_ell (1 + |A| M^-1/2) + M^-1/2'''
    r = M ** -0.5
    b = lambda_ell * (1.0 + a_count * r) + r
    return 0.5 * (b + math.sqrt(b * b + 4.0 * r * lambda_ell * (a_count - 1)))


def error_scale(lambda_ell: float, a_count: int, c_frak: float) -> float:
    '''gamma = 3/2 max{c / (1 - lambda_ell), |A| c / (|A| lambda_ell + 1)}'''
    return 1.5 * max(c_frak / (1.0 - lambda_ell), a_count * c_frak / (a_count * lambda_ell + 1.0))


@dataclass(frozen=True)
class MlfpSchedule:
    M: int
    n: int
    lambda_ell: float = 0.0
    alpha: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise DomainError(f"Monte Carlo budget M must be an integer >= 2, got {self.M}")
        if int(self.n) != self.n or self.n < 0:
            raise DomainError(f"level n must be a nonnegative integer, got {self.n}")

    @classmethod
    def derive(cls, lambda_ell: float, a_count: int, c_frak: float, eps: float, M: Optional[int] = None) -> MlfpSchedule:
        '''admissible budget, alpha, gamma and the level reaching accuracy eps'''
        floor = min_budget(lambda_ell, a_count)
        M = floor if M is None else M
        if M < floor:
            raise ScheduleError(f"budget M = {M} is below the admissible {floor} for lambda * ell = {lambda_ell}, |A| = {a_count}")
        alpha = contraction_rate(lambda_ell, a_count, M)
        if alpha >= 1.0:
            raise ScheduleError(f"contraction rate alpha = {alpha} >= 1 for M = {M}")
        sched = cls(M=M, n=0, lambda_ell=lambda_ell, alpha=alpha, gamma=error_scale(lambda_ell, a_count, c_frak))
        return sched.with_level(level_for_accuracy(sched, eps))

    def with_level(self, n: int) -> MlfpSchedule:
        return replace(self, n=n)

    def error_bound(self) -> float:
        '''gamma alpha^n'''
        _check_rate(self)
        return self.gamma * self.alpha ** self.n


def _check_rate(sched: MlfpSchedule):
    if sched.alpha is None or sched.gamma is None:
        raise ScheduleError("schedule carries no alpha/gamma; build it with MlfpSchedule.derive")
    if not 0.0 < sched.alpha < 1.0:
        raise ScheduleError(f"contraction rate alpha = {sched.alpha} must lie in (0, 1)")


def level_for_accuracy(sched: MlfpSchedule, eps: float) -> int:
    '''min{n >= 1 : gamma alpha^n <= eps}'''
    _check_rate(sched)
    if not 0.0 < eps <= 1.0:
        raise DomainError(f"accuracy must lie in (0, 1], got {eps}")
    alpha, gamma = sched.alpha, sched.gamma
    n = max(1, math.ceil(math.log(eps / gamma) / math.log(alpha)))
    #settle rounding in the logarithms
    while gamma * alpha ** n > eps:
        n += 1
    while n > 1 and gamma * alpha ** (n - 1) <= eps:
        n -= 1
    return n


def level_bound(sched: MlfpSchedule, eps: float) -> float:
    _check_rate(sched)
    log_inv = math.log(1.0 / sched.alpha)
    return (log_inv + math.log(sched.gamma) + 1.0) / log_inv / eps


def cost_growth_bound(sched: MlfpSchedule, a_count: int, eps: float) -> float:
    '''(4|A|M)^2 max{1, gamma^p} eps^-p with p = 2 ln(4|A|M) / ln(1/alpha); inf when it leaves binary64'''
    _check_rate(sched)
    log_k = math.log(4 * a_count * sched.M)
    p = 2.0 * log_k / math.log(1.0 / sched.alpha)
    log_value = 2.0 * log_k + max(0.0, p * math.log(sched.gamma)) + p * math.log(1.0 / eps)
    return math.exp(log_value) if log_value < 709.0 else math.inf


def accuracy_split(eps: float, c_frak: float, d: int) -> float:
    '''eps (1 + c^2 d^(2c))^-1'''
    return eps / (1.0 + c_frak ** 2 * float(d) ** (2.0 * c_frak))


# -----------------------
# Direct evaluation
# -----------------------

def mlfp_call_count(M: int, n: int, a_count: int) -> int:
    '''F-evaluations of one full evaluation of U_n over all actions'''
    counts = [0]
    for k in range(1, n + 1):
        total = 0
        for l in range(k):
            per_sample = counts[l] + 1
            if l > 0:
                per_sample += counts[l - 1] + 1
            total += M ** (k - l) * per_sample
        counts.append(a_count * total)
        if counts[-1] >= Defaults.SAMPLE_LIMIT:
            raise BudgetError(f"MLFP level {k} with M = {M}, |A| = {a_count} needs {counts[-1]} evaluations")
    return counts[n]


def _evaluate(field: RandomFieldSpec, F: Evaluator, M: int, n: int, theta: ThetaKey, x: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], field.a_count))
    for l in range(n):
        reps = M ** (n - l)
        acc = np.zeros_like(out)
        for i in range(1, reps + 1):
            fresh = theta.child(l, i)
            for a in range(field.a_count):
                X = field.sample(fresh, a, x)
                acc[:, a] += F(X, _evaluate(field, F, M, l, fresh, X))
                if l > 0:
                    acc[:, a] -= F(X, _evaluate(field, F, M, l - 1, theta.child(-l, i), X))
        out += acc / reps
    return out


def mlfp_evaluate(field: RandomFieldSpec, F: Evaluator, sched: MlfpSchedule, theta: ThetaKey, x) -> np.ndarray:
    '''
    U_n^theta(x) for one state (returns |A| values) or a batch of states (one row each).
    F maps (y batch, r batch) to one value per row.
    '''
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.shape[1] != field.x_dim:
        raise ShapeError(f"states must have {field.x_dim} coordinates, got shape {x.shape}")
    mlfp_call_count(sched.M, sched.n, field.a_count)

    try:
        out = _evaluate(field, F, sched.M, sched.n, theta, batch)
    finally:
        field.forget_draws()
    return out[0] if single else out


# -----------------------
# Compilation
# -----------------------

def _check_net_shapes(field: RandomFieldSpec, F_net: Ann, theta: ThetaKey):
    d, A = field.x_dim, field.a_count
    if F_net.input_dim != d + A or F_net.output_dim != 1:
        raise CompositionError(f"F must map R^{d + A} to R, got {F_net.input_dim} -> {F_net.output_dim}")
    X = field.x_net(theta, 0)
    if X.input_dim != d or X.output_dim != d:
        raise CompositionError(f"transition nets must map R^{d} to R^{d}, got {X.input_dim} -> {X.output_dim}")


class _Compiler:
    '''builds Phi_k^theta bottom-up for one field, F and unit identity'''
    def __init__(self, field: RandomFieldSpec, F_net: Ann, unit: IdentityNet, M: int):
        self.field = field
        self.F_net = F_net
        self.unit = unit
        self.M = M
        self.ident_x = identity_stack(unit, field.x_dim)
        self.ident_a = identity_stack(unit, field.a_count)
        self.copy_x = copy_net(field.x_dim, 2)
        self.fan_a = copy_net(field.x_dim, field.a_count)

    def phi(self, n: int, theta: ThetaKey) -> Ann:
        A = self.field.a_count
        if n == 0:
            return compose(parallelize_same_depth([zero_net(self.field.x_dim, 1)] * A), self.fan_a)
        lambdas = [self.lam(n, theta, a) for a in range(A)]
        return compose(parallelize_same_depth(lambdas), self.fan_a)

    def xi(self, k: int, theta: ThetaKey) -> Ann:
        '''x -> (x, Phi_k^theta(x))'''
        paired = parallelize_mixed([self.ident_x.net, self.phi(k, theta)], [self.ident_x, self.ident_a])
        return compose(paired, self.copy_x)

    def psi(self, n: int, l: int, j: int, theta: ThetaKey, a: int) -> Ann:
        terms = []
        for i in range(1, self.M ** (n - l) + 1):
            inner = theta.child(l if j == 0 else -l, i)
            X = self.field.x_net(theta.child(l, i), a)
            terms.append(compose(compose(self.F_net, self.xi(max(l - j, 0), inner)), X))
        return sum_same_depth(terms)

    def lam(self, n: int, theta: ThetaKey, a: int) -> Ann:
        M = self.M
        gamma0 = sum_mixed_depth(
            [self.psi(n, l, 0, theta, a) for l in range(n)], self.unit, [M ** -(n - l) for l in range(n)]
        )
        if n == 1:
            return gamma0
        #no correction term at level 0
        gamma1 = sum_mixed_depth(
            [self.psi(n, l, 1, theta, a) for l in range(1, n)], self.unit, [-(M ** -(n - l)) for l in range(1, n)]
        )
        return sum_mixed_depth([gamma0, gamma1], self.unit)


def build_mlfp_net(
    field: RandomFieldSpec,
    F_net: Ann,
    unit: IdentityNet,
    sched: MlfpSchedule,
    theta: ThetaKey,
    max_params: int = Defaults.MAX_COMPILED_PARAMS,
) -> Ann:
    '''Phi_n^theta with realize(Phi_n^theta)(x) = U_n^theta(x) for the same noise draws'''
    if unit.dim != 1:
        raise ShapeError(f"the identity block must act on R, got dimension {unit.dim}")
    try:
        _check_net_shapes(field, F_net, theta)
        params = compiled_param_count(field, F_net, unit, sched, theta)
        if params > max_params:
            raise BudgetError(f"compiled net would carry {params} parameters (limit {max_params})")
        net = _Compiler(field, F_net, unit, sched.M).phi(sched.n, theta)
    finally:
        field.forget_draws()
    logger.info(f"[MLFP] compiled level {sched.n}, M = {sched.M}: depth {net.depth}, {params} parameters")
    return net


def compiled_param_count(field: RandomFieldSpec, F_net: Ann, unit: IdentityNet, sched: MlfpSchedule, theta: ThetaKey) -> int:
    '''P(Phi_n^theta) from descriptors alone'''
    X_dims = field.x_net(theta, 0).dims
    return dims_param_count(mlfp_dims(F_net.dims, X_dims, field.x_dim, field.a_count, sched.M, sched.n, unit.width_factor))


# -----------------------
# Architecture accounting
# -----------------------

def _check_arch(dims: Dims) -> Dims:
    if max(dims) > Defaults.ARCH_LIMIT:
        raise BudgetError(f"layer width {max(dims)} overflows unsigned 64-bit")
    return dims


def _repeat_sum_dims(dims: Dims, reps: int) -> Dims:
    '''descriptor of a same-depth sum of reps copies'''
    return (dims[0],) + tuple(reps * l for l in dims[1:-1]) + (dims[-1],)


def mlfp_dims(F_dims: Dims, X_dims: Dims, d: int, a_count: int, M: int, n: int, width_factor: int = 2) -> Dims:
    '''D(Phi_n^theta) without building anything; the same for every theta'''
    unit_dims = identity_stack_dims(width_factor, 1)
    ident_x = identity_stack_dims(width_factor, d)
    ident_a = identity_stack_dims(width_factor, a_count)
    copy_x = (d, 2 * d)
    fan_a = (d, a_count * d)

    phis: List[Dims] = [(d, a_count)]
    for k in range(1, n + 1):
        def term(level: int) -> Dims:
            xi = composed_dims(parallel_mixed_dims([ident_x, phis[level]], [ident_x, ident_a]), copy_x)
            return composed_dims(composed_dims(tuple(F_dims), xi), tuple(X_dims))

        gamma0 = sum_mixed_dims([_repeat_sum_dims(term(l), M ** (k - l)) for l in range(k)], unit_dims)
        if k == 1:
            lam = gamma0
        else:
            gamma1 = sum_mixed_dims([_repeat_sum_dims(term(l - 1), M ** (k - l)) for l in range(1, k)], unit_dims)
            lam = sum_mixed_dims([gamma0, gamma1], unit_dims)
        phis.append(_check_arch(composed_dims(parallel_dims([lam] * a_count), fan_a)))
    return phis[n]


@dataclass(frozen=True)
class MlfpSizeBounds:
    depth: int
    width: int
    params: int
    c: int


def mlfp_size_bounds(F_dims: Dims, X_dims: Dims, d: int, a_count: int, M: int, n: int, width_factor: int = 2) -> MlfpSizeBounds:
    '''
    depth <= n (L_F + L_X - 1) + 1, width <= c (4|A|M)^n, params <= 2 depth c^2 (4|A|M)^2n
    with c = 2 max{|||D(F)|||, |||D(X)|||, w d + w |A|}
    '''
    c = 2 * max(max(F_dims), max(X_dims), width_factor * d + width_factor * a_count)
    growth = (4 * a_count * M) ** n
    depth = n * (len(F_dims) - 1 + len(X_dims) - 1 - 1) + 1
    bounds = MlfpSizeBounds(depth=depth, width=c * growth, params=2 * depth * c * c * growth * growth, c=c)
    if bounds.params > Defaults.ARCH_LIMIT:
        raise BudgetError(f"MLFP size bound {bounds.params} overflows unsigned 64-bit (n = {n}, M = {M}, |A| = {a_count})")
    return bounds
