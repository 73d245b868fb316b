"""
Bellman pipeline: reward net G -> nonlinearity net F -> MLFP net Psi -> Q = G + Psi,
with a Q-value-iteration oracle on grid-closed finite-noise models to measure errors against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from ann_calculus import (
    compose,
    identity_stack,
    parallelize_mixed,
    scalar_mul,
    size_estimate_holds,
    sum_mixed_depth,
    sum_net,
    unit_identity,
)
from ann_core import Activation, Ann, affine_net, realize
from constants import Defaults, Tolerances
from errors import (
    ConvergenceError,
    DomainError,
    InvalidActivationError,
    MeasureError,
    OracleDomainError,
    ScheduleError,
    ShapeError,
)
from fixed_point import DiscreteKernelInstance, DiscreteMeasure, Nonlinearity
from maxnet import max_net
from mlfp import (
    MlfpSchedule,
    RandomFieldSpec,
    accuracy_split,
    build_mlfp_net,
    min_budget,
    mlfp_evaluate,
    mlfp_size_bounds,
    net_evaluator,
)
from streams import ThetaKey


logger = logging.getLogger(__name__)


# -----------------------
# Model
# -----------------------

@dataclass(frozen=True)
class RewardNet:
    '''G: R^d -> R^|A| together with the accuracy it was built for'''
    net: Ann
    eps: float = 0.0


@dataclass(frozen=True, eq=False)
class MdpModel:
    '''
    Grid of states in R^d, actions in declaration order (the first is the distinguished one),
    discount in (0, 1), finite noise on R^d and one transition net R^2d -> R^d per action.
    reward_table holds the true g on the grid; without it G is taken as exact. weight is w on the grid (1 by default).
    '''
    name: str
    states: np.ndarray
    actions: Tuple[str, ...]
    discount: float
    act: Activation
    noise_atoms: np.ndarray
    noise_probs: np.ndarray
    reward: RewardNet
    transition_nets: Tuple[Ann, ...]
    reward_table: Optional[np.ndarray] = None
    weight: Optional[np.ndarray] = None

    def __post_init__(self):
        states = np.array(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        d, A = states.shape[1], len(self.actions)
        atoms = np.array(self.noise_atoms, dtype=np.float64).reshape(-1, d)

        if not 0.0 < self.discount < 1.0:
            raise DomainError(f"discount must lie in (0, 1), got {self.discount}")
        #validates the noise law
        DiscreteMeasure(atoms, self.noise_probs)

        G = self.reward.net
        if G.input_dim != d or G.output_dim != A:
            raise ShapeError(f"reward net must map R^{d} to R^{A}, got {G.input_dim} -> {G.output_dim}")
        if len(self.transition_nets) != A:
            raise ShapeError(f"{len(self.transition_nets)} transition nets for {A} actions")
        dims = self.transition_nets[0].dims
        for k, net in enumerate(self.transition_nets):
            if net.dims != dims:
                raise ShapeError(f"transition net {k} has dims {net.dims}, expected the shared {dims}")
        if dims[0] != 2 * d or dims[-1] != d:
            raise ShapeError(f"transition nets must map R^{2 * d} to R^{d}, got {dims[0]} -> {dims[-1]}")

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "noise_atoms", atoms)
        object.__setattr__(self, "noise_probs", np.array(self.noise_probs, dtype=np.float64))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "transition_nets", tuple(self.transition_nets))
        weight = np.ones(states.shape[0]) if self.weight is None else np.array(self.weight, dtype=np.float64)
        if weight.shape != (states.shape[0],):
            raise ShapeError(f"weights must have one entry per state, got shape {weight.shape} for {states.shape[0]} states")
        if not np.all(weight > 0.0):
            raise DomainError("weights must be positive")
        object.__setattr__(self, "weight", weight)
        if self.reward_table is not None:
            table = np.array(self.reward_table, dtype=np.float64)
            if table.shape != (states.shape[0], A):
                raise ShapeError(f"reward table must have shape {(states.shape[0], A)}, got {table.shape}")
            object.__setattr__(self, "reward_table", table)

    @property
    def d(self) -> int:
        return self.states.shape[1]

    @property
    def a_count(self) -> int:
        return len(self.actions)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def reward_values(self) -> np.ndarray:
        '''true g on the grid'''
        if self.reward_table is not None:
            return self.reward_table
        return realize(self.reward.net, self.act, self.states)

    def sample_noise(self, rng: np.random.Generator) -> np.ndarray:
        return self.noise_atoms[rng.choice(len(self.noise_probs), p=self.noise_probs)]

    def transition(self, x: np.ndarray, xi: np.ndarray, a: int) -> np.ndarray:
        '''t^(a)(x, xi) for a batch of states'''
        shocks = np.broadcast_to(xi, (x.shape[0], self.d))
        return realize(self.transition_nets[a], self.act, np.hstack([x, shocks]))

    def grid_index(self, points: np.ndarray) -> np.ndarray:
        '''grid positions of points, or -1 where no grid state is within the match tolerance'''
        gaps = np.abs(points[:, None, :] - self.states[None, :, :]).max(axis=2)
        idx = gaps.argmin(axis=1)
        idx[gaps[np.arange(points.shape[0]), idx] > Tolerances.GRID_MATCH] = -1
        return idx

    def successor_table(self) -> np.ndarray:
        '''succ[a, s, k]: grid index of t^(a)(s, atom k)'''
        succ = np.empty((self.a_count, self.n_states, len(self.noise_probs)), dtype=np.int64)
        for a in range(self.a_count):
            for k, atom in enumerate(self.noise_atoms):
                landed = self.transition(self.states, atom, a)
                idx = self.grid_index(landed)
                if np.any(idx < 0):
                    s = int(np.argmin(idx))
                    raise OracleDomainError(
                        f"{self.name}: action {self.actions[a]} moves state {self.states[s]} with noise {atom} "
                        f"to {landed[s]}, which is not a grid state"
                    )
                succ[a, :, k] = idx
        return succ

    def kernel_instance(self) -> DiscreteKernelInstance:
        '''the grid model as a finite kernel: kappa^(a)(s, s') = P(t^(a)(s, xi) = s')'''
        succ = self.successor_table()
        transition = np.zeros((self.a_count, self.n_states, self.n_states))
        for a in range(self.a_count):
            for k, p in enumerate(self.noise_probs):
                np.add.at(transition[a], (np.arange(self.n_states), succ[a, :, k]), p)
        return DiscreteKernelInstance(self.states, transition, self.weight, self.actions)


def clamped_shift_net(shift: float, lo: float, hi: float) -> Ann:
    '''(x, p) -> clamp(x + p + shift, lo, hi) on R, exact for ReLU (beta = 0)'''
    return Ann((
        (np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([shift - lo, shift - hi])),
        (np.array([[1.0, -1.0]]), np.array([lo])),
    ))


# -----------------------
# Networks
# -----------------------

def build_shock_net(x_dim: int, xi_sample) -> Ann:
    '''x -> (x, xi), descriptor (d, 2d)'''
    xi = np.asarray(xi_sample, dtype=np.float64).reshape(-1)
    if xi.shape[0] != x_dim:
        raise ShapeError(f"shock must have {x_dim} entries, got {xi.shape[0]}")
    W = np.vstack([np.eye(x_dim), np.zeros((x_dim, x_dim))])
    B = np.concatenate([np.zeros(x_dim), xi])
    return affine_net(W, B)


def build_F_from_G(G: RewardNet, discount: float, beta: float) -> Ann:
    '''
    F(x, r) = discount * max_a (G(x)(a) + r(a)).
    Width is at most 2|A| + max{2|A|, |||D(G)|||}; a depth-1 G is extended through the identity,
    which adds a hidden layer of width 2|A| next to the one carrying r.
    '''
    act = Activation.leaky_relu(beta)
    A = G.net.output_dim
    ident_a = identity_stack(unit_identity(act), A)

    paired = parallelize_mixed([G.net, ident_a.net], [ident_a, ident_a])
    summed = compose(sum_net(A, 2), paired)
    top = max_net(A, beta) if A >= 2 else affine_net(np.eye(1))
    return scalar_mul(discount, compose(top, summed))


def net_field(
    master_seed: int,
    transition_nets: Sequence[Ann],
    act: Activation,
    noise,
) -> RandomFieldSpec:
    '''X_a^theta = t^(a) after the shock net of xi^theta'''
    nets = tuple(transition_nets)
    d = nets[0].output_dim

    def transition(x: np.ndarray, xi: np.ndarray, a: int) -> np.ndarray:
        shocks = np.broadcast_to(xi, (x.shape[0], xi.shape[0]))
        return realize(nets[a], act, np.hstack([x, shocks]))

    def net_form(xi: np.ndarray, a: int) -> Ann:
        return compose(nets[a], build_shock_net(d, xi))

    return RandomFieldSpec(master_seed, d, len(nets), noise, transition, net_form)


def bellman_field(model: MdpModel, master_seed: int) -> RandomFieldSpec:
    return net_field(master_seed, model.transition_nets, model.act, model.sample_noise)


def bellman_nonlinearity(model: MdpModel) -> Nonlinearity:
    '''f(y, r) = discount * max_a (g(y)(a) + r(a)) on grid states'''
    g = model.reward_values()

    def f(y: np.ndarray, r: np.ndarray) -> float:
        idx = model.grid_index(y.reshape(1, -1))[0]
        if idx < 0:
            raise OracleDomainError(f"{model.name}: {y} is not a grid state")
        return model.discount * float(np.max(g[idx] + r))

    return Nonlinearity(f, model.discount)


def _check_schedule(model: MdpModel, sched: MlfpSchedule):
    floor = min_budget(sched.lambda_ell, model.a_count)
    if sched.M < floor:
        raise ScheduleError(f"budget M = {sched.M} is below the admissible {floor} for lambda * ell = {sched.lambda_ell}")


def build_q_net(model: MdpModel, G: RewardNet, sched: MlfpSchedule, master_seed: int, theta: ThetaKey) -> Ann:
    '''Q = G (+) Psi with Psi the compiled MLFP net for F = build_F_from_G(G)'''
    if not model.act.kind.builds_max:
        raise InvalidActivationError(f"the Bellman pipeline needs exact max networks, which {model.act.describe()} does not build")
    _check_schedule(model, sched)

    F = build_F_from_G(G, model.discount, model.act.beta)
    unit = unit_identity(model.act)
    psi = build_mlfp_net(bellman_field(model, master_seed), F, unit, sched, theta)
    Q = sum_mixed_depth([G.net, psi], identity_stack(unit, model.a_count))
    logger.info(f"[QNET] {model.name}: depth {Q.depth}, width {max(Q.dims)}")
    return Q


@dataclass(frozen=True)
class QNetReport:
    params: int
    depth: int
    width: int
    size_estimate_holds: bool
    mlfp_param_bound: int


def describe_q_net(model: MdpModel, G: RewardNet, sched: MlfpSchedule, Q: Ann) -> QNetReport:
    '''parameter count of Q next to the closed-form bounds it must respect'''
    F = build_F_from_G(G, model.discount, model.act.beta)
    X_dims = compose(model.transition_nets[0], build_shock_net(model.d, np.zeros(model.d))).dims
    bounds = mlfp_size_bounds(F.dims, X_dims, model.d, model.a_count, sched.M, sched.n)
    params = sum(W.size + B.size for W, B in Q.layers)
    return QNetReport(params, Q.depth, max(Q.dims), size_estimate_holds(Q.dims), bounds.params)


def estimate_q_values(
    model: MdpModel,
    G: RewardNet,
    sched: MlfpSchedule,
    master_seed: int,
    theta: ThetaKey,
    states: Optional[np.ndarray] = None,
) -> np.ndarray:
    '''G(x) + U_n(x) by direct evaluation on a batch of states (the grid by default)'''
    states = model.states if states is None else np.asarray(states, dtype=np.float64)
    F = build_F_from_G(G, model.discount, model.act.beta)
    field = bellman_field(model, master_seed)
    u = mlfp_evaluate(field, net_evaluator(F, model.act), sched, theta, states)
    return realize(G.net, model.act, states) + u


# -----------------------
# Oracle and errors
# -----------------------

@dataclass(frozen=True)
class OracleResult:
    values: np.ndarray
    iterations: int
    updates: Tuple[float, ...]


def oracle_q(model: MdpModel, tol: float = Defaults.ORACLE_TOL, max_iters: int = Defaults.ORACLE_MAX_ITERS) -> OracleResult:
    '''q = g + discount sum_k p_k max_b q(t^(a)(s, xi_k), b) by Q-value iteration from q = 0'''
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    succ = model.successor_table()
    g = model.reward_values()
    delta = model.discount
    stop = tol * (1.0 - delta) / delta

    q = np.zeros_like(g)
    updates = []
    for it in range(1, max_iters + 1):
        v = q.max(axis=1)
        new = g + delta * (v[succ] @ model.noise_probs).T
        update = float(np.abs(new - q).max())
        updates.append(update)
        q = new
        if update <= stop:
            break
    else:
        raise ConvergenceError(f"{model.name}: value iteration did not settle in {max_iters} steps")

    logger.debug(f"[ORACLE] {model.name}: {it} sweeps, last update {updates[-1]:.3e}")
    return OracleResult(q, it, tuple(updates))


@dataclass(frozen=True)
class L2Error:
    max_norm: float
    euclidean: float


def estimate_l2_error(
    Q: Union[Ann, np.ndarray],
    model: MdpModel,
    mu: DiscreteMeasure,
    oracle: Optional[np.ndarray] = None,
) -> L2Error:
    '''
    (sum_x mu(x) max_a |q(x)(a) - Q(x)(a)|^2)^1/2, with the Euclidean action norm reported alongside.
    Q is a net or a table of values on the grid.
    '''
    idx = model.grid_index(mu.support)
    if mu.dim != model.d or np.any(idx < 0):
        raise MeasureError(f"{model.name}: the error measure must live on grid states")
    q = oracle_q(model).values if oracle is None else oracle
    values = realize(Q, model.act, model.states) if isinstance(Q, Ann) else np.asarray(Q, dtype=np.float64)
    err = (q - values)[idx]
    return L2Error(
        max_norm=float(np.sqrt(mu.mass @ np.max(err ** 2, axis=1))),
        euclidean=float(np.sqrt(mu.mass @ np.sum(err ** 2, axis=1))),
    )


@dataclass(frozen=True)
class MeasuredConstants:
    c_frak: float
    lipschitz_in_values: float
    lipschitz_in_state: float
    reward_sup: float


def measured_constants(model: MdpModel) -> MeasuredConstants:
    '''max{1, lambda, K, sup |g| / w} with K = discount times the grid Lipschitz constant of g'''
    g = model.reward_values()
    K = 0.0
    for i in range(model.n_states):
        for j in range(i + 1, model.n_states):
            dist = float(np.linalg.norm(model.states[i] - model.states[j]))
            K = max(K, float(np.abs(g[i] - g[j]).max()) / dist)
    K *= model.discount
    sup_g = float((np.abs(g) / model.weight[:, None]).max())
    return MeasuredConstants(max(1.0, model.discount, K, sup_g), model.discount, K, sup_g)


def reward_error(model: MdpModel, G: RewardNet) -> float:
    '''sup over the grid of |g - G|'''
    return float(np.abs(model.reward_values() - realize(G.net, model.act, model.states)).max())


def error_budget(model: MdpModel, G: RewardNet, sched: MlfpSchedule, mu: DiscreteMeasure, mc_se: float) -> float:
    '''eps_G / (1 - discount) + gamma alpha^n (int w^2 dmu)^1/2 + 4 SE'''
    idx = model.grid_index(mu.support)
    if np.any(idx < 0):
        raise MeasureError(f"{model.name}: the error measure must live on grid states")
    w_moment = float(np.sqrt(mu.mass @ model.weight[idx] ** 2))
    stability = 1.0 / (1.0 - model.discount)
    return reward_error(model, G) * stability + sched.error_bound() * w_moment + 4.0 * mc_se


def accuracy_schedule(model: MdpModel, eps: float, M: Optional[int] = None) -> MlfpSchedule:
    '''
    Schedule for an overall accuracy eps: the MLFP level is chosen for eps (1 + c^2 d^2c)^-1,
    the rest of eps is left to the reward net. c comes from measured_constants.
    '''
    mc = measured_constants(model)
    target = accuracy_split(eps, mc.c_frak, model.d)
    sched = MlfpSchedule.derive(mc.lipschitz_in_values, model.a_count, mc.c_frak, target, M=M)
    logger.info(f"[QNET] {model.name}: eps {eps} leaves {target:.4g} to the MLFP level; M = {sched.M}, n = {sched.n}")
    return sched
