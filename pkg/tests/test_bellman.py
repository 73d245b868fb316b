from dataclasses import replace

import numpy as np
import pytest

from ann_calculus import compose, unit_identity
from ann_core import Activation, affine_net, random_net, realize
from bellman import (
    MdpModel,
    RewardNet,
    accuracy_schedule,
    bellman_field,
    bellman_nonlinearity,
    build_F_from_G,
    build_q_net,
    build_shock_net,
    clamped_shift_net,
    describe_q_net,
    error_budget,
    estimate_l2_error,
    estimate_q_values,
    measured_constants,
    oracle_q,
    reward_error,
)
from errors import DomainError, InvalidActivationError, MeasureError, OracleDomainError, ScheduleError, ShapeError
from fixed_point import DiscreteMeasure, picard_solve
from mlfp import MlfpSchedule, accuracy_split, build_mlfp_net, min_budget
from streams import ThetaKey


RELU = Activation.leaky_relu(0.0)


def tiny_model(reward: float = 1.0, discount: float = 0.5) -> MdpModel:
    '''one state, one action, constant reward'''
    return MdpModel(
        name="single",
        states=[[0.0]],
        actions=("stay",),
        discount=discount,
        act=RELU,
        noise_atoms=[[0.0]],
        noise_probs=[1.0],
        reward=RewardNet(affine_net(np.zeros((1, 1)), [reward])),
        transition_nets=(affine_net(np.zeros((1, 2))),),
    )


def flip_model(discount: float = 0.5) -> MdpModel:
    '''two states swapped every step, g = (1, 0)'''
    return MdpModel(
        name="flip",
        states=[[0.0], [1.0]],
        actions=("flip",),
        discount=discount,
        act=RELU,
        noise_atoms=[[0.0]],
        noise_probs=[1.0],
        reward=RewardNet(affine_net([[-1.0]], [1.0])),
        transition_nets=(affine_net([[-1.0, 0.0]], [1.0]),),
    )


# nets

def test_shock_net():
    net = build_shock_net(2, [0.0, 0.0])
    assert net.dims == (2, 4)
    assert np.array_equal(realize(net, RELU, np.array([1.0, 2.0])), [1.0, 2.0, 0.0, 0.0])


def test_shock_net_feeds_the_transition(rng):
    t = random_net(rng, (4, 3, 2), 0.5)
    xi = rng.standard_normal(2)
    x = rng.standard_normal((20, 2))
    act = Activation.leaky_relu(0.3)
    got = realize(compose(t, build_shock_net(2, xi)), act, x)
    want = realize(t, act, np.hstack([x, np.tile(xi, (20, 1))]))
    assert np.allclose(got, want, rtol=0, atol=1e-12)


def test_shock_net_shape_error():
    with pytest.raises(ShapeError):
        build_shock_net(2, [1.0])


def test_clamped_shift():
    x = np.arange(16.0)
    for p in (-1.0, 0.0, 1.0, 2.0):
        inputs = np.column_stack([x, np.full(16, p)])
        out = realize(clamped_shift_net(-1.0, 0.0, 15.0), RELU, inputs)[:, 0]
        assert np.array_equal(out, np.clip(x + p - 1.0, 0.0, 15.0))


def test_F_for_zero_reward():
    G = RewardNet(affine_net(np.zeros((2, 1))))
    F = build_F_from_G(G, 0.5, 0.0)
    assert realize(F, RELU, np.array([3.0, 1.0, 2.0]))[0] == pytest.approx(1.0)
    #a depth-1 G is extended through the identity next to the one carrying r
    assert F.dims == (3, 8, 4, 1)


@pytest.mark.parametrize("a_count", [1, 2, 3, 5])
@pytest.mark.parametrize("beta", [0.0, 0.2])
@pytest.mark.parametrize("g_dims", [(2,), (2, 4), (2, 7, 3)])
def test_F_semantics(a_count, beta, g_dims):
    rng = np.random.default_rng([a_count, int(beta * 10), len(g_dims)])
    G = RewardNet(random_net(rng, g_dims + (a_count,)))
    act = Activation.leaky_relu(beta)
    F = build_F_from_G(G, 0.7, beta)

    x = rng.uniform(-2.0, 2.0, size=(1000, 2))
    r = rng.uniform(-2.0, 2.0, size=(1000, a_count))
    want = 0.7 * np.max(realize(G.net, act, x) + r, axis=1)
    assert F.dims[0] == 2 + a_count and F.dims[-1] == 1
    assert np.allclose(realize(F, act, np.hstack([x, r]))[:, 0], want, rtol=0, atol=1e-9)
    assert max(F.dims) <= 2 * a_count + max(2 * a_count, max(G.net.dims))
    if G.net.depth > 1:
        assert max(F.dims) <= 2 * a_count + max(G.net.dims)


# model

def test_model_validation():
    with pytest.raises(DomainError):
        tiny_model(discount=1.0)
    with pytest.raises(ShapeError):
        replace(tiny_model(), transition_nets=())
    with pytest.raises(ShapeError):
        replace(tiny_model(), reward=RewardNet(affine_net(np.zeros((2, 1)))))
    with pytest.raises(MeasureError):
        replace(tiny_model(), noise_probs=[0.5])
    with pytest.raises(ShapeError):
        replace(tiny_model(), weight=[1.0, 2.0])
    with pytest.raises(DomainError):
        replace(tiny_model(), weight=[0.0])


def test_grid_successors(grid_model):
    succ = grid_model.successor_table()
    assert succ.shape == (2, 16, 4)
    assert list(succ[0, 5]) == [3, 4, 5, 6]
    assert list(succ[0, 0]) == [0, 0, 0, 1]
    assert list(succ[1, 15]) == [15, 15, 15, 15]
    assert list(succ[1, 7]) == [7, 8, 9, 10]


def test_grid_kernel_rows(grid_model):
    inst = grid_model.kernel_instance()
    assert np.allclose(inst.transition[0, 5, 3:7], [0.2, 0.3, 0.3, 0.2])
    assert inst.actions == ("left", "right")


def test_grid_reward_net_is_exact(grid_model):
    assert reward_error(grid_model, grid_model.reward) == 0.0


# oracle

def test_oracle_zero_reward():
    assert np.array_equal(oracle_q(tiny_model(reward=0.0)).values, [[0.0]])


def test_oracle_single_state():
    assert oracle_q(tiny_model()).values[0, 0] == pytest.approx(2.0, abs=1e-11)


def test_oracle_flip_chain():
    q = oracle_q(flip_model()).values[:, 0]
    #q0 = 1 + q1 / 2, q1 = q0 / 2
    assert q == pytest.approx([4.0 / 3.0, 2.0 / 3.0], abs=1e-11)


def test_oracle_contracts(grid_model):
    updates = oracle_q(grid_model).updates
    for prev, nxt in zip(updates, updates[1:]):
        assert nxt <= grid_model.discount * prev + 1e-15


def test_oracle_needs_closed_grid():
    leaky = replace(tiny_model(), transition_nets=(affine_net(np.zeros((1, 2)), [0.5]),))
    with pytest.raises(OracleDomainError):
        oracle_q(leaky)
    with pytest.raises(DomainError):
        oracle_q(tiny_model(), tol=0.0)


def test_oracle_agrees_with_picard(grid_model):
    u = picard_solve(grid_model.kernel_instance(), bellman_nonlinearity(grid_model)).values
    q = oracle_q(grid_model).values
    assert np.allclose(u + grid_model.reward_values(), q, rtol=0, atol=1e-10)


# Q nets

def test_q_net_at_level_zero_is_G(grid_model):
    Q = build_q_net(grid_model, grid_model.reward, MlfpSchedule(M=2, n=0), 0, ThetaKey.root())
    G = realize(grid_model.reward.net, grid_model.act, grid_model.states)
    assert np.allclose(realize(Q, grid_model.act, grid_model.states), G, rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_q_net_decomposes(grid_model, n):
    model, G = grid_model, grid_model.reward
    sched = MlfpSchedule(M=2, n=n)
    theta = ThetaKey.root(4)
    Q = build_q_net(model, G, sched, 7, theta)

    F = build_F_from_G(G, model.discount, model.act.beta)
    psi = build_mlfp_net(bellman_field(model, 7), F, unit_identity(model.act), sched, theta)
    x = model.states
    assert np.allclose(realize(Q, model.act, x), realize(G.net, model.act, x) + realize(psi, model.act, x),
                       rtol=0, atol=1e-12)

    direct = estimate_q_values(model, G, sched, 7, theta)
    assert np.allclose(realize(Q, model.act, x), direct, rtol=1e-9, atol=1e-9)


def test_q_net_is_reproducible(grid_model):
    sched = MlfpSchedule(M=2, n=2)
    a = build_q_net(grid_model, grid_model.reward, sched, 3, ThetaKey.root(1))
    b = build_q_net(grid_model, grid_model.reward, sched, 3, ThetaKey.root(1))
    assert a == b
    assert a != build_q_net(grid_model, grid_model.reward, sched, 4, ThetaKey.root(1))


def test_q_net_report(grid_model):
    sched = MlfpSchedule(M=2, n=1)
    Q = build_q_net(grid_model, grid_model.reward, sched, 0, ThetaKey.root())
    report = describe_q_net(grid_model, grid_model.reward, sched, Q)
    assert report.size_estimate_holds
    assert report.depth == Q.depth
    assert report.params <= 2 * report.depth * report.width ** 2


def test_q_net_errors(grid_model):
    with pytest.raises(ScheduleError):
        build_q_net(grid_model, grid_model.reward, MlfpSchedule(M=2, n=1, lambda_ell=0.5), 0, ThetaKey.root())
    soft = replace(grid_model, act=Activation.softplus())
    with pytest.raises(InvalidActivationError):
        build_q_net(soft, soft.reward, MlfpSchedule(M=2, n=1), 0, ThetaKey.root())


# errors against the oracle

def test_l2_error_of_exact_table(grid_model):
    q = oracle_q(grid_model).values
    err = estimate_l2_error(q, grid_model, DiscreteMeasure.uniform(grid_model.states), oracle=q)
    assert err.max_norm == 0.0 and err.euclidean == 0.0


def test_l2_error_single_state_net():
    model = tiny_model()
    Q = affine_net(np.zeros((1, 1)), [2.0])
    err = estimate_l2_error(Q, model, DiscreteMeasure.point_mass([0.0]))
    assert err.max_norm == pytest.approx(0.0, abs=1e-11)


def test_l2_error_point_mass(grid_model):
    q = oracle_q(grid_model).values
    values = q.copy()
    values[3] += [0.1, -0.3]
    err = estimate_l2_error(values, grid_model, DiscreteMeasure.point_mass([3.0]), oracle=q)
    assert err.max_norm == pytest.approx(0.3)
    assert err.euclidean == pytest.approx(np.sqrt(0.1))


def test_l2_error_needs_grid_measure(grid_model):
    with pytest.raises(MeasureError):
        estimate_l2_error(grid_model.reward.net, grid_model, DiscreteMeasure.point_mass([0.5]))


def test_measured_constants(grid_model):
    mc = measured_constants(grid_model)
    assert mc.lipschitz_in_values == 0.5
    assert mc.lipschitz_in_state == pytest.approx(0.0625)
    assert mc.reward_sup == pytest.approx(1.0)
    assert mc.c_frak == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2])
def test_error_budget(grid_model, n):
    model = grid_model
    sched = accuracy_schedule(model, 0.5, M=26).with_level(n)
    assert sched.M == 26

    q = oracle_q(model).values
    mu = DiscreteMeasure.uniform(model.states)
    rmse = np.array([
        estimate_l2_error(estimate_q_values(model, model.reward, sched, s, ThetaKey.root()), model, mu, oracle=q).max_norm
        for s in range(4)
    ])
    se = rmse.std(ddof=1) / np.sqrt(len(rmse))
    assert rmse.mean() <= error_budget(model, model.reward, sched, mu, se)


def test_accuracy_schedule(grid_model):
    mc = measured_constants(grid_model)
    target = accuracy_split(0.5, mc.c_frak, grid_model.d)
    assert target == pytest.approx(0.25)

    sched = accuracy_schedule(grid_model, 0.5)
    assert sched.M == min_budget(0.5, grid_model.a_count) == 26
    assert sched.lambda_ell == 0.5
    assert sched.error_bound() <= target < sched.with_level(sched.n - 1).error_bound()
    assert accuracy_schedule(grid_model, 0.1).n > sched.n

    with pytest.raises(ScheduleError):
        accuracy_schedule(grid_model, 0.5, M=4)


@pytest.mark.slow
def test_error_shrinks_with_level(grid_model):
    model = grid_model
    q = oracle_q(model).values
    mu = DiscreteMeasure.uniform(model.states)

    def rmse(n):
        sched = MlfpSchedule(M=4, n=n)
        return np.array([
            estimate_l2_error(estimate_q_values(model, model.reward, sched, s, ThetaKey.root()), model, mu, oracle=q).max_norm
            for s in range(10)
        ])

    runs = {n: rmse(n) for n in range(1, 5)}
    mean = {n: v.mean() for n, v in runs.items()}
    se = {n: v.std(ddof=1) / np.sqrt(len(v)) for n, v in runs.items()}
    assert mean[4] < 0.5 * mean[1]
    for n in range(1, 4):
        assert mean[n + 1] <= mean[n] + 2.0 * np.hypot(se[n], se[n + 1])
