import numpy as np
import pytest

from ann_core import realize
from errors import DomainError, InvalidActivationError
from maxnet import max_activation, max_depth, max_net, pair_constants, pairwise_max_layer


BETAS = [0.0, 0.2, 0.5, 2.5]


def test_pair_max():
    net = pairwise_max_layer(2, 0.0)
    assert realize(net, max_activation(0.0), np.array([3.0, 7.0]))[0] == pytest.approx(7.0)


def test_odd_layer_passes_last_coordinate():
    net = pairwise_max_layer(3, 0.2)
    assert np.allclose(realize(net, max_activation(0.2), np.array([1.0, -1.0, 5.0])), [1.0, 5.0], rtol=0, atol=1e-12)


@pytest.mark.parametrize("n, dims", [(2, (2, 4, 1)), (4, (4, 8, 2)), (5, (5, 10, 3))])
def test_pairwise_layer_descriptor(n, dims):
    assert pairwise_max_layer(n, 0.0).dims == dims


def test_pair_constants_for_small_and_large_slopes():
    gamma, delta = pair_constants(0.0)
    assert (gamma, delta) == (1.0, 1.0)
    gamma, delta = pair_constants(2.5)
    assert delta == -1.0
    assert gamma == pytest.approx(1.5 / 7.875)


def test_max_net_examples():
    assert max_net(4, 0.0).depth == 3
    net = max_net(2, 0.5)
    assert realize(net, max_activation(0.5), np.array([-2.0, -9.0]))[0] == pytest.approx(-2.0)


@pytest.mark.parametrize("m", [2, 3, 7, 16])
def test_all_equal_inputs(m):
    net = max_net(m, 0.3)
    assert realize(net, max_activation(0.3), np.full(m, -1.25))[0] == pytest.approx(-1.25, abs=1e-12)


@pytest.mark.parametrize("beta", BETAS)
def test_max_net_is_exact(beta):
    rng = np.random.default_rng(7)
    act = max_activation(beta)
    for m in range(2, 65):
        x = rng.uniform(-10.0, 10.0, size=(500, m))
        err = np.abs(realize(max_net(m, beta), act, x)[:, 0] - x.max(axis=1)).max()
        assert err <= 1e-9, f"m={m}"


def test_depth_and_width():
    for m in range(2, 257):
        net = max_net(m, 0.0)
        assert net.depth == int(np.ceil(np.log2(m))) + 1 == max_depth(m)
        assert max(net.dims) <= 2 * m


def test_positive_homogeneity(rng):
    net = max_net(9, 0.1)
    act = max_activation(0.1)
    x = rng.uniform(-5, 5, (100, 9))
    assert np.allclose(realize(net, act, 3.0 * x), 3.0 * realize(net, act, x), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("beta", [1.0, 1.0 + 1e-7, -0.1])
def test_rejects_singular_slope(beta):
    with pytest.raises(InvalidActivationError):
        max_net(4, beta)


def test_rejects_small_inputs():
    with pytest.raises(DomainError):
        max_net(1, 0.0)
    with pytest.raises(DomainError):
        pairwise_max_layer(1, 0.0)
