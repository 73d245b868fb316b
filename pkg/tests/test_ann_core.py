import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from ann_core import Activation, Ann, ArchitectureDescriptor, affine_net, describe, param_count, random_net, realize, zero_net
from constants import ActivationKind, Defaults, Tolerances
from errors import InputShapeError, InvalidActivationError, ShapeError


def test_descriptor_read_off_layer_shapes():
    net = Ann(((np.ones((3, 2)), np.zeros(3)), (np.ones((1, 3)), np.zeros(1))))
    D = describe(net)

    assert D.dims == (2, 3, 1)
    assert D.depth == 2
    assert D.hidden_layers == 1
    assert (D.input_dim, D.output_dim) == (2, 1)
    assert D.dim_at(1) == 3
    assert D.dim_at(5) == 0


def test_single_layer_has_no_hidden_layers():
    D = describe(affine_net(np.eye(4)))
    assert D.dims == (4, 4)
    assert D.hidden_layers == 0


@pytest.mark.parametrize("dims, expected", [
    ((2, 3, 1), 13),
    ((5, 1), 6),
    ((1, 2, 2), 10),
])
def test_param_count(dims, expected):
    net = random_net(np.random.default_rng(1), dims)
    assert param_count(net) == expected
    assert ArchitectureDescriptor(dims).param_count == expected


def test_zero_net_params():
    assert param_count(zero_net(7, 1)) == 8


@seed(3)
@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=30), min_size=2, max_size=7))
def test_size_estimate(dims):
    D = ArchitectureDescriptor(tuple(dims))
    P, L, W = D.param_count, D.depth, D.width
    assert max(L, W) <= P <= 2 * L * W * W


def test_realize_identity_layer():
    x = np.array([1.5, -2.0, 0.25])
    assert np.array_equal(realize(affine_net(np.eye(3)), Activation.softplus(), x), x)


def test_realize_leaky_relu():
    net = Ann(((np.array([[1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))))
    out = realize(net, Activation.leaky_relu(0.1), np.array([-2.0]))
    assert out[0] == pytest.approx(-0.2)


def test_realize_softplus_identity_block():
    net = Ann((
        (np.array([[1.0], [-1.0]]), np.zeros(2)),
        (np.array([[1.0, -1.0]]), np.zeros(1)),
    ))
    assert realize(net, Activation.softplus(), np.array([1.7]))[0] == pytest.approx(1.7, abs=1e-12)


def test_depth_one_ignores_activation(rng):
    net = random_net(rng, (3, 2))
    x = rng.standard_normal((10, 3))
    want = x @ net.layers[0][0].T + net.layers[0][1]
    for act in (Activation.leaky_relu(0.0), Activation.leaky_relu(0.3), Activation.softplus()):
        assert np.allclose(realize(net, act, x), want, rtol=0, atol=1e-14)


def test_realize_batch_matches_rows(rng):
    net = random_net(rng, (2, 4, 3, 2))
    act = Activation.leaky_relu(0.2)
    x = rng.standard_normal((6, 2))
    batch = realize(net, act, x)
    for k in range(6):
        assert np.allclose(batch[k], realize(net, act, x[k]), rtol=0, atol=1e-13)


def test_realize_rejects_wrong_input(rng):
    net = random_net(rng, (2, 3, 1))
    with pytest.raises(InputShapeError):
        realize(net, Activation.softplus(), np.zeros(3))


def test_inconsistent_layers_name_the_layer():
    with pytest.raises(ShapeError, match="layer 2"):
        Ann(((np.ones((3, 2)), np.zeros(3)), (np.ones((1, 4)), np.zeros(1))))


def test_bias_length_checked():
    with pytest.raises(ShapeError, match="layer 1"):
        Ann(((np.ones((3, 2)), np.zeros(2)),))


def test_zero_width_rejected():
    with pytest.raises(ShapeError):
        Ann(((np.ones((0, 2)), np.zeros(0)),))
    with pytest.raises(ShapeError):
        ArchitectureDescriptor((2, 0, 1))


@pytest.mark.parametrize("beta", [1.0, -0.5, float("nan")])
def test_invalid_leaky_slope(beta):
    with pytest.raises(InvalidActivationError):
        Activation.leaky_relu(beta)


def test_activation_kinds():
    assert Activation.leaky_relu(0.5).is_leaky
    assert not Activation.softplus().is_leaky
    assert ActivationKind.from_name("Softplus") is ActivationKind.SOFTPLUS
    assert ActivationKind.LEAKY_RELU.builds_max
    assert not ActivationKind.SOFTPLUS.builds_max


def test_nets_are_immutable_values(rng):
    W = rng.standard_normal((2, 2))
    net = affine_net(W)
    W[0, 0] = 100.0
    assert net.layers[0][0][0, 0] != 100.0
    with pytest.raises(ValueError):
        net.layers[0][0][0, 0] = 1.0

    twin = affine_net(net.layers[0][0], net.layers[0][1])
    assert twin == net
    assert twin is not net
    with pytest.raises(TypeError):
        hash(net)


def test_constants_are_frozen():
    with pytest.raises(AttributeError):
        Tolerances.MASS = 1.0
    with pytest.raises(AttributeError):
        Defaults.SEED = 3
