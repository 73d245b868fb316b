# serialization.py
from __future__ import annotations

import json
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from ann_core import Activation, Ann
from bellman import MdpModel, RewardNet
from constants import ActivationKind
from errors import MlfpException, ParseError
from fixed_point import DiscreteKernelInstance


logger = logging.getLogger(__name__)


# ----------------------------
# Raw json
# ----------------------------

def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid json at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ParseError(f"{path}: cannot read file ({e.strerror})") from e


def write_json(path: str, payload: Any):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def require(obj: Dict[str, Any], key: str, path: str, where: str = "") -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f'{path}: {where}missing field "{key}"')
    return obj[key]


def as_array(value: Any, ndim: int, path: str, what: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: {what} is not a numeric array") from e
    if arr.ndim != ndim:
        raise ParseError(f"{path}: {what} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


# ----------------------------
# Nets
# ----------------------------

def net_to_dict(net: Ann) -> Dict[str, Any]:
    return {
        "dims": list(net.dims),
        "layers": [{"W": W.tolist(), "B": B.tolist()} for W, B in net.layers],
    }


def net_from_dict(payload: Dict[str, Any], path: str) -> Ann:
    dims = require(payload, "dims", path)
    layers = require(payload, "layers", path)
    if not isinstance(layers, list) or not layers:
        raise ParseError(f'{path}: "layers" must be a nonempty list')
    if not isinstance(dims, list) or len(dims) != len(layers) + 1:
        raise ParseError(f'{path}: "dims" must list {len(layers) + 1} widths for {len(layers)} layers')

    parsed = []
    for k, layer in enumerate(layers, start=1):
        W = as_array(require(layer, "W", path, f"layer {k}: "), 2, path, f"layer {k} W")
        B = as_array(require(layer, "B", path, f"layer {k}: "), 1, path, f"layer {k} B")
        expected = (int(dims[k]), int(dims[k - 1]))
        if W.shape != expected:
            raise ParseError(f"{path}: layer {k}: W has shape {W.shape}, expected {expected}")
        if B.shape != (expected[0],):
            raise ParseError(f"{path}: layer {k}: B has length {B.shape[0]}, expected {expected[0]}")
        parsed.append((W, B))

    try:
        return Ann(tuple(parsed))
    except MlfpException as e:
        raise ParseError(f"{path}: {e}") from e


def export_net(net: Ann, path: str):
    '''canonical json: the same net always gives the same bytes'''
    write_json(path, net_to_dict(net))
    logger.info(f"[EXPORT] wrote {path} dims={net.dims}")


def import_net(path: str) -> Ann:
    return net_from_dict(read_json(path), path)


# ----------------------------
# Instances and models
# ----------------------------

def load_kernel_instance(path: str) -> DiscreteKernelInstance:
    '''
    {"states": [[...]], "actions": [...], "weights": [...], "transitions": [[[...]]]}
    weights are optional (w = 1)
    '''
    payload = read_json(path)
    states = as_array(require(payload, "states", path), 2, path, "states")
    transitions = as_array(require(payload, "transitions", path), 3, path, "transitions")
    actions = payload.get("actions")
    weights = payload.get("weights")
    if weights is not None:
        weights = as_array(weights, 1, path, "weights")
    try:
        return DiscreteKernelInstance(states, transitions, weights, tuple(actions) if actions is not None else None)
    except MlfpException as e:
        raise ParseError(f"{path}: {e}") from e


def kernel_instance_to_dict(inst: DiscreteKernelInstance) -> Dict[str, Any]:
    return {
        "states": inst.states.tolist(),
        "actions": list(inst.actions),
        "weights": inst.weight.tolist(),
        "transitions": inst.transition.tolist(),
    }


def model_activation(payload: Dict[str, Any], path: str) -> Activation:
    '''"activation" names the family (leaky_relu by default); "beta" is the leaky slope'''
    name = payload.get("activation", ActivationKind.LEAKY_RELU.kind_name)
    try:
        kind = ActivationKind.from_name(str(name))
    except KeyError as e:
        raise ParseError(f'{path}: unknown activation "{name}"') from e
    if kind is ActivationKind.SOFTPLUS:
        return Activation.softplus()
    return Activation.leaky_relu(float(payload.get("beta", 0.0)))


def load_mdp_model(path: str) -> MdpModel:
    '''model json; net paths are relative to the model file'''
    payload = read_json(path)
    base = os.path.dirname(path)

    def resolve(ref: Any, what: str) -> Ann:
        if not isinstance(ref, str):
            raise ParseError(f"{path}: {what} must be a file path, got {ref!r}")
        return import_net(os.path.join(base, ref))

    noise = require(payload, "noise", path)
    transition_refs: List[Any] = require(payload, "transition_nets", path)
    if not isinstance(transition_refs, list):
        raise ParseError(f'{path}: "transition_nets" must be a list of file paths')
    reward_table: Optional[np.ndarray] = None
    if payload.get("reward_table") is not None:
        reward_table = as_array(payload["reward_table"], 2, path, "reward_table")
    weights: Optional[np.ndarray] = None
    if payload.get("weights") is not None:
        weights = as_array(payload["weights"], 1, path, "weights")

    try:
        return MdpModel(
            name=str(payload.get("name", os.path.splitext(os.path.basename(path))[0])),
            states=as_array(require(payload, "states", path), 2, path, "states"),
            actions=tuple(require(payload, "actions", path)),
            discount=float(require(payload, "discount", path)),
            act=model_activation(payload, path),
            noise_atoms=as_array(require(noise, "atoms", path, "noise: "), 2, path, "noise atoms"),
            noise_probs=as_array(require(noise, "probs", path, "noise: "), 1, path, "noise probs"),
            reward=RewardNet(resolve(require(payload, "reward_net", path), "reward_net")),
            transition_nets=tuple(resolve(ref, f"transition_nets[{k}]") for k, ref in enumerate(transition_refs)),
            reward_table=reward_table,
            weight=weights,
        )
    except ParseError:
        raise
    except MlfpException as e:
        raise ParseError(f"{path}: {e}") from e
