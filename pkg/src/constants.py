'''constants.py'''

from enum import Enum


'''
----------------------
Activation Kinds
----------------------
'''

class ActivationKind(Enum):
  '''ActivationKind tags the activation family and whether it has exact max networks'''
  def __init__(self, kind_name: str, builds_max: bool):
    self.__kind_name = kind_name
    self.__builds_max = builds_max

  @property
  def kind_name(self): return self.__kind_name
  @property
  def builds_max(self): return self.__builds_max

  @classmethod
  def from_name(cls, name: str) -> "ActivationKind":
    for kind in cls:
      if kind.kind_name == name.strip().lower():
        return kind
    raise KeyError(name)


  LEAKY_RELU = ("leaky_relu", True)
  SOFTPLUS = ("softplus", False)


'''
----------------------
Frozen Numeric Settings
----------------------
'''

class FrozenMeta(type):
  '''cannot edit numeric settings check'''
  def __setattr__(cls, name, value):
    raise AttributeError(f"Cannot edit constant '{name}' in {cls.__name__}")


class Tolerances(metaclass = FrozenMeta):
  #probability masses and kernel rows must sum to one within this
  MASS = 1e-12

  #1-D quantile coupling vs transport LP
  W1_AGREEMENT = 1e-9

  #slack allowed on every checked inequality
  STABILITY_SLACK = 1e-9

  #leaky ReLU slopes this close to 1 make the max construction ill-conditioned
  BETA_SINGULAR = 1e-6

  #identity nets are checked on probes at construction
  IDENTITY_PROBE = 1e-9

  #next states must land on a grid state within this (sup norm)
  GRID_MATCH = 1e-9

  #compiled net vs direct recursion, relative to 1 + |value|
  EQUIVALENCE = 1e-9

  #calculus laws on random nets, relative to 1 + |value|
  ALGEBRA = 1e-12

  #max networks against np.max
  MAX_EXACT = 1e-9


class Defaults(metaclass = FrozenMeta):
  SEED = 0

  PICARD_TOL = 1e-12
  PICARD_MAX_ITERS = 100_000

  ORACLE_TOL = 1e-12
  ORACLE_MAX_ITERS = 100_000

  #exact transport LPs stay small
  W1_MAX_SUPPORT = 64

  IDENTITY_PROBES = 8

  #architecture arithmetic is checked against unsigned 64-bit
  ARCH_LIMIT = 2**64 - 1
  #sample counts are checked against signed 64-bit
  SAMPLE_LIMIT = 2**63

  #dense compilation refuses anything larger than this many parameters
  MAX_COMPILED_PARAMS = 20_000_000

  #mlfp-equiv compiles theta pairs only below this many parameters; larger nets check one pair
  INVARIANCE_PAIRS = 20
  INVARIANCE_PARAMS = 250_000

  #value grid used as probe set for sup over r
  PROBE_GRID = (-1.0, 0.0, 1.0)
