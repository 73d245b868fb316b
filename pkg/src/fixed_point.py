"""
Finite-instance oracles for stochastic fixed point equations

    u(x)(a) = sum_y kappa^(a)(x, y) f(y, u(y))

with Wasserstein-1 distances between kernel rows, a Picard solver in the weighted sup
norm, and numerical checks of the stability and Lipschitz estimates for the solutions.
All constants (c, L, K, eta) are established by enumeration over the instance.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import ot
from scipy.stats import wasserstein_distance

from constants import Defaults, Tolerances
from errors import ConvergenceError, DomainError, MeasureError, NoContractionError, ShapeError


logger = logging.getLogger(__name__)


# -----------------------
# Measures and W1
# -----------------------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    '''finitely supported probability measure on R^d'''
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        support = np.array(self.support, dtype=np.float64)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        mass = np.array(self.mass, dtype=np.float64).reshape(-1)

        if support.ndim != 2 or support.shape[0] != mass.shape[0] or mass.shape[0] == 0:
            raise MeasureError(f"support of shape {support.shape} does not match {mass.shape[0]} masses")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0.0):
            raise MeasureError(f"masses must be finite and nonnegative, got {mass}")
        if abs(mass.sum() - 1.0) > Tolerances.MASS:
            raise MeasureError(f"masses sum to {mass.sum()!r}, expected 1")
        if np.unique(support, axis=0).shape[0] != support.shape[0]:
            raise MeasureError("support points must be distinct")

        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def point_mass(cls, x) -> DiscreteMeasure:
        return cls(np.atleast_2d(np.asarray(x, dtype=np.float64)), np.ones(1))

    @classmethod
    def uniform(cls, points) -> DiscreteMeasure:
        points = np.asarray(points, dtype=np.float64)
        n = points.shape[0]
        return cls(points, np.full(n, 1.0 / n))

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def size(self) -> int:
        return self.support.shape[0]


def w1_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, method: str = "auto") -> float:
    '''
    Wasserstein-1 distance with Euclidean cost.
    method "lp" solves the transport LP exactly, "quantile" integrates |F - G| (d = 1 only),
    "auto" picks quantile in one dimension.
    '''
    if mu.dim != nu.dim:
        raise MeasureError(f"measures live in different dimensions: {mu.dim} vs {nu.dim}")
    if max(mu.size, nu.size) > Defaults.W1_MAX_SUPPORT:
        raise MeasureError(f"supports of size {mu.size} and {nu.size} exceed {Defaults.W1_MAX_SUPPORT}")

    if method == "auto":
        method = "quantile" if mu.dim == 1 else "lp"

    if method == "quantile":
        if mu.dim != 1:
            raise MeasureError(f"the quantile coupling needs d = 1, got d = {mu.dim}")
        value = wasserstein_distance(mu.support[:, 0], nu.support[:, 0], mu.mass, nu.mass)
    elif method == "lp":
        cost = ot.dist(mu.support, nu.support, metric="euclidean")
        value = ot.emd2(np.ascontiguousarray(mu.mass), np.ascontiguousarray(nu.mass), cost)
    else:
        raise DomainError(f'unknown W1 method "{method}"')
    return max(float(value), 0.0)


# -----------------------
# Instances and nonlinearities
# -----------------------

@dataclass(frozen=True, eq=False)
class DiscreteKernelInstance:
    '''finite states, one row-stochastic matrix per action, positive weights'''
    states: np.ndarray
    transition: np.ndarray
    weight: Optional[np.ndarray] = None
    actions: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        states = np.array(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        transition = np.array(self.transition, dtype=np.float64)
        n = states.shape[0]

        if transition.ndim != 3 or transition.shape[1:] != (n, n):
            raise ShapeError(f"transitions must have shape (|A|, {n}, {n}), got {transition.shape}")
        if np.any(transition < 0.0):
            raise MeasureError("transition probabilities must be nonnegative")
        row_error = np.abs(transition.sum(axis=2) - 1.0).max()
        if row_error > Tolerances.MASS:
            raise MeasureError(f"transition rows must sum to 1, worst row is off by {row_error!r}")
        if np.unique(states, axis=0).shape[0] != n:
            raise DomainError("instance states must be distinct")

        weight = np.ones(n) if self.weight is None else np.array(self.weight, dtype=np.float64).reshape(-1)
        if weight.shape != (n,) or np.any(weight <= 0.0):
            raise DomainError(f"weights must be {n} strictly positive values")

        actions = self.actions
        if actions is None:
            actions = tuple(f"a{k}" for k in range(transition.shape[0]))
        if len(actions) != transition.shape[0]:
            raise ShapeError(f"{len(actions)} action names for {transition.shape[0]} transition matrices")

        for arr in (states, transition, weight):
            arr.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "actions", tuple(actions))

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def kernel_row(self, action: int, state: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.states, self.transition[action, state])

    def shares_layout(self, other: DiscreteKernelInstance) -> bool:
        return (
            self.states.shape == other.states.shape
            and np.array_equal(self.states, other.states)
            and self.n_actions == other.n_actions
            and np.array_equal(self.weight, other.weight)
        )


@dataclass(frozen=True)
class Nonlinearity:
    '''f(y, r) with y a state and r one value per action'''
    eval: Callable[[np.ndarray, np.ndarray], float]
    lipschitz_in_values: float
    lipschitz_in_state: Optional[float] = None

    def __call__(self, y, r) -> float:
        return float(self.eval(np.asarray(y, dtype=np.float64), np.asarray(r, dtype=np.float64)))

    def on_states(self, states: np.ndarray, values: np.ndarray) -> np.ndarray:
        return np.array([self(y, r) for y, r in zip(states, values)])

    def shifted(self, shift: Callable[[np.ndarray], float]) -> Nonlinearity:
        '''f(y, r) + shift(y), same value Lipschitz constant'''
        base = self.eval
        return Nonlinearity(lambda y, r: base(y, r) + shift(y), self.lipschitz_in_values)


def max_plus_nonlinearity(h: Callable[[np.ndarray], float], scale: float) -> Nonlinearity:
    '''f(y, r) = h(y) + scale * max_a r(a)'''
    return Nonlinearity(lambda y, r: h(y) + scale * np.max(r), abs(scale))


def affine_nonlinearity(h: Callable[[np.ndarray], float], coeffs) -> Nonlinearity:
    '''f(y, r) = h(y) + <coeffs, r>'''
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return Nonlinearity(lambda y, r: h(y) + float(coeffs @ r), float(np.abs(coeffs).sum()))


# -----------------------
# Constants by enumeration
# -----------------------

@dataclass(frozen=True)
class StabilityConstants:
    c: float
    L: float
    K: float
    eta: float

    def as_dict(self) -> Dict[str, float]:
        return {"c": self.c, "L": self.L, "K": self.K, "eta": self.eta}


def weighted_sup(values: np.ndarray, weight: np.ndarray) -> float:
    '''sup over (x, a) of |values(x)(a)| / w(x)'''
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    return float((np.abs(values) / weight[:, None]).max())


def contraction_constant(inst: DiscreteKernelInstance) -> float:
    '''c = max over (x, a) of sum_y kappa(x, y) w(y) / w(x)'''
    return float(((inst.transition @ inst.weight) / inst.weight[None, :]).max())


def kernel_lipschitz_constant(inst: DiscreteKernelInstance) -> float:
    '''eta = max over a and state pairs of W1(kappa(x), kappa(y)) / |x - y|'''
    eta = 0.0
    for a in range(inst.n_actions):
        for i, j in itertools.combinations(range(inst.n_states), 2):
            dist = float(np.linalg.norm(inst.states[i] - inst.states[j]))
            w1 = w1_discrete(inst.kernel_row(a, i), inst.kernel_row(a, j))
            eta = max(eta, w1 / dist)
    return eta


def probe_values(inst: DiscreteKernelInstance, tables: Sequence[np.ndarray] = ()) -> np.ndarray:
    '''axis grid of value vectors plus every row of the given value tables'''
    grid = np.array(list(itertools.product(Defaults.PROBE_GRID, repeat=inst.n_actions)), dtype=np.float64)
    rows = [grid] + [np.asarray(t, dtype=np.float64).reshape(-1, inst.n_actions) for t in tables]
    return np.unique(np.vstack(rows), axis=0)


def _table(inst: DiscreteKernelInstance, f: Nonlinearity, probes: np.ndarray) -> np.ndarray:
    return np.array([[f(y, r) for r in probes] for y in inst.states])


def value_lipschitz_constant(inst: DiscreteKernelInstance, f: Nonlinearity, probes: np.ndarray) -> float:
    '''max of |f(y, r) - f(y, s)| / max_a |r(a) - s(a)| over states and probe pairs'''
    fv = _table(inst, f, probes)
    gaps = np.abs(probes[:, None, :] - probes[None, :, :]).max(axis=2)
    np.fill_diagonal(gaps, np.inf)
    ratios = np.abs(fv[:, :, None] - fv[:, None, :]) / gaps[None, :, :]
    return float(ratios.max()) if probes.shape[0] > 1 else 0.0


def state_lipschitz_constant(inst: DiscreteKernelInstance, f: Nonlinearity, probes: np.ndarray) -> float:
    '''max of |f(x, r) - f(y, r)| / |x - y| over state pairs and probes'''
    if inst.n_states < 2:
        return 0.0
    fv = _table(inst, f, probes)
    dist = np.linalg.norm(inst.states[:, None, :] - inst.states[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    ratios = np.abs(fv[:, None, :] - fv[None, :, :]) / dist[:, :, None]
    return float(ratios.max())


def _resolve(name: str, declared: Optional[float], enumerated: float) -> float:
    '''declared constants are accepted only if enumeration does not exceed them'''
    if declared is None:
        return enumerated
    if enumerated > declared + Tolerances.STABILITY_SLACK:
        raise DomainError(f"declared {name} = {declared} is below the enumerated value {enumerated}")
    return float(declared)


# -----------------------
# Picard iteration
# -----------------------

@dataclass(frozen=True)
class PicardResult:
    values: np.ndarray
    iterations: int
    updates: Tuple[float, ...]
    contraction: float


def apply_operator(inst: DiscreteKernelInstance, f: Nonlinearity, u: np.ndarray) -> np.ndarray:
    '''(Tu)(x)(a) = sum_y kappa^(a)(x, y) f(y, u(y))'''
    return (inst.transition @ f.on_states(inst.states, u)).T


def picard_solve(
    inst: DiscreteKernelInstance,
    f: Nonlinearity,
    c: Optional[float] = None,
    tol: float = Defaults.PICARD_TOL,
    max_iters: int = Defaults.PICARD_MAX_ITERS,
) -> PicardResult:
    '''
    Iterates from u_0 = 0 until the weighted-sup update drops below tol (1 - cL) / (cL),
    which puts the iterate within tol of the fixed point.
    '''
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    c = contraction_constant(inst) if c is None else _resolve("c", c, contraction_constant(inst))
    q = c * f.lipschitz_in_values
    if q >= 1.0:
        raise NoContractionError(f"c L = {q} >= 1 (c = {c}, L = {f.lipschitz_in_values})")

    stop = tol * (1.0 - q) / q if q > 0.0 else np.inf
    u = np.zeros((inst.n_states, inst.n_actions))
    updates = []
    for it in range(1, max_iters + 1):
        new = apply_operator(inst, f, u)
        update = weighted_sup(new - u, inst.weight)
        updates.append(update)
        u = new
        if update <= stop:
            break
    else:
        raise ConvergenceError(f"Picard iteration did not settle in {max_iters} steps (last update {updates[-1]})")

    logger.debug(f"[PICARD] {it} iterations, cL = {q:.6g}, last update {updates[-1]:.3e}")
    u.setflags(write=False)
    return PicardResult(values=u, iterations=it, updates=tuple(updates), contraction=q)


def picard_residual(inst: DiscreteKernelInstance, f: Nonlinearity, u: np.ndarray) -> float:
    return weighted_sup(u - apply_operator(inst, f, u), inst.weight)


# -----------------------
# Stability checks
# -----------------------

@dataclass
class StabilityReport:
    name: str
    lhs: float
    rhs: float
    passed: bool
    constants: Dict[str, float] = field(default_factory=dict)
    combined: Optional[StabilityReport] = None

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def as_row(self) -> Dict[str, object]:
        return {"check": self.name, "lhs": self.lhs, "rhs": self.rhs, "passed": self.passed}


def _report(name: str, lhs: float, rhs: float, constants: Dict[str, float]) -> StabilityReport:
    passed = lhs <= rhs + Tolerances.STABILITY_SLACK
    if not passed:
        logger.warning(f"[STABILITY] {name} failed: lhs {lhs!r} > rhs {rhs!r}")
    return StabilityReport(name, float(lhs), float(rhs), bool(passed), constants)


def _sup_f_gap(inst, f1: Nonlinearity, f2: Nonlinearity, probes: np.ndarray) -> float:
    gap = np.abs(_table(inst, f1, probes) - _table(inst, f2, probes))
    return float((gap / inst.weight[:, None]).max())


def _sup_w1_gap(inst1: DiscreteKernelInstance, inst2: DiscreteKernelInstance) -> float:
    best = 0.0
    for b in range(inst1.n_actions):
        for y in range(inst1.n_states):
            best = max(best, w1_discrete(inst1.kernel_row(b, y), inst2.kernel_row(b, y)) / inst1.weight[y])
    return best


def _check_layout(inst1: DiscreteKernelInstance, inst2: DiscreteKernelInstance):
    if not inst1.shares_layout(inst2):
        raise ShapeError("instances must share states, weights and the number of actions")


def check_nonlinearity_stability(
    inst: DiscreteKernelInstance,
    f1: Nonlinearity,
    f2: Nonlinearity,
    c: Optional[float] = None,
) -> StabilityReport:
    '''sup |u1 - u2| / w <= c / (1 - c min{L1, L2}) sup |f1 - f2| / w'''
    c = contraction_constant(inst) if c is None else _resolve("c", c, contraction_constant(inst))
    u1 = picard_solve(inst, f1, c).values
    u2 = picard_solve(inst, f2, c).values

    probes = probe_values(inst, [u1, u2])
    L1 = _resolve("L1", f1.lipschitz_in_values, value_lipschitz_constant(inst, f1, probes))
    L2 = _resolve("L2", f2.lipschitz_in_values, value_lipschitz_constant(inst, f2, probes))

    lhs = weighted_sup(u1 - u2, inst.weight)
    rhs = c / (1.0 - c * min(L1, L2)) * _sup_f_gap(inst, f1, f2, probes)
    return _report("nonlinearity", lhs, rhs, {"c": c, "L1": L1, "L2": L2})


def resolve_constants(
    inst1: DiscreteKernelInstance,
    inst2: DiscreteKernelInstance,
    f: Nonlinearity,
    probes: np.ndarray,
    constants: Optional[StabilityConstants] = None,
) -> StabilityConstants:
    '''enumerated c, L, K, eta; caller-supplied values are verified against them'''
    c = max(contraction_constant(inst1), contraction_constant(inst2))
    eta = kernel_lipschitz_constant(inst2)
    L = _resolve("L", f.lipschitz_in_values, value_lipschitz_constant(inst1, f, probes))
    K = _resolve("K", f.lipschitz_in_state, state_lipschitz_constant(inst1, f, probes))
    if constants is None:
        return StabilityConstants(c=c, L=L, K=K, eta=eta)
    return StabilityConstants(
        c=_resolve("c", constants.c, c),
        L=_resolve("L", constants.L, L),
        K=_resolve("K", constants.K, K),
        eta=_resolve("eta", constants.eta, eta),
    )


def _require_contraction(**products):
    for name, value in products.items():
        if value >= 1.0:
            raise NoContractionError(f"{name} = {value} >= 1")


def check_kernel_stability(
    inst1: DiscreteKernelInstance,
    inst2: DiscreteKernelInstance,
    f: Nonlinearity,
    constants: Optional[StabilityConstants] = None,
    f_first: Optional[Nonlinearity] = None,
) -> StabilityReport:
    '''
    sup |u1 - u2| / w <= K / ((1 - eta L)(1 - c L)) sup W1(kappa1, kappa2) / w,
    eta measured on the second kernel. With f_first the combined bound for
    (f_first, kappa1) against (f, kappa2) is attached as report.combined.
    '''
    _check_layout(inst1, inst2)
    c = max(contraction_constant(inst1), contraction_constant(inst2))
    u1 = picard_solve(inst1, f, c).values
    u2 = picard_solve(inst2, f, c).values

    probes = probe_values(inst1, [u1, u2])
    k = resolve_constants(inst1, inst2, f, probes, constants)
    _require_contraction(cL=k.c * k.L, etaL=k.eta * k.L)

    lhs = weighted_sup(u1 - u2, inst1.weight)
    rhs = k.K / ((1.0 - k.eta * k.L) * (1.0 - k.c * k.L)) * _sup_w1_gap(inst1, inst2)
    report = _report("kernel", lhs, rhs, k.as_dict())
    if f_first is not None:
        report.combined = check_combined_stability(inst1, inst2, f_first, f)
    return report


def check_combined_stability(
    inst1: DiscreteKernelInstance,
    inst2: DiscreteKernelInstance,
    f1: Nonlinearity,
    f2: Nonlinearity,
) -> StabilityReport:
    '''
    sup |u1 - u2| / w <= c / (1 - c min{L1, L2}) sup |f1 - f2| / w
                       + K / ((1 - eta L2)(1 - c L2)) sup W1(kappa1, kappa2) / w
    with K from f2 and eta from kappa2.
    '''
    _check_layout(inst1, inst2)
    c = max(contraction_constant(inst1), contraction_constant(inst2))
    u1 = picard_solve(inst1, f1, c).values
    u2 = picard_solve(inst2, f2, c).values
    #(f2, kappa1) sits between the two problems
    v = picard_solve(inst1, f2, c).values

    probes = probe_values(inst1, [u1, u2, v])
    k2 = resolve_constants(inst1, inst2, f2, probes)
    L1 = _resolve("L1", f1.lipschitz_in_values, value_lipschitz_constant(inst1, f1, probes))
    _require_contraction(cL1=c * L1, cL2=c * k2.L, etaL2=k2.eta * k2.L)

    nonlinearity_term = c / (1.0 - c * min(L1, k2.L)) * _sup_f_gap(inst1, f1, f2, probes)
    kernel_term = k2.K / ((1.0 - k2.eta * k2.L) * (1.0 - c * k2.L)) * _sup_w1_gap(inst1, inst2)
    lhs = weighted_sup(u1 - u2, inst1.weight)
    return _report("combined", lhs, nonlinearity_term + kernel_term,
                   {"c": c, "L1": L1, "L2": k2.L, "K": k2.K, "eta": k2.eta})


def check_solution_lipschitz(
    inst: DiscreteKernelInstance,
    f: Nonlinearity,
    constants: Optional[StabilityConstants] = None,
) -> StabilityReport:
    '''|u(x)(a) - u(y)(a)| <= eta K / (1 - eta L) |x - y| for all state pairs and actions'''
    c = contraction_constant(inst)
    u = picard_solve(inst, f, c).values
    probes = probe_values(inst, [u])
    k = resolve_constants(inst, inst, f, probes, constants)
    _require_contraction(cL=k.c * k.L, etaL=k.eta * k.L)

    lhs = 0.0
    for i, j in itertools.combinations(range(inst.n_states), 2):
        dist = float(np.linalg.norm(inst.states[i] - inst.states[j]))
        lhs = max(lhs, float(np.abs(u[i] - u[j]).max()) / dist)
    rhs = k.eta * k.K / (1.0 - k.eta * k.L)
    return _report("lipschitz", lhs, rhs, k.as_dict())


# -----------------------
# Randomized instances
# -----------------------

def random_instance(
    rng: np.random.Generator,
    n_states: int = 4,
    n_actions: int = 2,
    dim: int = 1,
    weighted: bool = False,
    spacing: float = 0.5,
) -> DiscreteKernelInstance:
    '''distinct lattice states (spacing apart), Dirichlet kernel rows'''
    per_axis = max(2, int(np.ceil(n_states ** (1.0 / dim))) + 2)
    lattice = np.array(list(itertools.product(range(per_axis), repeat=dim)), dtype=np.float64) * spacing
    states = lattice[rng.choice(lattice.shape[0], size=n_states, replace=False)]
    transition = rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))
    weight = rng.uniform(0.5, 2.0, size=n_states) if weighted else None
    return DiscreteKernelInstance(states, transition, weight)


def perturb_instance(inst: DiscreteKernelInstance, rng: np.random.Generator, mass: float = 0.01) -> DiscreteKernelInstance:
    '''moves up to `mass` of probability in every row from its heaviest entry to a random other entry'''
    transition = np.array(inst.transition)
    n = inst.n_states
    if n < 2:
        return DiscreteKernelInstance(inst.states, transition, inst.weight, inst.actions)
    for a in range(inst.n_actions):
        for x in range(n):
            row = transition[a, x]
            src = int(np.argmax(row))
            dst = int(rng.choice([k for k in range(n) if k != src]))
            moved = min(mass, row[src])
            row[src] -= moved
            row[dst] += moved
    return DiscreteKernelInstance(inst.states, transition, inst.weight, inst.actions)


def random_state_function(rng: np.random.Generator, dim: int) -> Callable[[np.ndarray], float]:
    '''smooth h(y) = a sin(<b, y>) + c0'''
    a, c0 = rng.uniform(-1.0, 1.0, size=2)
    b = rng.uniform(-1.5, 1.5, size=dim)
    return lambda y: float(a * np.sin(b @ y) + c0)
