# cli.py

'''python src/cli.py converge --model instances/grid16.json --levels 1..4 --budget 4 --out results'''

import argparse
import csv
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ann_calculus import (
    compose,
    composed_dims,
    composition_param_bound,
    copy_net,
    extend,
    extended_dims,
    extension_param_bound,
    identity_stack,
    parallel_dims,
    parallel_mixed_dims,
    parallelize_mixed,
    parallelize_same_depth,
    power,
    power_dims,
    scalar_mul,
    size_estimate_holds,
    sum_dims,
    sum_mixed_depth,
    sum_mixed_dims,
    sum_net,
    sum_same_depth,
    unit_identity,
)
from ann_core import Activation, Ann, param_count, random_net, realize
from bellman import (
    RewardNet,
    build_F_from_G,
    build_q_net,
    build_shock_net,
    clamped_shift_net,
    describe_q_net,
    estimate_l2_error,
    estimate_q_values,
    net_field,
    oracle_q,
)
from constants import Defaults, Tolerances
from errors import InvalidActivationError, MlfpException, UsageError
from fixed_point import (
    DiscreteMeasure,
    affine_nonlinearity,
    check_kernel_stability,
    check_nonlinearity_stability,
    check_solution_lipschitz,
    contraction_constant,
    kernel_lipschitz_constant,
    max_plus_nonlinearity,
    perturb_instance,
    random_instance,
    random_state_function,
)
from maxnet import max_activation, max_depth, max_net
from mlfp import (
    MlfpSchedule,
    build_mlfp_net,
    compiled_param_count,
    mlfp_dims,
    mlfp_evaluate,
    mlfp_size_bounds,
    net_evaluator,
)
from serialization import export_net, import_net, load_mdp_model, write_json
from streams import ThetaKey


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_FAILED = 3

DEFAULT_MODEL = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "instances", "grid16.json")


@dataclass
class SuiteResult:
    '''one csv row per measurement; sort_keys fix the row order'''
    rows: List[Dict[str, Any]]
    sort_keys: Sequence[str]
    failures: int = 0
    checks: Dict[str, Any] = field(default_factory=dict)


def parse_levels(text: str) -> List[int]:
    '''"a..b" (inclusive) or a single level'''
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            levels = list(range(int(lo), int(hi) + 1))
        else:
            levels = [int(text)]
    except ValueError as e:
        raise UsageError(f'levels must look like "a..b", got "{text}"') from e
    if not levels or levels[0] < 0:
        raise UsageError(f'levels "{text}" must describe a nonempty range of nonnegative levels')
    return levels


def rel_error(got: np.ndarray, want: np.ndarray) -> float:
    return float(np.abs(got - want).max() / (1.0 + np.abs(want).max()))


def random_activation(rng: np.random.Generator) -> Activation:
    if rng.random() < 0.5:
        return Activation.softplus()
    return Activation.leaky_relu(float(rng.uniform(0.0, 0.9)))


def random_dims(rng: np.random.Generator, depth: int, first: Optional[int] = None, last: Optional[int] = None) -> List[int]:
    dims = [int(l) for l in rng.integers(1, 5, size=depth + 1)]
    if first is not None:
        dims[0] = first
    if last is not None:
        dims[-1] = last
    return dims


# ----------------------------
# algebra-suite
# ----------------------------

def algebra_case(rng: np.random.Generator, case: int, probes: int) -> List[Dict[str, Any]]:
    act = random_activation(rng)
    unit = unit_identity(act)
    rows: List[Dict[str, Any]] = []

    def check(name: str, got, want, arch_ok: bool, *nets: Ann):
        err = rel_error(got, want)
        arch_ok = bool(arch_ok) and all(size_estimate_holds(net.dims) for net in nets)
        rows.append({
            "check": name, "case": case, "rel_error": err, "arch_ok": arch_ok,
            "passed": err <= Tolerances.ALGEBRA and arch_ok,
        })

    def probe(width: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(probes, width))

    #composition
    back = random_net(rng, random_dims(rng, int(rng.integers(1, 4))), 0.5)
    front = random_net(rng, random_dims(rng, int(rng.integers(1, 4)), first=back.output_dim), 0.5)
    net = compose(front, back)
    x = probe(back.input_dim)
    check("compose", realize(net, act, x), realize(front, act, realize(back, act, x)),
          net.dims == composed_dims(front.dims, back.dims)
          and net.depth == front.depth + back.depth - 1
          and param_count(net) <= composition_param_bound(front, back), net)

    #associativity, layer for layer when no boundary layer is fused twice
    a, b, c = (random_net(rng, random_dims(rng, 2, first=2, last=2), 0.5) for _ in range(3))
    left, right = compose(compose(a, b), c), compose(a, compose(b, c))
    x = probe(2)
    check("associativity", realize(left, act, x), realize(right, act, x), left == right, left)

    #powers
    k = int(rng.integers(1, 4))
    square = random_net(rng, random_dims(rng, int(rng.integers(1, 3)), first=k, last=k), 0.5)
    n = int(rng.integers(0, 4))
    x = probe(k)
    want = x
    for _ in range(n):
        want = realize(square, act, want)
    net = power(square, n)
    check("power", realize(net, act, x), want, net.dims == power_dims(square.dims, n), net)

    #extensions
    ident = identity_stack(unit, back.output_dim)
    target = back.depth + int(rng.integers(0, 4))
    net = extend(target, ident, back)
    x = probe(back.input_dim)
    check("extend", realize(net, act, x), realize(back, act, x),
          net.depth == target
          and net.dims == extended_dims(target, ident.net.dims, back.dims)
          and param_count(net) <= extension_param_bound(target, ident, back), net)

    #parallelizations
    depth = int(rng.integers(1, 4))
    nets = [random_net(rng, random_dims(rng, depth), 0.5) for _ in range(int(rng.integers(1, 4)))]
    xs = [probe(net.input_dim) for net in nets]
    net = parallelize_same_depth(nets)
    check("parallelize", realize(net, act, np.hstack(xs)),
          np.hstack([realize(n_, act, x_) for n_, x_ in zip(nets, xs)]),
          net.dims == parallel_dims([n_.dims for n_ in nets]), net)

    nets = [random_net(rng, random_dims(rng, int(rng.integers(1, 5))), 0.5) for _ in range(int(rng.integers(1, 4)))]
    idents = [identity_stack(unit, n_.output_dim) for n_ in nets]
    xs = [probe(n_.input_dim) for n_ in nets]
    net = parallelize_mixed(nets, idents)
    check("parallelize_mixed", realize(net, act, np.hstack(xs)),
          np.hstack([realize(n_, act, x_) for n_, x_ in zip(nets, xs)]),
          net.depth == max(n_.depth for n_ in nets)
          and net.dims == parallel_mixed_dims([n_.dims for n_ in nets], [i.net.dims for i in idents]), net)

    #sums and scalars
    dims = random_dims(rng, int(rng.integers(1, 4)))
    nets = [random_net(rng, dims, 0.5) for _ in range(int(rng.integers(1, 4)))]
    x = probe(dims[0])
    net = sum_same_depth(nets)
    check("sum_same_depth", realize(net, act, x), sum(realize(n_, act, x) for n_ in nets),
          net.dims == sum_dims([n_.dims for n_ in nets]), net)

    d_in, d_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    nets = [random_net(rng, random_dims(rng, int(rng.integers(1, 5)), first=d_in, last=d_out), 0.5) for _ in range(3)]
    coeffs = [float(h) for h in rng.uniform(-2.0, 2.0, size=3)]
    ident = identity_stack(unit, d_out)
    x = probe(d_in)
    net = sum_mixed_depth(nets, ident, coeffs)
    check("sum_mixed_depth", realize(net, act, x), sum(h * realize(n_, act, x) for h, n_ in zip(coeffs, nets)),
          net.dims == sum_mixed_dims([n_.dims for n_ in nets], ident.net.dims), net)

    alpha = float(rng.uniform(-3.0, 3.0))
    net = scalar_mul(alpha, back)
    x = probe(back.input_dim)
    check("scalar_mul", realize(net, act, x), alpha * realize(back, act, x), net.dims == back.dims, net)

    m, copies = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    x = probe(m * copies)
    check("sum_net", realize(sum_net(m, copies), act, x), x.reshape(probes, copies, m).sum(axis=1),
          sum_net(m, copies).dims == (m * copies, m))
    x = probe(m)
    check("copy_net", realize(copy_net(m, copies), act, x), np.tile(x, (1, copies)),
          copy_net(m, copies).dims == (m, m * copies))
    return rows


def run_algebra_suite(args) -> SuiteResult:
    rows = []
    for case in range(args.cases):
        rows.extend(algebra_case(np.random.default_rng([args.seed, case]), case, args.probes))
    return SuiteResult(rows, ("check", "case"), sum(not r["passed"] for r in rows))


# ----------------------------
# maxnet-suite
# ----------------------------

def run_maxnet_suite(args) -> SuiteResult:
    rng = np.random.default_rng(args.seed)
    act = max_activation(args.beta)
    rows = []
    for m in range(2, args.arch_m + 1):
        net = max_net(m, args.beta)
        arch_ok = net.depth == max_depth(m) and max(net.dims) <= 2 * m
        err = 0.0
        if m <= args.max_m:
            x = rng.uniform(-10.0, 10.0, size=(args.probes, m))
            err = float(np.abs(realize(net, act, x)[:, 0] - x.max(axis=1)).max())
        rows.append({
            "m": m, "depth": net.depth, "width": max(net.dims), "max_error": err,
            "passed": arch_ok and err <= Tolerances.MAX_EXACT,
        })
    return SuiteResult(rows, ("m",), sum(not r["passed"] for r in rows))


# ----------------------------
# stability-suite
# ----------------------------

def stability_case(rng: np.random.Generator):
    dim = int(rng.integers(1, 3))
    inst1 = random_instance(
        rng,
        n_states=int(rng.integers(2, 5)),
        n_actions=int(rng.integers(1, 3)),
        dim=dim,
        weighted=bool(rng.random() < 0.5),
    )
    inst2 = perturb_instance(inst1, rng, mass=0.01)
    cap = max(1.0, contraction_constant(inst1), contraction_constant(inst2),
              kernel_lipschitz_constant(inst1), kernel_lipschitz_constant(inst2))
    scale = float(rng.uniform(0.1, 0.9)) / cap

    h = random_state_function(rng, dim)
    if rng.random() < 0.5:
        f1 = max_plus_nonlinearity(h, scale)
    else:
        coeffs = rng.uniform(-1.0, 1.0, size=inst1.n_actions)
        f1 = affine_nonlinearity(h, scale * coeffs / np.abs(coeffs).sum())
    bump = random_state_function(rng, dim)
    f2 = f1.shifted(lambda y: 0.1 * bump(y))

    kernel = check_kernel_stability(inst1, inst2, f2, f_first=f1)
    return [
        check_nonlinearity_stability(inst1, f1, f2),
        kernel,
        kernel.combined,
        check_solution_lipschitz(inst1, f1),
    ]


def run_stability_suite(args) -> SuiteResult:
    rows = []
    for k in range(args.instances):
        for report in stability_case(np.random.default_rng([args.seed, k])):
            row = report.as_row()
            row["instance"] = k
            rows.append(row)
    return SuiteResult(rows, ("check", "instance"), sum(not r["passed"] for r in rows))


# ----------------------------
# mlfp-equiv / size-report
# ----------------------------

def equivalence_case(args, d: int, a_count: int, M: int, n: int) -> Dict[str, Any]:
    rng = np.random.default_rng([args.seed, d, a_count, M, n])
    act = Activation.leaky_relu(args.beta)
    unit = unit_identity(act)
    F_net = random_net(rng, (d + a_count, 3, 1), 0.5)
    transitions = [random_net(rng, (2 * d, 3, d), 0.5) for _ in range(a_count)]
    field = net_field(args.seed, transitions, act, lambda g: g.standard_normal(d))
    sched = MlfpSchedule(M=M, n=n)
    theta = ThetaKey.root(0)

    params = compiled_param_count(field, F_net, unit, sched, theta)
    row: Dict[str, Any] = {"d": d, "actions": a_count, "M": M, "n": n, "params": params}
    if params > args.max_params:
        logger.info(f"[MLFP-EQUIV] d={d}, |A|={a_count}, M={M}, n={n}: {params} parameters, skipped")
        row.update(max_rel_error="", theta_pairs=0, arch_ok="", skipped=True, passed=False)
        return row

    net = build_mlfp_net(field, F_net, unit, sched, theta, max_params=args.max_params)
    x = rng.uniform(-1.0, 1.0, size=(args.probes, d))
    direct = mlfp_evaluate(field, net_evaluator(F_net, act), sched, theta, x)
    err = float((np.abs(realize(net, act, x) - direct) / (1.0 + np.abs(direct))).max())

    #every theta shares one architecture
    pairs = args.theta_pairs if params <= Defaults.INVARIANCE_PARAMS else 1
    invariant = all(
        build_mlfp_net(field, F_net, unit, sched, ThetaKey.root(k), max_params=args.max_params).dims == net.dims
        for k in range(1, pairs + 1)
    )

    X_dims = field.x_net(theta, 0).dims
    bounds = mlfp_size_bounds(F_net.dims, X_dims, d, a_count, M, n)
    arch_ok = (
        invariant
        and net.dims == mlfp_dims(F_net.dims, X_dims, d, a_count, M, n)
        and net.depth <= bounds.depth
        and max(net.dims) <= bounds.width
        and param_count(net) <= bounds.params
    )
    row.update(
        max_rel_error=err, theta_pairs=pairs, arch_ok=arch_ok, skipped=False,
        passed=arch_ok and err <= Tolerances.EQUIVALENCE,
    )
    return row


def run_mlfp_equiv(args) -> SuiteResult:
    rows = []
    for d in range(1, args.max_d + 1):
        for a_count in range(1, args.max_actions + 1):
            for M in args.budgets:
                for n in args.levels:
                    rows.append(equivalence_case(args, d, a_count, M, n))
    skipped = sum(r["skipped"] for r in rows)
    if skipped:
        logger.warning(f"[MLFP-EQUIV] {skipped} of {len(rows)} configurations exceed {args.max_params} parameters and were skipped")
    failures = sum(not r["passed"] and not r["skipped"] for r in rows)
    return SuiteResult(rows, ("d", "actions", "M", "n"), failures, {"skipped": skipped})


def run_size_report(args) -> SuiteResult:
    rng = np.random.default_rng(args.seed)
    A = args.actions
    G = RewardNet(random_net(rng, (1, 4, A)))
    F_dims = build_F_from_G(G, 0.5, args.beta).dims
    X_dims = compose(clamped_shift_net(1.0, 0.0, 15.0), build_shock_net(1, np.zeros(1))).dims
    rows = []
    for n in args.levels:
        dims = mlfp_dims(F_dims, X_dims, 1, A, args.budget, n)
        bounds = mlfp_size_bounds(F_dims, X_dims, 1, A, args.budget, n)
        params = sum(dims[k] * (dims[k - 1] + 1) for k in range(1, len(dims)))
        rows.append({
            "n": n, "M": args.budget, "actions": A,
            "depth": len(dims) - 1, "depth_bound": bounds.depth,
            "width": max(dims), "width_bound": bounds.width,
            "params": params, "param_bound": bounds.params,
            "passed": len(dims) - 1 <= bounds.depth and max(dims) <= bounds.width and params <= bounds.params,
        })
    return SuiteResult(rows, ("n",), sum(not r["passed"] for r in rows))


# ----------------------------
# converge
# ----------------------------

def run_converge(args) -> SuiteResult:
    model = load_mdp_model(args.model)
    q = oracle_q(model, tol=args.tol).values
    mu = DiscreteMeasure.uniform(model.states)

    rows = []
    for n in args.levels:
        sched = MlfpSchedule(M=args.budget, n=n)
        for s in range(args.seeds):
            values = estimate_q_values(model, model.reward, sched, args.seed + s, ThetaKey.root(0))
            err = estimate_l2_error(values, model, mu, oracle=q)
            rows.append({"level": n, "seed": args.seed + s, "rmse": err.max_norm, "rmse_euclidean": err.euclidean})
        logger.info(f"[CONVERGE] level {n} done")

    per_level = {n: np.array([r["rmse"] for r in rows if r["level"] == n]) for n in args.levels}
    mean = {n: float(v.mean()) for n, v in per_level.items()}
    se = {n: float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0 for n, v in per_level.items()}

    failures = 0
    for lo, hi in zip(args.levels, args.levels[1:]):
        if mean[hi] > mean[lo] + 2.0 * np.hypot(se[lo], se[hi]):
            logger.warning(f"[CONVERGE] mean rmse rose from level {lo} ({mean[lo]:.4g}) to {hi} ({mean[hi]:.4g})")
            failures += 1
    first, last = args.levels[0], args.levels[-1]
    if last - first >= 3 and not mean[last] < 0.5 * mean[first]:
        logger.warning(f"[CONVERGE] level {last} rmse {mean[last]:.4g} is not below half of level {first} ({mean[first]:.4g})")
        failures += 1

    checks = {"mean_rmse": {str(n): mean[n] for n in args.levels}, "standard_error": {str(n): se[n] for n in args.levels}}
    return SuiteResult(rows, ("level", "seed"), failures, checks)


# ----------------------------
# export / import
# ----------------------------

def run_export(args) -> SuiteResult:
    model = load_mdp_model(args.model)
    sched = MlfpSchedule(M=args.budget, n=args.levels[0])
    Q = build_q_net(model, model.reward, sched, args.seed, ThetaKey.root(0))
    path = os.path.join(args.out, f"{model.name}.q_net.json")
    export_net(Q, path)
    report = describe_q_net(model, model.reward, sched, Q)
    row = {
        "file": path, "depth": report.depth, "width": report.width, "params": report.params,
        "mlfp_param_bound": report.mlfp_param_bound, "passed": report.size_estimate_holds,
    }
    return SuiteResult([row], ("file",), int(not row["passed"]))


def run_import(args) -> SuiteResult:
    net = import_net(args.net)
    copy_path = os.path.join(args.out, os.path.basename(args.net) + ".roundtrip.json")
    export_net(net, copy_path)
    row = {
        "file": args.net, "dims": " ".join(str(l) for l in net.dims), "params": param_count(net),
        "passed": import_net(copy_path) == net,
    }
    return SuiteResult([row], ("file",), int(not row["passed"]))


# ----------------------------
# Output
# ----------------------------

def package_versions() -> Dict[str, str]:
    out = {"python": platform.python_version()}
    for name in ("numpy", "scipy", "POT"):
        try:
            out[name] = version(name)
        except PackageNotFoundError:
            out[name] = "unknown"
    return out


def write_results(args, command: str, result: SuiteResult):
    os.makedirs(args.out, exist_ok=True)
    rows = sorted(result.rows, key=lambda r: tuple(r[k] for k in result.sort_keys))
    csv_path = os.path.join(args.out, f"{command}.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()) if rows else [])
        writer.writeheader()
        writer.writerows(rows)

    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": command,
        "seed": args.seed,
        "config": config,
        "versions": package_versions(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "rows": len(rows),
        "failures": result.failures,
        "checks": result.checks,
    }
    write_json(os.path.join(args.out, f"{command}.manifest.json"), manifest)
    logger.info(f"[MANIFEST] {command}: {len(rows)} rows, {result.failures} failures -> {csv_path}")


COMMANDS: Dict[str, Callable[[Any], SuiteResult]] = {
    "algebra-suite": run_algebra_suite,
    "maxnet-suite": run_maxnet_suite,
    "stability-suite": run_stability_suite,
    "mlfp-equiv": run_mlfp_equiv,
    "size-report": run_size_report,
    "converge": run_converge,
    "export": run_export,
    "import": run_import,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=Defaults.SEED, help="master seed for every random draw")
    common.add_argument("--out", default="results", help="output directory for csv and manifest")
    common.add_argument("--tol", type=float, default=Defaults.PICARD_TOL, help="fixed point / oracle tolerance")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="warnings only")

    ap = argparse.ArgumentParser(description="MLFP network construction and verification runs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("algebra-suite", parents=[common], help="realization and architecture laws of the net calculus")
    p.add_argument("--cases", type=int, default=1000, help="randomized cases per operation")
    p.add_argument("--probes", type=int, default=50, help="inputs per case")

    p = sub.add_parser("maxnet-suite", parents=[common], help="exactness and size of max networks")
    p.add_argument("--beta", type=float, default=0.0, help="leaky ReLU slope")
    p.add_argument("--max-m", type=int, default=64, help="largest m checked on random inputs")
    p.add_argument("--arch-m", type=int, default=256, help="largest m checked for depth and width")
    p.add_argument("--probes", type=int, default=10_000, help="random inputs per m")

    p = sub.add_parser("stability-suite", parents=[common], help="stability and Lipschitz bounds on random instances")
    p.add_argument("--instances", type=int, default=50, help="random instances")

    p = sub.add_parser("mlfp-equiv", parents=[common], help="compiled MLFP nets against direct evaluation")
    p.add_argument("--beta", type=float, default=0.1, help="leaky ReLU slope")
    p.add_argument("--budgets", type=parse_levels, default=parse_levels("2..3"), help="Monte Carlo budgets M, a..b")
    p.add_argument("--levels", type=parse_levels, default=parse_levels("0..4"), help="levels a..b")
    p.add_argument("--max-d", type=int, default=5, help="largest state dimension")
    p.add_argument("--max-actions", type=int, default=3, help="largest action count")
    p.add_argument("--probes", type=int, default=100, help="states per configuration")
    p.add_argument("--theta-pairs", type=int, default=Defaults.INVARIANCE_PAIRS, help="theta pairs compared per configuration")
    p.add_argument("--max-params", type=int, default=Defaults.MAX_COMPILED_PARAMS,
                   help="configurations whose net would be larger are skipped")

    p = sub.add_parser("size-report", parents=[common], help="MLFP architecture against its closed-form bounds")
    p.add_argument("--beta", type=float, default=0.0, help="leaky ReLU slope")
    p.add_argument("--budget", type=int, default=2, help="Monte Carlo budget M")
    p.add_argument("--levels", type=parse_levels, default=parse_levels("0..3"), help="levels a..b")
    p.add_argument("--actions", type=int, default=2, help="action count")

    p = sub.add_parser("converge", parents=[common], help="Q estimates against the value iteration oracle")
    p.add_argument("--model", default=DEFAULT_MODEL, help="model json")
    p.add_argument("--budget", type=int, default=4, help="Monte Carlo budget M")
    p.add_argument("--levels", type=parse_levels, default=parse_levels("1..4"), help="levels a..b")
    p.add_argument("--seeds", type=int, default=10, help="seeds per level")

    p = sub.add_parser("export", parents=[common], help="compile and write the Q net of a model")
    p.add_argument("--model", default=DEFAULT_MODEL, help="model json")
    p.add_argument("--budget", type=int, default=2, help="Monte Carlo budget M")
    p.add_argument("--levels", type=parse_levels, default=parse_levels("1"), help="level n")

    p = sub.add_parser("import", parents=[common], help="read a net json and check it round-trips")
    p.add_argument("--net", required=True, help="net json path")
    return ap


def validate_args(args):
    '''ranges and input files, checked before any work starts'''
    def at_least(name: str, floor: int):
        value = getattr(args, name, None)
        if value is not None and value < floor:
            raise UsageError(f"--{name.replace('_', '-')} must be at least {floor}, got {value}")

    for name in ("cases", "probes", "instances", "seeds", "max_d", "max_actions", "actions", "theta_pairs", "max_params"):
        at_least(name, 1)
    for name in ("budget", "max_m", "arch_m"):
        at_least(name, 2)
    if min(getattr(args, "budgets", [2])) < 2:
        raise UsageError(f"Monte Carlo budgets must be at least 2, got {args.budgets}")
    if not args.tol > 0.0:
        raise UsageError(f"--tol must be positive, got {args.tol}")
    if getattr(args, "beta", None) is not None:
        try:
            max_activation(args.beta)
        except InvalidActivationError as e:
            raise UsageError(str(e)) from e
    for name in ("model", "net"):
        path = getattr(args, name, None)
        if path is not None and not os.path.isfile(path):
            raise UsageError(f"--{name} {path} is not a file")


def configure_logging(args):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    '''parse and run; returns the exit status'''
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(args)

    try:
        validate_args(args)
        result = COMMANDS[args.command](args)
    except UsageError as e:
        logger.error(f"[USAGE] {e}")
        return EXIT_USAGE
    except MlfpException as e:
        logger.error(f"[{args.command.upper()}] {type(e).__name__}: {e}")
        return EXIT_ERROR

    write_results(args, args.command, result)
    return EXIT_FAILED if result.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
