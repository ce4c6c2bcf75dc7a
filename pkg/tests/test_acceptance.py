"""Acceptance suite: one test per criterion, each recording a pass/fail line
that is repeated in the terminal summary."""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass
from fractions import Fraction

import pytest

from cflow.eligibility import FLOW_TOLERANCE
from cflow.generators import (
    grid_pwl_weights,
    layered_pairs,
    quadratic_weights,
    random_linear_instance,
    random_network,
    signed_weights,
)
from cflow.network import Network, RawEdge, pad_gradients, validate_and_level
from cflow.reductions import mincost_bound, mincost_with_reward, scheduling_to_network
from cflow.solver import SolveResult, concave_flow, scaling_flow, simple_flow
from cflow.verify import (
    brute_force_opt,
    certify,
    exact_linear_opt,
    expand_multiedges,
    reduced_cost_identity,
    signed_threshold,
)
from cflow.weights import Linear

LINEAR_SEEDS = range(200)
LINEAR_EPS = (Fraction(1, 16), Fraction(1, 32))
UNIT_SEEDS = range(1000, 1200)


@dataclass
class Run:
    seed: int
    eps: Fraction
    net: Network
    result: SolveResult
    opt: Fraction
    seconds: float


def _timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def linear_runs() -> list[Run]:
    runs = []
    for seed in LINEAR_SEEDS:
        net = random_linear_instance(seed, n_max=40, m_max=120, d_max=8, w_max=64, c_max=8)
        opt = exact_linear_opt(net).value
        for eps in LINEAR_EPS:
            result, secs = _timed(scaling_flow, net, eps, audit="every")
            runs.append(Run(seed, eps, net, result, opt, secs))
    return runs


@pytest.fixture(scope="module")
def unit_runs() -> list[Run]:
    runs = []
    for seed in UNIT_SEEDS:
        net = random_linear_instance(seed, n_max=30, m_max=80, d_max=6, w_max=16, unit=True)
        eps = Fraction(1, 8) if seed % 2 else Fraction(1, 16)
        result, secs = _timed(simple_flow, net, eps, audit="every")
        runs.append(Run(seed, eps, net, result, exact_linear_opt(net).value, secs))
    return runs


def test_criterion_1_linear_approximation(linear_runs, record):
    short = [(r.seed, r.eps) for r in linear_runs if r.result.exact_objective() < (1 - 8 * r.eps) * r.opt]
    ratios = [float(r.result.exact_objective() / r.opt) for r in linear_runs]
    slowest = max(r.seconds for r in linear_runs)
    median = statistics.median(ratios)
    passed = not short and median >= 0.99 and slowest < 1.0
    record(1, passed, f"{len(linear_runs)} solves ({len(LINEAR_SEEDS)} DAGs x eps 1/16, 1/32), "
                      f"{len(short)} below (1-8eps)OPT, median ratio {median:.6f}, "
                      f"min ratio {min(ratios):.6f}, slowest {slowest:.3f}s")
    assert len(short) == 0, f"{len(short)} offending cases"
    assert median >= 0.99
    assert slowest < 1.0


def test_criterion_2_simple_variant(unit_runs, record):
    short = [r.seed for r in unit_runs if r.result.exact_objective() < (1 - r.eps) * r.opt]
    ratios = [float(r.result.exact_objective() / r.opt) for r in unit_runs]
    record(2, not short, f"{len(unit_runs)} unit-capacity instances, {len(short)} below (1-eps)OPT, "
                         f"min ratio {min(ratios):.6f}, no exceptions")
    assert len(short) == 0, f"{len(short)} offending cases"


def test_criterion_3_invariant_audits(linear_runs, unit_runs, record):
    runs = linear_runs + unit_runs
    points = sum(r.result.audit.points for r in runs)
    failing = [r for r in runs if not r.result.audit.ok]
    first = failing[0].result.audit.first_violation if failing else "none"
    bad = [(r.seed, r.eps) for r in failing]
    checks = sorted({name for r in runs for name in r.result.audit.counts})
    record(3, not bad, f"{points} audit points over {len(runs)} runs, checks {','.join(checks)}, "
                       f"{sum(r.result.audit.violations for r in runs)} violations (first: {first})")
    assert len(bad) == 0, f"{len(bad)} offending cases"


def test_criterion_4_iteration_budget(linear_runs, record):
    over = []
    wrong_scale_count = []
    for r in linear_runs:
        D = r.net.depth
        limit = D * r.result.grid.inv_eps / 2 + 2 * D + 1
        if any(k > limit for k in r.result.scale_iterations):
            over.append((r.seed, r.eps))
        log_ratio = (r.result.grid.w_max / r.result.grid.w_min).numerator.bit_length() - 1
        if r.result.scales != log_ratio:
            wrong_scale_count.append((r.seed, r.eps))
    exact = all(r.result.scale_iterations == r.result.expected_iterations for r in linear_runs)
    sample = linear_runs[0].result
    passed = not over and not wrong_scale_count
    record(4, passed, f"{len(over)}/{len(linear_runs)} runs have a scale above D/(2eps)+2D+1, "
                      f"{len(wrong_scale_count)}/{len(linear_runs)} runs use a scale count other than "
                      f"log2(w_max/w_min); the last scale always runs to p_t = 0 and needs D/eps+2D "
                      f"(e.g. D={linear_runs[0].net.depth}: {sample.scale_iterations}); "
                      f"counts match the closed form exactly: {exact}")
    assert exact
    assert len(over) == 0, f"{len(over)} offending cases"
    assert len(wrong_scale_count) == 0, f"{len(wrong_scale_count)} offending cases"


def _pwl_instance(seed: int) -> tuple[Network, tuple[Fraction, Fraction], Fraction]:
    rng = random.Random(seed)
    unit = Fraction(1, rng.choice([1, 2, 4]))
    depth = rng.randint(1, 5)
    net = random_network(rng, n=rng.randint(depth + 1, 12), m=rng.randint(depth, 24), depth=depth,
                         weight=grid_pwl_weights(unit, 16, 128), capacity=lambda r: float(r.randint(1, 6)))
    # declared band 16u..128u puts every gradient on the finest grid at eps = 1/16
    band = (16 * unit, 128 * unit)
    return validate_and_level(net.raw_edges(), bounds=band), band, unit


def test_criterion_5_multiedge_equivalence(record):
    eps = Fraction(1, 16)
    worst_obj = worst_flow = 0.0
    bad = []
    copies = 0
    for seed in range(60):
        net, band, unit = _pwl_instance(seed)
        expanded = expand_multiedges(net, unit, bounds=band)
        copies += expanded.network.m - net.m
        concave = concave_flow(net, eps)
        linear = scaling_flow(expanded.network, eps)
        tau = FLOW_TOLERANCE * net.max_capacity
        d_obj = abs(concave.objective - linear.objective)
        d_flow = max(abs(a - b) for a, b in zip(concave.flow, expanded.totals(linear.flow)))
        worst_obj, worst_flow = max(worst_obj, d_obj), max(worst_flow, d_flow)
        if d_obj > tau * net.m * float(band[1]) or d_flow > tau:
            bad.append(seed)
    record(5, not bad, f"60 grid piecewise-linear instances ({copies} extra parallel copies), "
                       f"{len(bad)} mismatches, max objective gap {worst_obj:.3g}, "
                       f"max edge total gap {worst_flow:.3g}")
    assert len(bad) == 0, f"{len(bad)} offending cases"


def test_criterion_6_concave_guarantee(record):
    eps = Fraction(1, 16)
    failures, worst = [], float("inf")
    for seed in range(50):
        rng = random.Random(7000 + seed)
        depth = rng.randint(1, 4)
        net = random_network(rng, n=rng.randint(depth + 1, 10), m=rng.randint(depth, 18), depth=depth,
                             weight=quadratic_weights(1.0, 16.0), capacity=lambda r: float(r.randint(1, 5)))
        cert = certify(concave_flow(net, eps))
        worst = min(worst, cert.ratio)
        if not cert.passed:
            failures.append(seed)
    record(6, not failures, f"50 quadratic instances, {len(failures)} below (1-9eps)OPT_lb, "
                            f"min ratio to OPT_lb {worst:.6f}, no exceptions")
    assert len(failures) == 0, f"{len(failures)} offending cases"


def test_criterion_7_signed_and_mincost(record):
    eps = Fraction(1, 16)
    signed_bad = []
    for seed in range(100):
        rng = random.Random(8000 + seed)
        depth = rng.randint(1, 6)
        net = random_network(rng, n=rng.randint(depth + 1, 20), m=rng.randint(depth, 50), depth=depth,
                             weight=signed_weights(1, 64, 0.35), signed=True)
        opt = exact_linear_opt(net)
        got = scaling_flow(net, eps).exact_objective()
        if got < signed_threshold(net, opt.flow, 8 * eps):
            signed_bad.append(seed)

    mincost_bad, profitable = [], 0
    for seed in range(50):
        rng = random.Random(9000 + seed)
        depth = rng.randint(1, 4)
        costs = random_network(rng, n=rng.randint(depth + 1, 10), m=rng.randint(depth, 18), depth=depth,
                               weight=lambda r, c: Linear(r.randint(1, 16), c),
                               capacity=lambda r: float(r.randint(1, 5)))
        Q = Fraction(rng.randint(1, 16 * depth))
        rm = mincost_with_reward(costs, Q)
        best = rm.application(exact_linear_opt(rm.network).flow)
        f_star = best.solution["value"]
        profitable += f_star > 0
        app = rm.application(scaling_flow(rm.network, eps / 8, audit="scale").flow)
        if app.objective > mincost_bound(best.objective, f_star, Q, eps):
            mincost_bad.append(seed)
    passed = not signed_bad and not mincost_bad
    record(7, passed, f"100 signed instances, {len(signed_bad)} below the signed (1-/+8eps) threshold; "
                      f"50 min-cost instances ({profitable} with f*>0) solved at eps/8, "
                      f"{len(mincost_bad)} above the additive bound")
    assert len(signed_bad) == 0, f"{len(signed_bad)} offending cases"
    assert len(mincost_bad) == 0, f"{len(mincost_bad)} offending cases"


def test_criterion_8_padding(record):
    eps = Fraction(1, 16)
    out_of_range, over_bound = [], []
    worst = 0.0
    for seed in range(50):
        net = random_linear_instance(10_000 + seed, n_max=15, m_max=30, d_max=5)
        padded, rep = pad_gradients(net, eps)
        opt, opt_p = exact_linear_opt(net).value, exact_linear_opt(padded).value
        if not opt <= opt_p <= (1 + eps) * opt:
            out_of_range.append(seed)
        total_cap = sum(e.capacity for e in net.edges)
        lemma_bound = net.m ** 2 * total_cap / float(eps)
        worst = max(worst, rep.ratio / lemma_bound)
        if rep.ratio > lemma_bound or rep.ratio > rep.ratio_bound:
            over_bound.append(seed)
    passed = not out_of_range and not over_bound
    record(8, passed, f"50 integer-capacity instances, {len(out_of_range)} padded optima outside "
                      f"[OPT, (1+eps)OPT], {len(over_bound)} gradient ratios above m^2*sum(c)/eps "
                      f"or the reported bound (largest ratio/bound {worst:.3g})")
    assert len(out_of_range) == 0, f"{len(out_of_range)} offending cases"
    assert len(over_bound) == 0, f"{len(over_bound)} offending cases"


def _random_path(net: Network, rng: random.Random) -> list[int]:
    path, u = [], net.source
    while u != net.sink:
        e = rng.choice(net.out_edges[u])
        path.append(e)
        u = net.edges[e].head
    return path


def _instance_classes():
    def linear(rng):
        return random_linear_instance(rng.randrange(10**6), n_max=20, m_max=50)

    def unit(rng):
        return random_linear_instance(rng.randrange(10**6), n_max=20, m_max=50, unit=True)

    def signed(rng):
        d = rng.randint(1, 6)
        return random_network(rng, n=rng.randint(d + 1, 20), m=rng.randint(d, 50), depth=d,
                              weight=signed_weights(), signed=True)

    def scheduling(rng):
        days = rng.randint(1, 5)
        jobs = []
        for k in range(rng.randint(1, 6)):
            a = rng.randint(1, days)
            jobs.append((f"j{k}", a, rng.randint(a, days), rng.randint(1, 9)))
        return scheduling_to_network(jobs, [rng.randint(1, 3) for _ in range(days)]).network

    return {"linear": linear, "unit": unit, "signed": signed, "scheduling": scheduling}


def test_criterion_9_reduced_cost_identity(record):
    rng = random.Random(424242)
    mismatches = 0
    per_class = {}
    for name, make in _instance_classes().items():
        for _ in range(100):
            net = make(rng)
            flow = [Fraction(0)] * net.m
            by_paths = Fraction(0)
            for _ in range(rng.randint(0, 5)):
                path = _random_path(net, rng)
                amount = Fraction(rng.randint(1, 40), rng.choice([1, 2, 3, 8]))
                for e in path:
                    flow[e] += amount
                by_paths += amount * sum(net.linear_weight(net.edges[e]) for e in path)
            unit = Fraction(rng.randint(1, 9), rng.choice([1, 4, 16]))
            pots = [unit * rng.randint(-50, 50) for _ in range(net.n)]
            pots[net.sink] = pots[net.source]
            plain, reduced = reduced_cost_identity(net, flow, pots)
            if not plain == reduced == by_paths:
                mismatches += 1
        per_class[name] = 100
    record(9, mismatches == 0, f"{sum(per_class.values())} flow/potential pairs over classes "
                               f"{', '.join(per_class)}, {mismatches} inexact")
    assert mismatches == 0


def _tiny_instance(rng: random.Random) -> Network:
    depth = rng.randint(1, 3)
    m = rng.randint(depth, 8)
    pairs = layered_pairs(rng, rng.randint(depth + 1, 6), m, depth)[:8]
    budget = rng.randint(len(pairs), 8)
    caps = [1] * len(pairs)
    for _ in range(budget - len(pairs)):
        caps[rng.randrange(len(pairs))] += 1
    signed = rng.random() < 0.5
    raw = []
    for (u, v), c in zip(pairs, caps):
        w = rng.randint(-10, 20) if signed else rng.randint(1, 20)
        raw.append(RawEdge(u, v, float(c), Linear(Fraction(w), float(c))))
    return validate_and_level(raw, signed=signed)


def test_criterion_10_oracle_self_check(record):
    rng = random.Random(1010)
    checked = mismatched = 0
    while checked < 600:
        try:
            net = _tiny_instance(rng)
        except ValueError:
            continue  # pruned to nothing
        assert net.m <= 8 and sum(e.capacity for e in net.edges) <= 8
        if exact_linear_opt(net).value != brute_force_opt(net).value:
            mismatched += 1
        checked += 1
    record(10, mismatched == 0, f"{checked} instances with m <= 8 and sum(c) <= 8, "
                                f"{mismatched} oracle/brute-force disagreements")
    assert mismatched == 0
