from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from cflow.network import NetworkError
from cflow.reductions import (
    assignment_to_network,
    chained_matching_to_network,
    max_outflow,
    mincost_bound,
    mincost_with_reward,
    multisource_concave_to_network,
    scheduling_to_network,
)
from cflow.solver import concave_flow, scaling_flow
from cflow.verify import exact_linear_opt
from cflow.weights import Linear, Quadratic

from helpers import linear_net


def _exact(rm):
    opt = exact_linear_opt(rm.network)
    app = rm.application(opt.flow)
    assert rm.network_value(app, opt.flow) == opt.value
    return opt, app


def test_single_pair_assignment():
    rm = assignment_to_network({"a": 1}, {"b": 1}, [("a", "b", 5)], aux_weight=0)
    assert rm.network.m == 3 and rm.depth == 3
    assert _exact(rm)[1].objective == 5


def test_two_by_two_assignment_takes_diagonal():
    pairs = [("1", "1", 5), ("1", "2", 1), ("2", "1", 1), ("2", "2", 5)]
    rm = assignment_to_network({"1": 1, "2": 1}, {"1": 1, "2": 1}, pairs, aux_weight=0)
    _, app = _exact(rm)
    assert app.objective == 10 and app.solution == {("1", "1"): 1, ("2", "2"): 1}


def test_b_matching_side_capacity():
    rm = assignment_to_network({"a": 2, "b": 1}, {"x": 1, "y": 1, "z": 1},
                               [("a", "x", 3), ("a", "y", 3), ("a", "z", 3), ("b", "z", 1)], aux_weight=0)
    s_edge = next(e for e in rm.network.edges if rm.network.label(e) == "s->L:a")
    assert s_edge.capacity == 2
    _, app = _exact(rm)
    assert sum(v for (i, _), v in app.solution.items() if i == "a") == 2
    assert app.objective == 7


def test_chained_examples():
    one = chained_matching_to_network(["x"], ["y"], ["z"], [("x", "y", 3)], [("y", "z", 4)], aux_weight=0)
    assert one.depth == 5
    _, app = _exact(one)
    assert app.objective == 7 and app.solution == {("x", "y", "z"): 1}
    shared = chained_matching_to_network(["x1", "x2"], ["y"], ["z1", "z2"],
                                         [("x1", "y", 3), ("x2", "y", 1)],
                                         [("y", "z1", 4), ("y", "z2", 2)], aux_weight=0)
    assert _exact(shared)[1].objective == 7
    apart = chained_matching_to_network(["x1", "x2"], ["y1", "y2"], ["z1", "z2"],
                                        [("x1", "y1", 3), ("x2", "y2", 1)],
                                        [("y1", "z1", 4), ("y2", "z2", 2)], aux_weight=0)
    assert _exact(apart)[1].objective == 10


def _best_schedule(jobs, caps):
    best = 0
    for mask in itertools.product([0, 1], repeat=len(jobs)):
        chosen = [j for j, b in zip(jobs, mask) if b]
        if all(sum(1 for _, a, z, _ in chosen if a <= k < z) <= caps[k - 1] for k in range(1, len(caps))):
            best = max(best, sum(g for *_, g in chosen))
    return best


def test_scheduling_examples():
    rm = scheduling_to_network([("j", 1, 2, 3)], [1, 1], aux_weight=0)
    assert rm.depth == 2 + 2
    assert _exact(rm)[1].objective == 3
    overlap = scheduling_to_network([("a", 1, 3, 4), ("b", 2, 3, 6)], [1, 1, 1], aux_weight=0)
    assert _exact(overlap)[1].objective == 6
    apart = scheduling_to_network([("a", 1, 2, 4), ("b", 2, 3, 6)], [1, 1, 1], aux_weight=0)
    assert _exact(apart)[1].objective == 10


def test_scheduling_without_forcing_can_dodge_capacities():
    jobs = [("A", 1, 2, 10), ("B", 1, 2, 10), ("C", 1, 1, 1)]
    rm = scheduling_to_network(jobs, [1, 1], aux_weight=0, forcing=False)
    opt = exact_linear_opt(rm.network)
    app = rm.application(opt.flow)
    assert opt.value == 20 and not app.feasible and app.objective == 10
    forced = scheduling_to_network(jobs, [1, 1], aux_weight=0)
    assert _exact(forced)[1].objective == _best_schedule(jobs, [1, 1]) == 11


def test_scheduling_matches_enumeration():
    rng = random.Random(11)
    for _ in range(40):
        days = rng.randint(1, 4)
        jobs = []
        for k in range(rng.randint(1, 5)):
            a = rng.randint(1, days)
            jobs.append((f"j{k}", a, rng.randint(a, days), rng.randint(1, 9)))
        caps = [rng.randint(0, 2) for _ in range(days)]
        rm = scheduling_to_network(jobs, caps, aux_weight=0)
        _, app = _exact(rm)
        assert app.feasible and app.objective == _best_schedule(jobs, caps)


def test_mincost_examples():
    path = linear_net([("s", "a", 5, 1), ("a", "t", 5, 1)])
    rm = mincost_with_reward(path, 5)
    assert sorted(rm.network.linear_weight(e) for e in rm.network.edges) == [-1, -1, 5]
    _, app = _exact(rm)
    assert app.objective == 2 * 5 - 5 * 5
    path1 = linear_net([("s", "a", 1, 1), ("a", "t", 1, 1)])
    assert _exact(mincost_with_reward(path1, 5))[1].objective == -3
    _, none = _exact(mincost_with_reward(path1, 1))
    assert none.objective == 0 and none.solution["value"] == 0
    _, single = _exact(mincost_with_reward(linear_net([("s", "t", 2, 1)]), 3))
    assert single.objective == -4 and single.solution["value"] == 2


def test_mincost_solved_at_an_eighth_meets_additive_bound():
    eps = Fraction(1, 16)
    net = linear_net([("s", "a", 3, 2), ("a", "t", 2, 1), ("s", "t", 2, 5), ("a", "t", 3, 3)])
    rm = mincost_with_reward(net, 6)
    _, best = _exact(rm)
    res = scaling_flow(rm.network, eps / 8)
    app = rm.application(res.flow)
    assert app.objective <= mincost_bound(best.objective, best.solution["value"], Fraction(6), eps)


def test_multisource_prefers_the_heavier_source():
    edges = [("s1", "a", 1), ("s2", "a", 1), ("a", "t", 1)]
    rm = multisource_concave_to_network(
        edges, [("s1", lambda c: Linear(3, c)), ("s2", lambda c: Linear(2, c))], aux_weight=0)
    assert rm.depth == 3
    _, app = _exact(rm)
    assert app.solution == {"s1": 1, "s2": 0}


def test_multisource_symmetric_concave_splits_evenly():
    edges = [("s1", "a", 1), ("s2", "a", 1), ("a", "t", 1)]
    quad = lambda c: Quadratic(4, 1, c)  # noqa: E731
    rm = multisource_concave_to_network(edges, [("s1", quad), ("s2", quad)])
    res = concave_flow(rm.network, Fraction(1, 32))
    app = rm.application(res.flow)
    f = Quadratic(4, 1, 1.0).value
    best = max(f(i / 1000) + f(1 - i / 1000) for i in range(1001))
    split = [float(app.solution["s1"]), float(app.solution["s2"])]
    assert sum(split) == pytest.approx(1)
    assert abs(split[0] - split[1]) <= 0.25
    assert best == pytest.approx(3.5)
    assert float(app.objective) >= (1 - 9 / 32) * best


def test_max_outflow_and_unreachable_source():
    edges = [("s1", "a", 2), ("a", "t", 1), ("s1", "t", 1)]
    assert max_outflow(edges, "s1") == 2
    with pytest.raises(NetworkError, match="cannot reach"):
        multisource_concave_to_network(edges + [("s2", "b", 1)], [("s2", lambda c: Linear(1, c))])


def test_default_aux_weight_bounds_the_perturbation():
    pairs = [("1", "1", 5), ("1", "2", 1), ("2", "1", 1), ("2", "2", 5)]
    eps = Fraction(1, 16)
    rm = assignment_to_network({"1": 1, "2": 1}, {"1": 1, "2": 1}, pairs, eps=eps)
    assert rm.aux_weight == eps * 1 / 4
    res = scaling_flow(rm.network, eps)
    app = rm.application(res.flow)
    assert res.exact_objective() - app.objective <= rm.perturbation
    assert app.objective >= (1 - 8 * eps) * 10 - rm.perturbation
