"""Seeded random instances for tests and benchmarks."""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable

from .network import Network, RawEdge, validate_and_level
from .weights import Linear, PiecewiseLinear, Quadratic, WeightFunction

WeightMaker = Callable[[random.Random, float], WeightFunction]


def layered_pairs(rng: random.Random, n: int, m: int, depth: int) -> list[tuple[str, str]]:
    """Random DAG arcs on ``n`` vertices with longest s-t path exactly ``depth``.

    Vertices get layers; arcs only climb layers.  A backbone path fixes the
    depth and every vertex gets at least one arc in and one arc out.
    """
    depth = max(1, depth)
    n = max(n, depth + 1)
    layer = {"s": 0, "t": depth}
    names = ["s", "t"]
    for i in range(1, depth):
        layer[f"v{i}"] = i
        names.append(f"v{i}")
    for k in range(depth, n - 1):
        name = f"v{k}"
        layer[name] = rng.randint(1, depth - 1) if depth > 1 else 0
        if depth > 1:
            names.append(name)
    backbone = ["s"] + [f"v{i}" for i in range(1, depth)] + ["t"]
    pairs = list(zip(backbone, backbone[1:]))
    for v in names:
        if v in ("s", "t"):
            continue
        if not any(b == v for _, b in pairs):
            pairs.append((rng.choice([u for u in names if layer[u] < layer[v]]), v))
        if not any(a == v for a, _ in pairs):
            pairs.append((v, rng.choice([u for u in names if layer[u] > layer[v]])))
    attempts = 0
    while len(pairs) < m and attempts < 50 * m:
        attempts += 1
        u, v = rng.sample(names, 2)
        if layer[u] > layer[v]:
            u, v = v, u
        if layer[u] < layer[v]:
            pairs.append((u, v))
    rng.shuffle(pairs)
    return pairs


def random_network(
    rng: random.Random,
    *,
    n: int,
    m: int,
    depth: int,
    weight: WeightMaker,
    capacity: Callable[[random.Random], float] = lambda r: float(r.randint(1, 8)),
    signed: bool = False,
) -> Network:
    pairs = layered_pairs(rng, n, m, depth)
    raw = []
    for u, v in pairs:
        c = capacity(rng)
        raw.append(RawEdge(u, v, c, weight(rng, c)))
    return validate_and_level(raw, signed=signed)


def linear_weights(lo: int = 1, hi: int = 64) -> WeightMaker:
    return lambda rng, c: Linear(Fraction(rng.randint(lo, hi)), c)


def signed_weights(lo: int = 1, hi: int = 64, negative: float = 0.3) -> WeightMaker:
    def make(rng: random.Random, c: float) -> WeightFunction:
        w = rng.randint(lo, hi)
        return Linear(Fraction(-w if rng.random() < negative else w), c)
    return make


def grid_pwl_weights(unit: Fraction, lo: int, hi: int, max_pieces: int = 4) -> WeightMaker:
    """Piecewise-linear functions whose gradients are multiples of ``unit`` and
    whose breakpoints are dyadic."""
    def make(rng: random.Random, c: float) -> WeightFunction:
        k = rng.randint(1, max_pieces)
        grads = sorted(rng.sample(range(lo, hi + 1), k), reverse=True)
        cuts = sorted(rng.sample(range(1, int(c * 4)), k - 1)) if k > 1 and c * 4 > k else []
        xs = [q / 4 for q in cuts] + [c]
        grads = grads[: len(xs)]
        return PiecewiseLinear(tuple(xs), tuple(float(g * unit) for g in grads))
    return make


def quadratic_weights(lo: float = 1.0, hi: float = 16.0) -> WeightMaker:
    """``a*x - b*x^2`` with gradients inside ``[lo, hi]`` over the domain."""
    def make(rng: random.Random, c: float) -> WeightFunction:
        top = rng.uniform(lo + 1e-3, hi)
        bottom = rng.uniform(lo, top)
        return Quadratic(top, (top - bottom) / (2 * c), c)
    return make


def random_linear_instance(seed: int, *, n_max: int = 40, m_max: int = 120, d_max: int = 8,
                           w_max: int = 64, c_max: int = 8, unit: bool = False) -> Network:
    rng = random.Random(seed)
    depth = rng.randint(1, d_max)
    n = rng.randint(depth + 1, max(depth + 1, n_max))
    m = rng.randint(max(depth, n), m_max)
    cap = (lambda r: 1.0) if unit else (lambda r: float(r.randint(1, c_max)))
    return random_network(rng, n=n, m=m, depth=depth, weight=linear_weights(1, w_max), capacity=cap)
