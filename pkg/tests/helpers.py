from __future__ import annotations

from fractions import Fraction

from cflow.network import Network, RawEdge, validate_and_level
from cflow.weights import Linear


def linear_net(edges, *, signed: bool = False) -> Network:
    """Network from ``(tail, head, capacity, weight)`` tuples."""
    return validate_and_level(
        [RawEdge(u, v, float(c), Linear(Fraction(w), float(c))) for u, v, c, w in edges],
        signed=signed,
    )


def net_of(edges) -> Network:
    """Network from ``(tail, head, capacity, weight_function)`` tuples."""
    return validate_and_level([RawEdge(u, v, float(c), wf) for u, v, c, wf in edges])


PARALLEL = [("s", "t", 1, 8), ("s", "t", 1, 2)]
DIAMOND = [("s", "a", 1, 1), ("a", "t", 1, 1), ("s", "b", 1, 1), ("b", "t", 1, 1)]
