"""Augmentation engines over an eligible graph."""

from __future__ import annotations

from dataclasses import dataclass, field

from .eligibility import EligibleGraph


@dataclass
class Augmentation:
    """Flow pushed through one eligible graph.

    ``pushed[a]`` is the amount sent along arc ``a`` of ``graph``; ``paths``
    lists the individual pushes as ``(arc ids, amount)``.
    """

    graph: EligibleGraph
    pushed: list[float]
    paths: list[tuple[tuple[int, ...], float]] = field(default_factory=list)

    @property
    def value(self) -> float:
        return sum(amount for _, amount in self.paths)

    def residual(self) -> list[float]:
        return [c - f for c, f in zip(self.graph.arc_cap, self.pushed)]


def _layered_phases(graph: EligibleGraph) -> Augmentation:
    n, s, t, tau = graph.n, graph.source, graph.sink, graph.tau
    adjacency, heads, tails = graph.adjacency, graph.arc_head, graph.arc_tail
    rem = list(graph.arc_cap)
    pushed = [0.0] * len(rem)
    aug = Augmentation(graph, pushed)
    if not graph.reachable[t]:
        return aug
    while True:
        level = [-1] * n
        level[s] = 0
        frontier = [s]
        while frontier and level[t] < 0:
            nxt = []
            for u in frontier:
                for a in adjacency[u]:
                    v = heads[a]
                    if level[v] < 0 and rem[a] > tau:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        if level[t] < 0:
            return aug
        ptr = [0] * n
        path: list[int] = []
        u = s
        while True:
            if u == t:
                amount = min(rem[a] for a in path)
                for a in path:
                    if rem[a] == amount:
                        rem[a] = 0.0
                    else:
                        rem[a] -= amount
                    pushed[a] += amount
                aug.paths.append((tuple(path), amount))
                path.clear()
                u = s
                continue
            arcs = adjacency[u]
            i = ptr[u]
            while i < len(arcs):
                a = arcs[i]
                if rem[a] > tau and level[heads[a]] == level[u] + 1:
                    break
                i += 1
            ptr[u] = i
            if i < len(arcs):
                path.append(arcs[i])
                u = heads[arcs[i]]
            elif u == s:
                break
            else:
                level[u] = -1  # dead end for the rest of the phase
                a = path.pop()
                u = tails[a]
                ptr[u] += 1


def blocking_flow(graph: EligibleGraph) -> Augmentation:
    """Flow after which every s-t path in ``graph`` has a saturated arc.

    Runs layered phases (breadth-first levels, depth-first saturation with
    current-arc pruning) until the residual has no s-t path at all, which
    also covers eligible graphs containing cycles.
    """
    return _layered_phases(graph)


def maximal_disjoint_paths(graph: EligibleGraph) -> Augmentation:
    """One unit on each path of a maximal set of arc-disjoint s-t paths."""
    if any(c != 1.0 for c in graph.arc_cap):
        raise ValueError("unit arc capacities required")
    return _layered_phases(graph)
