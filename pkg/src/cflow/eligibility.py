"""Reduced weights, solver state, and eligible-graph construction."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .network import Edge, Grid, Network

MODES = ("simple", "scaling", "concave")

# Flow amounts at or below this fraction of the largest capacity count as zero.
FLOW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EdgeTable:
    """Flat per-edge arrays used in the solver's inner loops."""

    tails: tuple[int, ...]
    heads: tuple[int, ...]
    caps: tuple[float, ...]
    spans: tuple[int, ...]
    linear: tuple[bool, ...]
    wq: tuple[int, ...]  # floor of the linear weight in grid units
    wfrac: tuple[int, ...]  # 1 if the linear weight is off the grid
    out_edges: tuple[tuple[int, ...], ...]
    in_edges_rev: tuple[tuple[int, ...], ...]
    tau: float

    @classmethod
    def build(cls, net: Network, grid: Grid) -> "EdgeTable":
        wq, wfrac, linear = [], [], []
        for e in net.edges:
            if e.weight.is_linear:
                q, frac = grid.units(net.linear_weight(e))
                wq.append(q)
                wfrac.append(int(frac))
                linear.append(True)
            else:
                wq.append(0)
                wfrac.append(0)
                linear.append(False)
        return cls(
            tails=tuple(e.tail for e in net.edges),
            heads=tuple(e.head for e in net.edges),
            caps=tuple(e.capacity for e in net.edges),
            spans=tuple(net.edge_span(e) for e in net.edges),
            linear=tuple(linear),
            wq=tuple(wq),
            wfrac=tuple(wfrac),
            out_edges=net.out_edges,
            in_edges_rev=tuple(tuple(reversed(ins)) for ins in net.in_edges),
            tau=FLOW_TOLERANCE * net.max_capacity,
        )


@dataclass
class FlowState:
    """Mutable primal-dual state of one solve.

    ``p`` holds potentials as integer counts of ``grid.unit``.  ``last_scale``
    records the most recent scale with a forward push on each edge.  In
    concave mode ``layers`` keeps, per edge, the stack of ``[top, scale]``
    flow layers still present, so the lower invariant can be checked against
    the scale that placed the flow currently sitting at ``x``.
    """

    mode: str
    grid: Grid
    table: EdgeTable
    x: list[float]
    p: list[int]
    scale: int = 0
    last_scale: list[int | None] = field(default_factory=list)
    layers: list[list[list]] | None = None
    iteration: int = 0

    @classmethod
    def initial(cls, net: Network, grid: Grid, mode: str) -> "FlowState":
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        top = grid.w_max / grid.unit
        assert top.denominator == 1
        return cls(
            mode=mode,
            grid=grid,
            table=EdgeTable.build(net, grid),
            x=[0.0] * net.m,
            p=[int(top) * lvl for lvl in net.levels],
            last_scale=[None] * net.m,
            layers=[[] for _ in range(net.m)] if mode == "concave" else None,
        )

    @property
    def step(self) -> int:
        """Current step size in grid units."""
        return self.grid.step(self.scale)

    def potential(self, u: int) -> Fraction:
        return self.grid.to_weight(self.p[u])

    def potentials(self) -> list[Fraction]:
        return [self.grid.to_weight(v) for v in self.p]


def reduced_gradient(edge: Edge, x: float, p: Sequence) -> float | Fraction:
    """``w_e(x) + p_u - p_v`` with potentials given in weight units."""
    w = edge.weight
    if w.is_linear and all(isinstance(p[v], (int, Fraction)) for v in (edge.tail, edge.head)):
        g = Fraction(w.weight) if hasattr(w, "weight") else Fraction(w.gradient(x))
        return g + p[edge.tail] - p[edge.head]
    return w.gradient(x) + float(p[edge.tail]) - float(p[edge.head])


@dataclass
class EligibleGraph:
    """Residual arcs admitted by the current rule set.

    Arc ``a`` moves flow along edge ``arc_edge[a]``, forward when
    ``arc_forward[a]`` (tail to head) and backward otherwise, with room
    ``arc_cap[a] > 0``.
    """

    n: int
    source: int
    sink: int
    arc_edge: list[int]
    arc_forward: list[bool]
    arc_cap: list[float]
    arc_tail: list[int]
    arc_head: list[int]
    adjacency: list[list[int]]
    reachable: list[bool]
    tau: float

    @property
    def arc_count(self) -> int:
        return len(self.arc_edge)

    def arcs(self) -> list[tuple[int, str, float]]:
        return [(e, "forward" if f else "backward", c)
                for e, f, c in zip(self.arc_edge, self.arc_forward, self.arc_cap)]

    def sink_reachable(self) -> bool:
        return self.reachable[self.sink]


def _headrooms(net: Network, state: FlowState) -> tuple[list[float], list[float]]:
    tab = state.table
    x, p, step = state.x, state.p, state.step
    tails, heads, caps, wq, wfrac = tab.tails, tab.heads, tab.caps, tab.wq, tab.wfrac
    tau = tab.tau
    m = len(caps)
    fwd = [0.0] * m
    bwd = [0.0] * m
    mode = state.mode
    if mode == "simple":
        for e in range(m):
            r = wq[e] + p[tails[e]] - p[heads[e]]
            if x[e] == 0.0:
                if r == 1:
                    fwd[e] = 1.0
            elif r == 0:
                bwd[e] = 1.0
        return fwd, bwd
    unitf = float(state.grid.unit)
    linear = tab.linear
    for e in range(m):
        if linear[e]:
            r = wq[e] + p[tails[e]] - p[heads[e]]
            if r >= step:
                room = caps[e] - x[e]
                if room > tau:
                    fwd[e] = room
            elif r + wfrac[e] <= 0 and x[e] > tau:
                bwd[e] = x[e]
        else:
            wf = net.edges[e].weight
            d = (p[tails[e]] - p[heads[e]]) * unitf
            room = min(caps[e] - x[e], wf.forward_headroom(x[e], caps[e], step * unitf - d))
            if room > tau:
                fwd[e] = room
            else:
                back = min(x[e], wf.backward_headroom(x[e], -d))
                if back > tau:
                    bwd[e] = back
    return fwd, bwd


def build_eligible_graph(net: Network, state: FlowState) -> EligibleGraph:
    """Collect eligible residual arcs and the set of vertices reachable from s.

    At each vertex, forward arcs follow edge input order and backward arcs
    follow reverse input order, so parallel copies of a split edge are filled
    from the highest weight and drained from the lowest.
    """
    fwd, bwd = _headrooms(net, state)
    tab = state.table
    arc_edge: list[int] = []
    arc_forward: list[bool] = []
    arc_cap: list[float] = []
    arc_tail: list[int] = []
    arc_head: list[int] = []
    adjacency: list[list[int]] = []
    for u in range(net.n):
        adj = []
        for e in tab.out_edges[u]:
            if fwd[e]:
                adj.append(len(arc_edge))
                arc_edge.append(e)
                arc_forward.append(True)
                arc_cap.append(fwd[e])
                arc_tail.append(u)
                arc_head.append(tab.heads[e])
        for e in tab.in_edges_rev[u]:
            if bwd[e]:
                adj.append(len(arc_edge))
                arc_edge.append(e)
                arc_forward.append(False)
                arc_cap.append(bwd[e])
                arc_tail.append(u)
                arc_head.append(tab.tails[e])
        adjacency.append(adj)

    reachable = [False] * net.n
    reachable[net.source] = True
    todo = [net.source]
    while todo:
        u = todo.pop()
        for a in adjacency[u]:
            v = arc_head[a]
            if not reachable[v]:
                reachable[v] = True
                todo.append(v)
    return EligibleGraph(net.n, net.source, net.sink, arc_edge, arc_forward, arc_cap,
                         arc_tail, arc_head, adjacency, reachable, tab.tau)
