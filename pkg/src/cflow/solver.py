"""Primal-dual drivers: the unit-capacity algorithm, the scaling algorithm for
linear weights, and its extension to concave weight functions."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .blocking import Augmentation, blocking_flow, maximal_disjoint_paths
from .eligibility import EligibleGraph, FlowState, build_eligible_graph
from .network import Grid, Network, NetworkError
from .verify import AuditReport, check_invariants

AUDIT_MODES = ("every", "scale", "off")

TraceSink = Callable[[str], None]


class SolverError(RuntimeError):
    """An internal invariant of the driver loop broke (a bug, not bad input)."""


@dataclass
class SolveResult:
    mode: str
    network: Network
    grid: Grid
    flow: list[float]
    objective: float
    potentials: list[Fraction]
    scale_iterations: list[int]
    augmented: float
    audit: AuditReport
    final_step: list[Fraction | None]  # step size at each edge's last forward push
    loose_final_edges: int  # edges meeting only the looser end-of-run lower bound
    elapsed: float
    expected_iterations: list[int] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return sum(self.scale_iterations)

    @property
    def scales(self) -> int:
        return len(self.scale_iterations)

    def exact_objective(self) -> Fraction:
        """Objective in exact arithmetic (linear networks only)."""
        net = self.network
        return sum((net.linear_weight(e) * Fraction(self.flow[e.index]) for e in net.edges), Fraction(0))

    def duals(self) -> list[float]:
        """Edge duals ``max(0, reduced gradient)`` at the final flow."""
        p = self.potentials
        out = []
        for e in self.network.edges:
            g = e.weight.gradient(self.flow[e.index]) + float(p[e.tail]) - float(p[e.head])
            out.append(max(0.0, g))
        return out


def dual_adjust(state: FlowState, graph: EligibleGraph) -> int:
    """Lower the potential of every vertex not reachable from s by one step."""
    step = state.step
    dropped = 0
    for u, seen in enumerate(graph.reachable):
        if not seen:
            state.p[u] -= step
            dropped += 1
    return dropped


def dual_rescale(state: FlowState, levels: tuple[int, ...]) -> None:
    """Raise each potential by the current step times its level."""
    step = state.step
    for u, lvl in enumerate(levels):
        state.p[u] += step * lvl


def apply_augmentation(state: FlowState, aug: Augmentation, scale: int) -> None:
    graph = aug.graph
    x, caps, tau = state.x, state.table.caps, state.table.tau
    layers = state.layers
    for a, amount in enumerate(aug.pushed):
        if amount <= 0.0:
            continue
        e = graph.arc_edge[a]
        old = x[e]
        if graph.arc_forward[a]:
            new = old + amount
            if new > caps[e] + tau:
                raise SolverError(f"edge {e}: flow {new} exceeds capacity {caps[e]}")
            if new > caps[e] - tau:
                new = caps[e]
            state.last_scale[e] = scale
            if layers is not None:
                stack = layers[e]
                if stack and stack[-1][1] == scale:
                    stack[-1][0] = new
                else:
                    stack.append([new, scale])
        else:
            new = old - amount
            if new < -tau:
                raise SolverError(f"edge {e}: flow {new} below zero")
            if new < tau:
                new = 0.0
            if layers is not None:
                stack = layers[e]
                while len(stack) > 1 and stack[-2][0] >= new - tau:
                    stack.pop()
                if new == 0.0:
                    stack.clear()
                elif stack:
                    stack[-1][0] = new
        x[e] = new


def _fmt(v: float | Fraction) -> str:
    return f"{float(v):.12g}"


def _check_mode(net: Network, mode: str) -> None:
    if mode == "simple":
        if any(e.capacity != 1.0 for e in net.edges):
            raise NetworkError("unit capacities required")
        if not net.is_linear or net.signed:
            raise NetworkError("the simple algorithm needs positive linear weights")
    elif mode == "scaling":
        if not net.is_linear:
            raise NetworkError("the scaling algorithm needs linear weights (use concave)")
    elif mode == "concave":
        if net.signed:
            raise NetworkError("concave mode does not support signed weights")
    else:
        raise NetworkError(f"unknown algorithm {mode!r}")


def expected_iterations(grid: Grid, depth: int, mode: str) -> list[int]:
    """Exact iteration count of every scale (the potential of t drops one step
    per iteration)."""
    if mode == "simple":
        return [depth * int(grid.w_max / grid.unit)]
    half = grid.inv_eps // 2
    if grid.T == 0:
        return [depth * grid.inv_eps]
    return ([depth * half] + [depth * half + 2 * depth] * (grid.T - 1)
            + [depth * grid.inv_eps + 2 * depth])


def solve(
    net: Network,
    eps: float | Fraction,
    mode: str = "scaling",
    *,
    audit: str = "every",
    trace: TraceSink | None = None,
) -> SolveResult:
    """Run one of the three drivers on ``net``."""
    if audit not in AUDIT_MODES:
        raise ValueError(f"audit mode must be one of {AUDIT_MODES}")
    _check_mode(net, mode)
    started = time.perf_counter()
    grid = Grid.simple(net, eps) if mode == "simple" else Grid.scaling(net, eps)
    state = FlowState.initial(net, grid, mode)
    report = AuditReport.empty(state.table.tau)
    augment = maximal_disjoint_paths if mode == "simple" else blocking_flow
    s, t, depth = net.source, net.sink, net.depth
    if audit == "every":
        report.merge(check_invariants(net, state, stamp="start"))

    budget = expected_iterations(grid, depth, mode)
    counts: list[int] = []
    total = 0.0
    for i in range(grid.T + 1):
        state.scale = i
        step = state.step
        target = 0 if i == grid.T else depth * step * grid.inv_eps // 2
        if state.p[t] % step or target % step or state.p[t] < target:
            raise SolverError(f"scale {i}: potential of t off the step grid")
        done = 0
        while state.p[t] > target:
            graph = build_eligible_graph(net, state)
            aug = augment(graph)
            apply_augmentation(state, aug, i)
            total += aug.value
            state.iteration += 1
            if audit == "every":
                report.merge(check_invariants(net, state, stamp=f"scale {i} iteration {done} augment"))
            after = build_eligible_graph(net, state)
            if after.reachable[t]:
                raise SolverError("sink still reachable after a blocking augmentation")
            before = state.p[t]
            dual_adjust(state, after)
            if state.p[s] != 0 or before - state.p[t] != step:
                raise SolverError("dual adjustment moved s or missed t")
            done += 1
            if audit == "every":
                report.merge(check_invariants(net, state, stamp=f"scale {i} iteration {done - 1} adjust"))
            if trace is not None:
                trace(f"scale={i} p_t={_fmt(state.potential(t))} value={_fmt(aug.value)} "
                      f"arcs={graph.arc_count}")
            if done > budget[i]:
                raise SolverError(f"scale {i} exceeded its iteration budget {budget[i]}")
        counts.append(done)
        if i < grid.T:
            dual_rescale(state, net.levels)
            state.scale = i + 1
        if audit != "off":
            report.merge(check_invariants(net, state, stamp=f"scale {i} end"))
    if state.p[s] != 0 or state.p[t] != 0:
        raise SolverError("terminated with nonzero source or sink potential")

    final_step = [None if sc is None else grid.to_weight(grid.step(sc)) for sc in state.last_scale]
    potentials = state.potentials()
    loose = 0
    if mode != "simple":
        for e in net.edges:
            if state.x[e.index] > state.table.tau and final_step[e.index] is not None:
                rg = e.weight.left_gradient(state.x[e.index]) + float(potentials[e.tail] - potentials[e.head])
                bound = -3 * net.edge_span(e) * float(final_step[e.index]) - float(grid.unit)
                if rg < bound - 1e-9 * float(grid.w_max):
                    loose += 1
    objective = sum(e.weight.value(state.x[e.index]) for e in net.edges)
    return SolveResult(
        mode=mode,
        network=net,
        grid=grid,
        flow=list(state.x),
        objective=objective,
        potentials=potentials,
        scale_iterations=counts,
        augmented=total,
        audit=report,
        final_step=final_step,
        loose_final_edges=loose,
        elapsed=time.perf_counter() - started,
        expected_iterations=budget,
    )


def simple_flow(net: Network, eps: float | Fraction, **kw) -> SolveResult:
    return solve(net, eps, "simple", **kw)


def scaling_flow(net: Network, eps: float | Fraction, **kw) -> SolveResult:
    return solve(net, eps, "scaling", **kw)


def concave_flow(net: Network, eps: float | Fraction, **kw) -> SolveResult:
    return solve(net, eps, "concave", **kw)
