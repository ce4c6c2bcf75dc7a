"""Auditing and certification: invariant checks, the reduced-cost identity,
the multiedge expansion of concave edges, and an exact oracle for linear
instances."""

from __future__ import annotations

import heapq
import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Sequence

from .network import Network, NetworkError, RawEdge, validate_and_level
from .weights import Linear

if TYPE_CHECKING:
    from .eligibility import FlowState
    from .solver import SolveResult

CHECKS = ("capacity", "conservation", "source_potential", "grid",
          "A1", "A2", "B1", "B2", "scale_record")


@dataclass
class AuditReport:
    tolerance: float
    counts: dict[str, list[int]] = field(default_factory=dict)
    first_violation: str | None = None
    points: int = 0

    @classmethod
    def empty(cls, tolerance: float) -> "AuditReport":
        return cls(tolerance)

    @property
    def violations(self) -> int:
        return sum(c[1] for c in self.counts.values())

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def add(self, name: str, passed: int, failed: int = 0, detail: str | None = None) -> None:
        c = self.counts.setdefault(name, [0, 0])
        c[0] += passed
        c[1] += failed
        if failed and self.first_violation is None:
            self.first_violation = detail

    def merge(self, other: "AuditReport") -> None:
        for name, (passed, failed) in other.counts.items():
            self.add(name, passed, failed)
        if self.first_violation is None:
            self.first_violation = other.first_violation
        self.points += other.points

    def lines(self) -> list[str]:
        out = [f"audit_points: {self.points}", f"audit_violations: {self.violations}",
               f"audit_tolerance: {self.tolerance:.12g}"]
        for name in CHECKS:
            if name in self.counts:
                passed, failed = self.counts[name]
                out.append(f"check_{name}: {passed} passed, {failed} failed")
        if self.first_violation:
            out.append(f"first_violation: {self.first_violation}")
        return out


def check_invariants(net: Network, state: "FlowState", stamp: str = "") -> AuditReport:
    """Evaluate every invariant of the state's rule set once."""
    tab = state.table
    tau = tab.tau
    report = AuditReport(tau, points=1)
    x, p = state.x, state.p
    step = state.step
    caps, tails, heads = tab.caps, tab.tails, tab.heads

    def fail(name: str, msg: str) -> None:
        report.add(name, 0, 1, f"{stamp}: {msg}")

    bad = [e for e in range(net.m) if not -tau <= x[e] <= caps[e] + tau]
    report.add("capacity", net.m - len(bad))
    for e in bad:
        fail("capacity", f"edge {net.label(net.edges[e])} flow {x[e]!r} outside [0, {caps[e]!r}]")

    ok_counts = dict.fromkeys(("conservation", "A1", "A2", "B1", "B2", "scale_record"), 0)
    balance = [0.0] * net.n
    for e in range(net.m):
        balance[tails[e]] -= x[e]
        balance[heads[e]] += x[e]
    for u in range(net.n):
        if u in (net.source, net.sink):
            continue
        slack = tau * (len(net.out_edges[u]) + len(net.in_edges[u]))
        if abs(balance[u]) <= slack:
            ok_counts["conservation"] += 1
        else:
            fail("conservation", f"vertex {net.names[u]} imbalance {balance[u]!r}")

    if p[net.source] == 0:
        report.add("source_potential", 1)
    else:
        fail("source_potential", f"p_s = {p[net.source]} units")
    off = [u for u in range(net.n) if p[u] % step]
    report.add("grid", net.n - len(off))
    for u in off:
        fail("grid", f"p_{net.names[u]} = {p[u]} units is not a multiple of the step {step}")

    wq = tab.wq
    if state.mode == "simple":
        for e in range(net.m):
            r = wq[e] + p[tails[e]] - p[heads[e]]
            if x[e] == 1.0:
                if r >= 0:
                    ok_counts["A1"] += 1
                else:
                    fail("A1", f"edge {net.label(net.edges[e])} full with reduced weight {r} units")
            elif r <= step:
                ok_counts["A2"] += 1
            else:
                fail("A2", f"edge {net.label(net.edges[e])} empty with reduced weight {r} units")
    else:
        _check_scaling_rules(net, state, ok_counts, fail)
    rules = ("A1", "A2") if state.mode == "simple" else ("B1", "B2", "scale_record")
    for name in ("conservation",) + rules:
        report.add(name, ok_counts[name])
    return report


def _check_scaling_rules(net: Network, state: "FlowState", ok_counts: dict[str, int], fail) -> None:
    tab = state.table
    tau, x, p, step = tab.tau, state.x, state.p, state.step
    caps, tails, heads = tab.caps, tab.tails, tab.heads
    wq, wfrac, spans = tab.wq, tab.wfrac, tab.spans
    unitf = float(state.grid.unit)
    slack = 1e-9 * float(state.grid.w_max)
    layers = state.layers
    for e in range(net.m):
        lin = tab.linear[e]
        if x[e] > tau:
            label = state.last_scale[e]
            if not lin and layers is not None:
                label = layers[e][-1][1] if layers[e] else None
            if label is None:
                fail("scale_record", f"edge {net.label(net.edges[e])} carries flow but was never pushed")
            else:
                ok_counts["scale_record"] += 1
                bound = -3 * spans[e] * (state.grid.step(label) - step) - step
                if lin:
                    val = wq[e] + p[tails[e]] - p[heads[e]]
                    ok = val >= bound
                else:
                    g = net.edges[e].weight.left_gradient(max(x[e] - tau, 0.0))
                    val = g + (p[tails[e]] - p[heads[e]]) * unitf
                    ok = val >= bound * unitf - slack
                if ok:
                    ok_counts["B1"] += 1
                else:
                    fail("B1", f"edge {net.label(net.edges[e])} reduced gradient {val!r}"
                               f"{' units' if lin else ''} below {bound} units")
        if x[e] < caps[e] - tau:
            if lin:
                val = wq[e] + p[tails[e]] - p[heads[e]]
                ok = val + wfrac[e] <= 2 * step
            else:
                g = net.edges[e].weight.gradient(min(x[e] + tau, caps[e]))
                val = g + (p[tails[e]] - p[heads[e]]) * unitf
                ok = val <= 2 * step * unitf + slack
            if ok:
                ok_counts["B2"] += 1
            else:
                fail("B2", f"edge {net.label(net.edges[e])} reduced gradient {val!r}"
                           f"{' units' if lin else ''} above {2 * step} units")


def reduced_cost_identity(
    net: Network, flow: Sequence[float | Fraction], potentials: Sequence[Fraction | int]
) -> tuple[Fraction, Fraction]:
    """Return ``(sum w_e x_e, sum (w_e + p_u - p_v) x_e)``, which agree for any
    conserving flow when ``p_s == p_t``."""
    x = [Fraction(v) for v in flow]
    p = [Fraction(v) for v in potentials]
    if p[net.source] != p[net.sink]:
        raise ValueError("reduced-cost identity needs p_s == p_t")
    balance = [Fraction(0)] * net.n
    for e in net.edges:
        balance[e.tail] -= x[e.index]
        balance[e.head] += x[e.index]
    for u in range(net.n):
        if u not in (net.source, net.sink) and balance[u] != 0:
            raise ValueError(f"flow is not conserved at {net.names[u]}")
    plain = sum((net.linear_weight(e) * x[e.index] for e in net.edges), Fraction(0))
    reduced = sum(((net.linear_weight(e) + p[e.tail] - p[e.head]) * x[e.index] for e in net.edges),
                  Fraction(0))
    return plain, reduced


# --- multiedge expansion -------------------------------------------------------

DEFAULT_EXPANSION_CAP = 10**6


@dataclass(frozen=True)
class ExpandedNetwork:
    """Concave edges split into parallel linear edges of decreasing weight.

    ``groups[e]`` lists the expanded edge indices for original edge ``e`` in
    decreasing weight order.
    """

    network: Network
    original: Network
    groups: tuple[tuple[int, ...], ...]
    unit: Fraction

    def weights(self, e: int) -> list[Fraction]:
        return [self.network.linear_weight(self.network.edges[j]) for j in self.groups[e]]

    def capacities(self, e: int) -> list[float]:
        return [self.network.edges[j].capacity for j in self.groups[e]]

    def totals(self, flow: Sequence[float]) -> list[float]:
        return [sum(flow[j] for j in group) for group in self.groups]

    def well_ordered(self, flow: Sequence[float]) -> list[float]:
        """Fill each group greedily from its highest weight."""
        out = [0.0] * self.network.m
        for e, group in enumerate(self.groups):
            left = flow[e]
            for j in group:
                take = min(left, self.network.edges[j].capacity)
                out[j] = take
                left -= take
        return out

    def step_gradient(self, e: int, x: float) -> Fraction:
        """Weight of the group member that holds position ``x`` when filled in order."""
        acc = 0.0
        group = self.groups[e]
        for j in group:
            acc += self.network.edges[j].capacity
            if x < acc:
                return self.network.linear_weight(self.network.edges[j])
        return self.network.linear_weight(self.network.edges[group[-1]])


def expand_multiedges(
    net: Network,
    unit: Fraction,
    *,
    bounds: tuple[Fraction, Fraction] | None = None,
    cap: int = DEFAULT_EXPANSION_CAP,
) -> ExpandedNetwork:
    unit = Fraction(unit)
    if unit <= 0:
        raise ValueError("expansion unit must be positive")
    raw: list[RawEdge] = []
    groups: list[list[int]] = []
    for e in net.edges:
        wf, c = e.weight, e.capacity
        members: list[int] = []
        if wf.is_linear:
            q = net.linear_weight(e) / unit
            levels = [q.numerator // q.denominator]
        else:
            top = Fraction(wf.gradient(0.0)) / unit
            bottom = Fraction(wf.gradient(c)) / unit
            hi, lo = top.numerator // top.denominator, bottom.numerator // bottom.denominator
            if len(raw) + hi - lo + 1 > cap:
                raise NetworkError(f"expansion needs more than {cap} parallel edges")
            levels = list(range(hi, lo - 1, -1))
        prev = 0.0
        for j, lvl in enumerate(levels):
            if j == len(levels) - 1:
                upto = c
            else:
                upto = min(c, max(prev, wf.forward_headroom(0.0, c, float(lvl * unit))))
            if upto > prev:
                members.append(len(raw))
                raw.append(RawEdge(net.names[e.tail], net.names[e.head], upto - prev,
                                   Linear(lvl * unit, upto - prev), len(raw)))
            prev = upto
        groups.append(members)
    if len(raw) > cap:
        raise NetworkError(f"expansion needs more than {cap} parallel edges")
    expanded = validate_and_level(raw, source=net.names[net.source], sink=net.names[net.sink],
                                  signed=net.signed, bounds=bounds)
    return ExpandedNetwork(expanded, net, tuple(map(tuple, groups)), unit)


# --- exact oracle ------------------------------------------------------------------

DEFAULT_ORACLE_CAP = (100_000, 10**7)


class OracleCapError(NetworkError):
    """The instance is too large for the exact oracle."""


def oracle_caps() -> tuple[int, float]:
    raw = os.environ.get("CFLOW_ORACLE_CAP")
    if not raw:
        return DEFAULT_ORACLE_CAP
    parts = raw.split(",")
    try:
        edges = int(parts[0])
        total = float(parts[1]) if len(parts) > 1 else DEFAULT_ORACLE_CAP[1]
    except ValueError:
        raise NetworkError(f"bad CFLOW_ORACLE_CAP value {raw!r}") from None
    return edges, total


@dataclass(frozen=True)
class OracleResult:
    value: Fraction
    flow: tuple[Fraction, ...]


def _check_caps(net: Network) -> None:
    max_edges, max_total = oracle_caps()
    total = sum(e.capacity for e in net.edges)
    if net.m > max_edges or total > max_total:
        raise OracleCapError(f"oracle cap exceeded (m={net.m}, total capacity={total:.12g})")


def exact_linear_opt(net: Network) -> OracleResult:
    """Maximum-weight flow by successive maximum-weight augmenting paths.

    Parallel edges are merged into one bundle whose members are filled from
    the highest weight and drained from the lowest, so each bundle offers at
    most one residual arc per direction.  Path search is Dijkstra on costs
    ``-w`` made non-negative by potentials; all arithmetic is exact.
    """
    _check_caps(net)
    weights = [net.linear_weight(e) for e in net.edges]
    scale = 1
    for w in weights:
        scale = scale * w.denominator // math.gcd(scale, w.denominator)
    iw = [int(w * scale) for w in weights]

    bundles: dict[tuple[int, int], list[int]] = {}
    for e in net.edges:
        bundles.setdefault((e.tail, e.head), []).append(e.index)
    keys = list(bundles)
    members = [sorted(bundles[k], key=lambda j: -iw[j]) for k in keys]
    caps = [Fraction(e.capacity) for e in net.edges]
    x = [Fraction(0)] * net.m
    first_open = [0] * len(keys)  # first member with spare capacity
    last_used = [-1] * len(keys)  # last member carrying flow
    out_b: list[list[int]] = [[] for _ in range(net.n)]
    in_b: list[list[int]] = [[] for _ in range(net.n)]
    for b, (u, v) in enumerate(keys):
        out_b[u].append(b)
        in_b[v].append(b)

    # initial potentials: shortest distances under cost -w over the DAG
    inf = None
    pi: list[int | None] = [inf] * net.n
    pi[net.source] = 0
    order = sorted(range(net.n), key=lambda u: net.levels[u])
    for u in order:
        if pi[u] is None:
            continue
        for b in out_b[u]:
            v = keys[b][1]
            d = pi[u] - iw[members[b][0]]
            if pi[v] is None or d < pi[v]:
                pi[v] = d
    pot = [0 if d is None else d for d in pi]

    s, t = net.source, net.sink
    while True:
        dist: list[int | None] = [None] * net.n
        via: list[tuple[int, bool] | None] = [None] * net.n
        dist[s] = 0
        heap = [(0, s)]
        done = [False] * net.n
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for b in out_b[u]:
                if first_open[b] < len(members[b]):
                    v = keys[b][1]
                    nd = d - iw[members[b][first_open[b]]] + pot[u] - pot[v]
                    if dist[v] is None or nd < dist[v]:
                        dist[v], via[v] = nd, (b, True)
                        heapq.heappush(heap, (nd, v))
            for b in in_b[u]:
                if last_used[b] >= 0:
                    v = keys[b][0]
                    nd = d + iw[members[b][last_used[b]]] + pot[u] - pot[v]
                    if dist[v] is None or nd < dist[v]:
                        dist[v], via[v] = nd, (b, False)
                        heapq.heappush(heap, (nd, v))
        if dist[t] is None or dist[t] + pot[t] - pot[s] >= 0:
            break
        path = []
        v = t
        while v != s:
            b, fwd = via[v]
            path.append((b, fwd))
            v = keys[b][0] if fwd else keys[b][1]
        amount = min(caps[members[b][first_open[b]]] - x[members[b][first_open[b]]] if fwd
                     else x[members[b][last_used[b]]] for b, fwd in path)
        for b, fwd in path:
            if fwd:
                j = members[b][first_open[b]]
                x[j] += amount
                last_used[b] = max(last_used[b], first_open[b])
                if x[j] == caps[j]:
                    first_open[b] += 1
            else:
                j = members[b][last_used[b]]
                x[j] -= amount
                first_open[b] = min(first_open[b], last_used[b])
                if x[j] == 0:
                    last_used[b] -= 1
        for u in range(net.n):
            if dist[u] is not None:
                pot[u] += dist[u]
    value = sum((w * f for w, f in zip(weights, x)), Fraction(0))
    return OracleResult(value, tuple(x))


def brute_force_opt(net: Network, limit: int = 2_000_000) -> OracleResult:
    """Best integral conserving flow by exhaustive enumeration."""
    caps = []
    for e in net.edges:
        if not float(e.capacity).is_integer():
            raise ValueError("brute force needs integer capacities")
        caps.append(int(e.capacity))
    if math.prod(c + 1 for c in caps) > limit:
        raise ValueError("too many candidate flows to enumerate")
    weights = [net.linear_weight(e) for e in net.edges]
    internal = [u for u in range(net.n) if u not in (net.source, net.sink)]
    best, best_flow = Fraction(0), tuple(Fraction(0) for _ in caps)
    for combo in itertools.product(*(range(c + 1) for c in caps)):
        bal = [0] * net.n
        for e, f in zip(net.edges, combo):
            bal[e.tail] -= f
            bal[e.head] += f
        if any(bal[u] for u in internal):
            continue
        val = sum((w * f for w, f in zip(weights, combo)), Fraction(0))
        if val > best:
            best, best_flow = val, tuple(Fraction(f) for f in combo)
    return OracleResult(best, best_flow)


# --- certificates ----------------------------------------------------------------

@dataclass
class Certificate:
    algorithm: str
    eps: Fraction
    objective: float
    reference: float | None
    reference_kind: str
    bound: float
    threshold: float | None
    passed: bool | None
    claimed: bool
    status: str
    notes: list[str] = field(default_factory=list)

    @property
    def ratio(self) -> float | None:
        if self.reference is None or self.reference <= 0:
            return None
        return self.objective / self.reference

    @property
    def failed(self) -> bool:
        return self.claimed and self.passed is False

    def lines(self) -> list[str]:
        def num(v: float | None) -> str:
            return "n/a" if v is None else f"{v:.12g}"

        out = [
            f"certificate_status: {self.status}",
            f"algorithm: {self.algorithm}",
            f"eps: {num(float(self.eps))}",
            f"objective: {num(self.objective)}",
            f"reference: {num(self.reference)}",
            f"reference_kind: {self.reference_kind}",
            f"ratio: {num(self.ratio)}",
            f"bound: {num(self.bound)}",
            f"threshold: {num(self.threshold)}",
            f"bound_claimed: {'yes' if self.claimed else 'no'}",
            f"passed: {'n/a' if self.passed is None else ('yes' if self.passed else 'no')}",
        ]
        out += [f"note: {n}" for n in self.notes]
        return out


def signed_threshold(net: Network, opt_flow: Sequence[Fraction], factor: Fraction) -> Fraction:
    """``(1 - factor) * gains + (1 + factor) * losses`` of a reference flow."""
    gain = loss = Fraction(0)
    for e in net.edges:
        v = net.linear_weight(e) * Fraction(opt_flow[e.index])
        if v >= 0:
            gain += v
        else:
            loss += v
    return (1 - factor) * gain + (1 + factor) * loss


def certify(result: "SolveResult", net: Network | None = None, eps: float | Fraction | None = None) -> Certificate:
    """Compare a solve against an exact reference and the matching guarantee."""
    net = net or result.network
    eps = Fraction(eps) if eps is not None else result.grid.eps
    mode = result.mode
    factor = {"simple": eps, "scaling": 8 * eps, "concave": 9 * eps}[mode]
    bound = 1 - factor
    claimed = mode == "simple" or eps < Fraction(1, 10)
    notes = [] if claimed else ["eps >= 1/10: theorem bound not claimed"]
    kind = "exact optimum"
    try:
        if net.is_linear:
            ref = exact_linear_opt(net)
        else:
            kind = "expansion lower bound"
            expanded = expand_multiedges(net, result.grid.unit)
            ref = exact_linear_opt(expanded.network)
            notes.append("reference is the optimum of the below-step expansion, a lower bound "
                         "on the true optimum; passing is necessary, not sufficient")
    except OracleCapError as exc:
        return Certificate(mode, eps, result.objective, None, kind, float(bound), None, None,
                           claimed, "uncertified: oracle cap", notes + [str(exc)])
    if net.is_linear:
        objective = result.exact_objective()
        if net.signed:
            threshold = signed_threshold(net, ref.flow, factor)
            notes.append("signed weights: threshold discounts gains and inflates losses")
        else:
            threshold = bound * ref.value
        passed = objective >= threshold
    else:
        threshold = bound * ref.value
        passed = result.objective >= float(threshold) - 1e-9 * max(1.0, float(ref.value))
    return Certificate(mode, eps, result.objective, float(ref.value), kind, float(bound),
                       float(threshold), bool(passed), claimed, "certified", notes)
