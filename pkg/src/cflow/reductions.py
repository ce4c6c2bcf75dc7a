"""Encodings of application problems as shallow max-weight flow networks.

Every builder returns a :class:`ReductionMap` that knows which network edges
carry application entities (pairs, tuple legs, jobs, sources) and how to turn
a network flow back into an application solution.

Edges that only route flow ("auxiliary" edges) would naturally have weight 0,
which the scaling solvers cannot accept.  By default they get the small
weight ``eps * w_min / k`` (``k`` = number of auxiliary edges, ``w_min`` = the
smallest carrier gradient); the most this can add to any objective is
reported as ``perturbation``.  Passing ``aux_weight=0`` gives the exact
encoding, suitable for the oracle.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .network import Network, NetworkError, RawEdge, validate_and_level
from .verify import exact_linear_opt
from .weights import Linear, WeightFunction, format_number

Number = float | Fraction


@dataclass
class Application:
    solution: dict
    objective: Fraction | float
    feasible: bool = True
    notes: list[str] = field(default_factory=list)


@dataclass
class ReductionMap:
    kind: str
    network: Network
    carriers: dict[int, tuple]  # input edge key -> entity
    aux_keys: tuple[int, ...]
    aux_weight: Fraction
    perturbation: Fraction
    transform: str
    decode: Callable[["ReductionMap", list[Fraction]], Application] = field(repr=False)
    offset_per_unit: Fraction = Fraction(0)  # reward folded into carrier edges (scheduling)
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return self.network.depth

    def key_flow(self, flow: Sequence[Number]) -> list[Fraction]:
        """Exact flow per input edge position."""
        return [Fraction(v) for v in self.network.flow_by_key(list(flow))]

    def application(self, flow: Sequence[Number]) -> Application:
        return self.decode(self, self.key_flow(flow))

    def aux_value(self, flow: Sequence[Number]) -> Fraction:
        kf = self.key_flow(flow)
        return sum((self.aux_weight * kf[k] for k in self.aux_keys), Fraction(0))

    def network_value(self, app: Application, flow: Sequence[Number]) -> Fraction | float:
        """Network objective implied by an application objective and the
        flow's auxiliary and offset contributions."""
        kf = self.key_flow(flow)
        extra = self.aux_value(flow)
        if self.offset_per_unit:
            sent = sum((kf[k] for k, ent in self.carriers.items() if ent[0] == "job"), Fraction(0))
            extra += self.offset_per_unit * sent
        sign = -1 if self.transform == "negate" else 1
        return sign * app.objective + extra

    def lines(self) -> list[str]:
        out = [f"reduction: {self.kind}", f"transform: {self.transform}",
               f"depth: {self.depth}", f"aux_edges: {len(self.aux_keys)}",
               f"aux_weight: {format_number(self.aux_weight)}",
               f"perturbation_bound: {format_number(self.perturbation)}"]
        if self.offset_per_unit:
            out.append(f"forcing_reward: {format_number(self.offset_per_unit)}")
        for k, v in sorted(self.params.items()):
            out.append(f"{k}: {v}")
        for key in sorted(self.carriers):
            out.append(f"map_edge_{key}: {' '.join(map(str, self.carriers[key]))}")
        out += [f"note: {n}" for n in self.notes]
        return out


class _Builder:
    def __init__(self, eps: Number, aux_weight: Number | None) -> None:
        self.eps = Fraction(eps)
        self.fixed_aux = None if aux_weight is None else Fraction(aux_weight)
        self.rows: list[list] = []
        self.carriers: dict[int, tuple] = {}
        self.aux: list[int] = []

    def carrier(self, u: str, v: str, cap: Number, wf: WeightFunction, entity: tuple) -> int:
        key = len(self.rows)
        self.rows.append([u, v, float(cap), wf])
        self.carriers[key] = entity
        return key

    def auxiliary(self, u: str, v: str, cap: Number) -> int | None:
        if Fraction(cap) == 0:
            return None  # a closed connection is simply absent
        key = len(self.rows)
        self.rows.append([u, v, float(cap), None])
        self.aux.append(key)
        return key

    def finish(self, **kw) -> tuple[Network, Fraction, Fraction]:
        if self.fixed_aux is not None:
            aux_w = self.fixed_aux
        else:
            lows = [Fraction(row[3].gradient_range()[0]) for row in self.rows if row[3] is not None]
            lows = [abs(w) for w in lows if w != 0] or [Fraction(1)]
            aux_w = self.eps * min(lows) / max(1, len(self.aux))
        raw = []
        for key, (u, v, cap, wf) in enumerate(self.rows):
            raw.append(RawEdge(u, v, cap, wf if wf is not None else Linear(aux_w, cap), key))
        net = validate_and_level(raw, **kw)
        perturbation = aux_w * sum((Fraction(self.rows[k][2]) for k in self.aux), Fraction(0))
        return net, aux_w, perturbation


def _value(wf: WeightFunction, amount: Fraction) -> Fraction | float:
    if isinstance(wf, Linear):
        return wf.weight * amount
    return wf.value(float(amount))


# --- assignment / b-matching ----------------------------------------------------------

def assignment_to_network(
    left: Mapping[str, Number],
    right: Mapping[str, Number],
    pairs: Iterable[tuple[str, str, Number | WeightFunction]],
    *,
    eps: Number = Fraction(1, 16),
    aux_weight: Number | None = None,
) -> ReductionMap:
    """Depth-3 network s -> left -> right -> t.

    Side capacities sit on the s and t edges; a pair edge may carry up to the
    smaller of its two side capacities.  A pair weight is either a number
    (linear utility) or a weight function over that capacity.
    """
    pairs = list(pairs)
    if not pairs:
        raise NetworkError("assignment needs at least one pair")
    b = _Builder(eps, aux_weight)
    for name, cap in left.items():
        b.auxiliary("s", f"L:{name}", cap)
    for i, j, w in pairs:
        if i not in left or j not in right:
            raise NetworkError(f"pair ({i}, {j}) names an unknown side vertex")
        cap = min(Fraction(left[i]), Fraction(right[j]))
        wf = w if isinstance(w, WeightFunction) else Linear(Fraction(w), float(cap))
        b.carrier(f"L:{i}", f"R:{j}", wf.cap, wf, ("pair", i, j))
    for name, cap in right.items():
        b.auxiliary(f"R:{name}", "t", cap)
    net, aux_w, pert = b.finish()
    funcs = {key: row[3] for key, row in enumerate(b.rows) if key in b.carriers}

    def decode(rm: ReductionMap, kf: list[Fraction]) -> Application:
        sol = {(ent[1], ent[2]): kf[k] for k, ent in rm.carriers.items() if kf[k]}
        obj = sum((_value(funcs[k], kf[k]) for k in rm.carriers), Fraction(0))
        return Application(sol, obj)

    return ReductionMap("assignment", net, b.carriers, tuple(b.aux), aux_w, pert, "identity", decode)


# --- chained (restricted 3-dimensional) matching --------------------------------------

def chained_matching_to_network(
    xs: Iterable[str],
    ys: Iterable[str],
    zs: Iterable[str],
    e_xy: Iterable[tuple[str, str, Number]],
    e_yz: Iterable[tuple[str, str, Number]],
    *,
    eps: Number = Fraction(1, 16),
    aux_weight: Number | None = None,
) -> ReductionMap:
    """Pick disjoint tuples (x, y, z) with xy in E_XY and yz in E_YZ.

    Network s -> x -> y_in -> y_out -> z -> t of depth 5: unit edges into x,
    through y and out of z make every element usable once; a tuple is worth
    the sum of its two edge weights.
    """
    xs, ys, zs, e_xy, e_yz = list(xs), list(ys), list(zs), list(e_xy), list(e_yz)
    if not (xs and ys and zs and e_xy and e_yz):
        raise NetworkError("chained matching needs non-empty element and edge sets")
    b = _Builder(eps, aux_weight)
    for x in xs:
        b.auxiliary("s", f"X:{x}", 1)
    for x, y, w in e_xy:
        b.carrier(f"X:{x}", f"Yin:{y}", 1, Linear(Fraction(w), 1.0), ("xy", x, y))
    for y in ys:
        b.auxiliary(f"Yin:{y}", f"Yout:{y}", 1)
    for y, z, w in e_yz:
        b.carrier(f"Yout:{y}", f"Z:{z}", 1, Linear(Fraction(w), 1.0), ("yz", y, z))
    for z in zs:
        b.auxiliary(f"Z:{z}", "t", 1)
    net, aux_w, pert = b.finish()
    weight = {key: b.rows[key][3].weight for key in b.carriers}

    def decode(rm: ReductionMap, kf: list[Fraction]) -> Application:
        into: dict[str, list[list]] = defaultdict(list)
        out: dict[str, list[list]] = defaultdict(list)
        for k, ent in rm.carriers.items():
            if kf[k]:
                if ent[0] == "xy":
                    into[ent[2]].append([ent[1], kf[k], weight[k]])
                else:
                    out[ent[1]].append([ent[2], kf[k], weight[k]])
        tuples: dict[tuple[str, str, str], Fraction] = defaultdict(Fraction)
        obj = Fraction(0)
        for y in into:
            ins, outs = into[y], out.get(y, [])
            i = j = 0
            while i < len(ins) and j < len(outs):
                amt = min(ins[i][1], outs[j][1])
                tuples[(ins[i][0], y, outs[j][0])] += amt
                obj += amt * (ins[i][2] + outs[j][2])
                ins[i][1] -= amt
                outs[j][1] -= amt
                i += ins[i][1] == 0
                j += outs[j][1] == 0
        return Application(dict(tuples), obj)

    return ReductionMap("chained", net, b.carriers, tuple(b.aux), aux_w, pert, "identity", decode)


# --- interval job scheduling ------------------------------------------------------------

def scheduling_to_network(
    jobs: Sequence[tuple[str, int, int, Number]],
    capacities: Sequence[Number],
    *,
    eps: Number = Fraction(1, 16),
    aux_weight: Number | None = None,
    forcing: bool = True,
) -> ReductionMap:
    """Jobs ``(name, first, last, gain)`` competing for day-to-day capacity.

    Days form a path d_1 -> ... -> d_N; ``capacities[k-1]`` bounds the number
    of accepted jobs in progress from day k to day k+1, i.e. jobs with
    ``first <= k < last``.  Each job node is fed one unit from s and either
    enters the path at its first day through the gain edge or skips to its
    last day.  Day k drains to t as many units as jobs end on day k.

    With ``forcing`` the s -> job edges carry a reward larger than all gains
    together, so optimal flows send every job's unit and the day path then
    carries exactly the accepted jobs.  Without it a job could leave the path
    through another job's exit and dodge the capacities.
    """
    days = len(capacities)
    if not jobs or days == 0:
        raise NetworkError("scheduling needs jobs and at least one day")
    total_gain = Fraction(0)
    for name, first, last, gain in jobs:
        if not 1 <= first <= last <= days:
            raise NetworkError(f"job {name}: window [{first}, {last}] outside days 1..{days}")
        if Fraction(gain) <= 0:
            raise NetworkError(f"job {name}: gain must be positive")
        total_gain += Fraction(gain)
    reward = total_gain + 1 if forcing else Fraction(0)
    b = _Builder(eps, aux_weight)
    gain_edge: dict[str, int] = {}
    for name, first, last, gain in jobs:
        if forcing:
            b.carrier("s", f"J:{name}", 1, Linear(reward, 1.0), ("job", name))
        else:
            b.auxiliary("s", f"J:{name}", 1)
        gain_edge[name] = b.carrier(f"J:{name}", f"D:{first}", 1, Linear(Fraction(gain), 1.0),
                                    ("gain", name))
        b.auxiliary(f"J:{name}", f"D:{last}", 1)
    for k in range(1, days):
        b.auxiliary(f"D:{k}", f"D:{k + 1}", capacities[k - 1])
    ending = defaultdict(int)
    for _, _, last, _ in jobs:
        ending[last] += 1
    for k in sorted(ending):
        b.auxiliary(f"D:{k}", "t", ending[k])
    net, aux_w, pert = b.finish()
    spec = {name: (first, last, Fraction(gain)) for name, first, last, gain in jobs}
    caps = [Fraction(c) for c in capacities]

    def decode(rm: ReductionMap, kf: list[Fraction]) -> Application:
        take = {name: kf[key] for name, key in gain_edge.items()}
        notes = []
        feasible = True
        for k in range(1, days):
            load = sum((take[n] for n, (a, z, _) in spec.items() if a <= k < z), Fraction(0))
            excess = load - caps[k - 1]
            if excess > 0:
                feasible = False
                for n in sorted((n for n, (a, z, _) in spec.items() if a <= k < z and take[n]),
                                key=lambda n: spec[n][2]):
                    cut = min(take[n], excess)
                    take[n] -= cut
                    excess -= cut
                    if excess == 0:
                        break
                notes.append(f"day {k} over capacity; dropped lowest-gain jobs")
        obj = sum((spec[n][2] * amt for n, amt in take.items()), Fraction(0))
        return Application({n: a for n, a in take.items() if a}, obj, feasible, notes)

    notes = []
    if not forcing:
        notes.append("forcing disabled: optimal flows may exit the day path early")
    return ReductionMap("scheduling", net, b.carriers, tuple(b.aux), aux_w, pert,
                        "offset" if forcing else "identity", decode,
                        offset_per_unit=reward, params={"days": days}, notes=notes)


# --- min-cost flow with a reward per unit ------------------------------------------

def _fresh(name: str, taken: set[str]) -> str:
    while name in taken:
        name += "'"
    return name


def mincost_with_reward(net: Network, reward: Number) -> ReductionMap:
    """Minimize ``sum q_e x_e - Q f`` by maximizing ``Q f - sum q_e x_e``.

    ``net`` carries the costs ``q_e > 0`` as linear weights.  The old sink
    feeds a new sink through an edge of weight ``Q`` whose capacity is the
    total capacity leaving s.  Solving the result with ``eps / 8`` yields the
    additive guarantee ``cost <= (1 + eps) cost* + 2 eps Q f*``.
    """
    Q = Fraction(reward)
    if Q <= 0:
        raise NetworkError("reward Q must be positive")
    names = set(net.names)
    old_sink = _fresh("t0", names)
    rename = {net.names[net.sink]: old_sink}
    carriers: dict[int, tuple] = {}
    raw = []
    for e in net.edges:
        q = net.linear_weight(e)
        if q <= 0:
            raise NetworkError(f"edge {net.label(e)}: costs must be positive")
        u, v = (rename.get(net.names[x], net.names[x]) for x in (e.tail, e.head))
        carriers[len(raw)] = ("edge", net.names[e.tail], net.names[e.head], e.key)
        raw.append(RawEdge(u, v, e.capacity, Linear(-q, e.capacity), len(raw)))
    cap = sum(net.edges[i].capacity for i in net.out_edges[net.source])
    carriers[len(raw)] = ("reward",)
    raw.append(RawEdge(old_sink, "t", cap, Linear(Q, cap), len(raw)))
    built = validate_and_level(raw, signed=True)
    costs = {k: -r.weight.weight for k, r in enumerate(raw)}

    def decode(rm: ReductionMap, kf: list[Fraction]) -> Application:
        flow = {ent[1:]: kf[k] for k, ent in rm.carriers.items() if ent[0] == "edge" and kf[k]}
        f = next(kf[k] for k, ent in rm.carriers.items() if ent[0] == "reward")
        cost = sum((costs[k] * kf[k] for k, ent in rm.carriers.items() if ent[0] == "edge"), Fraction(0))
        return Application({"flow": flow, "value": f}, cost - Q * f)

    return ReductionMap("mincost", built, carriers, (), Fraction(0), Fraction(0), "negate", decode,
                        params={"reward": format_number(Q)})


def mincost_bound(best_objective: Fraction, best_value: Fraction, reward: Fraction,
                  eps: Fraction) -> Fraction:
    """Largest cost-minus-reward allowed by the additive guarantee, given the
    optimum's cost-minus-reward and flow value."""
    return (1 + eps) * best_objective + 2 * eps * reward * best_value


# --- several sources with concave utilities -------------------------------------------

def max_outflow(edges: Sequence[tuple[str, str, Number]], source: str, sink: str = "t") -> Fraction:
    """Maximum flow value from ``source`` to ``sink`` in a DAG edge list."""
    raw = [RawEdge(u, v, float(c), Linear(Fraction(1 if u == source else 0), float(c)), k)
           for k, (u, v, c) in enumerate(edges)]
    try:
        net = validate_and_level(raw, source=source, sink=sink)
    except NetworkError as exc:
        if "empty network" in str(exc):
            return Fraction(0)
        raise
    return exact_linear_opt(net).value


def multisource_concave_to_network(
    edges: Sequence[tuple[str, str, Number]],
    sources: Sequence[tuple[str, Callable[[float], WeightFunction]]],
    *,
    sink: str = "t",
    eps: Number = Fraction(1, 16),
    aux_weight: Number | None = None,
) -> ReductionMap:
    """Maximize ``sum_i f_i(F_i)`` where ``F_i`` leaves source ``s_i``.

    A super source feeds each ``s_i`` through an edge whose weight function
    is ``f_i`` over ``[0, max F_i]``; ``sources`` pairs each name with a
    factory building ``f_i`` for a given domain length.
    """
    if not sources:
        raise NetworkError("need at least one source")

    def vertex(name: str) -> str:
        return "t" if name == sink else f"V:{name}"

    b = _Builder(eps, aux_weight)
    funcs: dict[int, WeightFunction] = {}
    for name, make in sources:
        cap = max_outflow(edges, name, sink)
        if cap <= 0:
            raise NetworkError(f"source {name} cannot reach the sink")
        wf = make(float(cap))
        lo, _ = wf.gradient_range()
        if lo <= 0:
            raise NetworkError(f"source {name}: gradients must stay positive")
        funcs[b.carrier("s", vertex(name), cap, wf, ("source", name))] = wf
    for u, v, c in edges:
        b.auxiliary(vertex(u), vertex(v), c)
    net, aux_w, pert = b.finish()

    def decode(rm: ReductionMap, kf: list[Fraction]) -> Application:
        sol = {rm.carriers[k][1]: kf[k] for k in funcs}
        obj = sum((_value(funcs[k], kf[k]) for k in funcs), Fraction(0))
        return Application(sol, obj)

    return ReductionMap("multisource", net, b.carriers, tuple(b.aux), aux_w, pert, "identity", decode)
