"""Network model: validation, longest-path levels, text format, and the
step-size grid shared by the solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .weights import Linear, Padded, PiecewiseLinear, Quadratic, WeightFunction, format_number

SOURCE = "s"
SINK = "t"


class NetworkError(ValueError):
    """Raised for malformed or unusable network descriptions."""


class RawEdge(NamedTuple):
    tail: str
    head: str
    capacity: float
    weight: WeightFunction
    key: int | None = None


@dataclass(frozen=True)
class Edge:
    index: int
    key: int  # position in the unpruned input, used to map results back
    tail: int
    head: int
    capacity: float
    weight: WeightFunction


@dataclass(frozen=True)
class Network:
    """A validated DAG in which every vertex lies on some s-t path."""

    names: tuple[str, ...]
    source: int
    sink: int
    edges: tuple[Edge, ...]
    levels: tuple[int, ...]
    signed: bool = False
    bounds: tuple[Fraction, Fraction] | None = None
    input_edges: int = 0
    out_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    in_edges: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        outs: list[list[int]] = [[] for _ in self.names]
        ins: list[list[int]] = [[] for _ in self.names]
        for e in self.edges:
            outs[e.tail].append(e.index)
            ins[e.head].append(e.index)
        object.__setattr__(self, "out_edges", tuple(map(tuple, outs)))
        object.__setattr__(self, "in_edges", tuple(map(tuple, ins)))

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def depth(self) -> int:
        return self.levels[self.sink]

    @property
    def is_linear(self) -> bool:
        return all(e.weight.is_linear for e in self.edges)

    @property
    def max_capacity(self) -> float:
        return max(e.capacity for e in self.edges)

    def edge_span(self, e: Edge) -> int:
        return self.levels[e.head] - self.levels[e.tail]

    def linear_weight(self, e: Edge) -> Fraction:
        """Exact weight of a linear edge."""
        w = e.weight
        if isinstance(w, Linear):
            return w.weight
        if isinstance(w, Quadratic) and w.b == 0:
            return Fraction(w.a)
        raise NetworkError(f"edge {self.label(e)} does not have a linear weight")

    def label(self, e: Edge) -> str:
        return f"{self.names[e.tail]}->{self.names[e.head]}"

    def flow_by_key(self, flow: Sequence[float]) -> list[float]:
        """Spread a per-edge flow over the original input edge positions."""
        out = [0.0] * self.input_edges
        for e in self.edges:
            out[e.key] = flow[e.index]
        return out

    def raw_edges(self) -> list[RawEdge]:
        return [RawEdge(self.names[e.tail], self.names[e.head], e.capacity, e.weight, e.key)
                for e in self.edges]


def _find_cycle(names: Sequence[str], edges: Sequence[tuple[int, int]], stuck: set[int]) -> list[str]:
    pred: dict[int, int] = {}
    for u, v in edges:
        if u in stuck and v in stuck and v not in pred:
            pred[v] = u
    v = min(stuck)
    seen: dict[int, int] = {}
    walk: list[int] = []
    while v not in seen:
        seen[v] = len(walk)
        walk.append(v)
        v = pred[v]
    cycle = walk[seen[v]:][::-1]
    return [f"{names[a]}->{names[b]}" for a, b in zip(cycle, cycle[1:] + cycle[:1])]


def validate_and_level(
    raw: Iterable[RawEdge],
    *,
    source: str = SOURCE,
    sink: str = SINK,
    signed: bool = False,
    bounds: tuple[Fraction, Fraction] | None = None,
) -> Network:
    """Check a raw edge list, prune irrelevant vertices and compute levels."""
    raw = list(raw)
    if source == sink:
        raise NetworkError("source and sink must differ")
    index: dict[str, int] = {source: 0, sink: 1}
    for r in raw:
        if not (r.capacity > 0 and math.isfinite(r.capacity)):
            raise NetworkError(f"edge {r.tail}->{r.head}: capacity must be positive and finite")
        for name in (r.tail, r.head):
            index.setdefault(name, len(index))
    names = list(index)
    pairs = [(index[r.tail], index[r.head]) for r in raw]

    indeg = [0] * len(names)
    succ: list[list[int]] = [[] for _ in names]
    pred: list[list[int]] = [[] for _ in names]
    for u, v in pairs:
        indeg[v] += 1
        succ[u].append(v)
        pred[v].append(u)
    order = [u for u in range(len(names)) if indeg[u] == 0]
    for u in order:
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                order.append(v)
    if len(order) < len(names):
        stuck = set(range(len(names))) - set(order)
        raise NetworkError("cycle {" + ", ".join(_find_cycle(names, pairs, stuck)) + "}")

    def sweep(start: int, nbrs: list[list[int]]) -> set[int]:
        seen, todo = {start}, [start]
        while todo:
            for v in nbrs[todo.pop()]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return seen

    keep = sweep(0, succ) & sweep(1, pred)
    if 1 not in keep:
        raise NetworkError("empty network")
    kept_order = [u for u in order if u in keep]
    new_id = {u: i for i, u in enumerate(sorted(keep))}
    level = {u: 0 for u in keep}
    for u in kept_order:
        for v in succ[u]:
            if v in keep:
                level[v] = max(level[v], level[u] + 1)

    edges = []
    for key, (r, (u, v)) in enumerate(zip(raw, pairs)):
        if u in keep and v in keep:
            edges.append(Edge(len(edges), key if r.key is None else r.key,
                              new_id[u], new_id[v], float(r.capacity), r.weight))
    input_edges = max([len(raw)] + [e.key + 1 for e in edges])
    net = Network(
        names=tuple(names[u] for u in sorted(keep)),
        source=new_id[0],
        sink=new_id[1],
        edges=tuple(edges),
        levels=tuple(level[u] for u in sorted(keep)),
        signed=signed,
        bounds=bounds,
        input_edges=input_edges,
    )
    _check_weights(net)
    return net


def _check_weights(net: Network) -> None:
    for e in net.edges:
        w = e.weight
        if abs(w.cap - e.capacity) > 1e-12 * e.capacity:
            raise NetworkError(f"edge {net.label(e)}: weight domain does not match capacity")
        lo, hi = w.gradient_range()
        if not net.signed and lo < 0:
            raise NetworkError("negative weight requires signed mode")
        if net.signed and not w.is_linear:
            raise NetworkError("signed mode supports linear weights only")
        if net.bounds is not None:
            wmin, wmax = net.bounds
            if w.is_linear:
                lo = hi = abs(lo)
            if lo < float(wmin) * (1 - 1e-12) or hi > float(wmax) * (1 + 1e-12):
                raise NetworkError(f"edge {net.label(e)}: gradient range [{lo}, {hi}] outside declared bounds")


def gradient_band(net: Network) -> tuple[Fraction, Fraction]:
    """Smallest and largest gradient magnitude over all edges.

    Declared bounds win; otherwise the band is read off the weight functions
    (exactly for linear edges).
    """
    if net.bounds is not None:
        return net.bounds
    lows, highs = [], []
    for e in net.edges:
        if e.weight.is_linear:
            w = abs(net.linear_weight(e))
            lows.append(w)
            highs.append(w)
        else:
            lo, hi = e.weight.gradient_range()
            lows.append(Fraction(lo))
            highs.append(Fraction(hi))
    return min(lows), max(highs)


@dataclass(frozen=True)
class Grid:
    """Integer grid for potentials and thresholds.

    Every potential is an integer number of ``unit`` (the finest step size);
    step ``i`` is ``2**(T - i)`` units.
    """

    eps: Fraction
    w_min: Fraction
    w_max: Fraction
    T: int
    unit: Fraction

    @property
    def inv_eps(self) -> int:
        return self.eps.denominator  # eps is 1 / 2**k

    def step(self, i: int) -> int:
        return 1 << (self.T - i)

    def units(self, w: Fraction) -> tuple[int, bool]:
        """Floor of ``w`` in grid units and whether a fractional part remains."""
        q = w / self.unit
        fl = q.numerator // q.denominator
        return fl, q.denominator != 1

    def to_weight(self, units: int) -> Fraction:
        return units * self.unit

    @classmethod
    def scaling(cls, net: Network, eps: float | Fraction) -> "Grid":
        """Grid with power-of-two ``eps`` and ``w_max / w_min``."""
        eps = round_eps(eps)
        w_min, w_max = gradient_band(net)
        if w_min <= 0:
            raise NetworkError("weights must be nonzero (positive gradients required)")
        T = 0
        while w_min * (1 << T) < w_max:
            T += 1
        return cls(eps, w_min, w_min * (1 << T), T, eps * w_min)

    @classmethod
    def simple(cls, net: Network, eps: float | Fraction, max_units: int = 1 << 40) -> "Grid":
        """Single-scale grid whose unit divides every weight.

        The unit is the largest divisor of the weights' common measure that
        does not exceed ``eps * w_min``.
        """
        eps = round_eps(eps)
        weights = [net.linear_weight(e) for e in net.edges]
        w_min, w_max = min(weights), max(weights)
        if w_min <= 0:
            raise NetworkError("weights must be positive")
        g = Fraction(0)
        for w in weights:
            g = Fraction(math.gcd(g.numerator * w.denominator, w.numerator * g.denominator),
                         g.denominator * w.denominator)
        unit = g / math.ceil(g / (eps * w_min))
        if w_max / unit > max_units:
            raise NetworkError("weights are too finely spaced for the simple algorithm")
        return cls(eps, w_min, w_max, 0, unit)


def round_eps(eps: float | Fraction) -> Fraction:
    """Largest power of two not exceeding ``eps``."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise NetworkError("eps must lie in (0, 1)")
    k = 1
    while Fraction(1, 1 << k) > eps:
        k += 1
    return Fraction(1, 1 << k)


# --- text format -------------------------------------------------------------

def _num(tok: str, lineno: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise NetworkError(f"line {lineno}: bad number {tok!r}") from None


def _parse_weight(toks: list[str], cap: float, lineno: int) -> WeightFunction:
    if not toks:
        raise NetworkError(f"line {lineno}: missing weight spec")
    tag, args = toks[0], toks[1:]
    try:
        if tag == "lin" and len(args) == 1:
            return Linear(_num(args[0], lineno), cap)
        if tag == "quad" and len(args) == 2:
            a, b = (float(_num(t, lineno)) for t in args)
            return Quadratic(a, b, cap)
        if tag == "pwl" and args:
            k = int(args[0])
            vals = [float(_num(t, lineno)) for t in args[1:]]
            if k < 1 or len(vals) != 2 * k:
                raise NetworkError(f"line {lineno}: pwl expects {k} breakpoint/gradient pairs")
            if vals[-2] != cap:
                raise NetworkError(f"line {lineno}: last pwl breakpoint must equal the capacity")
            return PiecewiseLinear(tuple(vals[0::2]), tuple(vals[1::2]))
    except NetworkError:
        raise
    except ValueError as exc:
        raise NetworkError(f"line {lineno}: {exc}") from None
    if tag in ("lin", "quad", "pwl"):
        raise NetworkError(f"line {lineno}: wrong number of arguments for {tag}")
    raise NetworkError(f"line {lineno}: unknown weight family {tag!r}")


def parse_network(text: str) -> Network:
    header: tuple[int, int, bool] | None = None
    bounds = None
    raw: list[RawEdge] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        toks = line.split("#", 1)[0].split()
        if not toks:
            continue
        if header is None:
            if toks[0] != "net" or len(toks) not in (3, 4) or (len(toks) == 4 and toks[3] != "signed"):
                raise NetworkError(f"line {lineno}: expected 'net <n> <m> [signed]'")
            try:
                header = (int(toks[1]), int(toks[2]), len(toks) == 4)
            except ValueError:
                raise NetworkError(f"line {lineno}: bad header counts") from None
        elif toks[0] == "bounds" and len(toks) == 3:
            bounds = (_num(toks[1], lineno), _num(toks[2], lineno))
            if not 0 < bounds[0] <= bounds[1]:
                raise NetworkError(f"line {lineno}: bounds need 0 < w_min <= w_max")
        elif toks[0] == "e" and len(toks) >= 5:
            cap = _num(toks[3], lineno)
            if cap <= 0:
                raise NetworkError(f"line {lineno}: capacity must be positive")
            wf = _parse_weight(toks[4:], float(cap), lineno)
            if not header[2] and wf.gradient_range()[0] < 0:
                raise NetworkError(f"line {lineno}: negative weight requires signed mode")
            raw.append(RawEdge(toks[1], toks[2], float(cap), wf))
        else:
            raise NetworkError(f"line {lineno}: cannot parse {line.strip()!r}")
    if header is None:
        raise NetworkError("missing 'net' header")
    n, m, signed = header
    if m != len(raw):
        raise NetworkError(f"header declares {m} edges, found {len(raw)}")
    vertices = {SOURCE, SINK} | {r.tail for r in raw} | {r.head for r in raw}
    if n != len(vertices):
        raise NetworkError(f"header declares {n} vertices, found {len(vertices)}")
    return validate_and_level(raw, signed=signed, bounds=bounds)


def serialize_network(net: Network) -> str:
    lines = [f"net {net.n} {net.m}" + (" signed" if net.signed else "")]
    if net.bounds is not None:
        lines.append(f"bounds {format_number(net.bounds[0])} {format_number(net.bounds[1])}")
    for e in net.edges:
        lines.append(f"e {net.names[e.tail]} {net.names[e.head]} {format_number(e.capacity)} {e.weight.spec()}")
    return "\n".join(lines) + "\n"


# --- gradient padding ----------------------------------------------------------

@dataclass(frozen=True)
class PaddingReport:
    knee: Fraction  # ramp end eps / m^2
    peak: Fraction | float  # max_e f_e(knee)
    extra: Fraction | float  # added slope eps * peak / sum(c)
    w_min: float  # effective gradient band of the padded network
    w_max: float
    w_min_floor: float  # analytic guarantees
    w_max_ceiling: float

    @property
    def ratio(self) -> float:
        return self.w_max / self.w_min

    @property
    def ratio_bound(self) -> float:
        return self.w_max_ceiling / self.w_min_floor


def pad_gradients(net: Network, eps: float | Fraction) -> tuple[Network, PaddingReport]:
    """Lift small gradients and cap large ones without moving the optimum much.

    Adds slope ``eps * peak / sum(c)`` everywhere and replaces each function
    by a straight ramp on ``[0, eps/m^2]``.  Optimal values change by at most
    a ``1 + eps`` factor; gradients end up within
    ``[eps*peak/sum(c), m^2*peak/eps + eps*peak/sum(c)]``.
    """
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise NetworkError("eps must lie in (0, 1)")
    if net.signed:
        raise NetworkError("padding needs non-negative weight functions")
    total = Fraction(0)
    for e in net.edges:
        if not float(e.capacity).is_integer():
            raise NetworkError(f"edge {net.label(e)}: non-integer capacity")
        total += int(e.capacity)
        if e.weight.gradient_range()[0] < 0 or e.weight.value(e.capacity) <= 0:
            raise NetworkError(f"edge {net.label(e)}: non-monotone f_e")
    m = net.m
    knee = eps / (m * m)
    all_linear = net.is_linear
    if all_linear:
        peak: Fraction | float = max(net.linear_weight(e) for e in net.edges) * knee
        extra: Fraction | float = eps * peak / total
    else:
        peak = max(e.weight.value(float(knee)) for e in net.edges)
        extra = float(eps) * peak / float(total)

    raw = []
    for e in net.edges:
        if e.weight.is_linear:
            wf: WeightFunction = Linear(net.linear_weight(e) + Fraction(extra), e.capacity)
        else:
            wf = Padded(e.weight, float(extra), float(knee))
        raw.append(RawEdge(net.names[e.tail], net.names[e.head], e.capacity, wf, e.key))
    padded = validate_and_level(raw, source=net.names[net.source], sink=net.names[net.sink])
    lo, hi = gradient_band(padded)
    report = PaddingReport(
        knee=knee,
        peak=peak,
        extra=extra,
        w_min=float(lo),
        w_max=float(hi),
        w_min_floor=float(extra),
        w_max_ceiling=float(peak) / float(knee) + float(extra),
    )
    return padded, report
