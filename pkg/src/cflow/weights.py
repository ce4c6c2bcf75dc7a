"""Concave edge weight functions.

Every family is normalized so that ``f(0) == 0`` and exposes the same small
query surface used by the solvers:

* ``value(x)``: the objective contribution of ``x`` units of flow,
* ``gradient(x)`` / ``left_gradient(x)``: one-sided derivatives,
* ``forward_headroom(x, c, theta)``: how far the flow can grow while the
  gradient stays at or above ``theta``,
* ``backward_headroom(x, theta)``: how far the flow can shrink while the
  gradient stays at or below ``theta``,
* ``gradient_range()``: the (min, max) gradient over the whole domain.

Linear weights are kept as exact :class:`fractions.Fraction` values so the
scaling solver can place them on an integer grid without rounding.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

# Slack allowed when checking that a query point lies inside [0, c].
DOMAIN_SLACK = 1e-9


def _check_domain(x: float, cap: float) -> float:
    if x < -DOMAIN_SLACK * max(1.0, cap) or x > cap * (1 + DOMAIN_SLACK) + DOMAIN_SLACK:
        raise ValueError(f"flow value {x!r} outside domain [0, {cap!r}]")
    return min(max(x, 0.0), cap)


class WeightFunction:
    """Base class for concave weight functions on ``[0, cap]``."""

    family: str = "abstract"
    cap: float

    @property
    def is_linear(self) -> bool:
        return False

    def value(self, x: float) -> float:
        raise NotImplementedError

    def gradient(self, x: float) -> float:
        """Right derivative at ``x`` (left derivative at the domain end)."""
        raise NotImplementedError

    def left_gradient(self, x: float) -> float:
        """Left derivative at ``x`` (right derivative at 0)."""
        return self.gradient(x)

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        raise NotImplementedError

    def backward_headroom(self, x: float, theta: float) -> float:
        raise NotImplementedError

    def gradient_range(self) -> tuple[float, float]:
        raise NotImplementedError

    def spec(self) -> str:
        """Weight-spec text for the network file format."""
        raise NotImplementedError(f"{self.family} functions have no text form")


def format_number(v: float | Fraction | int) -> str:
    """Canonical, exactly round-tripping text for a number."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class Linear(WeightFunction):
    """``f(x) = weight * x``."""

    weight: Fraction
    cap: float
    family: str = field(default="linear", init=False)

    def __post_init__(self) -> None:
        if not isinstance(self.weight, Fraction):
            object.__setattr__(self, "weight", Fraction(self.weight))

    @property
    def is_linear(self) -> bool:
        return True

    def value(self, x: float) -> float:
        return float(self.weight) * _check_domain(x, self.cap)

    def gradient(self, x: float) -> float:
        _check_domain(x, self.cap)
        return float(self.weight)

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        return max(c - x, 0.0) if float(self.weight) >= theta else 0.0

    def backward_headroom(self, x: float, theta: float) -> float:
        return max(x, 0.0) if float(self.weight) <= theta else 0.0

    def gradient_range(self) -> tuple[float, float]:
        w = float(self.weight)
        return w, w

    def spec(self) -> str:
        return f"lin {format_number(self.weight)}"


@dataclass(frozen=True)
class Quadratic(WeightFunction):
    """``f(x) = a*x - b*x**2`` with ``b >= 0``; gradient ``a - 2*b*x``."""

    a: float
    b: float
    cap: float
    family: str = field(default="quadratic", init=False)

    def __post_init__(self) -> None:
        if self.b < 0:
            raise ValueError("quadratic coefficient b must be >= 0")

    @property
    def is_linear(self) -> bool:
        return self.b == 0

    def value(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        return self.a * x - self.b * x * x

    def gradient(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        return self.a - 2.0 * self.b * x

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        room = max(c - x, 0.0)
        if self.a - 2.0 * self.b * x < theta:
            return 0.0
        if self.b == 0:
            return room
        return min(room, max((self.a - theta) / (2.0 * self.b) - x, 0.0))

    def backward_headroom(self, x: float, theta: float) -> float:
        if self.a - 2.0 * self.b * x > theta:
            return 0.0
        if self.b == 0:
            return max(x, 0.0)
        return min(max(x, 0.0), max(x - (self.a - theta) / (2.0 * self.b), 0.0))

    def gradient_range(self) -> tuple[float, float]:
        return self.a - 2.0 * self.b * self.cap, self.a

    def spec(self) -> str:
        return f"quad {format_number(self.a)} {format_number(self.b)}"


@dataclass(frozen=True)
class PiecewiseLinear(WeightFunction):
    """Integral of a step gradient.

    ``breakpoints`` are the right ends ``x_1 < ... < x_k = cap`` of the
    segments and ``gradients`` their strictly decreasing slopes.
    """

    breakpoints: tuple[float, ...]
    gradients: tuple[float, ...]
    family: str = field(default="piecewise-linear", init=False)
    _prefix: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        xs, gs = tuple(map(float, self.breakpoints)), tuple(map(float, self.gradients))
        if not xs or len(xs) != len(gs):
            raise ValueError("piecewise-linear needs matching, non-empty breakpoints and gradients")
        if xs[0] <= 0 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be positive and strictly increasing")
        if any(b >= a for a, b in zip(gs, gs[1:])):
            raise ValueError("gradients must be strictly decreasing")
        prefix, acc, left = [0.0], 0.0, 0.0
        for x, g in zip(xs, gs):
            acc += g * (x - left)
            prefix.append(acc)
            left = x
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "gradients", gs)
        object.__setattr__(self, "_prefix", tuple(prefix))

    @property
    def cap(self) -> float:  # type: ignore[override]
        return self.breakpoints[-1]

    def _start(self, i: int) -> float:
        return self.breakpoints[i - 1] if i else 0.0

    def value(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        i = min(bisect.bisect_left(self.breakpoints, x), len(self.breakpoints) - 1)
        return self._prefix[i] + self.gradients[i] * (x - self._start(i))

    def gradient(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        i = min(bisect.bisect_right(self.breakpoints, x), len(self.breakpoints) - 1)
        return self.gradients[i]

    def left_gradient(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        return self.gradients[min(bisect.bisect_left(self.breakpoints, x), len(self.breakpoints) - 1)]

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        xs, gs = self.breakpoints, self.gradients
        i = bisect.bisect_right(xs, x)
        if i >= len(xs) or gs[i] < theta:
            return 0.0
        j = i
        while j < len(gs) and gs[j] >= theta:
            j += 1
        return max(min(xs[j - 1], c) - x, 0.0)

    def backward_headroom(self, x: float, theta: float) -> float:
        xs, gs = self.breakpoints, self.gradients
        i = min(bisect.bisect_left(xs, x), len(xs) - 1)
        if x <= 0 or gs[i] > theta:
            return 0.0
        j = i
        while j > 0 and gs[j - 1] <= theta:
            j -= 1
        return x - self._start(j)

    def gradient_range(self) -> tuple[float, float]:
        return self.gradients[-1], self.gradients[0]

    def spec(self) -> str:
        parts = " ".join(f"{format_number(x)} {format_number(g)}"
                         for x, g in zip(self.breakpoints, self.gradients))
        return f"pwl {len(self.breakpoints)} {parts}"


@dataclass(frozen=True)
class Generic(WeightFunction):
    """A concave function given only by its (non-increasing) gradient.

    The caller promises ``lower <= grad(x) <= upper`` on ``[0, cap]``; values
    are obtained by adaptive quadrature and headroom by bisection.
    """

    grad: Callable[[float], float]
    cap: float
    lower: float
    upper: float
    tolerance: float = 1e-9
    family: str = field(default="generic", init=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)) or self.lower > self.upper:
            raise ValueError("generic weight functions need finite gradient bounds lower <= upper")

    def value(self, x: float) -> float:
        from scipy.integrate import quad

        x = _check_domain(x, self.cap)
        if x <= 1e-12 * self.cap:
            # below quadrature resolution the gradient is effectively constant
            return float(self.grad(0.0)) * x
        result, _ = quad(self.grad, 0.0, x, epsabs=1e-14 * abs(self.upper) * x, epsrel=1e-10, limit=200)
        return float(result)

    def gradient(self, x: float) -> float:
        return float(self.grad(_check_domain(x, self.cap)))

    def _last_at_least(self, lo: float, hi: float, theta: float) -> float:
        # largest y in [lo, hi] with grad(y) >= theta, given grad(lo) >= theta
        if self.grad(hi) >= theta:
            return hi
        while hi - lo > self.tolerance:
            mid = 0.5 * (lo + hi)
            if self.grad(mid) >= theta:
                lo = mid
            else:
                hi = mid
        return lo

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        if x >= c or self.grad(x) < theta:
            return 0.0
        return self._last_at_least(x, c, theta) - x

    def backward_headroom(self, x: float, theta: float) -> float:
        if x <= 0 or self.grad(x) > theta:
            return 0.0
        if self.grad(0.0) <= theta:
            return x
        lo, hi = 0.0, x  # grad(lo) > theta >= grad(hi)
        while hi - lo > self.tolerance:
            mid = 0.5 * (lo + hi)
            if self.grad(mid) > theta:
                lo = mid
            else:
                hi = mid
        return x - hi

    def gradient_range(self) -> tuple[float, float]:
        return self.lower, self.upper


@dataclass(frozen=True)
class Padded(WeightFunction):
    """``base(x) + extra*x`` above ``knee``, a straight ramp from 0 below it."""

    base: WeightFunction
    extra: float
    knee: float
    family: str = field(default="padded", init=False)
    slope: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0 < self.knee <= self.base.cap:
            raise ValueError("ramp knee must lie inside the domain")
        object.__setattr__(self, "slope", (self.base.value(self.knee) + self.extra * self.knee) / self.knee)

    @property
    def cap(self) -> float:  # type: ignore[override]
        return self.base.cap

    def value(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        if x <= self.knee:
            return self.slope * x
        return self.base.value(x) + self.extra * x

    def gradient(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        return self.slope if x < self.knee else self.base.gradient(x) + self.extra

    def left_gradient(self, x: float) -> float:
        x = _check_domain(x, self.cap)
        return self.slope if x <= self.knee else self.base.left_gradient(x) + self.extra

    def forward_headroom(self, x: float, c: float, theta: float) -> float:
        if x < self.knee:
            if self.slope < theta:
                return 0.0
            if c <= self.knee:
                return c - x
            return self.knee - x + self.base.forward_headroom(self.knee, c, theta - self.extra)
        return self.base.forward_headroom(x, c, theta - self.extra)

    def backward_headroom(self, x: float, theta: float) -> float:
        ramp = self.slope <= theta
        if x <= self.knee:
            return x if ramp else 0.0
        d = self.base.backward_headroom(x, theta - self.extra)
        if d < x - self.knee:
            return d
        return x - self.knee + (self.knee if ramp else 0.0)

    def gradient_range(self) -> tuple[float, float]:
        lo, _ = self.base.gradient_range()
        return lo + self.extra, self.slope


def make_pwl(points: Sequence[tuple[float, float]]) -> PiecewiseLinear:
    """Build a piecewise-linear function from ``(breakpoint, gradient)`` pairs."""
    return PiecewiseLinear(tuple(p[0] for p in points), tuple(p[1] for p in points))
