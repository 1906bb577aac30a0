"""Small numerical kernels shared across modules."""

import math
from typing import Callable, NamedTuple

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Interval(NamedTuple):
    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)


def interval_divide(num: Interval, den: Interval) -> Interval:
    """Enclosure of {a / b : a in num, b in den} for a denominator of fixed sign."""
    if den.lo <= 0.0 <= den.hi:
        raise ZeroDivisionError("denominator interval contains zero")
    q = (num.lo / den.lo, num.lo / den.hi, num.hi / den.lo, num.hi / den.hi)
    return Interval(min(q), max(q))


class RootResult(NamedTuple):
    root: float
    bracket: Interval
    residual: float
    evaluations: int


def decreasing_root(
    f: Callable[[float], float],
    *,
    xtol: float = 1e-13,
    start: float = 0.0,
    max_doublings: int = 80,
) -> RootResult:
    """Root of a strictly decreasing function.

    Brackets by doubling away from ``start``, bisects to width ``xtol`` and
    finishes with one secant step inside the final bracket. Monotonicity is
    checked on every evaluation against the bracket ends.
    """
    evals = 0

    def g(x):
        nonlocal evals
        evals += 1
        return f(x)

    f0 = g(start)
    if f0 == 0.0:
        return RootResult(start, Interval(start, start), 0.0, evals)
    step = 1.0
    sign = 1.0 if f0 > 0 else -1.0
    a, fa = start, f0
    for _ in range(max_doublings):
        b = start + sign * step
        fb = g(b)
        if (fb > fa) if sign > 0 else (fb < fa):
            raise ArithmeticError(f"function is not decreasing between {a} and {b}")
        if fb == 0.0:
            return RootResult(b, Interval(b, b), 0.0, evals)
        if (fb < 0) == (sign > 0):
            break
        a, fa = b, fb
        step *= 2.0
    else:
        raise ArithmeticError("no sign change found while bracketing the root")

    lo, hi = (a, b) if a < b else (b, a)
    flo, fhi = (fa, fb) if a < b else (fb, fa)
    while hi - lo > xtol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = g(mid)
        slack = 1e-12 * (1.0 + abs(flo) + abs(fhi))
        if not fhi - slack <= fm <= flo + slack:
            raise ArithmeticError(f"monotonicity violated near {mid}")
        if fm > 0:
            lo, flo = mid, fm
        elif fm < 0:
            hi, fhi = mid, fm
        else:
            return RootResult(mid, Interval(mid, mid), 0.0, evals)

    x = 0.5 * (lo + hi)
    if flo != fhi:
        sec = lo - flo * (hi - lo) / (fhi - flo)
        if lo <= sec <= hi:
            x = sec
    fx = g(x)
    if abs(fx) > max(abs(flo), abs(fhi)):
        x = lo if abs(flo) <= abs(fhi) else hi
        fx = flo if abs(flo) <= abs(fhi) else fhi
    return RootResult(x, Interval(lo, hi), fx, evals)


def increasing_root(f: Callable[[float], float], **kw) -> RootResult:
    return decreasing_root(lambda x: -f(x), **kw)


def golden_section(
    f: Callable[[float], float], a: float, b: float, *, xtol: float = 1e-9, maxiter: int = 500
) -> tuple[float, float]:
    """Minimise a unimodal function on [a, b]; returns (argmin, minimum)."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def grid_spec(text: str) -> list[float]:
    """Parse ``a:b:k`` into k evenly spaced values (inclusive)."""
    try:
        a, b, k = text.split(":")
        a, b, k = float(a), float(b), int(k)
    except ValueError as exc:
        raise ValueError(f"expected a:b:k, got {text!r}") from exc
    if k < 1:
        raise ValueError("grid needs k >= 1")
    if k == 1:
        return [a]
    return [a + (b - a) * i / (k - 1) for i in range(k)]
