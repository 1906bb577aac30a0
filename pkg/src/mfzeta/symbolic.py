"""Eventually periodic points of path space, the ultrametric d_γ, empirical
(occupation) measures as cylinder masses, and the Lipschitz-dual distance
between such measures.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

from ._numerics import Interval
from .errors import DepthMismatch
from .graph import GdSystem, PathWord, return_word

DEFAULT_GAMMA = 0.5
DEFAULT_DEPTH = 24


@dataclass(frozen=True)
class SymbolicPoint:
    """Infinite word ``preperiod + period + period + ...`` in canonical form
    (shortest period, then shortest preperiod)."""

    preperiod: tuple[int, ...]
    period: tuple[int, ...]

    def __post_init__(self):
        if not self.period:
            raise ValueError("period must be non-empty")
        pre, per = tuple(self.preperiod), tuple(self.period)
        p = len(per)
        for d in range(1, p + 1):
            if p % d == 0 and per == per[:d] * (p // d):
                per = per[:d]
                break
        while pre and pre[-1] == per[-1]:
            pre = pre[:-1]
            per = per[-1:] + per[:-1]
        object.__setattr__(self, "preperiod", pre)
        object.__setattr__(self, "period", per)

    @classmethod
    def periodic(cls, word) -> "SymbolicPoint":
        return cls((), tuple(word))

    def __getitem__(self, k: int) -> int:
        if k < len(self.preperiod):
            return self.preperiod[k]
        return self.period[(k - len(self.preperiod)) % len(self.period)]

    def window(self, start: int, length: int) -> tuple[int, ...]:
        return tuple(self[k] for k in range(start, start + length))

    def shift(self, k: int = 1) -> "SymbolicPoint":
        if k <= len(self.preperiod):
            return SymbolicPoint(self.preperiod[k:], self.period)
        r = (k - len(self.preperiod)) % len(self.period)
        return SymbolicPoint((), self.period[r:] + self.period[:r])

    def is_admissible(self, system: GdSystem) -> bool:
        n = len(self.preperiod) + len(self.period) + 1
        w = self.window(0, n)
        return all(system.dst[a] == system.src[b] for a, b in zip(w, w[1:]))


def common_prefix_length(i: SymbolicPoint, j: SymbolicPoint) -> float:
    """|i ∧ j|, infinite when the points coincide."""
    if i == j:
        return math.inf
    bound = max(len(i.preperiod), len(j.preperiod)) + len(i.period) * len(j.period)
    for k in range(bound + 1):
        if i[k] != j[k]:
            return k
    return math.inf


def dgamma(i: SymbolicPoint, j: SymbolicPoint, gamma: float = DEFAULT_GAMMA) -> float:
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    k = common_prefix_length(i, j)
    return 0.0 if k == math.inf else gamma**k


@dataclass
class CylinderMeasure:
    """Masses of the cylinders [w] for all words with ``len(w) <= depth``.

    Missing words have mass zero. ``denominator`` is set for empirical
    measures, whose masses are exact multiples of ``1/denominator``;
    ``truncated`` marks masses known only up to ``depth``.
    """

    depth: int
    masses: dict[tuple[int, ...], float]
    denominator: int | None = None
    truncated: bool = True
    system: GdSystem | None = field(default=None, repr=False, compare=False)

    def __getitem__(self, word) -> float:
        return self.masses.get(tuple(word), 0.0)

    def words(self, length: int):
        return [w for w in self.masses if len(w) == length]

    def check(self, tol: float = 1e-12) -> None:
        """Raise if normalisation, positivity or telescoping fails."""
        if abs(self[()] - 1.0) > tol:
            raise AssertionError(f"mass of the empty word is {self[()]}")
        children: dict[tuple[int, ...], float] = {}
        for w, m in self.masses.items():
            if m < 0:
                raise AssertionError(f"negative mass on {w}")
            if w:
                children[w[:-1]] = children.get(w[:-1], 0.0) + m
        for w, m in self.masses.items():
            if len(w) < self.depth and abs(children.get(w, 0.0) - m) > tol:
                raise AssertionError(f"masses of extensions of {w} do not add up")
        if self.denominator:
            for w, m in self.masses.items():
                k = m * self.denominator
                if abs(k - round(k)) > 1e-9:
                    raise AssertionError(f"mass of {w} is not a multiple of 1/{self.denominator}")

    def to_csv(self) -> str:
        """CSV with header ``word,mass``; words are dot-joined edge ids
        (edge indices when no system is attached), the empty word is ``""``."""
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["word", "mass"])
        for w in sorted(self.masses, key=lambda w: (len(w), w)):
            if self.system is not None:
                name = ".".join(self.system.edges[k].id for k in w)
            else:
                name = ".".join(map(str, w))
            out.writerow([name, repr(self.masses[w])])
        return buf.getvalue()


def occupation_L(point: SymbolicPoint, n: int, depth: int = DEFAULT_DEPTH,
                 system: GdSystem | None = None) -> CylinderMeasure:
    """Cylinder masses of (1/n) Σ_{k<n} δ_{S^k point} up to ``depth``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    counts: dict[tuple[int, ...], int] = {(): n}
    for k in range(n):
        w = point.window(k, depth)
        for d in range(1, depth + 1):
            counts[w[:d]] = counts.get(w[:d], 0) + 1
    masses = {w: float(Fraction(c, n)) for w, c in counts.items()}
    return CylinderMeasure(depth, masses, denominator=n, truncated=True, system=system)


def completion(system: GdSystem, word: PathWord) -> SymbolicPoint:
    """Periodic completion i ĥ i ĥ ... of a finite word."""
    hat = return_word(system, word)
    return SymbolicPoint.periodic(word.edges + hat.edges)


def occupation_M(system: GdSystem, word: PathWord, depth: int = DEFAULT_DEPTH) -> CylinderMeasure:
    """Occupation measure of the periodic completion over one full period."""
    hat = return_word(system, word)
    point = SymbolicPoint.periodic(word.edges + hat.edges)
    return occupation_L(point, len(word) + len(hat), depth, system)


def tree_edge_length(level: int, gamma: float) -> float:
    """Length of the edge joining a depth-(level-1) node to its child."""
    return 0.5 * (gamma ** (level - 1) - gamma**level)


def ldistance(mu: CylinderMeasure, nu: CylinderMeasure, gamma: float = DEFAULT_GAMMA,
              depth: int = DEFAULT_DEPTH) -> Interval:
    """Enclosure of the Lipschitz-dual distance between two measures.

    d_γ is an ultrametric realised by a rooted tree in which the node of a
    word w sits at height γ^|w|/2, so the dual distance is the tree transport
    cost Σ_w len(w)·|μ[w] − ν[w]|. Levels beyond ``depth`` contribute at most
    Σ_{k>depth} (γ^{k-1} − γ^k) = γ^depth, which is added to the upper end.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if mu.depth < depth or nu.depth < depth:
        raise DepthMismatch(f"measures carried to depth {mu.depth}/{nu.depth}, need {depth}")
    words = {w for w in mu.masses if 1 <= len(w) <= depth}
    words |= {w for w in nu.masses if 1 <= len(w) <= depth}
    terms = [tree_edge_length(len(w), gamma) * abs(mu[w] - nu[w]) for w in words]
    lo = math.fsum(terms)
    tail = gamma**depth if (mu.truncated or nu.truncated) else 0.0
    return Interval(lo, lo + tail)


def atom(point: SymbolicPoint, depth: int = DEFAULT_DEPTH,
         system: GdSystem | None = None) -> CylinderMeasure:
    return occupation_L(point, 1, depth, system)


def lemma_bound(n: int, n_vertices: int, gamma: float, depth: int) -> float:
    """Upper bound on the distance between L_n(u k) and M_n(u):
    1/(n(1-γ)) + 2|V|/n + γ^depth/(1-γ)."""
    return 1.0 / (n * (1.0 - gamma)) + 2.0 * n_vertices / n + gamma**depth / (1.0 - gamma)
