"""Potentials on path space.

A potential of depth m is a table over the admissible words of length m
(rows in lexicographic order); an *enclosed* potential carries a lower and an
upper table bracketing some function that is not locally constant. Birkhoff
sums over cylinders are returned as intervals ``[inf, sup]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._numerics import Interval, interval_divide
from .errors import BadHolderData, ConfigError, DenominatorSignViolation
from .graph import GdSystem, PathWord, word_array, word_count

_DENSE_LIMIT = 10**7


class WordIndex:
    """Maps admissible words of a fixed length to their lexicographic rank."""

    def __init__(self, system: GdSystem, length: int):
        self.system = system
        self.length = length
        self.words = word_array(system, length) if length > 0 else np.zeros((1, 0), dtype=np.intp)
        e = system.n_edges
        self._radix = e ** np.arange(length - 1, -1, -1, dtype=np.int64)
        if e**length <= _DENSE_LIMIT:
            self._dense = np.full(e**length, -1, dtype=np.intp)
            self._dense[self.words @ self._radix] = np.arange(len(self.words))
            self._map = None
        else:
            self._dense = None
            self._map = {tuple(map(int, w)): i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def rank(self, windows: np.ndarray) -> np.ndarray:
        """Ranks of the rows of an int array of shape (..., length)."""
        windows = np.asarray(windows, dtype=np.intp)
        if self._dense is not None:
            idx = self._dense[windows @ self._radix]
        else:
            flat = windows.reshape(-1, self.length)
            idx = np.array([self._map.get(tuple(map(int, w)), -1) for w in flat],
                           dtype=np.intp).reshape(windows.shape[:-1])
        if np.any(idx < 0):
            raise ValueError("inadmissible window")
        return idx


_INDEX_CACHE: dict[tuple[int, int], WordIndex] = {}


def word_index(system: GdSystem, length: int) -> WordIndex:
    key = (id(system), length)
    wi = _INDEX_CACHE.get(key)
    if wi is None or wi.system is not system:
        wi = _INDEX_CACHE[key] = WordIndex(system, length)
    return wi


class Potential:
    """Locally constant (``upper is None``) or enclosed potential of a given depth.

    Values are in nats. Arithmetic (``+``, ``-``, scalar ``*``) lifts both
    operands to the larger depth and keeps enclosures sound.
    """

    def __init__(self, system: GdSystem, depth: int, lower, upper=None, name: str = ""):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        n = word_count(system, depth)
        lower = np.array(lower, dtype=float)
        if lower.shape != (n,):
            raise ValueError(f"table must have {n} entries for depth {depth}, got {lower.shape}")
        if upper is not None:
            upper = np.array(upper, dtype=float)
            if upper.shape != (n,):
                raise ValueError("lower and upper tables differ in length")
            if np.any(lower > upper):
                raise ValueError("lower table exceeds upper table")
            if np.array_equal(lower, upper):
                upper = None
        lower.setflags(write=False)
        if upper is not None:
            upper.setflags(write=False)
        self.system = system
        self.depth = depth
        self.lower = lower
        self._upper = upper
        self.name = name

    @property
    def upper(self) -> np.ndarray:
        return self.lower if self._upper is None else self._upper

    @property
    def kind(self) -> str:
        return "locally-constant" if self._upper is None else "enclosed"

    @property
    def is_locally_constant(self) -> bool:
        return self._upper is None

    @property
    def index(self) -> WordIndex:
        return word_index(self.system, self.depth)

    @classmethod
    def from_mapping(cls, system: GdSystem, values: Mapping, upper: Mapping | None = None,
                     name: str = "") -> "Potential":
        """Table keyed by words given as edge-id tuples or dot-joined strings."""
        keyed = {_key(system, w): float(v) for w, v in values.items()}
        depths = {len(k) for k in keyed}
        if len(depths) != 1:
            raise ConfigError("all table words must have the same length")
        depth = depths.pop()
        idx = word_index(system, depth)
        rows = [tuple(map(int, w)) for w in idx.words]
        if set(keyed) != set(rows):
            missing = set(rows) - set(keyed)
            if missing:
                w = sorted(missing)[0]
                raise ConfigError(f"table misses word {'.'.join(system.edges[k].id for k in w)}")
            raise ConfigError("table contains inadmissible words")
        lo = [keyed[w] for w in rows]
        hi = None
        if upper is not None:
            ukeyed = {_key(system, w): float(v) for w, v in upper.items()}
            hi = [ukeyed[w] for w in rows]
        return cls(system, depth, lo, hi, name)

    @classmethod
    def constant(cls, system: GdSystem, c: float, depth: int = 1) -> "Potential":
        return cls(system, depth, np.full(word_count(system, depth), float(c)), name=repr(c))

    @classmethod
    def edge_indicator(cls, system: GdSystem, edges: Sequence) -> "Potential":
        """Depth-1 potential equal to 1 on the given edges (ids or indices), 0 elsewhere."""
        chosen = {system.edge_index[e] if isinstance(e, str) else int(e) for e in edges}
        return cls(system, 1, [1.0 if k in chosen else 0.0 for k in range(system.n_edges)],
                   name="1[" + ",".join(system.edges[k].id for k in sorted(chosen)) + "]")

    def lift(self, depth: int) -> "Potential":
        """Same function viewed as a table over longer words."""
        if depth < self.depth:
            raise ValueError("cannot lower the depth of a potential")
        if depth == self.depth:
            return self
        rows = word_index(self.system, depth).words[:, : self.depth]
        r = self.index.rank(rows)
        up = None if self._upper is None else self._upper[r]
        return Potential(self.system, depth, self.lower[r], up, self.name)

    def _binary(self, other: "Potential", sign: float) -> "Potential":
        if other.system is not self.system:
            raise ValueError("potentials belong to different systems")
        d = max(self.depth, other.depth)
        a, b = self.lift(d), other.lift(d)
        if sign > 0:
            lo, hi = a.lower + b.lower, a.upper + b.upper
        else:
            lo, hi = a.lower - b.upper, a.upper - b.lower
        return Potential(self.system, d, lo, None if a.is_locally_constant and b.is_locally_constant else hi)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self + Potential.constant(self.system, other)
        return self._binary(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self._binary(other, -1.0)

    def __mul__(self, c):
        c = float(c)
        if self._upper is None:
            return Potential(self.system, self.depth, c * self.lower)
        lo, hi = c * self.lower, c * self._upper
        return Potential(self.system, self.depth, np.minimum(lo, hi), np.maximum(lo, hi))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    @property
    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.lower)), np.max(np.abs(self.upper))))

    @property
    def spread(self) -> float:
        return float(np.max(self.upper) - np.min(self.lower))

    def value(self, word) -> Interval:
        w = np.asarray(_key(self.system, word), dtype=np.intp)
        if len(w) != self.depth:
            raise ValueError(f"need a word of length {self.depth}")
        r = int(self.index.rank(w[None, :])[0])
        return Interval(float(self.lower[r]), float(self.upper[r]))

    def __repr__(self):
        return f"Potential(depth={self.depth}, kind={self.kind}, name={self.name!r})"


def _key(system: GdSystem, w) -> tuple[int, ...]:
    if isinstance(w, PathWord):
        return w.edges
    if isinstance(w, str):
        w = w.split(".") if w else ()
    return tuple(system.edge_index[e] if isinstance(e, str) else int(e) for e in w)


def builtin_lambda(system: GdSystem) -> Potential:
    """Local change of scale: e ↦ log r_e (depth 1, strictly negative)."""
    return Potential(system, 1, np.log(system.ratios), name="Lambda")


def builtin_phi(system: GdSystem) -> Potential:
    """Local change of measure: e ↦ log p_e (depth 1)."""
    return Potential(system, 1, np.log(system.probs), name="Phi")


def log_diameter(system: GdSystem, words: np.ndarray) -> np.ndarray:
    """log diam K_i = Σ log r_e + log diam_{t(i)} for rows of a word array."""
    words = np.atleast_2d(words)
    return np.log(system.ratios)[words].sum(axis=1) + np.log(system.vertex_diameters)[
        system.dst[words[:, -1]]
    ]


def _continuations(system: GdSystem, vertex: int, length: int) -> list[tuple[int, ...]]:
    out = [()]
    ends = [vertex]
    for _ in range(length):
        nxt, nends = [], []
        for c, v in zip(out, ends):
            for k in system.out_edges[v]:
                nxt.append(c + (k,))
                nends.append(int(system.dst[k]))
        out, ends = nxt, nends
    return out


def _tail_tables(phi: Potential) -> tuple[np.ndarray, np.ndarray]:
    """For each (m-1)-word s: min/max over continuations c of the last m-1
    Birkhoff terms of any word ending in s."""
    m = phi.depth
    states = word_index(phi.system, m - 1)
    lo = np.empty(len(states))
    hi = np.empty(len(states))
    for r, s in enumerate(states.words):
        s = tuple(map(int, s))
        conts = _continuations(phi.system, int(phi.system.dst[s[-1]]), m - 1)
        full = np.array([s + c for c in conts], dtype=np.intp)
        win = np.stack([full[:, j : j + m] for j in range(m - 1)], axis=1)
        ranks = phi.index.rank(win)
        lo[r] = phi.lower[ranks].sum(axis=1).min()
        hi[r] = phi.upper[ranks].sum(axis=1).max()
    return lo, hi


_TAIL_CACHE: dict[int, tuple[Potential, np.ndarray, np.ndarray]] = {}


def _tails(phi: Potential):
    hit = _TAIL_CACHE.get(id(phi))
    if hit is not None and hit[0] is phi:
        return hit[1], hit[2]
    lo, hi = _tail_tables(phi)
    if len(_TAIL_CACHE) > 256:
        _TAIL_CACHE.clear()
    _TAIL_CACHE[id(phi)] = (phi, lo, hi)
    return lo, hi


def birkhoff_bounds(phi: Potential, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inf and sup of Σ_{k<n} φ(S^k u) over u in [w], for each row w of ``words``.

    Windows lying inside the word are exact; the last m-1 terms are optimised
    over all admissible continuations of length m-1.
    """
    words = np.atleast_2d(np.asarray(words, dtype=np.intp))
    n = words.shape[1]
    m = phi.depth
    if m == 1:
        return phi.lower[words].sum(axis=1), phi.upper[words].sum(axis=1)
    if n >= m - 1:
        lo = np.zeros(len(words))
        hi = np.zeros(len(words))
        if n >= m:
            win = np.lib.stride_tricks.sliding_window_view(words, m, axis=1)
            ranks = phi.index.rank(win)
            lo += phi.lower[ranks].sum(axis=1)
            hi += phi.upper[ranks].sum(axis=1)
        tlo, thi = _tails(phi)
        s = word_index(phi.system, m - 1).rank(words[:, n - m + 1 :])
        return lo + tlo[s], hi + thi[s]
    lo = np.empty(len(words))
    hi = np.empty(len(words))
    for r, w in enumerate(words):
        w = tuple(map(int, w))
        conts = _continuations(phi.system, int(phi.system.dst[w[-1]]), m - 1)
        full = np.array([w + c for c in conts], dtype=np.intp)
        win = np.stack([full[:, j : j + m] for j in range(n)], axis=1)
        ranks = phi.index.rank(win)
        lo[r] = phi.lower[ranks].sum(axis=1).min()
        hi[r] = phi.upper[ranks].sum(axis=1).max()
    return lo, hi


def cylinder_sup_birkhoff(phi: Potential, word: PathWord) -> Interval:
    """[inf, sup] over u in [word] of the Birkhoff sum of length |word|."""
    if len(word) < 1:
        raise ValueError("word must be non-empty")
    lo, hi = birkhoff_bounds(phi, np.array([word.edges]))
    return Interval(float(lo[0]), float(hi[0]))


def periodic_sums(phi: Potential, cycles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Σ_{k<L} φ(S^k x) for the periodic points x with the rows of ``cycles``
    (shape (N, L)) as period; returned as lower/upper table sums."""
    cycles = np.atleast_2d(np.asarray(cycles, dtype=np.intp))
    m = phi.depth
    if m == 1:
        return phi.lower[cycles].sum(axis=1), phi.upper[cycles].sum(axis=1)
    L = cycles.shape[1]
    pos = (np.arange(L)[:, None] + np.arange(m)[None, :]) % L
    ranks = phi.index.rank(cycles[:, pos])
    return phi.lower[ranks].sum(axis=1), phi.upper[ranks].sum(axis=1)


@dataclass(frozen=True)
class RatioMap:
    """U(μ) = ∫numerator dμ / ∫denominator dμ with a strictly negative denominator."""

    numerator: Potential
    denominator: Potential

    def __post_init__(self):
        if np.max(self.denominator.upper) >= 0:
            raise DenominatorSignViolation("denominator must be strictly negative")
        if self.numerator.system is not self.denominator.system:
            raise ValueError("numerator and denominator belong to different systems")

    @property
    def system(self) -> GdSystem:
        return self.numerator.system

    @classmethod
    def mean(cls, f: Potential) -> "RatioMap":
        """U(μ) = ∫f dμ, written as ∫(-f) / ∫(-1)."""
        return cls(-f, Potential.constant(f.system, -1.0))

    @classmethod
    def local_dimension(cls, system: GdSystem) -> "RatioMap":
        """U(μ) = ∫Φ dμ / ∫Λ dμ."""
        return cls(builtin_phi(system), builtin_lambda(system))

    @property
    def is_depth_one(self) -> bool:
        return (self.numerator.depth == 1 and self.denominator.depth == 1
                and self.numerator.is_locally_constant and self.denominator.is_locally_constant)

    def enclosures(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interval enclosures of U L_n[w] for every row w (vectorised)."""
        nlo, nhi = birkhoff_bounds(self.numerator, words)
        dlo, dhi = birkhoff_bounds(self.denominator, words)
        q = np.stack([nlo / dlo, nlo / dhi, nhi / dlo, nhi / dhi])
        return q.min(axis=0), q.max(axis=0)

    def on_cycles(self, cycles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Enclosure of U at the periodic points with the given periods."""
        nlo, nhi = periodic_sums(self.numerator, cycles)
        dlo, dhi = periodic_sums(self.denominator, cycles)
        q = np.stack([nlo / dlo, nlo / dhi, nhi / dlo, nhi / dhi])
        return q.min(axis=0), q.max(axis=0)


def u_enclosure(U: RatioMap, word: PathWord) -> Interval:
    """Interval containing U L_n u for every u in the cylinder [word]."""
    num = cylinder_sup_birkhoff(U.numerator, word)
    den = cylinder_sup_birkhoff(U.denominator, word)
    if den.hi >= 0:
        raise DenominatorSignViolation("denominator Birkhoff sum is not negative")
    return interval_divide(num, den)


def discretize(system: GdSystem, depth: int, values, holder_constant: float,
               exponent: float = 1.0, gamma: float = 0.5) -> Potential:
    """Enclose a function by depth-m lower/upper tables.

    ``values`` gives the function at one point of each depth-m cylinder (a
    mapping keyed by word, or an array in lexicographic order). If
    |f(i) − f(j)| ≤ H·d_γ(i, j)^θ, f varies by at most H·γ^{mθ} from that
    value on the cylinder, so the tables are value ∓ H·γ^{mθ}.
    """
    if not (holder_constant >= 0 and 0 < exponent <= 1 and 0 < gamma < 1):
        raise BadHolderData("need H >= 0, exponent in (0, 1], gamma in (0, 1)")
    if isinstance(values, Mapping):
        base = Potential.from_mapping(system, values)
        if base.depth != depth:
            raise BadHolderData(f"table depth {base.depth} does not match {depth}")
        centre = base.lower
    else:
        centre = np.asarray(values, dtype=float)
    half = holder_constant * gamma ** (depth * exponent)
    return Potential(system, depth, centre - half, centre + half, name="discretized")


def load_table(system: GdSystem, path: str | Path) -> Potential:
    """Read a potential from CSV with header ``word,value`` or ``word,lo,hi``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty table")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(x.strip() for x in r)]
    try:
        if header == ["word", "value"]:
            return Potential.from_mapping(system, {r[0].strip(): float(r[1]) for r in body})
        if header == ["word", "lo", "hi"]:
            lo = {r[0].strip(): float(r[1]) for r in body}
            hi = {r[0].strip(): float(r[2]) for r in body}
            return Potential.from_mapping(system, lo, hi)
    except (IndexError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: header must be 'word,value' or 'word,lo,hi'")


def birkhoff_sum_exact(phi: Potential, point, n: int) -> Interval:
    """Σ_{k<n} φ(S^k x) at an explicit eventually periodic point (oracle helper)."""
    m = phi.depth
    win = np.array([point.window(k, m) for k in range(n)], dtype=np.intp)
    r = phi.index.rank(win)
    return Interval(float(phi.lower[r].sum()), float(phi.upper[r].sum()))


__all__ = [
    "Potential",
    "RatioMap",
    "WordIndex",
    "builtin_lambda",
    "builtin_phi",
    "birkhoff_bounds",
    "cylinder_sup_birkhoff",
    "discretize",
    "load_table",
    "log_diameter",
    "periodic_sums",
    "u_enclosure",
    "word_index",
]
