"""Pressure, dynamical zeta functions, Bowen roots and Markov measures.

For a potential of depth m the partition sums

    Z_n(φ) = Σ_{|i|=n} sup_{u∈[i]} exp Σ_{k<n} φ(S^k u)

are computed exactly from powers of a transfer matrix on (m-1)-words (on
vertices when m = 1). Spectral radii come from shifted power iteration with
Collatz–Wielandt brackets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import logsumexp

from ._numerics import Interval, RootResult, decreasing_root
from .errors import NotIrreducible, NotNegative
from .graph import GdSystem, PathWord, word_array
from .potentials import Potential, _tails, birkhoff_bounds, word_index

log = logging.getLogger(__name__)

PERRON_TOL = 1e-13


@dataclass(frozen=True)
class PerronData:
    """λ with its left (u M = λ u) and right (M v = λ v) Perron vectors,
    normalised by Σ u = 1 and Σ u v = 1."""

    lam: float
    u: np.ndarray
    v: np.ndarray
    lo: float
    hi: float
    iterations: int

    @property
    def enclosure(self) -> Interval:
        return Interval(self.lo, self.hi)


def _check_irreducible(m: np.ndarray) -> None:
    if m.shape[0] == 1:
        if m[0, 0] <= 0:
            raise NotIrreducible("1x1 matrix with zero entry")
        return
    ncomp, _ = connected_components(m > 0, directed=True, connection="strong")
    if ncomp != 1:
        raise NotIrreducible(f"matrix has {ncomp} strongly connected components")


def _power(m: np.ndarray, tol: float, maxiter: int) -> tuple[np.ndarray, float, float, int]:
    """Right Perron vector of an irreducible nonnegative matrix.

    Iterates with M + sI (s ≈ λ) so that periodic matrices converge too, and
    stops on the Collatz–Wielandt bracket of M itself.
    """
    n = m.shape[0]
    x = np.ones(n)
    rows = m.sum(axis=1)
    shift = 0.5 * (rows.min() + rows.max())
    lo = hi = 0.0
    for it in range(1, maxiter + 1):
        y = m @ x
        ratio = y / x
        lo, hi = ratio.min(), ratio.max()
        if hi - lo <= tol * hi:
            return x / x.sum(), lo, hi, it
        x = y + shift * x
        x /= x.sum()
        shift = 0.5 * (lo + hi)
    log.warning("power iteration stopped after %d steps, bracket width %.3g", maxiter, hi - lo)
    return x / x.sum(), lo, hi, maxiter


def perron(m, tol: float = PERRON_TOL, maxiter: int = 200_000) -> PerronData:
    """Perron root and vectors of an irreducible nonnegative matrix."""
    m = np.asarray(getattr(m, "matrix", m), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("need a square matrix")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("matrix must be finite and nonnegative")
    _check_irreducible(m)
    v, lo, hi, it = _power(m, tol, maxiter)
    u, lo2, hi2, it2 = _power(m.T, tol, maxiter)
    lo, hi = max(lo, lo2), min(hi, hi2)
    if lo > hi:  # brackets from both sides touch within rounding
        lo, hi = hi, lo
    u = u / u.sum()
    v = v / (u @ v)
    return PerronData(0.5 * (lo + hi), u, v, lo, hi, max(it, it2))


def spectral_radius(m: np.ndarray, tol: float = PERRON_TOL, maxiter: int = 200_000) -> Interval:
    """Collatz–Wielandt bracket of ρ(M) (right vector only; no irreducibility check)."""
    _, lo, hi, _ = _power(np.asarray(m, dtype=float), tol, maxiter)
    return Interval(lo, hi)


@dataclass(frozen=True)
class TransferMatrix:
    """exp-weighted transition matrix, stored as ``matrix * exp(log_scale)``.

    States are the admissible (m-1)-words (vertices when m = 1); ``tail``
    holds the scaled sup of the last m-1 Birkhoff terms for each state.
    """

    matrix: np.ndarray
    log_scale: float
    depth: int
    states: np.ndarray
    tail: np.ndarray


def _depth1_matrix(system: GdSystem, table: np.ndarray) -> tuple[np.ndarray, float]:
    c = float(np.max(table))
    a = np.zeros((system.n_vertices, system.n_vertices))
    np.add.at(a, (system.src, system.dst), np.exp(table - c))
    return a, c


def transfer_matrix(system: GdSystem, phi: Potential | None = None, branch: str = "upper") -> TransferMatrix:
    if phi is None:
        phi = Potential.constant(system, 0.0)
    table = phi.upper if branch == "upper" else phi.lower
    m = phi.depth
    if m == 1:
        a, c = _depth1_matrix(system, table)
        return TransferMatrix(a, c, 1, np.arange(system.n_vertices)[:, None], np.ones(system.n_vertices))
    c = float(np.max(table))
    states = word_index(system, m - 1)
    full = word_index(system, m).words
    rows = states.rank(full[:, :-1])
    cols = states.rank(full[:, 1:])
    a = np.zeros((len(states), len(states)))
    np.add.at(a, (rows, cols), np.exp(table - c))
    tlo, thi = _tails(phi)
    tail = np.exp((thi if branch == "upper" else tlo) - (m - 1) * c)
    return TransferMatrix(a, c, m, states.words, tail)


@dataclass(frozen=True)
class PressureEstimate:
    value: float
    lo: float
    hi: float
    method: str
    n: int | None = None
    error_bound: float | None = None

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __float__(self):
        return self.value


def pressure_exact(system: GdSystem, phi: Potential | None = None) -> PressureEstimate:
    """log ρ of the transfer matrix; an enclosed potential yields the interval
    spanned by its lower and upper tables."""
    phi = phi if phi is not None else Potential.constant(system, 0.0)
    tm_hi = transfer_matrix(system, phi, "upper")
    pd = perron(tm_hi.matrix)
    hi = math.log(pd.hi) + tm_hi.log_scale
    if phi.is_locally_constant:
        lo = math.log(pd.lo) + tm_hi.log_scale
        return PressureEstimate(math.log(pd.lam) + tm_hi.log_scale, lo, hi, "exact-matrix")
    tm_lo = transfer_matrix(system, phi, "lower")
    pl = perron(tm_lo.matrix)
    lo = math.log(pl.lo) + tm_lo.log_scale
    return PressureEstimate(0.5 * (lo + hi), lo, hi, "exact-matrix")


def pressure_of_table(system: GdSystem, table: np.ndarray) -> float:
    """Pressure of a depth-1 potential given as a raw edge table (fast path)."""
    a, c = _depth1_matrix(system, np.asarray(table, dtype=float))
    r = spectral_radius(a)
    return math.log(r.mid) + c


def log_partition_sequence(system: GdSystem, phi: Potential, N: int, branch: str = "upper") -> np.ndarray:
    """log Z_1, ..., log Z_N (sup branch by default, inf branch with ``branch="lower"``)."""
    tm = transfer_matrix(system, phi, branch)
    m = phi.depth
    out = np.empty(N)
    short = min(N, m - 2)
    for n in range(1, short + 1):
        lo, hi = birkhoff_bounds(phi, word_array(system, n))
        out[n - 1] = logsumexp(hi if branch == "upper" else lo)
    x = tm.tail.astype(float).copy()
    acc = 0.0
    for n in range(max(1, m - 1), N + 1):
        k = n - (m - 1)
        if k > 0:
            x = tm.matrix @ x
            s = x.sum()
            acc += math.log(s)
            x /= s
        out[n - 1] = n * tm.log_scale + acc + math.log(x.sum())
    return out


def pressure_finite(system: GdSystem, phi: Potential | None, n: int, branch: str = "sup",
                    method: str = "matrix", cap: int | None = None) -> PressureEstimate:
    """(1/n) log Z_n, with a bound C/n on its distance to the exact pressure.

    ``method="enumerate"`` sums over the enumerated words instead of using
    matrix powers (subject to the enumeration cap).
    """
    phi = phi if phi is not None else Potential.constant(system, 0.0)
    side = "upper" if branch == "sup" else "lower"
    if method == "enumerate":
        lo, hi = birkhoff_bounds(phi, word_array(system, n, cap))
        logz = float(logsumexp(hi if side == "upper" else lo))
    else:
        logz = float(log_partition_sequence(system, phi, n, side)[-1])
    tm = transfer_matrix(system, phi, side)
    pd = perron(tm.matrix)
    ratio = tm.tail / pd.v
    loglam = math.log(pd.lam)
    m = phi.depth
    ends = [math.log(ratio.min() * pd.v.sum()) - (m - 1) * loglam,
            math.log(ratio.max() * pd.v.sum()) - (m - 1) * loglam]
    C = max(abs(e) for e in ends)
    value = logz / n
    return PressureEstimate(value, value, value, "finite-n", n, C / n)


def zeta_partial(system: GdSystem, phi: Potential | None, z: complex, N: int) -> complex:
    """Σ_{n≤N} z^n Z_n / n."""
    if z == 0:
        return 0j
    phi = phi if phi is not None else Potential.constant(system, 0.0)
    logz = log_partition_sequence(system, phi, N)
    n = np.arange(1, N + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        terms = np.exp(n * np.log(complex(z)) + logz - np.log(n))
    return complex(terms.sum())


@dataclass(frozen=True)
class ZetaRadius:
    """Root-test estimate of the radius of convergence of the zeta series."""

    radius: float
    enclosure: Interval          # enclosure of the radius
    minus_log: float             # -log radius, the pressure estimate
    raw: np.ndarray = field(repr=False)          # (1/n) log Z_n
    extrapolated: np.ndarray = field(repr=False)  # 2 x_{2n} - x_n

    def converges(self, z: complex) -> bool:
        return abs(z) < self.enclosure.lo


def zeta_radius(system: GdSystem, phi: Potential | None = None, N: int = 200) -> ZetaRadius:
    """Radius of convergence from the root test on (n a_n)^{1/n} = Z_n^{1/n}.

    The root-test sequence x_n = (1/n) log Z_n has a 1/n leading error; the
    Richardson combination 2 x_{2n} − x_n removes it. The enclosure spans the
    extrapolants over the upper half of the usable range.
    """
    if N < 8:
        raise ValueError("N must be >= 8")
    phi = phi if phi is not None else Potential.constant(system, 0.0)
    x = log_partition_sequence(system, phi, N) / np.arange(1, N + 1)
    half = N // 2
    ext = np.array([2 * x[2 * k - 1] - x[k - 1] for k in range(1, half + 1)])
    tail = ext[max(0, half // 2 - 1):]
    est = float(ext[-1])
    lo, hi = float(min(tail.min(), est)), float(max(tail.max(), est))
    return ZetaRadius(math.exp(-est), Interval(math.exp(-hi), math.exp(-lo)), est, x, ext)


def solve_pressure_root(system: GdSystem, direction: Potential, base: Potential | None = None,
                        xtol: float = 1e-13) -> RootResult:
    """Root t of P(base + t·direction) = 0 for a strictly negative direction."""
    if np.max(direction.upper) >= 0:
        raise NotNegative("direction potential must be strictly negative")
    if base is None:
        base = Potential.constant(system, 0.0)
    if (base.depth == 1 and direction.depth == 1 and base.is_locally_constant
            and direction.is_locally_constant):
        b, d = base.lower, direction.lower
        return decreasing_root(lambda t: pressure_of_table(system, b + t * d), xtol=xtol)
    return decreasing_root(lambda t: pressure_exact(system, base + t * direction).value, xtol=xtol)


def bowen_root(system: GdSystem, Phi: Potential, base: Potential | None = None) -> float:
    """Unique s with P(base + sΦ) = 0 (Φ < 0)."""
    return solve_pressure_root(system, Phi, base).root


@dataclass(frozen=True)
class MarkovMeasure:
    """Shift-invariant edge-Markov measure: initial vertex law ``stationary``
    and per-edge transition probabilities ``transitions``."""

    system: GdSystem = field(repr=False)
    transitions: np.ndarray
    stationary: np.ndarray

    @classmethod
    def from_transitions(cls, system: GdSystem, pi) -> "MarkovMeasure":
        pi = np.asarray(pi, dtype=float)
        p = np.zeros((system.n_vertices, system.n_vertices))
        np.add.at(p, (system.src, system.dst), pi)
        n = system.n_vertices
        a = np.vstack([p.T - np.eye(n), np.ones(n)])
        b = np.concatenate([np.zeros(n), [1.0]])
        stat = np.linalg.lstsq(a, b, rcond=None)[0]
        return cls(system, pi, np.clip(stat, 0.0, None) / np.clip(stat, 0.0, None).sum())

    @property
    def edge_masses(self) -> np.ndarray:
        """Mass of each length-1 cylinder [e]."""
        return self.stationary[self.system.src] * self.transitions

    @property
    def vertex_kernel(self) -> np.ndarray:
        p = np.zeros((self.system.n_vertices, self.system.n_vertices))
        np.add.at(p, (self.system.src, self.system.dst), self.transitions)
        return p

    @property
    def entropy(self) -> float:
        pi = self.transitions
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(pi > 0, pi * np.log(pi), 0.0)
        return float(-np.sum(self.stationary[self.system.src] * terms))

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.stationary @ self.vertex_kernel - self.stationary)))

    def cylinder(self, word: PathWord | tuple) -> float:
        edges = word.edges if isinstance(word, PathWord) else tuple(word)
        if not edges:
            return 1.0
        return float(self.stationary[self.system.src[edges[0]]] * np.prod(self.transitions[list(edges)]))

    def word_masses(self, n: int) -> np.ndarray:
        words = word_array(self.system, n)
        return self.stationary[self.system.src[words[:, 0]]] * np.prod(self.transitions[words], axis=1)

    def mean(self, phi: Potential) -> float:
        """∫φ dμ (midpoint of the table enclosure for enclosed potentials)."""
        if phi.depth == 1:
            tab = 0.5 * (phi.lower + phi.upper)
            return float(self.edge_masses @ tab)
        masses = self.word_masses(phi.depth)
        return float(masses @ (0.5 * (phi.lower + phi.upper)))


def parry(system: GdSystem) -> MarkovMeasure:
    """Measure of maximal entropy: π_e = v_{t(e)} / (v_{i(e)} λ), initial law u_i v_i."""
    return gibbs_markov(system, Potential.constant(system, 0.0))


def perron_of(system: GdSystem, phi: Potential | None = None) -> PerronData:
    """Perron data of the exp(φ)-weighted vertex matrix (B itself for φ = 0)."""
    if phi is None:
        return perron(system.adjacency.astype(float))
    a, c = _depth1_matrix(system, phi.lower)
    pd = perron(a)
    return PerronData(pd.lam * math.exp(c), pd.u, pd.v, pd.lo * math.exp(c), pd.hi * math.exp(c),
                      pd.iterations)


def gibbs_markov(system: GdSystem, phi: Potential) -> MarkovMeasure:
    """Gibbs state of a depth-1 potential: π_e = e^{φ(e)} v_{t(e)} / (v_{i(e)} ρ)."""
    if phi.depth != 1 or not phi.is_locally_constant:
        raise ValueError("Gibbs states are built for depth-1 locally constant potentials")
    a, c = _depth1_matrix(system, phi.lower)
    pd = perron(a)
    v = pd.v
    pi = np.exp(phi.lower - c) * v[system.dst] / (v[system.src] * pd.lam)
    # renormalise per vertex against rounding in λ
    sums = np.zeros(system.n_vertices)
    np.add.at(sums, system.src, pi)
    pi = pi / sums[system.src]
    stat = pd.u * pd.v
    return MarkovMeasure(system, pi, stat / stat.sum())


def random_markov(system: GdSystem, rng: np.random.Generator, concentration: float = 1.0) -> MarkovMeasure:
    """Markov measure with Dirichlet-distributed transition rows."""
    pi = np.empty(system.n_edges)
    for out in system.out_edges:
        pi[list(out)] = rng.dirichlet(np.full(len(out), concentration))
    return MarkovMeasure.from_transitions(system, pi)
