"""β(q), its Legendre transform, restricted partition sums and the
multifractal Bowen equations for shrinking and fixed targets.

Restricted sums keep a word i of length n when the value of U on the
empirical measure of i lies in the target C. Two readings are available:
``source="L"`` uses the enclosure of U L_n u over u ∈ [i] (exact for depth-1
data) and ``source="M"`` evaluates U on the periodic completion i ĥ.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._numerics import Interval, decreasing_root, golden_section
from .birkhoff import ratio_range, ratio_spectrum_point, target_spectrum
from .errors import DegenerateTarget
from .graph import GdSystem, completion_groups, word_array
from .potentials import Potential, RatioMap, birkhoff_bounds, builtin_lambda, builtin_phi
from .targets import TargetSet
from .thermo import (MarkovMeasure, ZetaRadius, gibbs_markov, perron_of, solve_pressure_root)

log = logging.getLogger(__name__)

EMPTY = float("-inf")
Q_LIMIT = 256.0


class BetaFunction:
    """q ↦ β(q), the root t of P(qΦ + tΛ) = 0, with a cache."""

    def __init__(self, system: GdSystem, Phi: Potential | None = None, Lambda: Potential | None = None):
        self.system = system
        self.Phi = Phi if Phi is not None else builtin_phi(system)
        self.Lambda = Lambda if Lambda is not None else builtin_lambda(system)
        self.cache: dict[float, float] = {}
        self._range = None

    def __call__(self, q: float) -> float:
        q = float(q)
        if q not in self.cache:
            self.cache[q] = solve_pressure_root(self.system, self.Lambda, self.Phi * q).root
        return self.cache[q]

    def gibbs(self, q: float) -> MarkovMeasure:
        """Gibbs state of qΦ + β(q)Λ."""
        return gibbs_markov(self.system, self.Phi * q + self.Lambda * self(q))

    def alpha(self, q: float) -> float:
        """α(q) = −β'(q) = ∫Φdμ_q / ∫Λdμ_q."""
        mu = self.gibbs(q)
        return mu.mean(self.Phi) / mu.mean(self.Lambda)

    def derivative(self, q: float) -> float:
        return -self.alpha(q)

    def tangent_value(self, q: float) -> float:
        """β(q) − qβ'(q), the spectrum at α(q)."""
        return self(q) + q * self.alpha(q)

    def alpha_range(self) -> tuple[float, float]:
        if self._range is None:
            self._range = ratio_range(RatioMap(self.Phi, self.Lambda))
        return self._range


def beta(system: GdSystem, q: float) -> float:
    return BetaFunction(system)(q)


@dataclass
class LegendreValue:
    alpha: float
    value: float
    q: float | None
    width: float
    empty: bool
    boundary: bool = False


def legendre(b: BetaFunction, alpha: float, xtol: float = 1e-10) -> LegendreValue:
    """inf_q (αq + β(q)); empty (−∞) outside [α_min, α_max]."""
    lo, hi = b.alpha_range()
    if alpha < lo - 1e-12 or alpha > hi + 1e-12:
        return LegendreValue(alpha, EMPTY, None, 0.0, True)
    g = lambda q: alpha * q + b(q)
    if hi - lo < 1e-14:
        return LegendreValue(alpha, g(0.0), 0.0, 0.0, False)
    h = 1e-5

    def slope(q):
        return alpha + (b(q + h) - b(q - h)) / (2 * h)

    d0 = slope(0.0)
    direction = -1.0 if d0 > 0 else 1.0
    a, step, boundary = 0.0, 1.0, False
    while True:
        c = direction * step
        if abs(c) > Q_LIMIT:
            boundary = True
            break
        if (slope(c) > 0) != (d0 > 0):
            break
        a, step = c, step * 2
    if boundary:
        q = direction * Q_LIMIT
        return LegendreValue(alpha, g(q), q, abs(g(q) - g(q / 2)), False, True)
    lo_q, hi_q = min(a, c), max(a, c)
    q, val = golden_section(g, lo_q, hi_q, xtol=xtol)
    width = max(g(q - xtol), g(q + xtol)) - val
    return LegendreValue(alpha, val, q, max(width, 0.0), False)


@dataclass
class SpectrumCurve:
    """Samples (α, value, width, empty); empty rows carry value −inf."""

    alphas: np.ndarray
    values: np.ndarray
    widths: np.ndarray
    empty: np.ndarray

    def concavity(self) -> float:
        """Largest normalised second difference over consecutive finite samples
        (≤ 0 up to rounding for a concave curve)."""
        a, v = self.alphas[~self.empty], self.values[~self.empty]
        worst = -math.inf
        for i in range(1, len(a) - 1):
            h1, h2 = a[i] - a[i - 1], a[i + 1] - a[i]
            if h1 <= 0 or h2 <= 0:
                continue
            dd = 2 * ((v[i + 1] - v[i]) / h2 - (v[i] - v[i - 1]) / h1) / (h1 + h2)
            worst = max(worst, dd * (0.5 * (h1 + h2)) ** 2)
        return worst

    def is_concave(self, tol: float = 1e-9) -> bool:
        return self.concavity() <= tol

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "value", "width", "empty"])
        for a, v, wd, e in zip(self.alphas, self.values, self.widths, self.empty):
            w.writerow([f"{a:.15g}", "-inf" if e else f"{v:.15g}", f"{wd:.15g}", int(e)])
        return buf.getvalue()


def spectrum_curve(system: GdSystem, alphas, b: BetaFunction | None = None) -> SpectrumCurve:
    b = b if b is not None else BetaFunction(system)
    pts = [legendre(b, float(a)) for a in alphas]
    return SpectrumCurve(np.array([p.alpha for p in pts]), np.array([p.value for p in pts]),
                         np.array([p.width for p in pts]), np.array([p.empty for p in pts]))


# ------------------------------------------------------------ restricted sums

def qualifying(U: RatioMap, C: TargetSet, words: np.ndarray, source: str = "L") -> np.ndarray:
    """Boolean mask of the rows of ``words`` whose U-value lies in C."""
    if C.whole:
        return np.ones(len(words), dtype=bool)
    if source == "L":
        lo, hi = U.enclosures(words)
        return C.contains_interval(lo, hi)
    if source != "M":
        raise ValueError("source must be 'L' or 'M'")
    mask = np.zeros(len(words), dtype=bool)
    for rows, cycles in completion_groups(U.system, words):
        lo, hi = U.on_cycles(cycles)
        mask[rows] = C.contains_interval(lo, hi)
    return mask


def restricted_log_sum(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap | None, n: int,
                       source: str = "L", cap: int | None = None) -> float:
    """log Z_n^C(φ); −inf when no word qualifies."""
    words = word_array(system, n, cap)
    _, hi = birkhoff_bounds(phi, words)
    mask = qualifying(U, C, words, source) if U is not None else np.ones(len(words), dtype=bool)
    if not mask.any():
        return EMPTY
    return float(logsumexp(hi[mask]))


def restricted_sum(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap | None, n: int,
                   source: str = "L", cap: int | None = None) -> float:
    """Z_n^C(φ) = Σ exp(sup Birkhoff sum) over qualifying words (0 if none)."""
    words = word_array(system, n, cap)
    _, hi = birkhoff_bounds(phi, words)
    mask = qualifying(U, C, words, source) if U is not None else np.ones(len(words), dtype=bool)
    return math.fsum(np.exp(hi[mask]))


@dataclass
class MfPressure:
    ladder: list[int]
    values: list[float]          # (1/n) log Z_n^C, −inf when empty
    lower: float                 # liminf proxy: min over the upper half of the ladder
    upper: float                 # limsup proxy: max over the upper half
    empty: bool
    mode: str
    source: str

    @property
    def estimate(self) -> float:
        return self.lower if self.mode == "lower" else self.upper


def mf_pressure(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap | None, ladder,
                mode: str = "upper", source: str = "L", cap: int | None = None) -> MfPressure:
    ladder = [int(n) for n in ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("n ladder must be increasing")
    vals = [restricted_log_sum(system, phi, C, U, n, source, cap) / n for n in ladder]
    tail = vals[len(vals) // 2:]
    empty = all(v == EMPTY for v in vals)
    return MfPressure(ladder, vals, min(tail), max(tail), empty, mode, source)


def r_monotonicity(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap, n: int, radii,
                   source: str = "L") -> tuple[list[float], bool]:
    """(1/n) log Z_n^{B(C,r)} along ``radii``; the flag says the values are
    non-decreasing in r, as inclusion of the targets forces."""
    radii = sorted(float(r) for r in radii)
    vals = [restricted_log_sum(system, phi, C.inflate(r), U, n, source) / n for r in radii]
    ok = all(b >= a for a, b in zip(vals, vals[1:]))
    return vals, ok


# ------------------------------------------------------------ Bowen roots

@dataclass
class RootRow:
    r: float
    n: int
    raw: float       # root of (1/n) log Z_n = 0
    estimate: float  # root with the local-limit correction log n /(2n) per target dimension
    hi: float        # root with twice the correction
    empty: bool


@dataclass
class TargetRoot:
    value: float
    enclosure: Interval
    reference: float
    rows: list[RootRow] = field(default_factory=list)
    empty: bool = False


class _WordData:
    """Per-word Λ bounds and U enclosures for one n, reused across t and r."""

    def __init__(self, system, Lambda, U, n, source, cap):
        words = word_array(system, n, cap)
        self.n = n
        self.lam_lo, self.lam_hi = birkhoff_bounds(Lambda, words)
        self.words = words
        self.U, self.source = U, source
        if source == "L":
            self.u_lo, self.u_hi = U.enclosures(words)
        else:
            self.u_lo = np.empty(len(words))
            self.u_hi = np.empty(len(words))
            for rows, cycles in completion_groups(system, words):
                self.u_lo[rows], self.u_hi[rows] = U.on_cycles(cycles)

    def mask(self, C: TargetSet) -> np.ndarray:
        return C.contains_interval(self.u_lo, self.u_hi)

    def root(self, mask: np.ndarray, correction: float) -> float:
        lam_lo, lam_hi = self.lam_lo[mask], self.lam_hi[mask]
        n = self.n

        def x(t):
            # sup over the cylinder of tΛ: t·hi for t ≥ 0, t·lo otherwise
            s = t * lam_hi if t >= 0 else t * lam_lo
            return float(logsumexp(s)) / n + correction

        return decreasing_root(x, xtol=1e-12).root


def _roots(data: _WordData, C: TargetSet, r: float) -> RootRow:
    mask = data.mask(C.inflate(r) if r > 0 else C)
    if not mask.any():
        return RootRow(r, data.n, EMPTY, EMPTY, EMPTY, True)
    n = data.n
    kappa = C.dim if not mask.all() else 0
    c = kappa * math.log(n) / (2 * n)
    return RootRow(r, n, data.root(mask, 0.0), data.root(mask, c), data.root(mask, 2 * c), False)


def _reference(system: GdSystem, U: RatioMap, Lambda: Potential, C: TargetSet) -> float:
    """sup_{α∈C} sup{−h/∫Λ : U(μ) = α}, from the Birkhoff dual."""
    att = ratio_range(U)

    def point(a):
        return ratio_spectrum_point(system, U.numerator, U.denominator, a, Lambda).value

    if not C.whole and all(lo[0] == hi[0] for lo, hi in C.boxes):
        vals = [point(lo[0]) for lo, _ in C.boxes]
        return max(vals)
    return target_spectrum(point, C, grid=41, attainable=att).value


def shrinking_target_root(system: GdSystem, U: RatioMap, C: TargetSet | float, r_ladder, n_ladder,
                          Lambda: Potential | None = None, source: str = "L",
                          cap: int | None = None) -> TargetRoot:
    """Root t of the upper multifractal pressure of tΛ restricted to B(C, r).

    For every (r, n) the raw root of (1/n) log Z_n^{B(C,r)}(tΛ) = 0 and a
    corrected root are reported. The correction adds M·log(n)/(2n) (M the
    target dimension) for the polynomial prefactor of a local limit count
    and is applied only when the constraint actually removes words. The
    value is the corrected root at the smallest r and largest n; the
    enclosure runs from the raw root to the root with twice the correction.
    """
    if not isinstance(C, TargetSet):
        C = TargetSet.singleton(C)
    Lambda = Lambda if Lambda is not None else builtin_lambda(system)
    r_ladder = sorted((float(r) for r in r_ladder), reverse=True)
    n_ladder = sorted(int(n) for n in n_ladder)
    rows = []
    for n in n_ladder:
        data = _WordData(system, Lambda, U, n, source, cap)
        rows.extend(_roots(data, C, r) for r in r_ladder)
    final = [row for row in rows if row.n == n_ladder[-1] and row.r == r_ladder[-1]][0]
    ref = _reference(system, U, Lambda, C)
    if final.empty:
        return TargetRoot(EMPTY, Interval(EMPTY, EMPTY), ref, rows, True)
    return TargetRoot(final.estimate, Interval(final.raw, final.hi), ref, rows)


def fixed_target_root(system: GdSystem, U: RatioMap, C: TargetSet, n_ladder,
                      Lambda: Potential | None = None, source: str = "L",
                      cap: int | None = None) -> TargetRoot:
    """Root of the C-restricted upper pressure of tΛ for a closed box C whose
    interior meets the attainable range of U; raises DegenerateTarget otherwise."""
    if C.whole:
        return shrinking_target_root(system, U, C, [0.0], n_ladder, Lambda, source, cap)
    if not C.convex:
        raise ValueError("fixed targets must be a single box")
    lo, hi = ratio_range(U)
    (blo,), (bhi,) = C.boxes[0]
    if not (blo < bhi and blo < hi and bhi > lo):
        raise DegenerateTarget(f"interior of {C} misses the attainable range [{lo:.15g}, {hi:.15g}]")
    return shrinking_target_root(system, U, C, [0.0], n_ladder, Lambda, source, cap)


def restricted_zeta_radius(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap | None,
                           N: int = 16, source: str = "L", cap: int | None = None) -> ZetaRadius:
    """Root-test radius of Σ z^n Z_n^C / n (Richardson on (1/n) log Z_n^C).

    An empty constraint gives an everywhere-convergent series: radius inf.
    """
    if N < 8:
        raise ValueError("N must be >= 8")
    logz = np.array([restricted_log_sum(system, phi, C, U, n, source, cap) for n in range(1, N + 1)])
    x = logz / np.arange(1, N + 1)
    if np.all(np.isneginf(x)):
        return ZetaRadius(math.inf, Interval(math.inf, math.inf), EMPTY, x, np.array([]))
    half = N // 2
    ext = np.array([2 * x[2 * k - 1] - x[k - 1] if np.isfinite(x[k - 1]) else x[2 * k - 1]
                    for k in range(1, half + 1)])
    finite = ext[np.isfinite(ext)]
    if not len(finite):
        # qualifying lengths too sparse for the pairing; fall back to the raw root test
        finite = x[np.isfinite(x)]
    tail = finite[len(finite) // 2:]
    est = float(finite[-1])
    lo, hi = float(min(tail.min(), est)), float(max(tail.max(), est))
    return ZetaRadius(math.exp(-est), Interval(math.exp(-hi), math.exp(-lo)), est, x, ext)


# ------------------------------------------------------------ sandwich bounds

def sandwich_radius(U: RatioMap, n: int) -> float:
    """Bound on |U(M_n i) − U(L_n u)| for u ∈ [i], depth-1 locally constant U.

    Completion adds h ≤ |V| symbols: with |num| ≤ a, |den| ≤ b, |den| ≥ d per
    symbol the two ratios differ by at most 2|V|·a·b / (n d²).
    """
    if not U.is_depth_one:
        raise ValueError("sandwich radius needs depth-1 data")
    a = U.numerator.sup_norm
    b = U.denominator.sup_norm
    d = float(np.min(np.abs(U.denominator.lower)))
    return 2 * U.system.n_vertices * a * b / (n * d * d)


@dataclass
class Sandwich:
    n: int
    r: float
    L_C: float
    M_C: float
    L_big: float
    M_big: float

    @property
    def holds(self) -> bool:
        return self.L_C <= self.M_big and self.M_C <= self.L_big


def sandwich(system: GdSystem, phi: Potential, C: TargetSet, U: RatioMap, n: int,
             r: float | None = None) -> Sandwich:
    """Z_n^{C,L} ≤ Z_n^{B(C,r),M} and Z_n^{C,M} ≤ Z_n^{B(C,r),L} at one n."""
    r = sandwich_radius(U, n) if r is None else r
    big = C.inflate(r)
    z = lambda T, s: restricted_sum(system, phi, T, U, n, s)
    return Sandwich(n, r, z(C, "L"), z(C, "M"), z(big, "L"), z(big, "M"))


def boltzmann_constant(system: GdSystem, phi: Potential) -> float:
    """c with c⁻¹λⁿQ̂Î ≤ Z_n^{C,M} ≤ cλⁿQ̂Î for depth-1 φ.

    λⁿΠ[i] = u_{i(i)}v_{t(i)} and completing a word moves n∫φdM_n by at most
    2h‖φ‖∞ (h the longest return path), so log c = max|log u_s v_t| + 2h‖φ‖∞.
    """
    if phi.depth != 1:
        raise ValueError("depth-1 potentials only")
    pd = perron_of(system)
    uv = np.log(np.outer(pd.u, pd.v))
    return math.exp(float(np.max(np.abs(uv))) + 2 * system.max_return_length * phi.sup_norm)
