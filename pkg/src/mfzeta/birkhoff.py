"""Spectra of Birkhoff averages by Lagrangian duality.

For depth-1 potentials the constrained suprema

    sup { −h(μ)/∫Λdμ : ∫f⃗ dμ = α }        (spectrum form)
    sup { h(μ) + ∫φ dμ : ∫g⃗ dμ = α }      (pressure form)

over invariant measures equal inf_q t(q) with P(⟨q, f⃗ − α⟩ + tΛ) = 0, resp.
inf_q P(φ + ⟨q, g⃗ − α⟩). Both objectives are convex in q and their partial
derivatives have the sign of the Gibbs means ∫(f_k − α_k)dμ_q, so each
coordinate is minimised by bisecting that sign. The Gibbs state at the
minimiser is an explicit achieving measure and is reported as a cross-check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, linprog

from ._numerics import golden_section
from .errors import PositivityViolation, SignViolation
from .graph import GdSystem, simple_cycles
from .potentials import Potential, RatioMap, builtin_lambda, periodic_sums
from .targets import TargetSet
from .thermo import MarkovMeasure, gibbs_markov, parry, pressure_of_table, random_markov

log = logging.getLogger(__name__)

Q_LIMIT = 256.0      # |q| beyond which the dual is treated as escaping to the boundary
GRAD_TOL = 1e-11


def _tables(potentials: Sequence[Potential]) -> np.ndarray:
    """Stack depth-1 locally constant tables into a (K, E) array."""
    rows = []
    for p in potentials:
        if p.depth != 1 or not p.is_locally_constant:
            raise ValueError("dual machinery takes depth-1 locally constant potentials "
                             "(recode deeper ones with graph.higher_block)")
        rows.append(np.asarray(p.lower, dtype=float))
    return np.array(rows).reshape(len(rows), -1)


# ----------------------------------------------------------------- moments

@dataclass
class MomentSet:
    """Estimated set {∫f⃗ dμ} of attainable moment vectors.

    The convex hull of ``cycle_points`` is the exact closure for depth-1
    potentials (every invariant measure is a limit of mixtures of simple
    cycle measures); Parry and random Markov samples populate the interior.
    """

    parry_point: np.ndarray
    cycle_points: np.ndarray
    sample_points: np.ndarray
    table_lo: np.ndarray
    table_hi: np.ndarray

    @property
    def dim(self) -> int:
        return self.cycle_points.shape[1]

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.parry_point[None, :], self.cycle_points, self.sample_points])

    @property
    def lo(self) -> np.ndarray:
        return self.cycle_points.min(axis=0)

    @property
    def hi(self) -> np.ndarray:
        return self.cycle_points.max(axis=0)

    def contains(self, alpha, tol: float = 1e-12) -> bool:
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if np.any(alpha < self.lo - tol) or np.any(alpha > self.hi + tol):
            return False
        if self.dim == 1:
            return True
        P = self.cycle_points
        k = len(P)
        # min total slack |Pᵀλ − α| subject to λ in the simplex
        c = np.concatenate([np.zeros(k), np.ones(2 * self.dim)])
        a_eq = np.hstack([P.T, np.eye(self.dim), -np.eye(self.dim)])
        a_eq = np.vstack([a_eq, np.concatenate([np.ones(k), np.zeros(2 * self.dim)])])
        b_eq = np.concatenate([alpha, [1.0]])
        res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        return bool(res.status == 0 and res.fun <= tol * (1 + np.abs(alpha).max()))

    def interior_meets(self, target: TargetSet) -> bool:
        """Does the interior of ``target`` meet the attainable set?"""
        if target.whole:
            return True
        for blo, bhi in target.boxes:
            blo, bhi = np.asarray(blo), np.asarray(bhi)
            if np.any(blo >= bhi):
                continue
            if self.dim == 1:
                if blo[0] < self.hi[0] and bhi[0] > self.lo[0]:
                    return True
                continue
            P = self.cycle_points
            k, M = P.shape
            # maximise s: α = Pᵀλ, blo + s ≤ α ≤ bhi − s
            c = np.zeros(k + 1)
            c[-1] = -1.0
            a_ub = np.vstack([np.hstack([-P.T, np.ones((M, 1))]), np.hstack([P.T, np.ones((M, 1))])])
            b_ub = np.concatenate([-blo, bhi])
            a_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
            res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                          bounds=[(0, None)] * k + [(None, None)], method="highs")
            if res.status == 0 and -res.fun > 1e-12:
                return True
        return False


def moment_set(system: GdSystem, potentials: Sequence[Potential], samples: int = 64,
               seed: int = 0) -> MomentSet:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    tab = _tables(potentials)
    cycles = simple_cycles(system)
    cyc = np.array([[tab[k][list(c)].mean() for k in range(len(tab))] for c in cycles])
    pm = parry(system).edge_masses
    rng = np.random.Generator(np.random.Philox(seed))
    pts = []
    for _ in range(samples):
        mu = random_markov(system, rng)
        pts.append(tab @ mu.edge_masses)
    return MomentSet(tab @ pm, cyc, np.array(pts), tab.min(axis=1), tab.max(axis=1))


def ratio_range(U: RatioMap) -> tuple[float, float]:
    """[min, max] of U over invariant measures (extremes sit on simple cycles)."""
    cycles = simple_cycles(U.system)
    vals = []
    for c in cycles:
        row = np.array([c], dtype=np.intp)
        n, _ = periodic_sums(U.numerator, row)
        d, _ = periodic_sums(U.denominator, row)
        vals.append(float(n[0] / d[0]))
    return min(vals), max(vals)


# ----------------------------------------------------------------- dual engine

def _line_root(grad: Callable[[float], float], x0: float) -> tuple[float, bool]:
    """Zero of an increasing function: doubling bracket from x0, then Brent.

    Returns (x, hit_limit); ``hit_limit`` means the sign never changed within
    |x| ≤ Q_LIMIT (the dual escapes to infinity, α on the boundary).
    """
    g0 = grad(x0)
    if g0 == 0.0:
        return x0, False
    direction = -1.0 if g0 > 0 else 1.0
    a, step = x0, 1.0
    while True:
        b = x0 + direction * step
        if abs(b) > Q_LIMIT:
            return math.copysign(Q_LIMIT, direction), True
        gb = grad(b)
        if gb == 0.0:
            return b, False
        if (gb > 0) != (g0 > 0):
            break
        a, step = b, step * 2.0
    lo, hi = (a, b) if a < b else (b, a)
    return brentq(grad, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200), False


def _decreasing_zero(f: Callable[[float], float]) -> float:
    """Root of a strictly decreasing function, bracketed by doubling from 0."""
    f0 = f(0.0)
    if f0 == 0.0:
        return 0.0
    sign = 1.0 if f0 > 0 else -1.0
    a, step = 0.0, 1.0
    for _ in range(80):
        b = sign * step
        fb = f(b)
        if fb == 0.0:
            return b
        if (fb < 0) == (sign > 0):
            return brentq(f, min(a, b), max(a, b), xtol=1e-14, rtol=8.9e-16, maxiter=200)
        a, step = b, step * 2.0
    raise ArithmeticError("no sign change found while bracketing the root")


def _coordinate_descent(K: int, grad: Callable[[np.ndarray], np.ndarray],
                        sweeps: int = 200) -> tuple[np.ndarray, bool]:
    q = np.zeros(K)
    boundary = False
    for _ in range(sweeps):
        g = grad(q)
        if np.max(np.abs(g)) < GRAD_TOL:
            break
        for k in range(K):
            def gk(x, k=k):
                qq = q.copy()
                qq[k] = x
                return grad(qq)[k]
            q[k], hit = _line_root(gk, q[k])
            boundary |= hit
        if K == 1:
            break
    return q, boundary


@dataclass
class DualPoint:
    """Minimiser of the dual with its Gibbs state.

    For the spectrum form ``t`` is the Bowen root of the tilted potential and
    ``gibbs_residual`` is h + ⟨q, ∫(f−α)⟩ + t∫Λ at the Gibbs state.
    """

    q: np.ndarray
    t: float
    gibbs: MarkovMeasure = field(repr=False)
    gibbs_residual: float
    moment_error: float
    boundary: bool = False


def _bowen_table(system: GdSystem, lam: np.ndarray, tilt: np.ndarray) -> float:
    return _decreasing_zero(lambda s: pressure_of_table(system, tilt + s * lam))


def _gibbs_table(system: GdSystem, table: np.ndarray) -> MarkovMeasure:
    return gibbs_markov(system, Potential(system, 1, table))


def spectrum_dual(system: GdSystem, fs: Sequence[Potential], alpha,
                  Lambda: Potential | None = None) -> DualPoint:
    """inf_q t(q) where P(⟨q, f⃗ − α⟩ + t(q)Λ) = 0."""
    lam = _tables([Lambda if Lambda is not None else builtin_lambda(system)])[0]
    if np.max(lam) >= 0:
        raise SignViolation("Λ must be strictly negative")
    G = _tables(fs) - np.atleast_1d(np.asarray(alpha, dtype=float))[:, None]
    cache: dict[bytes, tuple[float, MarkovMeasure]] = {}

    def state(q):
        key = q.tobytes()
        if key not in cache:
            tilt = q @ G
            t = _bowen_table(system, lam, tilt)
            cache[key] = (t, _gibbs_table(system, tilt + t * lam))
        return cache[key]

    def grad(q):
        t, mu = state(q)
        return -(G @ mu.edge_masses) / (lam @ mu.edge_masses)

    q, boundary = _coordinate_descent(len(G), grad)
    t, mu = state(q)
    m = mu.edge_masses
    resid = mu.entropy + q @ (G @ m) + t * (lam @ m)
    return DualPoint(q, t, mu, float(resid), float(np.max(np.abs(G @ m))), boundary)


def pressure_dual(system: GdSystem, phi: Potential, gs: Sequence[Potential], alpha) -> DualPoint:
    """inf_q P(φ + ⟨q, g⃗ − α⟩) = sup{h + ∫φ : ∫g⃗ = α}; ``t`` holds the value."""
    base = _tables([phi])[0]
    G = _tables(gs) - np.atleast_1d(np.asarray(alpha, dtype=float))[:, None]
    cache: dict[bytes, MarkovMeasure] = {}

    def gibbs(q):
        key = q.tobytes()
        if key not in cache:
            cache[key] = _gibbs_table(system, base + q @ G)
        return cache[key]

    def grad(q):
        return G @ gibbs(q).edge_masses

    q, boundary = _coordinate_descent(len(G), grad)
    mu = gibbs(q)
    value = pressure_of_table(system, base + q @ G)
    m = mu.edge_masses
    resid = mu.entropy + base @ m + q @ (G @ m) - value
    return DualPoint(q, value, mu, float(resid), float(np.max(np.abs(G @ m))), boundary)


# ----------------------------------------------------------------- spectra

@dataclass
class SpectrumPoint:
    alpha: object
    value: float
    empty: bool
    dual: DualPoint | None = None
    lower_bound: float | None = None  # −h/∫Λ at the achieving Gibbs state
    note: str = ""

    @property
    def width(self) -> float:
        if self.empty or self.lower_bound is None:
            return 0.0
        return abs(self.value - self.lower_bound)


EMPTY = float("-inf")


def _drop_constant(fs, alpha):
    keep, kept_alpha = [], []
    for f, a in zip(fs, alpha):
        tab = np.asarray(f.lower)
        if np.ptp(tab) == 0.0:
            if abs(tab[0] - a) > 1e-12 * (1 + abs(a)):
                return None, None
            continue
        keep.append(f)
        kept_alpha.append(a)
    return keep, kept_alpha


def birkhoff_spectrum_point(system: GdSystem, fs: Sequence[Potential] | Potential, alpha,
                            Lambda: Potential | None = None,
                            moments: MomentSet | None = None) -> SpectrumPoint:
    """sup{−h(μ)/∫Λdμ : ∫f⃗dμ = α}, or empty when α is not attainable."""
    if isinstance(fs, Potential):
        fs = [fs]
    alpha_vec = [float(a) for a in np.atleast_1d(np.asarray(alpha, dtype=float))]
    if len(alpha_vec) != len(fs):
        raise ValueError("alpha and f have different dimensions")
    keep, kalpha = _drop_constant(fs, alpha_vec)
    if keep is None:
        return SpectrumPoint(alpha, EMPTY, True, note="alpha differs from a constant component")
    lam = Lambda if Lambda is not None else builtin_lambda(system)
    if not keep:
        from .thermo import bowen_root

        return SpectrumPoint(alpha, bowen_root(system, lam), False, note="unconstrained")
    ms = moments if moments is not None and moments.dim == len(keep) else moment_set(system, keep, samples=4)
    if not ms.contains(kalpha):
        log.info("alpha %s outside the moment set", alpha)
        return SpectrumPoint(alpha, EMPTY, True, note="alpha outside moment set")
    dp = spectrum_dual(system, keep, kalpha, lam)
    m = dp.gibbs.edge_masses
    lb = -dp.gibbs.entropy / float(_tables([lam])[0] @ m)
    note = "boundary: dual minimiser escaped" if dp.boundary else ""
    return SpectrumPoint(alpha, dp.t, False, dp, lb, note)


def ratio_spectrum_point(system: GdSystem, f: Potential, g: Potential, alpha: float,
                         Lambda: Potential | None = None) -> SpectrumPoint:
    """sup{−h/∫Λ : ∫f dμ / ∫g dμ = α} through the linear constraint ∫(f − αg) = 0."""
    gt = _tables([g])[0]
    if not (np.all(gt > 0) or np.all(gt < 0)):
        raise SignViolation("g must be strictly positive or strictly negative")
    ft = _tables([f])[0]
    cycles = simple_cycles(system)
    ratios = [ft[list(c)].sum() / gt[list(c)].sum() for c in cycles]
    lo, hi = min(ratios), max(ratios)
    if not lo - 1e-12 <= alpha <= hi + 1e-12:
        return SpectrumPoint(alpha, EMPTY, True, note=f"alpha outside ratio range [{lo}, {hi}]")
    lin = Potential(system, 1, ft - alpha * gt)
    pt = birkhoff_spectrum_point(system, [lin], [0.0], Lambda)
    pt.alpha = alpha
    return pt


@dataclass
class HolderResult:
    value: float
    empty: bool
    nodes: int
    spacing: float
    argmax: np.ndarray | None = None


def holder_spectrum_point(system: GdSystem, fs: Sequence[Potential], gs: Sequence[Potential],
                          s: Sequence[float], t: Sequence[float], alpha: float,
                          grid: int = 33, Lambda: Potential | None = None) -> HolderResult:
    """Lower estimate of sup{−h/∫Λ : ∏(∫f_l)^{s_l} / ∏(∫g_l)^{t_l} = α}.

    The moments of the non-constant potentials live in the convex hull of
    their simple-cycle moments. That hull is parametrised in its own affine
    coordinates (it is often lower dimensional, e.g. when f and g share their
    edges); all but the last coordinate are gridded, the level set is
    located along the last one by a sign scan plus Brent, and every level-set
    node is evaluated with the vector dual.
    """
    if alpha <= 0:
        return HolderResult(EMPTY, True, 0, 0.0)
    pots = list(fs) + list(gs)
    for p in pots:
        if np.min(p.lower) <= 0:
            raise PositivityViolation(f"potential {p.name or p!r} must be positive")
    expo = np.concatenate([np.asarray(s, dtype=float), -np.asarray(t, dtype=float)])
    if np.any(expo[: len(fs)] <= 0) or np.any(expo[len(fs):] >= 0):
        raise PositivityViolation("exponents s and t must be positive")
    tab = _tables(pots)
    const = np.ptp(tab, axis=1) == 0
    free = [k for k in range(len(pots)) if not const[k]]
    logc = float(np.sum(expo[const] * np.log(tab[const, 0]))) if np.any(const) else 0.0
    target = math.log(alpha)
    lam = Lambda if Lambda is not None else builtin_lambda(system)
    if not free:
        if abs(logc - target) <= 1e-12 * (1 + abs(target)):
            from .thermo import bowen_root
            return HolderResult(bowen_root(system, lam), False, 1, 0.0)
        return HolderResult(EMPTY, True, 0, 0.0)
    fpots = [pots[k] for k in free]
    fexp = expo[free]
    ms = moment_set(system, fpots, samples=4)
    P = ms.cycle_points
    centre = P.mean(axis=0)
    _, sv, vt = np.linalg.svd(P - centre, full_matrices=False)
    d = int(np.sum(sv > 1e-10 * max(sv.max(), 1e-300))) if len(sv) else 0

    def level(m):
        return float(fexp @ np.log(m)) + logc - target

    if d == 0:
        if abs(level(centre)) <= 1e-12 * (1 + abs(target)):
            pt = birkhoff_spectrum_point(system, fpots, centre, lam, ms)
            return HolderResult(pt.value, pt.empty, 1, 0.0, centre)
        return HolderResult(EMPTY, True, 0, 0.0)
    basis = vt[:d]
    # turn the hull coordinates so that the scanned (last) axis follows the
    # gradient of the level function; a scan parallel to the level set sees
    # no crossings
    grad_m = fexp / centre
    gd = basis @ grad_m
    if np.linalg.norm(gd) > 0:
        q, _ = np.linalg.qr(np.column_stack([gd, np.eye(d)]))
        basis = np.roll(q.T, -1, axis=0) @ basis
    coords = (P - centre) @ basis.T
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    axes = [np.linspace(lo[j], hi[j], grid) for j in range(d - 1)]
    spacing = max((a[1] - a[0] for a in axes), default=0.0)
    scan = np.linspace(lo[-1], hi[-1], 4 * grid + 1)
    best, arg, nodes = EMPTY, None, 0
    heads = (np.array(np.meshgrid(*axes, indexing="ij")).reshape(d - 1, -1).T if d > 1
             else [np.zeros(0)])
    for head in heads:
        def point(y):
            return centre + np.concatenate([head, [y]]) @ basis

        def F(y):
            m = point(y)
            return level(m) if np.all(m > 0) else math.nan

        vals = np.array([F(y) for y in scan])
        for k in range(len(scan)):
            roots = []
            if vals[k] == 0.0:
                roots.append(scan[k])
            elif k + 1 < len(scan) and np.isfinite(vals[k]) and np.isfinite(vals[k + 1]) \
                    and vals[k] * vals[k + 1] < 0:
                roots.append(brentq(F, scan[k], scan[k + 1], xtol=1e-14, rtol=8.9e-16))
            for y in roots:
                m = point(y)
                nodes += 1
                pt = birkhoff_spectrum_point(system, fpots, m, lam, ms)
                if not pt.empty and pt.value > best:
                    best, arg = pt.value, m
    return HolderResult(best, best == EMPTY, nodes, float(spacing), arg)


@dataclass
class TargetValue:
    value: float
    argmax: object
    empty: bool
    grid_values: list = field(default_factory=list, repr=False)


def target_spectrum(evaluate: Callable[[float], float], C: TargetSet, grid: int = 33,
                    attainable: tuple[float, float] | None = None, polish: bool = True) -> TargetValue:
    """max over α ∈ C of a pointwise spectrum (one-dimensional targets).

    Grids every box of C (clipped to ``attainable`` when given), then
    polishes the best node by golden section between its neighbours.
    """
    if C.dim != 1:
        raise ValueError("target_spectrum grids one-dimensional targets")
    boxes = [(lo[0], hi[0]) for lo, hi in C.boxes] if not C.whole else [attainable or (-10.0, 10.0)]
    best, arg, rows = EMPTY, None, []
    for lo, hi in boxes:
        if attainable is not None:
            lo, hi = max(lo, attainable[0]), min(hi, attainable[1])
            if lo > hi:
                continue
        xs = np.linspace(lo, hi, grid) if hi > lo else np.array([lo])
        vals = [evaluate(float(x)) for x in xs]
        rows.extend(zip(xs, vals))
        i = int(np.argmax(vals))
        if vals[i] == EMPTY:
            continue
        x, v = float(xs[i]), float(vals[i])
        if polish and len(xs) > 2:
            a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
            xp, negv = golden_section(lambda z: -evaluate(z), float(a), float(b), xtol=1e-7)
            if -negv > v:
                x, v = xp, -negv
        if v > best:
            best, arg = v, x
    return TargetValue(best, arg, best == EMPTY, rows)


# ----------------------------------------------------------------- pressure form

def constrained_pressure(system: GdSystem, phi: Potential, gs: Sequence[Potential] | Potential,
                         alpha) -> float:
    """sup{h(μ) + ∫φdμ : ∫g⃗ dμ = α}; −inf when α is not attainable."""
    if isinstance(gs, Potential):
        gs = [gs]
    alpha_vec = [float(a) for a in np.atleast_1d(np.asarray(alpha, dtype=float))]
    keep, kalpha = _drop_constant(gs, alpha_vec)
    if keep is None:
        return EMPTY
    if not keep:
        return pressure_of_table(system, _tables([phi])[0])
    if not moment_set(system, keep, samples=1).contains(kalpha):
        return EMPTY
    return pressure_dual(system, phi, keep, kalpha).t


def ratio_constrained_pressure(system: GdSystem, phi: Potential, U: RatioMap, alpha: float) -> float:
    """sup{h + ∫φ : U(μ) = α}."""
    lo, hi = ratio_range(U)
    if not lo - 1e-12 <= alpha <= hi + 1e-12:
        return EMPTY
    alpha = min(max(alpha, lo), hi)
    g = U.numerator - U.denominator * alpha
    return constrained_pressure(system, phi, [g], 0.0)


def pressure_over_target(system: GdSystem, phi: Potential, U: RatioMap, C: TargetSet) -> float:
    """sup{h + ∫φ : U(μ) ∈ C} for a one-dimensional target.

    α ↦ sup{h + ∫φ : U = α} is unimodal with its peak at the Gibbs state of
    φ, so on each interval the sup is P(φ) when the peak lies inside and
    otherwise sits at the endpoint nearest to it.
    """
    P = pressure_of_table(system, _tables([phi])[0])
    if C.whole:
        return P
    mu = _gibbs_table(system, _tables([phi])[0])
    u_star = mu.mean(U.numerator) / mu.mean(U.denominator)
    lo_att, hi_att = ratio_range(U)
    best = EMPTY
    for blo, bhi in C.boxes:
        a, b = max(blo[0], lo_att), min(bhi[0], hi_att)
        if a > b:
            continue
        if a <= u_star <= b:
            return P
        end = a if u_star < a else b
        best = max(best, ratio_constrained_pressure(system, phi, U, end))
    return best
