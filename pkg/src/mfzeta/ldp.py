"""Large-deviation harness: Parry sampling, exact and Monte Carlo constraint
probabilities, rate comparisons, Boltzmann reweighting and the variational
checks at finite n.

Constraints are read on M_n, the occupation measure of the periodic
completion of a word, so Π_n = Π ∘ M_n^{-1}.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .birkhoff import EMPTY, pressure_over_target, ratio_range, spectrum_dual
from .errors import DegenerateTarget
from .graph import GdSystem, completion_groups, word_array
from .multifractal import qualifying, restricted_log_sum, sandwich
from .potentials import Potential, RatioMap, birkhoff_bounds
from .targets import TargetSet
from .thermo import MarkovMeasure, gibbs_markov, parry, perron_of

log = logging.getLogger(__name__)

CHUNK = 50_000


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _sampler_tables(mu: MarkovMeasure):
    system = mu.system
    V = system.n_vertices
    width = max(len(o) for o in system.out_edges)
    cum = np.full((V, width), 2.0)
    ids = np.zeros((V, width), dtype=np.intp)
    for v, out in enumerate(system.out_edges):
        cum[v, : len(out)] = np.cumsum(mu.transitions[list(out)])
        cum[v, len(out) - 1] = 1.0
        ids[v, : len(out)] = out
        ids[v, len(out):] = out[-1]
    stat_cum = np.cumsum(mu.stationary)
    stat_cum[-1] = 1.0
    return cum, ids, stat_cum


def _walk(mu: MarkovMeasure, n: int, count: int, rng: np.random.Generator):
    """Yield the edge array of each step of ``count`` independent chains."""
    cum, ids, stat_cum = _sampler_tables(mu)
    width = cum.shape[1]
    v = np.searchsorted(stat_cum, rng.random(count), side="right")
    for _ in range(n):
        u = rng.random(count)
        j = np.zeros(count, dtype=np.intp)
        for c in range(width - 1):
            j += u >= cum[v, c]
        e = ids[v, j]
        yield e
        v = mu.system.dst[e]


def sample_markov(mu: MarkovMeasure, n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` words of length n drawn from a Markov measure, shape (count, n)."""
    out = np.empty((count, n), dtype=np.intp)
    for k, e in enumerate(_walk(mu, n, count, rng)):
        out[:, k] = e
    return out


def sample_parry(system: GdSystem, n: int, count: int, seed: int = 0) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be >= 1")
    return sample_markov(parry(system), n, count, _rng(seed))


# ------------------------------------------------------------ exact probabilities

def _log_parry_weights(system: GdSystem, words: np.ndarray) -> np.ndarray:
    pm = parry(system)
    return np.log(pm.stationary[system.src[words[:, 0]]]) + np.log(pm.transitions)[words].sum(axis=1)


def _completion_mask(U: RatioMap, C: TargetSet, words: np.ndarray) -> np.ndarray:
    return qualifying(U, C, words, "M")


def _count_form(U: RatioMap):
    """(a, b, c, chosen) when U's numerator is a·1[chosen] + b and its
    denominator the constant c; None otherwise."""
    if not U.is_depth_one:
        return None
    den = np.asarray(U.denominator.lower)
    if np.ptp(den) != 0.0:
        return None
    num = np.asarray(U.numerator.lower)
    vals = np.unique(num)
    if len(vals) > 2:
        return None
    b = float(vals[0])
    a = float(vals[-1] - vals[0])
    chosen = num != vals[0] if len(vals) == 2 else np.zeros(len(num), dtype=bool)
    return a, b, float(den[0]), chosen


def _count_dp(mu: MarkovMeasure, chosen: np.ndarray, n: int) -> np.ndarray:
    """log P(start s, end t, k chosen edges) for words of length n under μ,
    shape (V, V, n+1)."""
    system = mu.system
    V = system.n_vertices
    with np.errstate(divide="ignore"):
        logpi = np.log(mu.transitions)
        logstat = np.log(mu.stationary)
    cur = np.full((V, V, n + 1), -np.inf)
    for s in range(V):
        cur[s, s, 0] = logstat[s]
    for _ in range(n):
        nxt = np.full_like(cur, -np.inf)
        for e in range(system.n_edges):
            i, j = system.src[e], system.dst[e]
            shift = 1 if chosen[e] else 0
            src = cur[:, i, : n + 1 - shift] + logpi[e]
            dst = nxt[:, j, shift:]
            nxt[:, j, shift:] = np.logaddexp(dst, src)
        cur = nxt
    return cur


def _dp_log_probability(U: RatioMap, C: TargetSet, n: int, mu: MarkovMeasure | None = None) -> float:
    form = _count_form(U)
    system = U.system
    mu = mu if mu is not None else parry(system)
    a, b, c, chosen = form
    table = _count_dp(mu, chosen, n)
    k = np.arange(n + 1)
    terms = []
    for s in range(system.n_vertices):
        for t in range(system.n_vertices):
            hat = list(system.return_path(t, s))
            L = n + len(hat)
            khat = int(chosen[hat].sum()) if hat else 0
            vals = (a * (k + khat) + b * L) / (c * L)
            ok = C.contains_interval(vals, vals)
            row = table[s, t][ok]
            if row.size:
                terms.append(logsumexp(row))
    return float(logsumexp(terms)) if terms else EMPTY


def exact_log_probability(system: GdSystem, U: RatioMap, C: TargetSet, n: int,
                          method: str = "auto", cap: int | None = None) -> float:
    """log Π{i ∈ Σ^n : U(M_n i) ∈ C}.

    ``method="dp"`` runs a dynamic programme over (start vertex, current
    vertex, count of marked edges), available when U is a function of edge
    counts; ``"enumerate"`` sums Π over all words.
    """
    if C.whole:
        return 0.0
    if method == "auto":
        method = "dp" if _count_form(U) is not None else "enumerate"
    if method == "dp":
        if _count_form(U) is None:
            raise ValueError("count DP needs U = mean of an edge-count observable")
        return _dp_log_probability(U, C, n)
    words = word_array(system, n, cap)
    mask = _completion_mask(U, C, words)
    if not mask.any():
        return EMPTY
    return float(logsumexp(_log_parry_weights(system, words[mask])))


def exact_constraint_probability(system: GdSystem, U: RatioMap, C: TargetSet, n: int,
                                 method: str = "enumerate", cap: int | None = None) -> float:
    lp = exact_log_probability(system, U, C, n, method, cap)
    return 0.0 if lp == EMPTY else math.exp(lp)


# ------------------------------------------------------------ Monte Carlo

@dataclass
class MonteCarlo:
    probability: float
    log_probability: float
    std_error: float
    samples: int
    tilted: bool


def _tilt(system: GdSystem, U: RatioMap, C: TargetSet) -> MarkovMeasure:
    """Gibbs state with U = the point of C closest to the Parry value.

    Under Π the event U ∈ C is dominated by that point, so sampling from
    the matching Gibbs state and reweighting keeps the variance bounded.
    """
    pm = parry(system)
    u0 = pm.mean(U.numerator) / pm.mean(U.denominator)
    lo_att, hi_att = ratio_range(U)
    best, target = math.inf, None
    for (blo,), (bhi,) in C.boxes:
        a, b = max(blo, lo_att), min(bhi, hi_att)
        if a > b:
            continue
        p = min(max(u0, a), b)
        if abs(p - u0) < best:
            best, target = abs(p - u0), p
    if target is None or best == 0.0:
        return pm
    g = U.numerator - U.denominator * target
    zero = Potential.constant(system, 0.0)
    from .birkhoff import pressure_dual

    dp = pressure_dual(system, zero, [g], 0.0)
    return dp.gibbs


def monte_carlo_probability(system: GdSystem, U: RatioMap, C: TargetSet, n: int, samples: int,
                            seed: int = 0, tilted: bool = True, threads: int = 1) -> MonteCarlo:
    """Estimate Π(U(M_n) ∈ C) by sampling, optionally from a tilted Gibbs
    state with likelihood-ratio weights. Chunks use independent Philox
    substreams, so the estimate does not depend on ``threads``."""
    if not U.is_depth_one:
        raise ValueError("Monte Carlo path supports depth-1 U")
    pm = parry(system)
    q = _tilt(system, U, C) if tilted else pm
    with np.errstate(divide="ignore"):
        llr_edge = np.log(pm.transitions) - np.log(q.transitions)
        llr_start = np.log(pm.stationary) - np.log(q.stationary)
    num = np.asarray(U.numerator.lower)
    den = np.asarray(U.denominator.lower)
    V = system.n_vertices
    hat_num = np.zeros((V, V))
    hat_den = np.zeros((V, V))
    for s in range(V):
        for t in range(V):
            h = list(system.return_path(t, s))
            hat_num[t, s] = num[h].sum() if h else 0.0
            hat_den[t, s] = den[h].sum() if h else 0.0

    sizes = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        size, ss = args
        rng = np.random.Generator(np.random.Philox(ss))
        llr = np.zeros(size)
        nsum = np.zeros(size)
        dsum = np.zeros(size)
        for k, e in enumerate(_walk(q, n, size, rng)):
            if k == 0:
                s0 = system.src[e]
            llr += llr_edge[e]
            nsum += num[e]
            dsum += den[e]
        t1 = system.dst[e]
        llr += llr_start[s0]
        u = (nsum + hat_num[t1, s0]) / (dsum + hat_den[t1, s0])
        hit = C.contains_interval(u, u)
        w = np.where(hit, np.exp(llr), 0.0)
        return w.sum(), (w * w).sum()

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(run, zip(sizes, streams)))
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    se = math.sqrt(var / samples)
    return MonteCarlo(mean, math.log(mean) if mean > 0 else EMPTY, se, samples, q is not pm)


# ------------------------------------------------------------ rate checks

@dataclass
class RateReport:
    ladder: list[int]
    values: list[float]
    reference: float
    errors: list[float]
    tolerance: float
    verdict: str
    method: list[str] = field(default_factory=list)
    extrapolant: float | None = None

    def to_json(self) -> dict:
        return {"ladder": self.ladder, "values": self.values, "reference": self.reference,
                "errors": self.errors, "tolerance": self.tolerance, "verdict": self.verdict,
                "method": self.method, "extrapolant": self.extrapolant}


def rate_reference(system: GdSystem, U: RatioMap, C: TargetSet) -> float:
    """inf{log λ − h(μ) : U(μ) ∈ C} from the dual machinery."""
    loglam = math.log(perron_of(system).lam)
    best = pressure_over_target(system, Potential.constant(system, 0.0), U, C)
    return math.inf if best == EMPTY else loglam - best


def _decreasing_after(errors: list[float], skip: int = 2) -> bool:
    tail = errors[skip - 1:] if len(errors) > skip else errors
    return all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))


def rate_check(system: GdSystem, U: RatioMap, C: TargetSet, ladder, tolerance: float | None = None,
               samples: int = 10**5, seed: int = 0, threads: int = 1) -> RateReport:
    """Compare (−1/n) log Π(U M_n ∈ C) along ``ladder`` with the rate reference.

    Rungs use the count DP when U is an edge-count mean, enumeration for
    n ≤ 20, and tilted Monte Carlo otherwise.
    """
    ladder = [int(n) for n in ladder]
    ref = rate_reference(system, U, C)
    values, methods = [], []
    for n in ladder:
        if _count_form(U) is not None:
            lp, m = exact_log_probability(system, U, C, n, "dp"), "dp"
        elif n <= 20:
            lp, m = exact_log_probability(system, U, C, n, "enumerate"), "enumerate"
        else:
            lp, m = monte_carlo_probability(system, U, C, n, samples, seed, True, threads).log_probability, "mc"
        values.append(-lp / n if lp != EMPTY else math.inf)
        methods.append(m)
    errors = [abs(v - ref) for v in values]
    tol = tolerance if tolerance is not None else max(0.02, 5.0 / ladder[-1])
    ok = errors[-1] <= tol and _decreasing_after(errors)
    return RateReport(ladder, values, ref, errors, tol, "PASS" if ok else "FAIL", methods, values[-1])


# ------------------------------------------------------------ Boltzmann

@dataclass
class BoltzmannEmpirical:
    n: int
    log_I: float           # log Î_n
    Q: float               # Q̂_n ∈ [0, 1]
    log_QI: float          # log(Q̂_n Î_n), −inf when Q̂ = 0

    @property
    def I(self) -> float:
        return math.exp(self.log_I)


def boltzmann_empirical(system: GdSystem, phi: Potential, U: RatioMap | None, C: TargetSet, n: int,
                        cap: int | None = None) -> BoltzmannEmpirical:
    """Î_n = Σ_i Π[i] exp(n∫φ dM_n(i)) and Q̂_n, the share of Î_n carried by
    words with U(M_n i) ∈ C (exact enumeration)."""
    if phi.depth != 1:
        raise ValueError("depth-1 potentials only")
    words = word_array(system, n, cap)
    logw = _log_parry_weights(system, words)
    expo = np.empty(len(words))
    for rows, cycles in completion_groups(system, words):
        lo, _ = birkhoff_bounds(phi, cycles)
        expo[rows] = n * lo / cycles.shape[1]
    terms = logw + expo
    log_I = float(logsumexp(terms))
    mask = qualifying(U, C, words, "M") if U is not None else np.ones(len(words), dtype=bool)
    log_QI = float(logsumexp(terms[mask])) if mask.any() else EMPTY
    Q = math.exp(log_QI - log_I) if mask.any() else 0.0
    return BoltzmannEmpirical(n, log_I, min(Q, 1.0), log_QI)


# ------------------------------------------------------------ variational check

@dataclass
class VariationalReport:
    ladder: list[int]
    radii: list[float]
    reference: float
    values: dict = field(default_factory=dict)   # (source, r) -> list of (1/n) log Z_n
    sandwich_ok: bool = True
    fixed_target: str = "ok"
    errors: list[float] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "PASS" if self.sandwich_ok else "FAIL"


def variational_check(system: GdSystem, phi: Potential, U: RatioMap, C: TargetSet, ladder,
                      radii=(0.0,)) -> VariationalReport:
    """(1/n) log Z_n over C and B(C, r), read through L_n and M_n, against
    sup{h + ∫φ : U(μ) ∈ C}; sandwich orderings are checked at each n."""
    ladder = [int(n) for n in ladder]
    radii = [float(r) for r in radii]
    ref = pressure_over_target(system, phi, U, C)
    rep = VariationalReport(ladder, radii, ref)
    if not C.whole:
        lo, hi = ratio_range(U)
        (blo,), (bhi,) = C.boxes[0]
        if not (blo < bhi and blo < hi and bhi > lo):
            rep.fixed_target = DegenerateTarget.__name__
    for source in ("L", "M"):
        for r in radii:
            T = C.inflate(r) if r > 0 else C
            rep.values[(source, r)] = [restricted_log_sum(system, phi, T, U, n, source) / n for n in ladder]
    for n in ladder:
        if not sandwich(system, phi, C, U, n).holds:
            rep.sandwich_ok = False
    best = rep.values[("L", radii[0])]
    rep.errors = [abs(v - ref) if math.isfinite(v) and math.isfinite(ref) else math.inf for v in best]
    return rep
