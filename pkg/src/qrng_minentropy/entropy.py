"""Classical and adversarial min-entropies of a gated pixel array.

The adversary knows the photon number ``n`` of every frame and picks the
status vector ``s`` (pixel ``i`` active with probability ``eta_i``).  Her
best guess has probability

    p_guess = sum_n P_N(n) sum_s P_S(s) max_x P(x | n, s)

and the certified entropy per frame is ``-log2 p_guess``.  With a common
``eta`` the status sum collapses onto the number ``r`` of inactive pixels,
which is Binomial(M, 1 - eta).

Sums over ``n`` (and over ``r`` in the uniform case) are cut to the smallest
interval around the mode whose outside mass is below the policy epsilons.
Each inner maximum is at most one, so the discarded mass bounds the error;
it is reported as ``truncation_bound`` and added to ``p_guess``, which makes
the reported entropy a lower bound.

Near ``p_guess = 1`` the entropy is tiny and ``1 - p_guess`` would be lost to
rounding, so the engine also accumulates the complement ``1 - max_x P``
from exact integers and takes logarithms through ``log1p``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from .combinatorics import LogReal, surjection_table
from .conditional import max_outcome_prob, reduced_prob
from .detector import (
    CalibrationCurve,
    DetectorArrayModel,
    SourceModel,
    all_status_probs,
    bit_probabilities,
    classical_min_entropy,
)
from .errors import ParameterError, ResourceLimitError, TruncationPolicyError

__all__ = [
    "TruncationPolicy",
    "EntropyReport",
    "guessing_probability",
    "conditional_min_entropy",
    "conditional_min_entropy_general",
    "no_source_info_entropy",
    "classical_report",
    "classical_entropy_for",
    "sweep_mu",
    "write_sweep_csv",
    "optimize_mu",
    "photon_interval",
    "status_interval",
    "MODES",
    "GENERAL_MAX_PIXELS",
]

MODES = ("with-photon-info", "no-photon-info", "classical")
GENERAL_MAX_PIXELS = 16
_LN2 = math.log(2.0)
SWEEP_HEADER = "mu_px,eta,h_classical,h_conditional,p_guess,truncation_bound,secure_rate_bps"


@dataclass(frozen=True)
class TruncationPolicy:
    eps_n: float = 1e-15
    eps_s: float = 1e-15
    hard_n_max: int | None = None

    def __post_init__(self) -> None:
        for name in ("eps_n", "eps_s"):
            eps = getattr(self, name)
            if not (0.0 < eps < 1.0):
                raise ParameterError(f"{name} must lie in (0, 1), got {eps}")
        if self.hard_n_max is not None and self.hard_n_max < 0:
            raise ParameterError("hard_n_max must be nonnegative")


@dataclass(frozen=True)
class EntropyReport:
    """Outcome of one entropy evaluation.

    ``secure_rate`` is ``h_conditional * frame_rate``; in ``classical`` mode
    ``h_conditional`` equals ``h_classical`` and the rate is the raw
    generation rate.  ``wall_time`` is excluded from equality so repeated
    evaluations compare equal.
    """

    pixels: int
    mu_px: float
    eta: float
    mode: str
    h_classical: float
    h_conditional: float
    p_guess: float
    truncation_bound: float
    n_range: tuple[int, int]
    r_range: tuple[int, int]
    secure_rate: float
    wall_time: float = field(default=0.0, compare=False)

    def csv_row(self) -> str:
        values = (
            self.mu_px,
            self.eta,
            self.h_classical,
            self.h_conditional,
            self.p_guess,
            self.truncation_bound,
            self.secure_rate,
        )
        return ",".join(f"{v:.17g}" for v in values)


# -- truncation ---------------------------------------------------------------


def _grow_interval(
    logpmf: Callable[[int], float],
    tail: Callable[[int, int], float],
    mode: int,
    lo_min: int,
    hi_max: int | None,
    eps: float,
) -> tuple[int, int, float]:
    """Expand ``[lo, hi]`` from the mode toward the heavier neighbour until the tail is <= eps."""
    lo = hi = mode
    t = tail(lo, hi)
    while t > eps:
        can_lo = lo > lo_min
        can_hi = hi_max is None or hi < hi_max
        if not (can_lo or can_hi):
            break
        if can_lo and (not can_hi or logpmf(lo - 1) >= logpmf(hi + 1)):
            lo -= 1
        else:
            hi += 1
        t = tail(lo, hi)
    return lo, hi, t


def photon_interval(source: SourceModel, policy: TruncationPolicy) -> tuple[int, int, float]:
    """Photon-number window ``(lo, hi, discarded_mass)`` for ``source``."""
    if source.is_fixed:
        return source.n_fixed, source.n_fixed, 0.0
    if source.mu_total == 0:
        return 0, 0, 0.0
    mu = source.mu_total
    lo, hi, t = _grow_interval(
        lambda n: float(stats.poisson.logpmf(n, mu)),
        source.tail_mass,
        source.mode(),
        0,
        None if policy.hard_n_max is None else max(policy.hard_n_max, 0),
        policy.eps_n,
    )
    if t > policy.eps_n:
        raise TruncationPolicyError(
            f"photon tail {t:.3g} exceeds eps_n={policy.eps_n:g} at hard_n_max={policy.hard_n_max}"
        )
    if policy.hard_n_max is not None and source.mode() > policy.hard_n_max:
        raise TruncationPolicyError("hard_n_max lies below the photon-number mode")
    return lo, hi, t


def status_interval(pixels: int, eta: float, eps: float) -> tuple[int, int, float]:
    """Window over the number of inactive pixels, Binomial(M, 1 - eta)."""
    q = 1.0 - eta
    if q == 0.0:
        return 0, 0, 0.0
    if q == 1.0:
        return pixels, pixels, 0.0

    def tail(lo: int, hi: int) -> float:
        below = stats.binom.cdf(lo - 1, pixels, q) if lo > 0 else 0.0
        return float(below + stats.binom.sf(hi, pixels, q))

    mode = min(pixels, int(math.floor((pixels + 1) * q)))
    return _grow_interval(
        lambda r: float(stats.binom.logpmf(r, pixels, q)), tail, mode, 0, pixels, eps
    )


# -- per-photon-number kernels --------------------------------------------------


def _best_counts(n: int, M: int, r_lo: int, r_hi: int, base: np.ndarray | None = None) -> list[int]:
    """``max_k k! {n+r brace k+r}_r`` for every ``r`` in ``[r_lo, r_hi]`` (exact ints)."""
    rows = surjection_table(n, M, r_lo, base)
    width = r_hi - r_lo + 1
    best = rows[0][:width].copy()
    for row in rows[1:]:
        span = min(len(row), width)
        if span <= 0:
            break
        seg = row[:span]
        cur = best[:span]
        # strict comparison keeps the smaller k on ties
        better = np.array([a > b for a, b in zip(seg, cur)], dtype=bool)
        best[:span] = np.where(better, seg, cur)
    return list(best)


def _split(prob_num: int, denom: int) -> tuple[float, float]:
    """log2 of ``p = num/denom`` and of ``1 - p``, both from exact integers."""
    lp = LogReal.from_ratio(prob_num, denom)
    lc = LogReal.from_ratio(denom - prob_num, denom)
    return lp.log2_magnitude, lc.log2_magnitude


def _exp2(x: float) -> float:
    return 2.0**x if x > -1100 else 0.0


def _guess_block(
    ns: Sequence[int],
    M: int,
    r_lo: int,
    r_hi: int,
    log2_pn: dict[int, float],
    log2_wr: np.ndarray,
) -> tuple[list[float], list[float]]:
    """Guess and miss contributions of a contiguous run of photon numbers."""
    p_terms: list[float] = []
    q_terms: list[float] = []
    if not ns:
        return p_terms, q_terms
    rs = np.array(list(range(r_lo, M + 1)), dtype=object)
    powers = np.array([pow(r, ns[0]) for r in range(r_lo, M + 1)], dtype=object)
    for idx, n in enumerate(ns):
        if idx:
            powers = powers * rs
        denom = M**n
        best = _best_counts(n, M, r_lo, r_hi, powers)
        base = log2_pn[n]
        for j, t in enumerate(best):
            lp, lc = _split(t, denom)
            w = base + log2_wr[j]
            p_terms.append(_exp2(w + lp))
            q_terms.append(_exp2(w + lc))
    return p_terms, q_terms


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("QRNG_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ParameterError("threads must be at least 1")
    return threads


def _chunks(lo: int, hi: int, parts: int) -> list[list[int]]:
    ns = list(range(lo, hi + 1))
    size = max(1, math.ceil(len(ns) / parts))
    return [ns[i : i + size] for i in range(0, len(ns), size)]


def _finish(p_terms: list[float], q_terms: list[float], discarded: float) -> tuple[float, float]:
    """``(p_guess, h)`` with discarded mass counted as guessed correctly.

    ``1 - p_guess`` is the exactly rounded sum of miss terms, so ``h`` goes
    through ``log1p`` and stays accurate when ``p_guess`` is close to one.
    """
    miss = math.fsum(q_terms)
    if miss < 0.5:
        return 1.0 - miss, max(-math.log1p(-miss) / _LN2, 0.0)
    p = math.fsum(p_terms) + discarded
    return p, -math.log2(p) if p > 0 else math.inf


def _uniform_guess(
    model: DetectorArrayModel,
    source: SourceModel,
    policy: TruncationPolicy,
    threads: int | None,
    n_range: tuple[int, int] | None = None,
    r_range: tuple[int, int] | None = None,
):
    M = model.pixels
    eta = model.uniform_eta
    if n_range is None:
        n_lo, n_hi, tail_n = photon_interval(source, policy)
    else:
        n_lo, n_hi = n_range
        tail_n = source.tail_mass(n_lo, n_hi)
    if r_range is None:
        r_lo, r_hi, tail_s = status_interval(M, eta, policy.eps_s)
    else:
        r_lo, r_hi = r_range
        q = 1.0 - eta
        below = stats.binom.cdf(r_lo - 1, M, q) if r_lo > 0 else 0.0
        tail_s = float(below + stats.binom.sf(r_hi, M, q)) if 0 < q < 1 else 0.0
    ns = np.arange(n_lo, n_hi + 1)
    log2_pn = dict(zip(ns.tolist(), (source.logpmf(ns) / _LN2).tolist()))
    # degenerate q puts all weight on r = 0 or r = M (logpmf is -inf elsewhere)
    log2_wr = stats.binom.logpmf(np.arange(r_lo, r_hi + 1), M, 1.0 - eta) / _LN2
    nthreads = _resolve_threads(threads)
    blocks = _chunks(n_lo, n_hi, nthreads)
    work = lambda ns_: _guess_block(ns_, M, r_lo, r_hi, log2_pn, log2_wr)
    if nthreads == 1 or len(blocks) == 1:
        results = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(work, blocks))
    # fsum is exactly rounded, so the reduction is independent of blocking
    p_terms = [t for res in results for t in res[0]]
    q_terms = [t for res in results for t in res[1]]
    discarded = tail_n + tail_s - tail_n * tail_s
    p, h = _finish(p_terms, q_terms, discarded)
    return p, h, discarded, (n_lo, n_hi), (r_lo, r_hi)


def guessing_probability(
    model: DetectorArrayModel,
    source: SourceModel,
    policy: TruncationPolicy | None = None,
    threads: int | None = None,
) -> float:
    """Adversary's optimal guessing probability for a common efficiency."""
    policy = policy or TruncationPolicy()
    if not model.is_uniform:
        raise ParameterError("guessing_probability needs a uniform efficiency")
    return _uniform_guess(model, source, policy, threads)[0]


# -- classical entropy -------------------------------------------------------------


def _mu_px(model: DetectorArrayModel, source: SourceModel) -> float:
    if source.is_fixed:
        return source.n_fixed / model.pixels
    return source.mu_total / model.pixels


def classical_entropy_for(model: DetectorArrayModel, source: SourceModel) -> float:
    """Min-entropy of the outcome string with no side information.

    A Poisson source makes pixels independent, each clicking with
    probability ``eta_i (1 - exp(-mu_px))``.  For a fixed photon number the
    string probability depends only on its weight ``k``::

        P(k) = sum_l C(M-k, l-k) eta^l (1-eta)^(M-l) P(k | n, l)

    which needs a common efficiency; otherwise NaN is returned.
    """
    M = model.pixels
    if not source.is_fixed:
        mu_px = _mu_px(model, source)
        total = 0.0
        for eta in model.eta_vector():
            p0, p1 = bit_probabilities(mu_px, float(eta))
            total += classical_min_entropy(p0, p1, 1)
        return total
    if not model.is_uniform:
        return math.nan
    eta = model.uniform_eta
    n = source.n_fixed
    best = 0.0
    for k in range(min(n, M) + 1):
        terms = []
        for ell in range(k, M + 1):
            weight = math.comb(M - k, ell - k) * eta**ell * (1 - eta) ** (M - ell)
            if weight == 0.0:
                continue
            terms.append(weight * reduced_prob(k, n, ell, M))
        best = max(best, math.fsum(terms))
    return -math.log2(best)


def classical_report(model: DetectorArrayModel, source: SourceModel) -> EntropyReport:
    start = time.perf_counter()
    h = classical_entropy_for(model, source)
    return EntropyReport(
        pixels=model.pixels,
        mu_px=_mu_px(model, source),
        eta=model.uniform_eta if model.is_uniform else math.nan,
        mode="classical",
        h_classical=h,
        h_conditional=h,
        p_guess=2.0**-h,
        truncation_bound=0.0,
        n_range=(0, 0),
        r_range=(0, 0),
        secure_rate=h * model.acquisition.frame_rate,
        wall_time=time.perf_counter() - start,
    )


# -- adversarial entropies ------------------------------------------------------------


def _report(model, source, mode, p, h, bound, n_range, r_range, start) -> EntropyReport:
    return EntropyReport(
        pixels=model.pixels,
        mu_px=_mu_px(model, source),
        eta=model.uniform_eta if model.is_uniform else math.nan,
        mode=mode,
        h_classical=classical_entropy_for(model, source),
        h_conditional=h,
        p_guess=p,
        truncation_bound=bound,
        n_range=n_range,
        r_range=r_range,
        secure_rate=h * model.acquisition.frame_rate,
        wall_time=time.perf_counter() - start,
    )


def conditional_min_entropy(
    model: DetectorArrayModel,
    source: SourceModel,
    policy: TruncationPolicy | None = None,
    threads: int | None = None,
) -> EntropyReport:
    """Entropy given photon number and status; binomial fast path for a common efficiency."""
    policy = policy or TruncationPolicy()
    if not model.is_uniform:
        return conditional_min_entropy_general(model, source, policy)
    start = time.perf_counter()
    p, h, bound, n_range, r_range = _uniform_guess(model, source, policy, threads)
    return _report(model, source, "with-photon-info", p, h, bound, n_range, r_range, start)


def _status_weight_distribution(model: DetectorArrayModel) -> np.ndarray:
    """P(l) for l active pixels, summed over all ``2**M`` status vectors."""
    M = model.pixels
    if M > GENERAL_MAX_PIXELS:
        raise ResourceLimitError(
            f"status enumeration limited to M <= {GENERAL_MAX_PIXELS}, got {M}"
        )
    probs = all_status_probs(model)
    weights = np.bitwise_count(np.arange(2**M, dtype=np.int64))
    return np.bincount(weights, weights=probs, minlength=M + 1)


def conditional_min_entropy_general(
    model: DetectorArrayModel,
    source: SourceModel,
    policy: TruncationPolicy | None = None,
) -> EntropyReport:
    """Per-pixel efficiencies: enumerate every status vector, maximise per status weight.

    Uses the explicit alternating-sum kernel rather than the difference
    table, so agreement with :func:`conditional_min_entropy` on uniform
    models checks one route against the other.
    """
    policy = policy or TruncationPolicy()
    start = time.perf_counter()
    M = model.pixels
    p_ell = _status_weight_distribution(model)
    n_lo, n_hi, tail_n = photon_interval(source, policy)
    ns = np.arange(n_lo, n_hi + 1)
    log2_pn = source.logpmf(ns) / _LN2
    p_terms, q_terms = [], []
    for n, lpn in zip(ns.tolist(), log2_pn.tolist()):
        denom = M**n
        for ell in range(M + 1):
            if p_ell[ell] == 0.0:
                continue
            _, frac = max_outcome_prob(n, ell, M, exact=True)
            t = frac.numerator * (denom // frac.denominator)
            lp, lc = _split(t, denom)
            w = lpn + math.log2(p_ell[ell])
            p_terms.append(_exp2(w + lp))
            q_terms.append(_exp2(w + lc))
    p, h = _finish(p_terms, q_terms, tail_n)
    return _report(model, source, "with-photon-info", p, h, tail_n, (n_lo, n_hi), (0, M), start)


def no_source_info_entropy(
    model: DetectorArrayModel,
    source: SourceModel,
    policy: TruncationPolicy | None = None,
) -> EntropyReport:
    """Entropy when the adversary knows the status vector but not the photon number.

    ``2**-H = sum_s P_S(s) max_x sum_n P(x | n, s) P_N(n)``; the maximum is
    taken over click counts ``k`` after averaging over ``n``.
    """
    policy = policy or TruncationPolicy()
    start = time.perf_counter()
    M = model.pixels
    p_ell = _status_weight_distribution(model)
    n_lo, n_hi, tail_n = photon_interval(source, policy)
    ns = np.arange(n_lo, n_hi + 1)
    log2_pn = source.logpmf(ns) / _LN2
    hit = [[[] for _ in range(M + 1)] for _ in range(M + 1)]
    miss = [[[] for _ in range(M + 1)] for _ in range(M + 1)]
    for n, lpn in zip(ns.tolist(), log2_pn.tolist()):
        denom = M**n
        rows = surjection_table(n, M)
        for k in range(M + 1):
            row = rows[k] if k < len(rows) else None
            for ell in range(k, M + 1):
                t = row[M - ell] if row is not None else 0
                lp, lc = _split(t, denom)
                hit[k][ell].append(_exp2(lpn + lp))
                miss[k][ell].append(_exp2(lpn + lc))
    p_terms, q_terms = [], []
    for ell in range(M + 1):
        if p_ell[ell] == 0.0:
            continue
        # discarded photon numbers are credited to every k alike
        avg = [math.fsum(hit[k][ell]) + tail_n for k in range(ell + 1)]
        comp = [math.fsum(miss[k][ell]) for k in range(ell + 1)]
        if max(avg) < 0.5:
            k_star = int(np.argmax(avg))
        else:
            k_star = int(np.argmin(comp))
        p_terms.append(p_ell[ell] * avg[k_star])
        q_terms.append(p_ell[ell] * comp[k_star])
    p = math.fsum(p_terms)
    miss_total = math.fsum(q_terms)
    if miss_total < 0.5:
        h = -math.log1p(-miss_total) / _LN2
        p = 1.0 - miss_total
    else:
        h = -math.log2(p)
    return _report(
        model, source, "no-photon-info", p, max(h, 0.0), tail_n, (n_lo, n_hi), (0, M), start
    )


# -- sweeps and optimisation ---------------------------------------------------------


def _evaluate(model, mu_px, policy, mode, threads) -> EntropyReport:
    source = SourceModel.uniform_illumination(mu_px, model.pixels)
    if mode == "with-photon-info":
        return conditional_min_entropy(model, source, policy, threads)
    if mode == "no-photon-info":
        return no_source_info_entropy(model, source, policy)
    if mode == "classical":
        return classical_report(model, source)
    raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")


def sweep_mu(
    mu_grid: Iterable[float],
    model: DetectorArrayModel,
    policy: TruncationPolicy | None = None,
    calibration: CalibrationCurve | None = None,
    mode: str = "with-photon-info",
    threads: int | None = None,
) -> list[EntropyReport]:
    """One report per grid point, in input order.

    With a calibration curve the efficiency at each point is interpolated
    from it; otherwise the model's efficiency is used throughout.
    """
    policy = policy or TruncationPolicy()
    grid = [float(m) for m in mu_grid]
    if not grid:
        raise ParameterError("mu grid is empty")
    if any(m < 0 or not math.isfinite(m) for m in grid):
        raise ParameterError("mu grid values must be finite and nonnegative")
    if calibration is not None:
        etas = [calibration(m) for m in grid]  # raises before any evaluation
    reports = []
    for i, mu in enumerate(grid):
        point_model = model.with_eta(etas[i]) if calibration is not None else model
        reports.append(_evaluate(point_model, mu, policy, mode, threads))
    return reports


def write_sweep_csv(path: str | Path, reports: Sequence[EntropyReport], comments: Sequence[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(SWEEP_HEADER + "\n")
        for rep in reports:
            fh.write(rep.csv_row() + "\n")


def optimize_mu(
    model: DetectorArrayModel,
    policy: TruncationPolicy | None = None,
    search_range: tuple[float, float] = (0.01, 10.0),
    resolution: float = 0.1,
    calibration: CalibrationCurve | None = None,
    threads: int | None = None,
) -> tuple[float, float]:
    """Grid scan for the mean photon number maximising the secure rate.

    The best cell is rescanned at ten times the resolution over its two
    neighbouring cells.  Ties keep the smaller ``mu``.
    """
    policy = policy or TruncationPolicy()
    lo, hi = map(float, search_range)
    if not (lo <= hi):
        raise ParameterError(f"empty search range [{lo}, {hi}]")
    if lo <= 0:
        raise ParameterError("search range must be positive")
    if resolution <= 0:
        raise ParameterError("resolution must be positive")

    def rate(mu: float) -> float:
        m = model.with_eta(calibration(mu)) if calibration is not None else model
        return _evaluate(m, mu, policy, "with-photon-info", threads).secure_rate

    def scan(a: float, b: float, step: float) -> tuple[float, float]:
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        points = [a + i * step for i in range(count)]
        if points[-1] < b:
            points.append(b)
        best_mu, best_rate = points[0], rate(points[0])
        for mu in points[1:]:
            r = rate(mu)
            if r > best_rate:
                best_mu, best_rate = mu, r
        return best_mu, best_rate

    if lo == hi:
        return lo, rate(lo)
    mu0, rate0 = scan(lo, hi, resolution)
    a = max(lo, mu0 - resolution)
    b = min(hi, mu0 + resolution)
    mu1, rate1 = scan(a, b, resolution / 10.0)
    if rate1 > rate0:
        return mu1, rate1
    return mu0, rate0
