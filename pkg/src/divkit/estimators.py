"""Monte Carlo and quadrature estimators of f-divergences.

The Monte Carlo engine draws from the first argument (proposal ``r = p``)
and averages ``f(q(x)/p(x))``. Sample indices are cut into fixed-size
chunks; chunk ``i`` gets its own generator seeded from ``(seed, i)``
through a 64-bit mixer, and chunk statistics are merged in index order.
The result is therefore bit-identical for any number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from ._validation import NumericalError, ValidationError, check_count
from .densities import RadialDensity, normal, sample_from
from .generators import FGenerator
from .spd import LocationScaleParam, SpdMatrix, mahalanobis_sq

logger = logging.getLogger(__name__)

METHODS = ("mc", "mc_reduced", "quad_1d", "quad_nd", "closed")
CHUNK_SIZE = 1 << 16
RATIO_FLOOR = 1e-300
LOG_RATIO_FLOOR = math.log(RATIO_FLOOR)
MIN_MC_SAMPLES = 100
MAX_SHARE_LIMIT = 0.1
_MASK64 = 0xFFFFFFFFFFFFFFFF


class NonFiniteSummandError(NumericalError):
    """A Monte Carlo summand was inf or nan; the (f, family) pair is likely not integrable."""

    def __init__(self, message: str, sample=None, value=None):
        super().__init__(message)
        self.sample = sample
        self.value = value


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach its tolerance within the refinement budget."""


@dataclass(frozen=True)
class DivergenceEstimate:
    """A divergence value with its standard error and provenance.

    ``std_error`` is ``sd / sqrt(n)`` for Monte Carlo methods and 0 for
    deterministic ones.
    """

    value: float
    std_error: float
    n_samples: int
    method: str
    seed: int | None = None
    n_clamped: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method tag {self.method!r}")
        if not math.isfinite(self.value):
            raise NumericalError(f"non-finite divergence value {self.value!r}")
        if not (self.std_error >= 0 and math.isfinite(self.std_error)):
            raise NumericalError(f"invalid standard error {self.std_error!r}")

    def format(self) -> str:
        return f"value={self.value!r} std_error={self.std_error!r} method={self.method}"

    def __str__(self) -> str:
        return self.format()


def exact(value: float, method: str = "closed") -> DivergenceEstimate:
    return DivergenceEstimate(float(value), 0.0, 0, method)


# -- deterministic chunked Monte Carlo ---------------------------------------


def mix64(x: int) -> int:
    """SplitMix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def chunk_seed(seed: int, index: int) -> int:
    return mix64(mix64(int(seed) & _MASK64) ^ index)


@dataclass
class _Moments:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0
    clamped: int = 0
    max_abs: float = 0.0
    sum_abs: float = 0.0

    def merge(self, other: "_Moments") -> None:
        if other.n == 0:
            return
        self.max_abs = max(self.max_abs, other.max_abs)
        self.sum_abs += other.sum_abs
        if self.n == 0:
            self.n, self.mean, self.m2, self.clamped = other.n, other.mean, other.m2, other.clamped
            return
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        self.clamped += other.clamped

    @property
    def std_error(self) -> float:
        if self.n < 2:
            return 0.0
        return math.sqrt(max(self.m2, 0.0) / (self.n - 1) / self.n)


# summand(rng, m) -> (values of shape (m,), number of clamped ratios, points of shape (m, d))
Summand = Callable[[np.random.Generator, int], tuple]


def _chunk_sizes(n: int, chunk_size: int) -> list[int]:
    full, rest = divmod(n, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def _run_chunk(summand: Summand, seed: int, index: int, m: int) -> _Moments:
    rng = np.random.default_rng(chunk_seed(seed, index))
    vals, clamped, points = summand(rng, m)
    finite = np.isfinite(vals)
    if not finite.all():
        bad = int(np.argmin(finite))
        x = None if points is None else np.asarray(points[bad]).tolist()
        raise NonFiniteSummandError(
            f"non-finite summand {vals[bad]!r} at sample {x} (chunk {index}); "
            "the divergence is probably infinite for this generator and family",
            sample=x,
            value=float(vals[bad]),
        )
    mean = float(np.mean(vals))
    m2 = float(np.sum((vals - mean) ** 2))
    mag = np.abs(vals)
    return _Moments(m, mean, m2, int(clamped), float(np.max(mag)), float(np.sum(mag)))


def run_chunks(summand: Summand, n: int, seed: int, workers: int = 1, chunk_size: int = CHUNK_SIZE) -> list[_Moments]:
    """Evaluate every chunk; the list is in chunk order whatever ``workers`` is."""
    sizes = _chunk_sizes(n, chunk_size)
    workers = max(1, int(workers or 1))
    if workers == 1 or len(sizes) == 1:
        return [_run_chunk(summand, seed, i, m) for i, m in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda im: _run_chunk(summand, seed, im[0], im[1]), enumerate(sizes)))


def _merge(parts: Iterable[_Moments]) -> _Moments:
    total = _Moments()
    for p in parts:
        total.merge(p)
    return total


def chunked_mean(summand: Summand, n: int, seed: int, method: str, workers: int = 1,
                 chunk_size: int = CHUNK_SIZE) -> DivergenceEstimate:
    n = check_count(n, "n", MIN_MC_SAMPLES)
    m = _merge(run_chunks(summand, n, seed, workers, chunk_size))
    if not math.isfinite(m.mean):
        raise NonFiniteSummandError("Monte Carlo average overflowed")
    if m.clamped:
        logger.info("%d of %d density ratios clamped at %g", m.clamped, n, RATIO_FLOOR)
    return DivergenceEstimate(m.mean, m.std_error, n, method, int(seed), m.clamped)


def apply_generator(gen: FGenerator, log_ratio: np.ndarray) -> tuple[np.ndarray, int]:
    """``f(exp(log_ratio))``; returns (values, n_clamped).

    Generators with a log-space form are evaluated exactly. Others see
    ratios floored at ``1e-300``, and the floored draws are counted.
    """
    vals = gen.at_log(log_ratio, LOG_RATIO_FLOOR)
    if gen.f_log is not None:
        return vals, 0
    return vals, int(np.count_nonzero(log_ratio < LOG_RATIO_FLOOR))


def _pair_summand(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam, p2: LocationScaleParam) -> Summand:
    def summand(rng, m):
        x = sample_from(rd, p1, rng, m)
        vals, clamped = apply_generator(gen, rd.logpdf(p2, x) - rd.logpdf(p1, x))
        return vals, clamped, x

    return summand


def mc_estimate(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam, p2: LocationScaleParam,
                n: int, seed: int, workers: int = 1, *, method: str = "mc") -> DivergenceEstimate:
    """Monte Carlo estimate of ``I_f(p1 : p2)`` from ``n`` draws of ``p1``."""
    if p1.dim != p2.dim or p1.dim != rd.dim:
        raise ValidationError(f"dimension mismatch: density {rd.dim}, parameters {p1.dim} and {p2.dim}")
    return chunked_mean(_pair_summand(gen, rd, p1, p2), n, seed, method, workers)


def convergence_profile(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam, p2: LocationScaleParam,
                        n: int, seed: int, workers: int = 1) -> dict:
    """Running estimates at chunk-prefix doublings, plus a divergence flag.

    The prefixes reuse the same chunks as ``mc_estimate(..., n, seed)``.
    ``max_share`` is the largest single summand over the sum of magnitudes;
    it shrinks like ``1/n`` for well-behaved integrands and stays put when the
    mean is infinite. ``suspect_infinite`` is raised when one draw carries
    more than ``MAX_SHARE_LIMIT`` of the total, or when ``std_error * sqrt(n)``
    keeps climbing over the last three doublings. This is a heuristic: it
    also fires on finite but extremely heavy-tailed summands, whose estimates
    are not trustworthy either.
    """
    n = check_count(n, "n", MIN_MC_SAMPLES)
    parts = run_chunks(_pair_summand(gen, rd, p1, p2), n, seed, workers)
    rows = []
    k = 1
    while True:
        m = _merge(parts[:k])
        rows.append((m.n, m.mean, m.std_error))
        if k >= len(parts):
            break
        k = min(2 * k, len(parts))
    spread = [se * math.sqrt(cnt) for cnt, _, se in rows]
    tail = spread[-4:]
    growing = len(tail) == 4 and all(b > a for a, b in zip(tail, tail[1:])) and tail[-1] > 1.5 * tail[0]
    share = m.max_abs / m.sum_abs if m.sum_abs > 0 else 0.0
    return {"rows": rows, "max_share": share, "suspect_infinite": bool(growing or share > MAX_SHARE_LIMIT)}


# -- dimension reduction -----------------------------------------------------


def reduce_location(p1: LocationScaleParam, p2: LocationScaleParam):
    """Replace a same-scale normal pair by ``(N(0,1), N(Delta,1))``.

    Returns ``(delta_sq, (q1, q2))``; the f-divergence of ``(q1, q2)`` equals
    that of ``(p1, p2)`` for every generator.
    """
    if p1.dim != p2.dim:
        raise ValidationError(f"dimension mismatch: {p1.dim} vs {p2.dim}")
    s1, s2 = p1.scale.entries, p2.scale.entries
    if np.max(np.abs(s1 - s2)) > 1e-10 * max(np.max(np.abs(s1)), 1.0):
        raise ValidationError("location reduction needs equal scale matrices")
    delta_sq = mahalanobis_sq(p1.location, p2.location, p1.scale)
    one = SpdMatrix([[1.0]])
    return delta_sq, (LocationScaleParam([0.0], one), LocationScaleParam([math.sqrt(delta_sq)], one))


def mc_estimate_reduced(gen: FGenerator, p1: LocationScaleParam, p2: LocationScaleParam,
                        n: int, seed: int, workers: int = 1) -> DivergenceEstimate:
    """Monte Carlo on the reduced univariate pair: O(n) instead of O(n d)."""
    _, (q1, q2) = reduce_location(p1, p2)
    return mc_estimate(gen, normal(1), q1, q2, n, seed, workers, method="mc_reduced")


# -- quadrature oracles ------------------------------------------------------

LOG_P_CUTOFF = math.log(1e-300)
TAIL_TOLERANCE = 1e-10


def cutoff_tail_value(logp: Callable[[float], float], value: Callable[[float], float], start: float,
                      step: float) -> float:
    """Integrand value where ``logp`` first drops below the cutoff along ``start + s * step``.

    Doubles ``s`` until ``p`` underflows the cutoff, then bisects to the last
    point still kept. Returns ``inf`` when the integrand is not finite there.
    """
    lo, hi = 0.0, 1.0
    while logp(start + hi * step) >= LOG_P_CUTOFF:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            return 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if logp(start + mid * step) >= LOG_P_CUTOFF:
            lo = mid
        else:
            hi = mid
    with np.errstate(all="ignore"):
        v = abs(value(start + lo * step))
    return v if math.isfinite(v) else math.inf


def check_truncated_tail(tail: float, total: float) -> None:
    if tail > TAIL_TOLERANCE * max(1.0, abs(total)):
        raise QuadratureError(
            f"integrand is still {tail:.3g} where the density underflows; the divergence is infinite or too large"
        )


def quad_fdiv_1d(gen: FGenerator, logp: Callable[[float], float], logq: Callable[[float], float],
                 breakpoints: Sequence[float] = (0.0,), epsabs: float = 1e-10, epsrel: float = 1e-10,
                 limit: int = 400) -> DivergenceEstimate:
    """Adaptive quadrature of ``int p f(q/p)`` over the real line.

    ``logp`` and ``logq`` are log-density callables. The line is split at
    ``breakpoints`` (typically the two locations and their midpoint); points
    where ``p < 1e-300`` contribute nothing.
    """
    def integrand(x):
        lp = logp(x)
        if lp < LOG_P_CUTOFF:
            return 0.0
        return integrand_raw(x, lp)

    def integrand_raw(x, lp=None):
        lp = logp(x) if lp is None else lp
        return math.exp(lp) * float(gen.at_log(logq(x) - lp, LOG_RATIO_FLOOR))

    pts = sorted(set(float(b) for b in breakpoints))
    edges = [-math.inf, *pts, math.inf]
    total, err = 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if a == b:
                continue
            val, e = integrate.quad(integrand, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
            total += val
            err += e
    if not math.isfinite(total) or err > max(1e-7, 1e-6 * abs(total)):
        raise QuadratureError(f"quadrature did not converge (value {total!r}, error estimate {err:.3g})")
    # the cutoff hides divergent tails, so look at the integrand where it starts
    ends = pts or [0.0]
    check_truncated_tail(max(cutoff_tail_value(logp, integrand_raw, ends[0], -1.0),
                             cutoff_tail_value(logp, integrand_raw, ends[-1], 1.0)), total)
    return exact(total, "quad_1d")


def quad_pair_1d(gen: FGenerator, rd: RadialDensity, p1: LocationScaleParam, p2: LocationScaleParam,
                 **kwargs) -> DivergenceEstimate:
    """Quadrature for a pair of univariate family members."""
    if rd.dim != 1 or p1.dim != 1 or p2.dim != 1:
        raise ValidationError("quad_pair_1d needs one-dimensional densities")
    m1, m2 = float(p1.location[0]), float(p2.location[0])
    return quad_fdiv_1d(
        gen,
        lambda x: float(rd.logpdf(p1, np.array([x]))),
        lambda x: float(rd.logpdf(p2, np.array([x]))),
        breakpoints=(m1, 0.5 * (m1 + m2), m2),
        **kwargs,
    )


def quad_location_1d(gen: FGenerator, rd: RadialDensity, t: float, **kwargs) -> DivergenceEstimate:
    """``I_f(p_{0,1} : p_{t,1})`` for the univariate member of ``rd``'s family."""
    rd1 = rd.with_dim(1)
    one = SpdMatrix([[1.0]])
    return quad_pair_1d(gen, rd1, LocationScaleParam([0.0], one), LocationScaleParam([float(t)], one), **kwargs)


# -- runtime comparison ------------------------------------------------------


@dataclass(frozen=True)
class RuntimeRow:
    d: int
    n: int
    seconds_full: float
    seconds_reduced: float

    @property
    def ratio(self) -> float:
        return self.seconds_full / self.seconds_reduced if self.seconds_reduced > 0 else math.inf


RUNTIME_HEADER = ("d", "n", "seconds_full", "seconds_reduced", "ratio")


def _bench_pair(d: int):
    # fixed, well-conditioned scale with Delta^2 = 1
    sigma = np.eye(d) + 0.5 * np.ones((d, d)) / d
    s = SpdMatrix(sigma)
    direction = np.ones(d)
    direction /= math.sqrt(s.quad_form(direction))
    return LocationScaleParam(np.zeros(d), s), LocationScaleParam(direction, s)


def tabulate_runtime(gen: FGenerator, d_list: Sequence[int], n: int, seed: int = 0x5EED,
                     workers: int = 1, repeats: int = 1) -> list[RuntimeRow]:
    """Wall-clock of full ``d``-dimensional Monte Carlo versus the reduced pair.

    Both paths use the same ``n`` and seed. With ``repeats > 1`` the fastest
    run of each path is kept.
    """
    rows = []
    for d in d_list:
        d = check_count(d, "d")
        p1, p2 = _bench_pair(d)
        rd = normal(d)
        full, reduced = math.inf, math.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            mc_estimate(gen, rd, p1, p2, n, seed, workers)
            full = min(full, time.perf_counter() - t0)
            t0 = time.perf_counter()
            mc_estimate_reduced(gen, p1, p2, n, seed, workers)
            reduced = min(reduced, time.perf_counter() - t0)
        rows.append(RuntimeRow(d, n, full, reduced))
    return rows


def runtime_csv(rows: Sequence[RuntimeRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUNTIME_HEADER)
    for r in rows:
        w.writerow([r.d, r.n, repr(r.seconds_full), repr(r.seconds_reduced), repr(r.ratio)])
    return buf.getvalue()
