"""Randomized building blocks shared by the testers.

Every procedure talks to the hidden distribution only through an
OracleSession, so its cost shows up in the session's query log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from . import kernels
from .constants import DEFAULTS, Constants
from .distcore import Histogram, Pmf, oblivious_partition, project_monotone, tv_distance
from .oracles import Kind, OracleSession


class Tag(str, Enum):
    LOW = "Low"
    HIGH = "High"
    RATIO = "Ratio"


@dataclass(frozen=True)
class CompareOutcome:
    tag: Tag
    rho: float | None = None

    def __post_init__(self):
        if (self.tag is Tag.RATIO) != (self.rho is not None):
            raise ValueError("rho is present exactly when the tag is Ratio")
        if self.rho is not None and not (0 < self.rho < math.inf):
            raise ValueError("rho must be a positive finite number")


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    budget: int

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError(f"estimate {self.value} outside [0, 1]")


def compare_draws(eta: float, K: float, delta: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_cmp * K * math.log(1.0 / delta) / eta**2)


def _classify(count, draws: int, K: float):
    """Vectorized outcome rule on the fraction f of draws landing in Y."""
    f = np.asarray(count, dtype=np.float64) / draws
    high = f >= 1.0 - 1.0 / (4 * K)
    low = f <= 1.0 / (4 * K)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(high | low, np.nan, f / (1.0 - f))
    return high, low, rho


def _outcome(high, low, rho) -> CompareOutcome:
    if high:
        return CompareOutcome(Tag.HIGH)
    if low:
        return CompareOutcome(Tag.LOW)
    return CompareOutcome(Tag.RATIO, float(rho))


def compare(s: OracleSession, X, Y, eta: float, K: float, delta: float,
            c: Constants = DEFAULTS) -> CompareOutcome:
    """Estimate D(Y)/D(X) from conditional draws on X u Y, or flag High/Low."""
    X = sorted({int(v) for v in X})
    Y = sorted({int(v) for v in Y})
    if not X or not Y:
        raise ValueError("X and Y must be nonempty")
    if set(X) & set(Y):
        raise ValueError("X and Y must be disjoint")
    if K < 1:
        raise ValueError("K must be at least 1")
    draws = compare_draws(eta, K, delta, c)
    if len(X) == len(Y) == 1 and not s.allows(Kind.COND) and s.allows(Kind.PAIRCOND):
        out = s.paircond(X[0], Y[0], size=draws)
    else:
        out = s.cond(X + Y, size=draws)
    count = int(np.isin(out, Y).sum())
    high, low, rho = _classify(count, draws, K)
    return _outcome(bool(high), bool(low), rho)


def compare_pairs(s: OracleSession, xs, ys, eta: float, K: float, delta: float,
                  kind: Kind = Kind.COND, c: Constants = DEFAULTS):
    """compare({x},{y}) for many pairs at once; returns (high, low, rho) arrays."""
    draws = compare_draws(eta, K, delta, c)
    counts = s.pair_counts(xs, ys, draws, kind)
    return _classify(counts, draws, K)


def compare_splits(s: OracleSession, lo, mid, hi, eta: float, K: float, delta: float,
                   kind: Kind = Kind.COND, c: Constants = DEFAULTS):
    """compare([lo, mid], (mid, hi]) for many contiguous pairs at once."""
    draws = compare_draws(eta, K, delta, c)
    counts = s.split_counts(lo, mid, hi, draws, kind)
    return _classify(counts, draws, K)


def descent_levels(size: int) -> int:
    return max(1, math.ceil(math.log2(size)))


def descent_draws(size: int, eta: float, delta: float, c: Constants = DEFAULTS) -> int:
    levels = descent_levels(size)
    return math.ceil(c.C_bd * levels * math.log(2 * levels / delta) / (2 * eta**2))


def _point_ratios(s: OracleSession, xs, ys, a: int, b: int, eta: float, delta: float,
                  c: Constants) -> np.ndarray:
    """Binary descent estimates of D(y)/D(x) inside [a, b], many pairs at once.

    Levels above the lowest common ancestor of x and y cancel and are skipped.
    A zero estimate on the x side gives +inf, on the y side 0.
    """
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    draws = descent_draws(b - a + 1, eta, delta, c)
    m = xs.size
    log_ratio = np.zeros(m)
    # one descent state per (pair, side): current node [lo, hi] and the point
    pts = np.concatenate([xs, ys])
    sign = np.concatenate([-np.ones(m), np.ones(m)])
    lo = np.full(2 * m, a, dtype=np.int64)
    hi = np.full(2 * m, b, dtype=np.int64)
    # move both sides down to the lowest common ancestor first (no queries)
    while True:
        mid = (lo + hi) // 2
        same = (lo[:m] < hi[:m]) & ((pts[:m] <= mid[:m]) == (pts[m:] <= mid[m:]))
        same2 = np.concatenate([same, same])
        if not same2.any():
            break
        go_left = pts <= mid
        hi = np.where(same2 & go_left, mid, hi)
        lo = np.where(same2 & ~go_left, mid + 1, lo)
    dead = np.zeros(2 * m, dtype=bool)
    distinct = np.concatenate([xs != ys, xs != ys])
    active = (lo < hi) & distinct
    while active.any():
        idx = np.nonzero(active)[0]
        mid = (lo[idx] + hi[idx]) // 2
        upper = s.split_counts(lo[idx], mid, hi[idx], draws, kind=Kind.INTCOND)
        go_left = pts[idx] <= mid
        hits = np.where(go_left, draws - upper, upper)
        p = hits / draws
        zero = hits == 0
        with np.errstate(divide="ignore"):
            log_ratio_part = sign[idx] * np.log(np.where(zero, 1.0, p))
        np.add.at(log_ratio, idx % m, log_ratio_part)
        dead[idx[zero]] = True
        hi[idx] = np.where(go_left, mid, hi[idx])
        lo[idx] = np.where(go_left, lo[idx], mid + 1)
        active = (lo < hi) & ~dead & distinct
    ratio = np.exp(log_ratio)
    ratio[dead[:m]] = math.inf
    ratio[dead[m:]] = 0.0
    return ratio


def intcond_point_ratio(s: OracleSession, x: int, y: int, interval: tuple[int, int],
                        eta: float, delta: float, c: Constants = DEFAULTS) -> float:
    """Estimate D(y)/D(x) for x, y in an interval using only INTCOND queries."""
    a, b = interval
    if not (a <= x <= b and a <= y <= b):
        raise ValueError("x and y must lie in the interval")
    if x == y:
        return 1.0
    return float(_point_ratios(s, [x], [y], a, b, eta, delta, c)[0])


def _decider_model(s: OracleSession, model: str) -> str:
    model = model.lower()
    if model not in ("cond", "intcond", "samp"):
        raise ValueError(f"decider model must be cond, intcond or samp, not {model!r}")
    return model


def collision_statistic(samples_in_interval, a: int, b: int) -> tuple[int, float]:
    """Sample count and |I| times the collision-rate estimate of ||D_I||^2."""
    srt = np.sort(np.asarray(samples_in_interval, dtype=np.int64))
    counts, pairs = kernels.interval_collisions(srt, [a], [b])
    k = int(counts[0])
    if k < 2:
        return k, math.nan
    return k, (b - a + 1) * float(pairs[0]) / (k * (k - 1) / 2)


def collision_rejects(stat: float, eps: float) -> bool:
    # tv > eps/4 pushes |I| * ||D_I||^2 above 1 + eps^2/4; the l_inf-close case
    # stays below 1 + eps^2/256, so the cut sits in between
    return stat > 1.0 + eps**2 / 8


def near_uniform_decider(s: OracleSession, interval: tuple[int, int], eps: float,
                         delta: float, model: str = "cond", c: Constants = DEFAULTS) -> bool:
    """True (accept) when D_I looks uniform, False (reject) when it looks far.

    Rejects w.h.p. when tv(D_I, U_I) > eps/4 and accepts w.h.p. when every
    point is within eps/(16|I|) of 1/|I|.
    """
    a, b = interval
    width = b - a + 1
    if width == 1:
        return True
    model = _decider_model(s, model)
    if model == "samp":
        k_need = math.ceil(c.C_dcoll * math.sqrt(width) / eps**2 * math.log(2 / delta))
        # SAMP cannot condition: simulate it by drawing rounds until k_need
        # samples land in I; the cap depends on (n, |I|) only
        cap = 16 * k_need * max(1, math.ceil(s.n / width))
        inside = np.empty(0, dtype=np.int64)
        drawn, batch = 0, k_need
        while inside.size < k_need and drawn < cap:
            batch = min(batch, cap - drawn)
            pool = s.samp(size=batch)
            drawn += batch
            inside = np.concatenate([inside, pool[(pool >= a) & (pool <= b)]])
            batch *= 2
        if inside.size < 2:
            return True
        _, stat = collision_statistic(inside, a, b)
        return not collision_rejects(stat, eps)
    pairs = math.ceil(c.C_u / eps)
    if model == "cond":
        xs = s.cond(range(a, b + 1), size=pairs)
    else:
        xs = s.intcond(a, b, size=pairs)
    ys = s.rng.integers(a, b + 1, size=pairs)
    keep = xs != ys
    xs, ys = xs[keep], ys[keep]
    if xs.size == 0:
        return True
    eta = eps / c.eta_div
    sub_delta = delta / (2 * pairs)
    lo_ok, hi_ok = 1.0 - eps / c.window_div, 1.0 + eps / c.window_div
    if model == "cond":
        high, low, rho = compare_pairs(s, xs, ys, eta, 2.0, sub_delta, Kind.COND, c)
        if high.any() or low.any():
            return False
    else:
        rho = _point_ratios(s, xs, ys, a, b, eta, sub_delta, c)
    return bool(np.all((rho >= lo_ok) & (rho <= hi_ok)))


DistancePlugin = Callable[[OracleSession, tuple[int, int], float, float], float]


def whitebox_distance_to_uniform(s: OracleSession, interval: tuple[int, int]) -> float:
    a, b = interval
    w = s.hidden.weights[a - 1:b]
    total = w.sum()
    if total <= 0:
        raise ValueError("interval has zero mass")
    return tv_distance(w / total, np.full(w.size, 1.0 / w.size))


def estimate_dist_to_uniform(s: OracleSession, interval: tuple[int, int], eps: float,
                             delta: float, impl: str | DistancePlugin = "whitebox") -> DistanceEstimate:
    """Distance from D_I to uniform on I, to within eps w.p. 1 - delta.

    The whitebox implementation reads the hidden pmf and spends no queries.
    A callable ``impl(session, interval, eps, delta) -> float`` plugs in any
    other estimator honouring the same contract.
    """
    before = s.log.total
    if impl == "whitebox":
        value = whitebox_distance_to_uniform(s, interval)
    elif callable(impl):
        value = float(impl(s, interval, eps, delta))
    else:
        raise ValueError(f"unknown distance implementation {impl!r}")
    return DistanceEstimate(min(1.0, max(0.0, value)), s.log.total - before)


def estimate_dist_to_flattening_cond(s: OracleSession, alpha: float, eps: float, delta: float,
                                     impl: str | DistancePlugin = "whitebox",
                                     c: Constants = DEFAULTS) -> DistanceEstimate:
    """Average of tv(D_{I_k}, U_{I_k}) over blocks k drawn with probability D(I_k)."""
    before = s.log.total
    part = oblivious_partition(s.n, alpha)
    m = math.ceil(c.C_z / eps**2)
    blocks = part.block_of(s.samp(size=m))
    sub_delta = 1.0 / (10 * m)
    if impl == "whitebox":
        # deterministic and query-free, so one evaluation per distinct block
        uniq, counts = np.unique(blocks, return_counts=True)
        vals = np.array([
            estimate_dist_to_uniform(s, part.interval(int(k)), eps / 2, sub_delta).value
            for k in uniq
        ])
        total = float((vals * counts).sum())
    else:
        total = sum(
            estimate_dist_to_uniform(s, part.interval(int(k)), eps / 2, sub_delta, impl).value
            for k in blocks
        )
    return DistanceEstimate(min(1.0, max(0.0, total / m)), s.log.total - before)


def cumulative_draws(eps: float, delta: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_cd * math.log(2.0 / delta) / eps**2)


def estimate_dist_to_flattening_cumulative(s: OracleSession, alpha: float, eps: float,
                                           delta: float, c: Constants = DEFAULTS) -> DistanceEstimate:
    """Unbiased single-point estimator of tv(D, flatten(D)) from SAMP and CEVAL.

    Each draw: i ~ D locates block I_k; D(I_k) and D(j) for a uniform j in I_k
    cost two CEVAL queries each; the draw contributes (1 - |I_k| D(j)/D(I_k))_+.
    """
    before = s.log.total
    part = oblivious_partition(s.n, alpha)
    m = cumulative_draws(eps, delta, c)
    k = part.block_of(s.samp(size=m))
    left = part.bounds[k - 1]
    right = part.bounds[k]
    block_mass = s.ceval(right) - s.ceval(left)
    j = s.rng.integers(left + 1, right + 1)
    point = s.ceval(j) - s.ceval(j - 1)
    scaled = (right - left) * point / block_mass
    value = float(np.maximum(0.0, 1.0 - scaled).mean())
    return DistanceEstimate(min(1.0, value), s.log.total - before)


def known_eval_points(eps: float, delta: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_id * math.log(1.0 / delta) / eps**2)


def harmonic_proposal(n: int) -> Pmf:
    """P(i) proportional to 1/i; dominates every monotone pmf up to a factor H_n."""
    w = 1.0 / np.arange(1, n + 1)
    return Pmf(w / w.sum())


def estimate_tv_to_known_eval(s: OracleSession, dstar: Pmf | Histogram, eps: float, delta: float,
                              proposal: Pmf | None = None, point_values: str = "eval",
                              c: Constants = DEFAULTS) -> DistanceEstimate:
    """Estimate tv(D, D*) for a fully known D* from point values of D.

    Points are drawn from D* and the estimator averages (1 - D(x)/D*(x))_+.
    With a fixed ``proposal`` the points come from it instead, weighted by
    (D*(x) - D(x))_+ / P(x); the query points then do not depend on D*.
    ``point_values='ceval'`` reads D(x) as a difference of two CEVAL answers.
    """
    before = s.log.total
    star = dstar.to_pmf() if isinstance(dstar, Histogram) else dstar
    if star.n != s.n:
        raise ValueError("D* lives on a different domain")
    m = known_eval_points(eps, delta, c)
    source = star if proposal is None else proposal
    u = s.rng.random(m)
    x = np.minimum(np.searchsorted(source.cdf, u * source.cdf[-1], side="right"), s.n)
    x = np.maximum(x, 1)
    if point_values == "eval":
        dx = s.eval(x)
    elif point_values == "ceval":
        dx = s.ceval(x) - s.ceval(x - 1)
    else:
        raise ValueError("point_values must be 'eval' or 'ceval'")
    sx = star.weights[x - 1]
    if proposal is None:
        z = np.maximum(0.0, 1.0 - dx / sx)
    else:
        z = np.maximum(0.0, sx - dx) / proposal.weights[x - 1]
    value = float(np.clip(z.mean(), 0.0, 1.0))
    return DistanceEstimate(value, s.log.total - before)


def learn_monotone_eval(s: OracleSession, eps: float) -> Histogram:
    """Endpoint-average histogram on the eps-partition, projected onto monotone.

    Non-adaptive: the query points depend on (n, eps) only.
    """
    part = oblivious_partition(s.n, eps)
    starts = part.bounds[:-1] + 1
    ends = part.bounds[1:]
    points = np.unique(np.concatenate([starts, ends]))
    values = dict(zip(points.tolist(), s.eval(points).tolist()))
    dens = np.array([(values[a] + values[b]) / 2 for a, b in zip(starts.tolist(), ends.tolist())])
    return project_monotone(dens * part.sizes, part)
