"""Monotonicity testers, one per access model, plus their query envelopes.

Every tester takes an OracleSession restricted to its model and returns a
Verdict. Constants come from ``constants.Constants`` and can be overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .constants import DEFAULTS, Constants
from .distcore import (
    Histogram,
    IntervalPartition,
    distance_to_monotone_flat,
    oblivious_partition,
    project_monotone,
)
from .oracles import MODELS, Kind, OracleSession, QueryLog, ZeroMassError
from .subroutines import (
    DistancePlugin,
    collision_rejects,
    compare_draws,
    compare_pairs,
    compare_splits,
    cumulative_draws,
    descent_draws,
    descent_levels,
    estimate_dist_to_flattening_cond,
    estimate_dist_to_flattening_cumulative,
    estimate_tv_to_known_eval,
    harmonic_proposal,
    known_eval_points,
    near_uniform_decider,
)

ACCEPT = "accept"
REJECT = "reject"


@dataclass
class Verdict:
    decision: str
    log: QueryLog
    step: str | None = None  # name of the rejecting step
    trace: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.decision not in (ACCEPT, REJECT):
            raise ValueError(f"decision must be accept or reject, not {self.decision!r}")
        if any(v < 0 for v in self.log.as_dict().values()):
            raise ValueError("negative query count")

    @property
    def accepted(self) -> bool:
        return self.decision == ACCEPT

    def to_json(self) -> dict:
        return {"decision": self.decision, "queries": self.log.as_dict(), "step": self.step}


@dataclass(frozen=True)
class ToleranceParams:
    eps1: float
    eps2: float
    gamma: float

    def __post_init__(self):
        if not (0 <= self.eps1 < self.eps2 <= 1):
            raise ValueError("need 0 <= eps1 < eps2 <= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.eps2 <= (3 + self.gamma) * self.eps1:
            raise ValueError(f"need eps2 > (3 + gamma) * eps1, got {self.eps2} <= "
                             f"{(3 + self.gamma) * self.eps1}")
        if self.gamma2 <= self.gamma1:
            raise ValueError("closeness thresholds collapse: gamma2 <= gamma1")

    @property
    def alpha(self) -> float:
        return self.gamma / (6 * (3 + self.gamma))

    @property
    def gamma1(self) -> float:
        return 2 * self.eps1 + 2 * self.alpha * self.eps2

    @property
    def gamma2(self) -> float:
        return (1 - self.alpha) * self.eps2 - self.eps1


class _Run:
    """Measures one tester run on a session and builds its Verdict."""

    def __init__(self, s: OracleSession, model: str):
        extra = s.policy - MODELS[model]
        if extra and s.policy != MODELS["all"]:
            raise ValueError(f"session allows {sorted(k.value for k in extra)} beyond {model}")
        self.s = s
        self.start = s.log.snapshot()
        self.trace: dict = {}

    def done(self, decision: str, step: str | None = None) -> Verdict:
        return Verdict(decision, self.s.log - self.start, step if decision == REJECT else None,
                       self.trace)


def _check_eps(eps: float) -> None:
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")


def _log2n(n: int) -> float:
    return max(1.0, math.log2(n))


def max_splits(n: int, eps: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_s * _log2n(n) ** 2 / eps)


def reference_samples(n: int, eps: float, c: Constants = DEFAULTS) -> int:
    lmax = max_splits(n, eps, c)
    return math.ceil(c.C_h * (lmax / eps) * math.log(max(lmax, 2)))


def leaf_samples(n: int, eps: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_T * _log2n(n) ** 4 / eps**2)


def _leaf_histogram(leaves: list[tuple[int, int]], samples: np.ndarray, n: int) -> Histogram:
    leaves = sorted(leaves)
    bounds = [0] + [b for _, b in leaves]
    part = IntervalPartition(bounds)
    counts = np.bincount(part.block_of(samples) - 1, minlength=part.ell)
    return Histogram(part, counts / counts.sum())


def _bisect(n: int, lmax: int, test: Callable[[int, int], str]):
    """Breadth-first bisection of [1, n].

    ``test(a, b)`` answers "leaf" or "split". Returns (leaves, nodes) or
    (None, nodes) once more than ``lmax`` intervals needed a test.
    """
    queue = [(1, n)]
    leaves = []
    nodes = 0
    while queue:
        nxt = []
        for a, b in queue:
            verdict = test(a, b)
            if verdict == "leaf":
                leaves.append((a, b))
                continue
            nodes += 1
            if nodes > lmax:
                return None, nodes
            mid = (a + b) // 2
            nxt += [(a, mid), (mid + 1, b)]
        queue = nxt
    return leaves, nodes


def _flat_check(run: _Run, leaves, eps: float, c: Constants) -> Verdict:
    s = run.s
    T = leaf_samples(s.n, eps, c)
    hat = _leaf_histogram(leaves, s.samp(size=T), s.n)
    dist = distance_to_monotone_flat(hat)
    run.trace.update(leaves=len(leaves), flat_distance=dist)
    return run.done(REJECT if dist > eps / 2 else ACCEPT, "flat-check")


def samp_pool_size(n: int, eps: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_samp * math.sqrt(n) * _log2n(n) / eps**2)


def collision_minimum(width: int, eps: float, c: Constants = DEFAULTS) -> int:
    return max(2, math.ceil(c.C_coll * math.sqrt(width) / eps**2))


def test_monotone_samp(s: OracleSession, eps: float, c: Constants = DEFAULTS) -> Verdict:
    """Sample-only baseline: bisection with collision uniformity checks.

    One pool of samples serves every interval. An interval holding too few
    pool samples to run the collision check is light and becomes a leaf.
    """
    _check_eps(eps)
    run = _Run(s, "samp")
    n = s.n
    lmax = max_splits(n, eps, c)
    pool = np.sort(s.samp(size=samp_pool_size(n, eps, c)))

    def test(a, b):
        if a == b:
            return "leaf"
        counts, pairs = kernels.interval_collisions(pool, [a], [b])
        k = int(counts[0])
        if k < collision_minimum(b - a + 1, eps, c):
            return "leaf"
        stat = (b - a + 1) * float(pairs[0]) / (k * (k - 1) / 2)
        return "split" if collision_rejects(stat, eps) else "leaf"

    leaves, nodes = _bisect(n, lmax, test)
    run.trace["nodes"] = nodes
    if leaves is None:
        return run.done(REJECT, "too-many-splits")
    return _flat_check(run, leaves, eps, c)


def _test_bisection_conditional(s: OracleSession, eps: float, model: str,
                                c: Constants) -> Verdict:
    _check_eps(eps)
    run = _Run(s, model)
    n = s.n
    lmax = max_splits(n, eps, c)
    refs = np.sort(s.samp(size=reference_samples(n, eps, c)))
    delta = 1.0 / (10 * lmax)

    def test(a, b):
        lo, hi = np.searchsorted(refs, [a, b + 1])
        if hi == lo:
            return "leaf"  # light: no reference sample inside
        try:
            ok = near_uniform_decider(s, (a, b), eps, delta, model, c)
        except ZeroMassError:
            return "split"
        return "leaf" if ok else "split"

    leaves, nodes = _bisect(n, lmax, test)
    run.trace["nodes"] = nodes
    if leaves is None:
        return run.done(REJECT, "too-many-splits")
    return _flat_check(run, leaves, eps, c)


def test_monotone_intcond(s: OracleSession, eps: float, c: Constants = DEFAULTS) -> Verdict:
    """Bisection tester with interval-conditional near-uniformity checks."""
    return _test_bisection_conditional(s, eps, "intcond", c)


def test_monotone_cond_polylog(s: OracleSession, eps: float, c: Constants = DEFAULTS) -> Verdict:
    """Bisection tester with general conditional near-uniformity checks."""
    return _test_bisection_conditional(s, eps, "cond", c)


def witness_slack(eps: float, alpha: float, c: Constants = DEFAULTS) -> float:
    return c.C_tau * eps * alpha**2


def expprop_accuracy(tau: float, max_ratio: float) -> float:
    # a tau-witness must still read above (1 + eta) * ratio after (1 - eta) shrinkage
    return tau / (2 * (2 * max_ratio + tau))


def expprop_samples(eps: float, alpha: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_e / (eps * alpha))


def _expprop_core(run: _Run, blocks: np.ndarray, counts_fn, alpha: float, eps: float,
                  ratios: np.ndarray, c: Constants) -> Verdict | None:
    """Shared loop: for each sampled index k >= 2, compare k-1 against k."""
    tau = witness_slack(eps, alpha, c)
    max_ratio = float(max(ratios.max(initial=1.0), 1 + alpha))
    eta = expprop_accuracy(tau, max_ratio)
    m = blocks.size
    ks = blocks[blocks >= 2]
    run.trace.update(tau=tau, eta=eta, compares=int(ks.size))
    if ks.size == 0:
        return None
    try:
        high, _, rho = counts_fn(ks, eta, 1.0 / (10 * m))
    except ZeroMassError:
        return run.done(REJECT, "expprop")
    bound = (1 + eta) * ratios[ks - 2]
    if np.any(high) or np.any(rho > bound):
        return run.done(REJECT, "expprop")
    return None


def test_exponential_property(s: OracleSession, alpha: float, eps: float,
                              ratios=None, c: Constants = DEFAULTS) -> Verdict:
    """Pair-conditional test that a pmf on [ell] satisfies Q(k+1) <= r_k Q(k).

    ``ratios`` gives the per-step bounds r_k (ell - 1 of them); the default is
    the constant 1 + alpha.
    """
    _check_eps(eps)
    run = _Run(s, "paircond")
    ell = s.n
    r = np.full(max(ell - 1, 0), 1 + alpha) if ratios is None else np.asarray(ratios, float)
    if r.size != max(ell - 1, 0):
        raise ValueError("need one ratio bound per consecutive pair")
    blocks = s.samp(size=expprop_samples(eps, alpha, c))

    def counts(ks, eta, delta):
        return compare_pairs(s, ks - 1, ks, eta, 2.0, delta, Kind.PAIRCOND, c)

    out = _expprop_core(run, blocks, counts, alpha, eps, r, c)
    return out if out is not None else run.done(ACCEPT)


def test_monotone_cond_polyeps(s: OracleSession, eps: float, c: Constants = DEFAULTS,
                               dist_impl: str | DistancePlugin = "whitebox") -> Verdict:
    """Reduce to the block-mass distribution, test its exponential property,
    then check that D is close to its own flattening.
    """
    _check_eps(eps)
    run = _Run(s, "cond")
    alpha = eps / 4
    part = oblivious_partition(s.n, alpha)
    bounds = part.bounds
    blocks = part.block_of(s.samp(size=expprop_samples(eps, alpha, c)))

    def counts(ks, eta, delta):
        # a pair {k-1, k} of blocks is a COND query on their union
        return compare_splits(s, bounds[ks - 2] + 1, bounds[ks - 1], bounds[ks],
                              eta, 2.0, delta, Kind.COND, c)

    out = _expprop_core(run, blocks, counts, alpha, eps, part.size_ratios(), c)
    if out is not None:
        return out
    est = estimate_dist_to_flattening_cond(s, alpha, eps / 8, 0.1, dist_impl, c)
    run.trace["flattening_estimate"] = est.value
    if est.value > eps / 4 + eps / 8:
        return run.done(REJECT, "flattening")
    return run.done(ACCEPT)


def eval_points(eps: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_ev * math.log(6.0) / (eps / 4) ** 2)


def test_monotone_eval(s: OracleSession, eps: float, c: Constants = DEFAULTS) -> Verdict:
    """Learn from block endpoints, check the learned histogram, then estimate
    its distance to D.

    All queries are fixed before any answer is read: the endpoints depend on
    (n, eps) only and the estimation points come from a harmonic proposal that
    dominates every monotone histogram, so the transcript never depends on D.
    """
    _check_eps(eps)
    run = _Run(s, "eval")
    alpha = eps / 4
    part = oblivious_partition(s.n, alpha)
    starts = part.bounds[:-1] + 1
    ends = part.bounds[1:]
    points = np.unique(np.concatenate([starts, ends]))
    vals = s.eval(points)
    lookup = dict(zip(points.tolist(), vals.tolist()))

    proposal = harmonic_proposal(s.n)
    m = eval_points(eps, c)
    u = s.rng.random(m)
    xs = np.clip(np.searchsorted(proposal.cdf, u, side="right"), 1, s.n)
    dx = s.eval(xs)

    raw = np.array([(lookup[a] + lookup[b]) / 2 for a, b in zip(starts.tolist(), ends.tolist())])
    raw = raw * part.sizes
    run.trace["endpoint_mass"] = float(raw.sum())
    if raw.sum() <= 0:
        return run.done(REJECT, "learned-far")
    hat = project_monotone(raw, part)
    # offline check: the endpoint histogram itself must be near monotone
    raw_hist = Histogram(part, raw / raw.sum())
    dist = distance_to_monotone_flat(raw_hist)
    run.trace["learned_distance"] = dist
    if dist > eps / 4:
        return run.done(REJECT, "learned-far")
    star = hat.to_pmf().weights[xs - 1]
    d_hat = float(np.clip((np.maximum(0.0, star - dx) / proposal.weights[xs - 1]).mean(), 0, 1))
    run.trace["tv_estimate"] = d_hat
    if d_hat > eps / 2:
        return run.done(REJECT, "tv-estimate")
    return run.done(ACCEPT)


def witness_samples(eps: float, alpha: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_w / (alpha * eps))


def test_monotone_cumulative(s: OracleSession, eps: float, c: Constants = DEFAULTS) -> Verdict:
    """Cumulative-dual tester: exact witness check on sampled blocks, then a
    single-point estimate of the distance to the flattening.
    """
    _check_eps(eps)
    run = _Run(s, "cumulative")
    alpha = eps / 4
    part = oblivious_partition(s.n, alpha)
    bounds = part.bounds
    ratios = part.size_ratios()
    ks = part.block_of(s.samp(size=witness_samples(eps, alpha, c)))
    ks = ks[ks >= 2]
    if ks.size:
        # Q(k) and Q(k-1) from the three cdf values around them
        c0, c1, c2 = s.ceval(bounds[ks - 2]), s.ceval(bounds[ks - 1]), s.ceval(bounds[ks])
        q_prev, q_cur = c1 - c0, c2 - c1
        bad = q_cur > ratios[ks - 2] * q_prev * (1 + 1e-12) + 1e-15
        run.trace["witnesses"] = int(bad.sum())
        if np.any(bad):
            return run.done(REJECT, "witness")
    est = estimate_dist_to_flattening_cumulative(s, alpha, eps / 4, 0.1, c)
    run.trace["flattening_estimate"] = est.value
    if est.value > eps / 2:
        return run.done(REJECT, "flattening")
    return run.done(ACCEPT)


def tolerant_learning_samples(n: int, eps2: float, c: Constants = DEFAULTS) -> int:
    return math.ceil(c.C_t * math.log(max(n, 2)) / eps2**3)


def tolerant_points(p: ToleranceParams, c: Constants = DEFAULTS) -> int:
    return known_eval_points((p.gamma2 - p.gamma1) / 2, 1 / 6, c)


def _tolerant_finish(run: _Run, bar: Histogram, p: ToleranceParams, point_values: str,
                     c: Constants) -> Verdict:
    dist = distance_to_monotone_flat(bar)
    run.trace["learned_distance"] = dist
    if dist > p.eps1 + p.alpha * p.eps2:
        return run.done(REJECT, "learned-far")
    est = estimate_tv_to_known_eval(run.s, bar, (p.gamma2 - p.gamma1) / 2, 1 / 6,
                                    point_values=point_values, c=c)
    run.trace["tv_estimate"] = est.value
    if est.value > (p.gamma1 + p.gamma2) / 2:
        return run.done(REJECT, "tv-estimate")
    return run.done(ACCEPT)


def tolerant_test_monotone_dual(s: OracleSession, params: ToleranceParams,
                                c: Constants = DEFAULTS) -> Verdict:
    """Tolerant tester with SAMP + EVAL: accepts eps1-close, rejects eps2-far."""
    run = _Run(s, "dual")
    p = params
    part = oblivious_partition(s.n, p.alpha * p.eps2)
    samples = s.samp(size=tolerant_learning_samples(s.n, p.eps2, c))
    counts = np.bincount(part.block_of(samples) - 1, minlength=part.ell)
    bar = Histogram(part, counts / counts.sum())
    return _tolerant_finish(run, bar, p, "eval", c)


def learn_flattening_cumulative(s: OracleSession, alpha: float) -> Histogram:
    """Exact flattening from one CEVAL query per block boundary."""
    part = oblivious_partition(s.n, alpha)
    cdf = s.ceval(part.bounds)
    return Histogram(part, np.maximum(np.diff(cdf), 0.0))


def tolerant_test_monotone_cumulative(s: OracleSession, params: ToleranceParams,
                                      c: Constants = DEFAULTS) -> Verdict:
    """Tolerant tester with SAMP + CEVAL; the flattening is learned exactly."""
    run = _Run(s, "cumulative")
    p = params
    bar = learn_flattening_cumulative(s, p.alpha * p.eps2)
    run.trace["learned"] = bar
    return _tolerant_finish(run, bar, p, "ceval", c)


# Query envelopes: worst-case totals by construction with the configured
# constants. Their growth in (n, eps) follows each tester's stated complexity.

def _decider_cost(n: int, eps: float, model: str, c: Constants) -> int:
    lmax = max_splits(n, eps, c)
    pairs = math.ceil(c.C_u / eps)
    delta = 1.0 / (10 * lmax) / (2 * pairs)
    eta = eps / c.eta_div
    if model == "cond":
        per_pair = compare_draws(eta, 2.0, delta, c)
    else:
        per_pair = 2 * descent_levels(n) * descent_draws(n, eta, delta, c)
    return pairs + pairs * per_pair


def envelope(tester: str, n: int, eps: float | None = None, c: Constants = DEFAULTS,
             params: ToleranceParams | None = None) -> int:
    """Upper bound on the total queries of one run of ``tester``."""
    if tester == "samp":
        return samp_pool_size(n, eps, c) + leaf_samples(n, eps, c)
    if tester in ("intcond", "cond_polylog"):
        model = "intcond" if tester == "intcond" else "cond"
        lmax = max_splits(n, eps, c)
        # nodes tested: at most lmax splits plus their 2 * lmax + 1 children
        tested = 3 * lmax + 1
        return (reference_samples(n, eps, c) + leaf_samples(n, eps, c)
                + tested * _decider_cost(n, eps, model, c))
    if tester == "cond_polyeps":
        alpha = eps / 4
        m = expprop_samples(eps, alpha, c)
        eta = expprop_accuracy(witness_slack(eps, alpha, c), 2.0)
        return m + m * compare_draws(eta, 2.0, 1.0 / (10 * m), c) + math.ceil(c.C_z / (eps / 8) ** 2)
    if tester == "eval":
        part = oblivious_partition(n, eps / 4)
        return 2 * part.ell + eval_points(eps, c)
    if tester == "cumulative":
        m = witness_samples(eps, eps / 4, c)
        return 4 * m + 5 * cumulative_draws(eps / 4, 0.1, c)
    if tester == "tolerant_dual":
        return tolerant_learning_samples(n, params.eps2, c) + tolerant_points(params, c)
    if tester == "tolerant_cumulative":
        part = oblivious_partition(n, params.alpha * params.eps2)
        return part.ell + 1 + 2 * tolerant_points(params, c)
    raise KeyError(f"no envelope for tester {tester!r}")


def table_rate(tester: str, n: int, eps: float) -> float:
    """Stated query rate of each tester, without constants or log(1/eps) factors."""
    lg = _log2n(n)
    return {
        "samp": math.sqrt(n) * lg**4 / eps**6,
        "intcond": lg**5 / eps**4,
        "cond_polylog": lg**5 / eps**4,
        "cond_polyeps": 1 / eps**22,
        "eval": max(lg / eps, 1 / eps**2),
        "cumulative": 1 / eps**4,
    }[tester]


# name -> (function, model, takes tolerance params)
TESTERS: dict[str, tuple[Callable, str, bool]] = {
    "samp": (test_monotone_samp, "samp", False),
    "intcond": (test_monotone_intcond, "intcond", False),
    "cond_polylog": (test_monotone_cond_polylog, "cond", False),
    "cond_polyeps": (test_monotone_cond_polyeps, "cond", False),
    "eval": (test_monotone_eval, "eval", False),
    "cumulative": (test_monotone_cumulative, "cumulative", False),
    "tolerant_dual": (tolerant_test_monotone_dual, "dual", True),
    "tolerant_cumulative": (tolerant_test_monotone_cumulative, "cumulative", True),
}
