import math

import numpy as np
import pytest
from conftest import random_pmf

from monotest.constants import DEFAULTS
from monotest.distcore import Pmf, flatten, oblivious_partition, tv_distance
from monotest.oracles import OracleSession, ZeroMassError
from monotest.subroutines import (
    CompareOutcome,
    DistanceEstimate,
    Tag,
    compare,
    compare_draws,
    cumulative_draws,
    descent_draws,
    descent_levels,
    estimate_dist_to_flattening_cond,
    estimate_dist_to_flattening_cumulative,
    estimate_dist_to_uniform,
    estimate_tv_to_known_eval,
    harmonic_proposal,
    intcond_point_ratio,
    known_eval_points,
    learn_monotone_eval,
    near_uniform_decider,
)
from monotest.testers import test_monotone_cond_polyeps as run_cond_polyeps

TRIALS = 200
TOL = 1e-12


def sess(d, seed, model="all"):
    return OracleSession.create(d if isinstance(d, Pmf) else Pmf(d), seed, model)


# ---- value types ------------------------------------------------------------

def test_outcome_and_estimate_validation():
    CompareOutcome(Tag.HIGH)
    CompareOutcome(Tag.RATIO, 1.5)
    for bad in [(Tag.RATIO, None), (Tag.LOW, 1.0), (Tag.RATIO, 0.0), (Tag.RATIO, math.inf)]:
        with pytest.raises(ValueError):
            CompareOutcome(*bad)
    with pytest.raises(ValueError):
        DistanceEstimate(1.5, 3)


# ---- compare ---------------------------------------------------------------

def test_compare_equal_points_gives_ratio_near_one():
    eta, delta = 0.1, 0.1
    good = 0
    for t in range(TRIALS):
        out = compare(sess(Pmf.uniform(8), t), [2], [5], eta, 2, delta)
        good += out.tag is Tag.RATIO and 1 - eta <= out.rho <= 1 + eta
    assert good / TRIALS >= 1 - delta


def test_compare_heavy_side_reports_high_or_valid_ratio():
    eta, delta, K = 0.1, 0.1, 2
    d = Pmf([0.05, 0.15, 0.8])  # D(Y)/D(X) = 16 > K
    good = 0
    for t in range(TRIALS):
        out = compare(sess(d, t), [1], [3], eta, K, delta)
        good += out.tag is Tag.HIGH or (out.tag is Tag.RATIO and abs(out.rho / 16 - 1) <= eta)
    assert good / TRIALS >= 1 - delta


def test_compare_calibration_run():
    hits = sum(
        (o := compare(sess(Pmf.uniform(6), [1, t]), [1, 2], [4, 5], 0.1, 1, 0.1)).tag is Tag.RATIO
        and 0.9 <= o.rho <= 1.1
        for t in range(500)
    )
    assert hits / 500 >= 0.85


def test_compare_budget_and_paircond_route():
    s = sess(Pmf.uniform(8), 0, "paircond")
    compare(s, [1], [2], 0.2, 2, 0.1)
    assert s.log.paircond == compare_draws(0.2, 2, 0.1) <= math.ceil(
        DEFAULTS.C_cmp * 2 * math.log(10) / 0.04)
    with pytest.raises(ValueError):
        compare(s, [1], [1], 0.2, 2, 0.1)
    with pytest.raises(ZeroMassError):
        compare(sess([0.5, 0.5, 0, 0], 0), [3], [4], 0.2, 2, 0.1)


# ---- near-uniformity decider -----------------------------------------------

HALF_SKEW = np.r_[np.full(32, 1.5), np.full(32, 0.5)] / 64  # tv to uniform = 1/4


@pytest.mark.parametrize("model", ["cond", "intcond", "samp"])
def test_decider_accepts_uniform(model):
    delta = 0.1
    acc = sum(near_uniform_decider(sess(Pmf.uniform(64), t), (1, 64), 0.3, delta, model)
              for t in range(TRIALS))
    assert acc / TRIALS >= 1 - delta


@pytest.mark.parametrize("model", ["cond", "intcond", "samp"])
def test_decider_rejects_quarter_far(model):
    delta = 0.1
    rej = sum(not near_uniform_decider(sess(HALF_SKEW, t), (1, 64), 0.5, delta, model)
              for t in range(TRIALS))
    assert rej / TRIALS >= 1 - delta


def test_decider_singleton_is_free():
    s = sess(Pmf.uniform(4), 0)
    assert near_uniform_decider(s, (3, 3), 0.1, 0.1)
    assert s.log.total == 0


def test_decider_on_subinterval():
    # far outside the interval must not matter
    w = np.r_[np.full(16, 1.0), np.linspace(3, 1, 16)]
    assert near_uniform_decider(sess(w / w.sum(), 1), (1, 16), 0.3, 0.05, "intcond")


# ---- binary descent --------------------------------------------------------

def test_point_ratio_uniform_and_doubling():
    eta, delta = 0.1, 0.1
    ok = sum(1 - eta <= intcond_point_ratio(sess(Pmf.uniform(64), t), 3, 50, (1, 64), eta, delta)
             <= 1 + eta for t in range(TRIALS))
    assert ok / TRIALS >= 1 - delta
    ok = sum(2 * (1 - eta) <= intcond_point_ratio(sess([1 / 3, 2 / 3], t), 1, 2, (1, 2), eta, delta)
             <= 2 * (1 + eta) for t in range(TRIALS))
    assert ok / TRIALS >= 1 - delta


def test_point_ratio_budget_and_trivial_case():
    s = sess(Pmf.uniform(64), 0, "intcond")
    assert intcond_point_ratio(s, 7, 7, (1, 64), 0.1, 0.1) == 1.0
    assert s.log.total == 0
    intcond_point_ratio(s, 1, 64, (1, 64), 0.1, 0.1)
    L = descent_levels(64)
    assert s.log.intcond <= 2 * L * descent_draws(64, 0.1, 0.1)
    assert s.log.intcond <= DEFAULTS.C_bd * L**2 * math.log(2 * L / 0.1) / 0.01 + 2 * L


def test_point_ratio_zero_side_maps_to_sentinels():
    d = [0.5, 0.0, 0.5, 0.0]
    assert intcond_point_ratio(sess(d, 0), 1, 2, (1, 4), 0.1, 0.1) == 0.0
    assert intcond_point_ratio(sess(d, 0), 2, 1, (1, 4), 0.1, 0.1) == math.inf


# ---- distance estimators ---------------------------------------------------

def test_whitebox_distance_is_exact(rng):
    assert estimate_dist_to_uniform(sess(Pmf.uniform(10), 0), (2, 9), 0.1, 0.1).value == 0
    w = random_pmf(rng, 20)
    s = sess(w, 0)
    est = estimate_dist_to_uniform(s, (5, 14), 0.1, 0.1)
    part = w[4:14] / w[4:14].sum()
    assert est.value == pytest.approx(tv_distance(part, np.full(10, 0.1)), abs=TOL)
    assert est.budget == 0 and s.log.total == 0


def test_plugin_distance_is_used():
    s = sess(Pmf.uniform(10), 0)
    est = estimate_dist_to_uniform(s, (1, 10), 0.1, 0.1, impl=lambda *_: 0.07)
    assert est.value == pytest.approx(0.07)
    with pytest.raises(ValueError):
        estimate_dist_to_uniform(s, (1, 10), 0.1, 0.1, impl="nope")


def _planted(n=512, alpha=0.5):
    """Flat on I_alpha except the heaviest block, which is skewed."""
    part = oblivious_partition(n, alpha)
    base = flatten(Pmf(np.linspace(2, 1, n) / np.linspace(2, 1, n).sum()), part).weights.copy()
    masses = [base[part.interval(j)[0] - 1:part.interval(j)[1]].sum() for j in range(1, part.ell + 1)]
    a, b = part.interval(int(np.argmax(masses)) + 1)
    seg = base[a - 1:b]
    skew = (np.arange(seg.size) < seg.size // 2).astype(float)
    base[a - 1:b] = seg.sum() * skew / skew.sum()
    d = Pmf(base)
    return d, part, tv_distance(d, flatten(d, part))


def test_flattening_cond_estimator():
    d, part, truth = _planted()
    assert truth > 0.05
    eps = 0.05
    ok = 0
    for t in range(50):
        s = sess(d, t, "cond")
        est = estimate_dist_to_flattening_cond(s, 0.5, eps, 0.1)
        ok += abs(est.value - truth) <= eps
        assert s.log.samp == math.ceil(DEFAULTS.C_z / eps**2) and s.log.cond == 0
    assert ok / 50 >= 0.9
    flat = flatten(d, part)
    assert estimate_dist_to_flattening_cond(sess(flat, 0), 0.5, eps, 0.1).value <= eps


def test_flattening_cond_with_plugin_counts_per_sample():
    calls = []

    def plug(s, interval, eps, delta):
        calls.append(interval)
        return 0.0

    est = estimate_dist_to_flattening_cond(sess(Pmf.uniform(64), 0), 0.5, 0.2, 0.1, impl=plug)
    assert est.value == 0 and len(calls) == math.ceil(DEFAULTS.C_z / 0.04)


def test_flattening_cumulative_estimator():
    d, _, truth = _planted()
    eps = 0.05
    ok = 0
    for t in range(300):
        s = sess(d, t, "cumulative")
        est = estimate_dist_to_flattening_cumulative(s, 0.5, eps, 0.1)
        ok += abs(est.value - truth) <= eps
    assert ok / 300 >= 0.9
    m = cumulative_draws(eps, 0.1)
    assert s.log.samp == m and s.log.ceval == 4 * m
    assert s.log.total <= DEFAULTS.C_cd * 5 * math.log(20) / eps**2 + 5
    assert estimate_dist_to_flattening_cumulative(sess(Pmf.uniform(300), 0), 0.3, eps, 0.1).value <= TOL


def test_tv_to_known_eval():
    n, eps, delta = 64, 0.1, 0.1
    star = Pmf(np.linspace(3, 1, n) / np.linspace(3, 1, n).sum())
    assert estimate_tv_to_known_eval(sess(star, 0, "eval"), star, eps, delta).value == 0
    half = np.r_[np.zeros(32), np.full(32, 1 / 32)]
    other = np.r_[np.full(32, 1 / 32), np.zeros(32)]
    assert estimate_tv_to_known_eval(sess(half, 0), Pmf(other), eps, delta).value == 1
    r = np.random.default_rng(7)
    ok = 0
    for t in range(300):
        p, q = Pmf(random_pmf(r, n)), Pmf(random_pmf(r, n))
        s = sess(p, t, "eval")
        est = estimate_tv_to_known_eval(s, q, eps, delta)
        assert 0 <= est.value <= 1
        ok += abs(est.value - tv_distance(p, q)) <= eps
    assert ok / 300 >= 0.9
    assert s.log.eval == known_eval_points(eps, delta)


def test_tv_to_known_with_proposal_and_cdf_values():
    n = 128
    d = Pmf(1 / np.arange(1, n + 1) / (1 / np.arange(1, n + 1)).sum())
    star = Pmf.uniform(n)
    truth = tv_distance(d, star)
    vals = [estimate_tv_to_known_eval(sess(d, t, "eval"), star, 0.05, 0.1,
                                      proposal=harmonic_proposal(n)).value for t in range(40)]
    assert abs(np.mean(vals) - truth) <= 0.05
    s = sess(d, 0, "cumulative")
    est = estimate_tv_to_known_eval(s, star, 0.05, 0.1, point_values="ceval")
    assert abs(est.value - truth) <= 0.05 and s.log.eval == 0


def test_learner():
    s = sess(Pmf.uniform(500), 0, "eval")
    h = learn_monotone_eval(s, 0.1)
    assert tv_distance(h.to_pmf(), Pmf.uniform(500)) <= TOL
    n = 2**10
    g = 0.5 ** np.arange(1, n + 1)
    d = Pmf(g / g.sum())
    s = sess(d, 0, "eval")
    h = learn_monotone_eval(s, 0.1)
    assert tv_distance(h.to_pmf(), d) <= 0.3
    part = oblivious_partition(n, 0.1)
    assert s.log.eval <= 2 * part.ell
    assert np.all(np.diff(h.densities()) <= 1e-15)
    # deterministic: a second run returns the same histogram
    assert learn_monotone_eval(sess(d, 99, "eval"), 0.1) == h


def test_fault_injected_distance_keeps_verdicts():
    bias = 0.03

    def biased(s, interval, eps, delta):
        a, b = interval
        w = s.hidden.weights[a - 1:b]
        return min(1.0, tv_distance(w / w.sum(), np.full(w.size, 1 / w.size)) + bias)

    n = 1024
    w = np.sort(np.random.default_rng(1).random(n))[::-1]
    mono = Pmf(w / w.sum())
    inc = Pmf(np.arange(1, n + 1) / (n * (n + 1) / 2))
    acc = sum(run_cond_polyeps(sess(mono, t, "cond"), 0.3, dist_impl=biased).accepted
              for t in range(20))
    rej = sum(not run_cond_polyeps(sess(inc, t, "cond"), 0.3, dist_impl=biased).accepted
              for t in range(20))
    assert acc >= 14 and rej >= 14
