import json

import numpy as np
import pytest
from bruteforce import (
    cone_distance,
    grid_distance_ratio,
    grid_distance_to_monotone,
    monotone_generators,
    ratio_generators,
)
from conftest import random_pmf
from hypothesis import given, settings
from hypothesis import strategies as st

from monotest.distcore import (
    C_ELL,
    DistributionError,
    Histogram,
    IntervalPartition,
    Pmf,
    distance_to_expprop_exact,
    distance_to_monotone_exact,
    distance_to_monotone_flat,
    ell_bound,
    expand,
    fixup,
    flatten,
    mirror,
    oblivious_partition,
    project_monotone,
    reduce,
    satisfies_expprop,
    tau_witnesses,
    tv_distance,
)

TOL = 1e-12
TOL_LP = 1e-9
TOL_GRID = 2e-3  # grid step 1e-3 on each coordinate

weights = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(lambda w: sum(w) > 1e-3)


def as_pmf(w):
    w = np.asarray(w)
    return Pmf(w / w.sum())


# ---- Pmf -------------------------------------------------------------------

def test_pmf_normalizes_small_drift_and_rejects_large():
    p = Pmf([0.5, 0.5 + 1e-10])
    assert abs(p.weights.sum() - 1) <= TOL
    with pytest.raises(DistributionError):
        Pmf([0.5, 0.6])
    with pytest.raises(DistributionError):
        Pmf([1.1, -0.1])
    with pytest.raises(DistributionError):
        Pmf([])


def test_pmf_cdf_and_mass():
    p = Pmf([0.1, 0.2, 0.3, 0.4])
    assert p.cdf[0] == 0 and abs(p.cdf[-1] - 1) <= TOL
    assert np.all(np.diff(p.cdf) >= 0)
    assert p(3) == pytest.approx(0.3)
    assert p.mass(2, 3) == pytest.approx(0.5)
    assert p.conditional([3, 4]).weights == pytest.approx([3 / 7, 4 / 7])


def test_pmf_json_round_trip():
    p = Pmf([0.25, 0.5, 0.25])
    assert Pmf.from_json(json.loads(json.dumps(p.to_json()))) == p


# ---- tv distance -----------------------------------------------------------

def test_tv_examples():
    assert tv_distance(Pmf.uniform(4), Pmf.uniform(4)) == 0
    assert tv_distance(Pmf([1, 0, 0]), Pmf([0, 0, 1])) == pytest.approx(1)
    assert tv_distance(Pmf([0.5, 0.5, 0]), Pmf.uniform(3)) == pytest.approx(1 / 3)


def test_tv_domain_mismatch():
    with pytest.raises(ValueError):
        tv_distance(Pmf.uniform(3), Pmf.uniform(4))


@given(st.integers(1, 20), st.integers(0, 2**31))
def test_tv_is_a_metric(n, seed):
    r = np.random.default_rng(seed)
    p, q, s = (Pmf(random_pmf(r, n)) for _ in range(3))
    assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=TOL)
    assert tv_distance(p, s) <= tv_distance(p, q) + tv_distance(q, s) + TOL
    assert 0 <= tv_distance(p, q) <= 1


# ---- partitions ------------------------------------------------------------

@pytest.mark.parametrize("n,alpha,sizes", [(14, 1, [2, 4, 8]), (15, 1, [2, 4, 8, 1]),
                                           (3, 0.1, [1, 1, 1])])
def test_partition_examples(n, alpha, sizes):
    assert oblivious_partition(n, alpha).sizes.tolist() == sizes


@given(st.integers(1, 5000), st.floats(0.01, 1.0))
def test_partition_invariants(n, alpha):
    part = oblivious_partition(n, alpha)
    s = part.sizes
    assert s.sum() == n and np.all(s >= 1)
    k = np.arange(1, part.ell)
    assert np.array_equal(s[:-1], np.floor((1 + alpha) ** k * (1 + 1e-12)).astype(int))
    assert part.ell <= C_ELL * np.log(alpha * n + 2) / alpha + 1e-9
    assert part.ell <= ell_bound(n, alpha) + 1e-9


def test_partition_rejects_bad_alpha():
    for bad in (0, -0.5, 1.5):
        with pytest.raises(ValueError):
            oblivious_partition(10, bad)


def test_block_of_and_interval():
    part = oblivious_partition(14, 1)
    assert part.interval(2) == (3, 6)
    assert part.block_of(np.array([1, 2, 3, 6, 7, 14])).tolist() == [1, 1, 2, 2, 3, 3]


# ---- flatten / reduce / expand / mirror ------------------------------------

BLOCKS_1_23 = IntervalPartition([0, 1, 3])


def test_flatten_reduce_expand_examples():
    d = Pmf([0.5, 0.3, 0.2])
    assert flatten(d, BLOCKS_1_23).weights == pytest.approx([0.5, 0.25, 0.25])
    assert reduce(d, BLOCKS_1_23).weights == pytest.approx([0.5, 0.5])
    assert expand(Pmf([0.5, 0.5]), BLOCKS_1_23).weights == pytest.approx([0.5, 0.25, 0.25])
    assert expand(Pmf([1.0, 0.0]), BLOCKS_1_23).weights == pytest.approx([1, 0, 0])
    u = Pmf.uniform(20)
    part = oblivious_partition(20, 0.5)
    assert np.allclose(flatten(u, part).weights, u.weights, atol=TOL)
    assert reduce(u, part).weights == pytest.approx(part.sizes / 20)


def test_mirror_examples():
    assert mirror(Pmf([0.2, 0.3, 0.5])).weights == pytest.approx([0.5, 0.3, 0.2])
    assert mirror(Pmf.uniform(5)) == Pmf.uniform(5)


@settings(max_examples=50)
@given(st.integers(1, 200), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_transform_identities(n, alpha, seed):
    r = np.random.default_rng(seed)
    d = Pmf(random_pmf(r, n, zeros=True))
    part = oblivious_partition(n, alpha)
    f = flatten(d, part)
    assert np.allclose(flatten(f, part).weights, f.weights, atol=TOL)
    assert np.allclose(expand(reduce(d, part), part).weights, f.weights, atol=TOL)
    q = Pmf(random_pmf(r, part.ell))
    assert np.allclose(reduce(expand(q, part), part).weights, q.weights, atol=TOL)
    assert mirror(mirror(d)) == d
    # contraction under a shared partition
    p = Pmf(random_pmf(r, n))
    assert tv_distance(flatten(p, part), f) <= tv_distance(p, d) + TOL


# ---- LP distances against the brute-force oracles --------------------------

def test_distance_examples():
    assert distance_to_monotone_exact(Pmf([0.2, 0.8])) == pytest.approx(0.3, abs=TOL_LP)
    assert distance_to_monotone_exact(Pmf([0.5, 0.3, 0.2])) == 0
    assert distance_to_monotone_exact(Pmf.uniform(7)) == 0


def test_monotone_lp_matches_vertex_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(1, 7))
        w = random_pmf(rng, n, zeros=bool(rng.random() < 0.3))
        lp = distance_to_monotone_exact(Pmf(w))
        assert lp == pytest.approx(cone_distance(w, monotone_generators(n)), abs=1e-6)


def test_monotone_lp_matches_grid_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(2, 4))
        w = random_pmf(rng, n)
        assert distance_to_monotone_exact(Pmf(w)) == pytest.approx(
            grid_distance_to_monotone(w), abs=TOL_GRID)


def test_flat_lp_examples():
    h = Histogram(BLOCKS_1_23, [0.2, 0.8])
    assert distance_to_monotone_flat(h) == pytest.approx(
        distance_to_monotone_exact(Pmf([0.2, 0.4, 0.4])), abs=TOL_LP)
    assert distance_to_monotone_flat(Histogram(IntervalPartition([0, 9]), [1.0])) == 0
    assert distance_to_monotone_flat(Histogram(BLOCKS_1_23, [0.4, 0.6])) == 0


def test_flat_lp_matches_full_lp(rng):
    for _ in range(40):
        n = int(rng.integers(2, 65))
        cuts = np.sort(rng.choice(np.arange(1, n), size=int(rng.integers(0, min(n - 1, 8) + 1)),
                                  replace=False))
        part = IntervalPartition([0, *cuts.tolist(), n])
        h = Histogram(part, random_pmf(rng, part.ell))
        assert distance_to_monotone_flat(h) == pytest.approx(
            distance_to_monotone_exact(h.to_pmf()), abs=TOL_LP)


def test_project_monotone_is_flat_monotone_and_optimal(rng):
    part = oblivious_partition(40, 0.3)
    for _ in range(10):
        t = rng.random(part.ell)
        h = project_monotone(t, part)
        assert np.all(np.diff(h.densities()) <= 1e-12)
        # no flat monotone pmf is closer in l1 than the projection
        other = Histogram.from_pmf(Pmf.uniform(40), part)
        assert np.abs(h.block_weights - t).sum() <= np.abs(other.block_weights - t).sum() + 1e-9


def test_histogram_json_and_validation():
    h = Histogram(BLOCKS_1_23, [0.2, 0.8])
    assert Histogram.from_json(json.loads(json.dumps(h.to_json()))) == h
    with pytest.raises(ValueError):
        Histogram(BLOCKS_1_23, [1.0])
    with pytest.raises(DistributionError):
        Histogram(BLOCKS_1_23, [0.5, 0.6])


# ---- exponential property, witnesses, fixup --------------------------------

def test_expprop_examples():
    assert satisfies_expprop(Pmf.uniform(5), 0.0)
    assert satisfies_expprop(Pmf([0.5, 0.5]), 0.1)
    assert not satisfies_expprop(Pmf([0.4, 0.6]), 0.1)
    assert distance_to_expprop_exact(Pmf([0.5, 0.5]), 0.1) == 0
    assert distance_to_expprop_exact(Pmf([0.3, 0.7]), 0.0) == pytest.approx(0.2, abs=TOL_LP)


def test_expprop_lp_matches_oracles(rng):
    for _ in range(60):
        ell = int(rng.integers(2, 4))
        alpha = float(rng.choice([0.0, 0.1, 0.5, 1.0]))
        w = random_pmf(rng, ell)
        lp = distance_to_expprop_exact(Pmf(w), alpha)
        assert lp == pytest.approx(cone_distance(w, ratio_generators(np.full(ell - 1, 1 + alpha))),
                                   abs=1e-6)
        if ell == 2:
            assert lp == pytest.approx(grid_distance_ratio(w, 1 + alpha), abs=TOL_GRID)


def test_expprop_with_size_ratios_matches_oracle(rng):
    part = oblivious_partition(30, 0.7)
    r = part.size_ratios()
    for _ in range(5):
        w = random_pmf(rng, part.ell)
        if part.ell <= 6:
            assert distance_to_expprop_exact(Pmf(w), 0.7, r) == pytest.approx(
                cone_distance(w, ratio_generators(r)), abs=1e-6)


def test_witness_examples():
    rep = tau_witnesses(Pmf([0.4, 0.6]), 0.1, 0.1)
    assert rep.indices == (2,) and rep.mass == pytest.approx(0.6)
    rep = tau_witnesses(Pmf.uniform(6), 0.1, 0.0)
    assert rep.indices == () and rep.mass == 0
    with pytest.raises(ValueError):
        tau_witnesses(Pmf.uniform(3), 0.1, -1)


@given(st.integers(2, 12), st.floats(0.0, 1.0), st.floats(0.0, 0.5), st.integers(0, 2**31))
def test_witness_sets_shrink_with_tau(ell, alpha, tau, seed):
    q = Pmf(random_pmf(np.random.default_rng(seed), ell))
    big, small = tau_witnesses(q, alpha, 0.0), tau_witnesses(q, alpha, tau)
    assert set(small.indices) <= set(big.indices)
    w = q.weights
    for i in small.indices:
        assert w[i - 1] > (1 + alpha + tau) * w[i - 2]
    assert small.mass == pytest.approx(sum(w[i - 1] for i in small.indices), abs=TOL)


def test_fixup_examples():
    assert fixup(Pmf([0.3, 0.7]), 0.5).weights == pytest.approx([7 / 15, 8 / 15], abs=TOL)
    q = Pmf([0.5, 0.3, 0.2])
    assert fixup(q, 0.1) == q


@settings(max_examples=100)
@given(st.integers(1, 16), st.sampled_from([0.1, 0.5, 1.0]), st.integers(0, 2**31))
def test_fixup_repairs_within_bound(ell, alpha, seed):
    q = Pmf(random_pmf(np.random.default_rng(seed), ell, zeros=True))
    out = fixup(q, alpha)
    assert satisfies_expprop(out, alpha)
    bound = (1 + alpha) / alpha * tau_witnesses(q, alpha, 0.0).mass
    assert tv_distance(q, out) <= bound + 1e-9


def test_fixup_with_size_ratios(rng):
    part = oblivious_partition(200, 0.25)
    r = part.size_ratios()
    for _ in range(20):
        q = Pmf(random_pmf(rng, part.ell))
        assert satisfies_expprop(fixup(q, 0.25, r), 0.25, r)


def test_reduction_chain_identity(rng):
    for _ in range(20):
        n = int(rng.integers(2, 65))
        alpha = float(rng.choice([0.1, 0.25, 0.5, 1.0]))
        d = Pmf(random_pmf(rng, n))
        part = oblivious_partition(n, alpha)
        lhs = distance_to_monotone_flat(Histogram.from_pmf(d, part))
        rhs = distance_to_expprop_exact(reduce(d, part), alpha, part.size_ratios())
        assert lhs == pytest.approx(rhs, abs=TOL_LP)
        # monotone inputs land exactly in the size-aware property
        m = Pmf(np.sort(random_pmf(rng, n))[::-1])
        assert satisfies_expprop(reduce(m, part), alpha, part.size_ratios())
