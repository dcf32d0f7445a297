import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewloc.dynamics import Frequency, TorusPoint, orbit_closed_form, torus_distance
from skewloc.ergodic import (WEYL_C, WeylRecord, aggregate_range, default_fejer_order, fejer_kernel,
                             fejer_kernel_closed, fejer_majorant, fejer_majorant_check, hit_count,
                             hit_counts, sample_l1_ball, weyl_aggregate, weyl_bound, weyl_sum,
                             weyl_sums_box)
from skewloc.errors import InvalidArgument


# ---- Fejer kernel ----------------------------------------------------------

@pytest.mark.parametrize("R", [1, 2, 7, 64])
def test_fejer_at_zero(R):
    assert fejer_kernel(R, 0.0) == pytest.approx(R, rel=1e-14)


def test_fejer_order_one_is_constant():
    assert np.all(fejer_kernel(1, np.linspace(0, 1, 17)) == 1.0)


def test_fejer_two_ways():
    assert abs(fejer_kernel(4, 0.5) - fejer_kernel_closed(4, 0.5)) < 1e-12
    t = np.linspace(-1, 1, 401)
    for R in (3, 10, 33):
        assert np.max(np.abs(fejer_kernel(R, t) - fejer_kernel_closed(R, t))) < 1e-10


def test_fejer_positive_on_grid():
    t = np.linspace(0, 1, 10_000)
    for R in range(1, 65):
        assert fejer_kernel(R, t).min() >= -1e-12


def test_majorant_at_centre_with_unit_constant():
    for eps in (0.05, 0.1, 0.3, 0.49):
        R = math.ceil(1 / eps)
        assert fejer_majorant(np.zeros((1, 3)), eps, R, 1.0)[0] >= 1.0


def test_majorant_check_default():
    assert fejer_majorant_check(0.1, 10_000, d=3)


def test_majorant_order_one_over_eps_vanishes_on_boundary():
    # with R = 1/eps the kernel is zero at |x_j| = eps, so no constant works near the ball's vertices
    eps = 0.1
    vertex = np.array([[eps * (1 - 1e-9), 0.0, 0.0]])
    assert fejer_majorant(vertex, eps, 10, 4.0**3)[0] < 1e-6
    assert fejer_majorant(vertex, eps, default_fejer_order(eps), 4.0**3)[0] >= 1.0


def test_majorant_precondition():
    with pytest.raises(InvalidArgument):
        fejer_majorant_check(0.5, 10)


def test_l1_ball_sampler(rng):
    pts = sample_l1_ball(rng, 3, 0.2, 5000)
    assert np.all(np.abs(pts).sum(axis=1) < 0.2)
    assert np.all(np.sign(pts).mean(axis=0) ** 2 < 0.01)


# ---- hit counts --------------------------------------------------------------

def test_hit_count_whole_torus(golden, rng):
    x = TorusPoint.random(rng, 3)
    h = hit_count(x, TorusPoint.from_floats([0, 0, 0]), 1.6, 500, golden)
    assert h.count == 500


def test_hit_count_tiny_ball(golden, rng):
    x = TorusPoint.random(rng, 3)
    assert hit_count(x, TorusPoint.from_floats([0.3, 0.3, 0.3]), 1e-9, 100, golden).count == 0


def test_hit_count_brute_force_oracle(golden, rng):
    x = TorusPoint.random(rng, 3)
    a = TorusPoint.from_fixed([1 << 254] * 3)
    want = sum(torus_distance(orbit_closed_form(x, n, golden), a) < 0.3 for n in range(1, 2001))
    assert hit_count(x, a, 0.3, 2000, golden).count == want


def test_hit_count_calibrated_ratio(golden):
    # 1.3 is the typical value (ball volume 4/3 eps^3); 50 is the frozen acceptance cap
    x = TorusPoint.random(np.random.default_rng(7), 3)
    h = hit_count(x, TorusPoint.from_floats([0, 0, 0]), 0.1, 100_000, golden)
    assert h.bound_ratio <= 50
    assert 0.5 < h.bound_ratio < 3


def test_hit_count_errors(golden):
    x = TorusPoint.from_floats([0.1, 0.2, 0.3])
    with pytest.raises(InvalidArgument):
        hit_count(x, x, 0.1, 0, golden)
    with pytest.raises(InvalidArgument):
        hit_count(x, x, 0.0, 10, golden)
    with pytest.raises(InvalidArgument):
        hit_count(x, TorusPoint.from_floats([0.1, 0.2]), 0.1, 10, golden)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), e1=st.floats(0.01, 1.0), e2=st.floats(0.01, 1.0),
       L1=st.integers(1, 800), L2=st.integers(1, 800))
def test_hit_count_monotone(seed, e1, e2, L1, L2):
    w = Frequency.golden_mean()
    rng = np.random.default_rng(seed)
    x, a = TorusPoint.random(rng, 3), TorusPoint.from_floats(rng.random(3))
    lo, hi = sorted((e1, e2))
    Ls, Lb = sorted((L1, L2))
    c = hit_counts(x, a, [lo, hi], Lb, w)
    assert c[0].count <= c[1].count
    assert hit_count(x, a, lo, Ls, w).count <= c[0].count
    assert 0 <= c[1].count <= Lb


def test_doubling_consistency_flagged_not_failed(golden):
    L, d = 100_000, 3
    for i in range(3):
        rng = np.random.default_rng([77, i])
        x, a = TorusPoint.random(rng, d), TorusPoint.from_floats(rng.random(d))
        small, big = hit_counts(x, a, [0.05, 0.1], L, golden)
        if not big.count <= 2 ** (d + 2) * small.count + 0.01 * L:
            warnings.warn(f"doubling bound exceeded: {big.count} vs {small.count}")


# ---- Weyl sums ----------------------------------------------------------------

def test_weyl_resonant_rational(rng):
    x = TorusPoint.random(rng, 3)
    r = weyl_sum(x, (0, 0, 2), 777, Frequency.from_float(0.5))
    assert r.value == pytest.approx(777, rel=1e-13)


def test_weyl_geometric_series(golden):
    L = 1234
    r = weyl_sum(TorusPoint.from_floats([0, 0, 0]), (0, 0, 1), L, golden)
    w = golden.value
    want = abs(math.sin(math.pi * L * w) / math.sin(math.pi * w))
    assert r.value == pytest.approx(want, abs=1e-9)


def test_weyl_single_term(golden, rng):
    for k in [(1, 0, 0), (3, -2, 7), (0, 5, 0)]:
        assert weyl_sum(TorusPoint.random(rng, 3), k, 1, golden).value == pytest.approx(1.0, abs=1e-15)


def test_weyl_zero_k(golden):
    with pytest.raises(InvalidArgument):
        weyl_sum(TorusPoint.from_floats([0, 0, 0]), (0, 0, 0), 10, golden)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.tuples(*[st.integers(-6, 6)] * 3), L=st.integers(1, 3000))
def test_weyl_bounds_and_symmetry(seed, k, L):
    if not any(k):
        return
    w = Frequency.golden_mean()
    x = TorusPoint.random(np.random.default_rng(seed), 3)
    a = weyl_sum(x, k, L, w)
    b = weyl_sum(x, tuple(-v for v in k), L, w)
    assert 0 <= a.value <= L + 1e-9
    assert abs(a.value - b.value) <= 1e-10


def test_box_matches_direct_sums(golden, rng):
    x = TorusPoint.random(rng, 3)
    K, L = 3, 5000
    box = weyl_sums_box(x, K, L, golden, block=700)
    for k in [(1, -3, 2), (0, 0, 1), (-3, 3, 3), (0, 2, -1)]:
        assert box[tuple(np.add(k, K))] == pytest.approx(weyl_sum(x, k, L, golden).value, abs=1e-9)
    assert box[K, K, K] == pytest.approx(L)


def test_weyl_bound_examples():
    assert weyl_bound((0, 0, 5), 10**4, 3) == pytest.approx(250.0)
    assert weyl_bound((0, 1, 0), 10**4, 3) == pytest.approx(WEYL_C * 10**3)
    assert weyl_bound((1, 0, 0), 10**4, 3) == pytest.approx(WEYL_C * 10 ** (4 * (7 / 8 + 0.05)))
    assert weyl_bound((0, 16, 3), 100, 3) == pytest.approx(WEYL_C * 4 * 100**0.75)
    with pytest.raises(InvalidArgument):
        weyl_bound((0, 0, 0), 10)
    with pytest.raises(InvalidArgument):
        weyl_bound((0, 1), 10, d=3)


def test_weyl_record_row():
    rec = WeylRecord((1, 0, -2), 100, 5.0, 2, 50.0)
    assert list(rec.to_row()) == ["k1", "k2", "k3", "L", "S_k", "case_j", "predicted_bound", "ratio"]
    assert rec.ratio == 0.1


# ---- aggregate ---------------------------------------------------------------

def test_aggregate_empty_range(golden, rng):
    x = TorusPoint.random(rng, 3)
    agg = weyl_aggregate(x, 1.0, 10_000, golden)
    assert agg.sum == 0 and agg.n_terms == 0


def test_aggregate_range_norms():
    assert len(aggregate_range(0.2, 3, "linf")) == 9**3 - 1
    assert all(sum(map(abs, k)) < 5 for k in aggregate_range(0.2, 3, "l1"))
    # just below 1 the unit vectors enter the range
    assert len(aggregate_range(0.99, 3, "l1")) == 6


def test_aggregate_regime_enforced(golden, rng):
    x = TorusPoint.random(rng, 3)
    with pytest.raises(InvalidArgument):
        weyl_aggregate(x, 0.2, 10_000, golden)
    with pytest.raises(InvalidArgument):
        weyl_aggregate(x, 0.2, 10_000, golden, norm="l2", enforce_regime=False)


def test_aggregate_rational_resonance(rng):
    x = TorusPoint.random(rng, 3)
    agg = weyl_aggregate(x, 0.3, 2000, Frequency.from_float(0.5), enforce_regime=False)
    assert agg.ratio_to_L >= 1


def test_aggregate_matches_direct_sum(golden, rng):
    x = TorusPoint.random(rng, 3)
    agg = weyl_aggregate(x, 0.4, 3000, golden, norm="l1", enforce_regime=False)
    direct = math.fsum(weyl_sum(x, k, 3000, golden).value for k in aggregate_range(0.4, 3, "l1"))
    assert agg.sum == pytest.approx(direct, rel=1e-12)


def test_aggregate_ratio_does_not_grow(golden):
    x = TorusPoint.random(np.random.default_rng(31), 3)
    r = [weyl_aggregate(x, 0.2, L, golden, enforce_regime=False).ratio_to_L for L in (10**3, 10**4, 10**5)]
    assert r[2] <= 2 * r[0]
