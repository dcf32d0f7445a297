import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from skewloc.dynamics import Frequency, TorusPoint, orbit_closed_form, skew_step
from skewloc.errors import InvalidArgument, NumericalError, ResourceLimit
from skewloc.operator import (HoppingFamily, OperatorSpec, TrigPoly, assemble_window, eval_trig_poly,
                              grid_max_modulus, matrix_entry, potential_range, sample_random_spec,
                              sup_norm_estimate, with_hopping)
from skewloc.specio import dumps_spec


def cos_x1(d=3):
    e = [0] * d
    e[0] = 1
    return TrigPoly(d, {tuple(e): 0.5, tuple(-v for v in e): 0.5}, real=True)


def bare_spec(v, d=3, x0=None):
    x0 = TorusPoint.from_floats([0.0] * d) if x0 is None else x0
    return OperatorSpec(d, Frequency.golden_mean(), v, HoppingFamily(1e-3, 2.0, 20, {}), x0)


# ---- TrigPoly ----------------------------------------------------------------

def test_constant_poly():
    p = TrigPoly(3, {(0, 0, 0): 3.0}, real=True)
    assert eval_trig_poly(p, TorusPoint.from_floats([0.1, 0.7, 0.2])) == 3.0
    assert p.is_constant() and p.degree == 0


def test_cosine_poly_zero():
    assert abs(eval_trig_poly(cos_x1(), TorusPoint.from_floats([0.25, 0.1, 0.9]))) < 1e-15


def test_eval_against_double_loop(rng):
    terms = {tuple(int(v) for v in rng.integers(-4, 5, 3)): complex(*rng.normal(size=2)) for _ in range(10)}
    p = TrigPoly(3, terms)
    x = rng.random(3)
    want = 0j
    for l, c in p.terms.items():
        s = 0.0
        for li, xi in zip(l, x):
            s += li * xi
        want += c * cmath.exp(2j * math.pi * s)
    assert abs(eval_trig_poly(p, TorusPoint.from_floats(x)) - want) < 1e-12


def test_eval_errors():
    with pytest.raises(InvalidArgument):
        eval_trig_poly(cos_x1(3), TorusPoint.from_floats([0.1, 0.2]))
    with pytest.raises(InvalidArgument):
        TrigPoly(3, {(1, 0): 1.0})
    bogus = TrigPoly(3, {(1, 0, 0): 1.0}, real=True)
    with pytest.raises(NumericalError):
        eval_trig_poly(bogus, TorusPoint.from_floats([0.1, 0.0, 0.0]))


def test_degree_recomputed():
    p = TrigPoly(3, {(1, -5, 2): 1j, (0, 0, 3): 2.0})
    assert p.degree == 5
    assert TrigPoly(3).degree == 0


def test_sup_norm_estimate_dominates(rng):
    for _ in range(5):
        terms = {tuple(int(v) for v in rng.integers(-9, 10, 3)): complex(*rng.normal(size=2)) for _ in range(3)}
        p = TrigPoly(3, terms)
        vals = np.abs(p.evaluate(rng.random((20_000, 3))))
        assert sup_norm_estimate(p) >= vals.max()
        assert grid_max_modulus(p) <= p.coefficient_l1() + 1e-12


def test_grid_estimate_high_dimension(rng):
    p = TrigPoly(5, {(1, 0, 0, 0, 2): 1.0, (0, 1, 0, 1, 0): 0.5j})
    assert 0 < grid_max_modulus(p) <= 1.5 + 1e-12


def test_potential_range_brackets(spec1, rng):
    lo, hi = potential_range(spec1.v)
    vals = spec1.v.evaluate_real(rng.random((50_000, 3)))
    assert lo <= vals.min() + 1e-9 and vals.max() <= hi + 1e-9
    assert hi - vals.max() < 0.05 and vals.min() - lo < 0.05


# ---- sampling ----------------------------------------------------------------

def test_sample_rejects_bad_gamma():
    with pytest.raises(InvalidArgument):
        sample_random_spec(1, gamma=0.0)
    with pytest.raises(InvalidArgument):
        sample_random_spec(1, d=2)


def test_sample_deterministic():
    a, b = sample_random_spec(42), sample_random_spec(42)
    assert dumps_spec(a) == dumps_spec(b)
    wa, wb = assemble_window(a, (0, 40)), assemble_window(b, (0, 40))
    assert np.array_equal(wa.entries, wb.entries)
    assert dumps_spec(sample_random_spec(43)) != dumps_spec(a)


def test_sample_seed1_admissible(spec1):
    assert spec1.violations() == []
    for k, phi in spec1.hopping.phis.items():
        assert sup_norm_estimate(phi) < spec1.gamma * math.exp(-k)


@pytest.mark.parametrize("seed,C1,d", [(0, 1.0, 3), (3, 1.5, 4), (9, 2.0, 3), (5, 3.0, 5)])
def test_degree_cap_exact(seed, C1, d):
    spec = sample_random_spec(seed, d=d, C1=C1, K_max=12)
    for k, phi in spec.hopping.phis.items():
        assert phi.degree < max(1, k**C1)
    assert spec.violations() == []


def test_v_real_nonconstant(spec1):
    assert spec1.v.real and spec1.v.is_conjugate_symmetric() and not spec1.v.is_constant()


def test_violation_constant_v(spec1):
    s = OperatorSpec(3, spec1.omega, TrigPoly(3, {(0, 0, 0): 1.0}, True), spec1.hopping, spec1.x0)
    assert any(v.startswith("v nonconstant") for v in s.violations())


def test_violation_names_phi5(spec1):
    phis = dict(spec1.hopping.phis)
    phis[5] = phis[5].scaled(2.0)
    v = with_hopping(spec1, phis).violations()
    assert len(v) == 1 and "phi_5" in v[0] and f"{spec1.gamma * math.exp(-5):.6g}" in v[0]


def test_violation_degree():
    spec = sample_random_spec(2)
    phis = dict(spec.hopping.phis)
    phis[1] = TrigPoly(3, {(1, 0, 0): 1e-6})
    v = with_hopping(spec, phis).violations()
    assert any("phi_1 has degree 1" in s for s in v)


# ---- entries and windows ------------------------------------------------------

def test_entries_hopping_empty():
    spec = bare_spec(cos_x1())
    assert matrix_entry(spec, 0, 0) == 1.0
    assert matrix_entry(spec, 2, 5) == 0 and matrix_entry(spec, 9, 1) == 0


def test_entry_hermitian(spec1):
    assert matrix_entry(spec1, 3, 7) == matrix_entry(spec1, 7, 3).conjugate()


def test_entry_beyond_range(spec1):
    assert matrix_entry(spec1, 0, spec1.hopping.K_max + 1) == 0


def test_entries_agree_with_window(spec1):
    w = assemble_window(spec1, (-10, 30), 0.0)
    for m, n in [(-10, -10), (0, 3), (5, -4), (30, 29), (12, 12), (-3, 17)]:
        assert w.entries[m + 10, n + 10] == matrix_entry(spec1, m, n)


def test_single_site_window(spec1):
    w = assemble_window(spec1, (0, 0))
    assert w.entries.shape == (1, 1)
    assert w.entries[0, 0] == eval_trig_poly(spec1.v, spec1.x0)


def test_zero_window_at_own_energy():
    spec = bare_spec(cos_x1(), x0=TorusPoint.from_floats([0.1, 0.2, 0.3]))
    E = eval_trig_poly(spec.v, spec.x0)
    assert np.all(assemble_window(spec, (0, 0), E).entries == 0)


def test_window_size_guard(spec1):
    with pytest.raises(ResourceLimit):
        assemble_window(spec1, (0, 4097))
    with pytest.raises(InvalidArgument):
        assemble_window(spec1, (3, 2))


def test_window_helpers(spec1):
    w = assemble_window(spec1, (-5, 20), 0.3)
    sub = w.sub(0, 9)
    assert np.array_equal(sub.entries, assemble_window(spec1, (0, 9), 0.3).entries)
    assert np.allclose(w.shifted(0.0).entries, assemble_window(spec1, (-5, 20), 0.0).entries, atol=1e-15)
    with pytest.raises(InvalidArgument):
        w.sub(-6, 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), a=st.integers(-500, 500), size=st.integers(1, 128),
       E=st.floats(-2, 2))
def test_window_invariants(seed, a, size, E):
    spec = sample_random_spec(seed % 50, K_max=8)
    w = assemble_window(spec, (a, a + size - 1), E)
    A = w.entries
    assert np.array_equal(A, A.conj().T)
    assert np.all(np.diag(A).imag == 0)
    r = np.abs(np.subtract.outer(np.arange(size), np.arange(size)))
    off = r > 0
    assert np.all(np.abs(A[off]) <= 2 * spec.gamma * np.exp(-r[off].astype(float)))
    shifted = assemble_window(spec, (a + 1, a + size), E)
    moved = assemble_window(spec, (a, a + size - 1), E, skew_step(spec.x0, spec.omega))
    assert np.max(np.abs(shifted.entries - moved.entries)) <= 1e-10


def test_covariance_float_base_point(spec1):
    x = TorusPoint.from_floats([0.3, 0.6, 0.9])
    w1 = assemble_window(spec1, (7, 70), 0.0, x)
    w0 = assemble_window(spec1, (0, 63), 0.0, orbit_closed_form(x.to_fixed(), 7, spec1.omega))
    assert np.max(np.abs(w1.entries - w0.entries)) <= 1e-10


def test_spectrum_real(spec1):
    A = assemble_window(spec1, (0, 99)).entries
    assert np.abs(np.linalg.eigvals(A).imag).max() < 1e-9
