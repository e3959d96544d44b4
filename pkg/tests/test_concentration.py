import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsysid.concentration import (
    CHUNK,
    arma_covariance_mc,
    covariate_variance_bounds,
    curse_of_dim_sweep,
    distance_mc,
    littlewood_offord,
    max_atom_enumeration,
    max_atom_integer,
    run_chunks,
    scalar_first_row_variance,
    sigma1_mc,
    talagrand_constant,
)
from specsysid.covariance import exact_trace
from specsysid.simulation import log_covariate_variance
from specsysid.spectral import jordan_block


def _normal(rng, size):
    return rng.standard_normal(size)


def test_chunking_independent_of_jobs():
    a = run_chunks(_normal, 2 * CHUNK + 17, seed=4, jobs=1)
    b = run_chunks(_normal, 2 * CHUNK + 17, seed=4, jobs=3)
    np.testing.assert_array_equal(a, b)
    c = run_chunks(_normal, CHUNK + 5, seed=4)
    np.testing.assert_array_equal(a[:CHUNK], c[:CHUNK])


def test_distance_white_mean_and_variance():
    rep = distance_mc(30, 5, 20000, seed=2)
    assert rep.passed
    assert rep.claim("mean").reference == pytest.approx(26.0)
    assert rep.claim("variance").reference == pytest.approx(52.0)
    assert rep.claim("tail_exponent").verdict == "not-asserted"


def test_distance_ar_matches_recursion():
    rep = distance_mc(20, 3, 10000, seed=5, lam=0.7)
    assert rep.claim("ks_recursion_vs_quadratic").verdict == "pass"
    assert rep.claim("mean").verdict == "pass"
    assert rep.claim("mean_below_frobenius_cap").verdict == "pass"


def test_distance_rejects_large_subspace():
    with pytest.raises(ValueError):
        distance_mc(4, 5, 10, seed=0)


def test_sigma1_scalar_second_moment():
    rep = sigma1_mc([[0.5]], 20, 20000, seed=3)
    c = rep.claim("mean_sigma1_squared")
    assert c.reference == pytest.approx(exact_trace(19, 0.5))
    assert c.verdict == "pass"
    assert rep.claim("mean_sigma1_then_squared").verdict == "not-asserted"
    assert rep.passed


def test_sigma1_gaussian_case():
    rep = sigma1_mc(np.zeros((3, 3)), 20, 5000, seed=1)
    assert rep.claim("gaussian_gordon").verdict == "pass"
    assert rep.claim("cap_violations").value == 0
    assert not any(c.verdict == "fail" for c in rep.claims)


def test_sigma1_jordan_tails():
    rep = sigma1_mc(jordan_block(0.5, 2), 15, 5000, seed=8)
    for d in (1, 2, 3):
        c = rep.claim(f"tail_delta_{d}")
        assert c.value <= c.reference


def test_talagrand_regimes():
    val, regime = talagrand_constant(jordan_block(0.5, 2), 5)
    assert regime == "norm-unstable"
    assert val == pytest.approx(((1 + math.sqrt(2)) / 2) ** 5 * 5, rel=1e-12)
    assert talagrand_constant(np.eye(2), 4) == (20.0, "marginal")
    val, regime = talagrand_constant(np.diag([0.5, 0.2]), 4)
    assert (val, regime) == (pytest.approx(4.0), "contractive")


def test_max_atom_ramp_frozen():
    a = list(range(1, 21))
    assert max_atom_integer(a) == 15272 / 2**20
    assert max_atom_enumeration(a) == 15272 / 2**20


@given(a=st.lists(st.integers(-6, 6).filter(bool), min_size=1, max_size=12))
def test_integer_convolution_matches_enumeration(a):
    assert max_atom_integer(a) == pytest.approx(max_atom_enumeration(a), abs=0)


def test_littlewood_offord_equal_weights():
    r = littlewood_offord(np.ones(10), 40000, seed=0)
    assert r.method == "central-binomial"
    assert r.exact == math.comb(10, 5) / 1024
    assert r.within


def test_littlewood_offord_ramp_and_real():
    r = littlewood_offord(np.arange(1, 13), 40000, seed=1)
    assert r.method == "integer-convolution" and r.within
    r = littlewood_offord(np.array([0.5, 1.25, 2.0, 3.1]), 20000, seed=2)
    assert r.method == "enumeration" and r.within
    with pytest.raises(ValueError):
        littlewood_offord(np.array([1.0, 0.0]), 10, seed=0)


@given(lam=st.floats(0.51, 0.95), n=st.integers(1, 12), i=st.integers(1, 80))
def test_covariate_variance_sandwich(lam, n, i):
    lo, hi = covariate_variance_bounds(lam, n, i)
    lv = log_covariate_variance(lam, n, i)
    assert lo <= lv + 1e-10 * max(1, abs(lv))
    assert lv <= hi + 1e-10 * max(1, abs(lv))


def test_curse_sweep_growth():
    rep = curse_of_dim_sweep(0.6, range(2, 12), 60)
    assert rep.claim("sandwich_violations").value == 0
    base = rep.details["fitted_base"]
    assert base >= 4 * 0.6**2
    assert rep.claim("std_base").verdict == "not-asserted"
    with pytest.raises(ValueError):
        curse_of_dim_sweep(0.4, [2, 3], 10)


def test_scalar_first_row_variance():
    assert scalar_first_row_variance(0.5, 4) == pytest.approx(exact_trace(3, 0.5))


def test_arma_covariance_mc_band():
    emp, exact, dev = arma_covariance_mc(8, 0.8, 40000, seed=6)
    assert dev <= 5 / math.sqrt(40000)
    assert emp.shape == exact.shape == (8, 8)
