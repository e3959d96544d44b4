import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsysid._validation import RankDeficientError
from specsysid.covariance import (
    build_sigma,
    exact_trace,
    expected_distance,
    frobenius_closed_form,
    frobenius_formula,
    frobenius_slope,
    moment_norm_bounds,
    orthonormal_complement_projector,
    trace_formulas,
)
from specsysid.simulation import covariate_variance

lams = st.floats(0.05, 0.95) | st.floats(-0.95, -0.05)


def test_sigma_small_by_hand():
    S = build_sigma(3, 0.5).matrix
    expected = np.array([[1.0, 0.5, 0.25], [0.5, 1.25, 0.625], [0.25, 0.625, 1.3125]])
    np.testing.assert_allclose(S, expected, rtol=1e-15)
    assert float(np.sum(S**2)) == pytest.approx(5.69140625, rel=1e-15)
    assert exact_trace(3, 0.5) == pytest.approx(3.5625, rel=1e-15)


def test_sigma_matches_simulation_covariance():
    # E[x x^T] from the explicit moving-average representation
    N, lam = 6, -0.7
    T = np.tril(lam ** np.subtract.outer(np.arange(N), np.arange(N)).clip(0))
    T = np.where(np.subtract.outer(np.arange(N), np.arange(N)) >= 0, T, 0.0)
    np.testing.assert_allclose(build_sigma(N, lam).matrix, T @ T.T, rtol=1e-13)


@given(N=st.integers(1, 80), lam=lams)
def test_trace_matches_variances(N, lam):
    S = build_sigma(N, lam)
    assert S.trace == pytest.approx(exact_trace(N, lam), rel=1e-12)
    assert S.matrix[-1, -1] == pytest.approx(covariate_variance(lam, 1, N), rel=1e-12)
    assert S.min_eigenvalue() > 0


@given(N=st.integers(1, 60), lam=lams)
def test_sqrt_squares_back(N, lam):
    S = build_sigma(N, lam)
    R = S.sqrt()
    np.testing.assert_allclose(R @ R, S.matrix, atol=1e-10 * S.trace)


def test_trace_slope_approaches_stationary_variance():
    lam = 0.5
    slope = exact_trace(401, lam) - exact_trace(400, lam)
    assert slope == pytest.approx(1 / (1 - lam**2), rel=1e-12)


def test_stated_trace_bracket_reported_invalid():
    rep = trace_formulas(100, 0.5)
    assert rep.c1 == pytest.approx(4 / math.log(4))
    assert rep.stationary_slope == pytest.approx(4 / 3)
    assert not rep.valid
    assert rep.lower > rep.exact


def test_frobenius_closed_form_small_n_gap():
    assert frobenius_closed_form(1, 0.5) == pytest.approx(3413 / 864, rel=1e-14)
    rep = frobenius_formula(1, 0.5, fit=False)
    assert rep.direct == 1.0
    assert rep.fitted_slope is None


def test_frobenius_closed_form_large_n():
    rep = frobenius_formula(200, 0.5)
    assert rep.relative_gap < 0.01
    assert rep.fitted_slope == pytest.approx(frobenius_slope(0.5), rel=1e-10)


@given(lam=st.floats(0.1, 0.8))
def test_frobenius_slope_property(lam):
    rep = frobenius_formula(150, lam)
    assert rep.fitted_slope == pytest.approx(rep.slope, rel=1e-8)


@given(N=st.integers(2, 40), lam=lams, k=st.integers(1, 8))
def test_moment_norm_brackets(N, lam, k):
    S = build_sigma(N, lam)
    top = float(np.linalg.eigvalsh(S.matrix)[-1])
    for lo, hi in moment_norm_bounds(S, k):
        assert lo <= top * (1 + 1e-10) and top <= hi * (1 + 1e-10)


def test_moment_brackets_tighten():
    b = moment_norm_bounds(build_sigma(30, 0.8), 40)
    assert b[-1][1] - b[-1][0] < b[0][1] - b[0][0]


def test_complement_projector():
    P = orthonormal_complement_projector(np.array([1.0, 0.0, 0.0]), 3)
    np.testing.assert_allclose(P, np.diag([0.0, 1.0, 1.0]))
    np.testing.assert_allclose(orthonormal_complement_projector(np.zeros((4, 0)), 4), np.eye(4))
    with pytest.raises(RankDeficientError):
        orthonormal_complement_projector(np.ones((3, 2)), 3)
    with pytest.raises(ValueError):
        orthonormal_complement_projector(np.eye(3), 3)


@given(N=st.integers(3, 40), dim=st.integers(0, 2), seed=st.integers(0, 1000), lam=lams)
def test_expected_distance_below_cap(N, dim, seed, lam):
    V = np.random.default_rng(seed).standard_normal((N, dim))
    val, cap = expected_distance(build_sigma(N, lam), V)
    assert 0 <= val <= cap * (1 + 1e-12)


def test_lambda_validation():
    for bad in (0.0, 1.0, -1.5):
        with pytest.raises(ValueError):
            build_sigma(5, bad)
