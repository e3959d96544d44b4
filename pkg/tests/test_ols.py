import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsysid._validation import RankDeficientError
from specsysid.ols import (
    error_sandwiches,
    elementwise_error,
    inverse_cov_constraints,
    negative_second_moment,
    ols_estimate,
    regression_mse_mc,
    row_distances,
    row_support,
)
from specsysid.simulation import simulate
from specsysid.spectral import build_structured, jordan_block

FAMILIES = [
    np.diag([0.9, 0.5, 0.3]),
    jordan_block(0.5, 2),
    jordan_block(0.9, 5),
    build_structured([(0.5, 2), (0.3, 1), (0.8, 2)]),
]


def test_exact_recovery_without_noise_in_estimate():
    # with X_plus = A X_minus exactly, OLS returns A
    rng = np.random.default_rng(0)
    A = jordan_block(0.6, 3)
    Xm = rng.standard_normal((3, 10))
    d = ols_estimate((Xm, A @ Xm, A))
    np.testing.assert_allclose(d.A_hat, A, atol=1e-13)
    assert d.frob_error <= 1e-13


def test_scalar_estimate_by_hand():
    Xm = np.array([[1.0, 2.0]])
    Xp = np.array([[0.5, 1.5]])
    d = ols_estimate((Xm, Xp))
    assert d.A_hat[0, 0] == pytest.approx((0.5 + 3.0) / 5.0)
    assert d.distances[0] == pytest.approx(np.sqrt(5.0))


@pytest.mark.parametrize("A", FAMILIES, ids=["diag", "J2", "J5", "mixed"])
@pytest.mark.parametrize("N", [50, 200])
def test_error_identity_and_sandwiches(A, N):
    b = simulate(A, N, seed=N + A.shape[0])
    d = ols_estimate(b)
    assert abs(d.frob_error - d.identity_error) <= 1e-10 * max(1.0, d.frob_error)
    (lo, hi), (lo2, hi2) = error_sandwiches(b)
    assert lo <= d.frob_error * (1 + 1e-12) and d.frob_error <= hi * (1 + 1e-12)
    assert lo2 <= d.frob_error * (1 + 1e-12) and d.frob_error <= hi2 * (1 + 1e-12)


@given(seed=st.integers(0, 2**31), N=st.integers(6, 80), fam=st.integers(0, 3))
def test_ols_identities_property(seed, N, fam):
    A = FAMILIES[fam]
    if N <= A.shape[0]:
        N = A.shape[0] + 1
    b = simulate(A, N, seed=seed)
    d = ols_estimate(b)
    assert abs(d.frob_error - d.identity_error) <= 1e-9 * max(1.0, d.frob_error)
    error_sandwiches(b)
    rep = inverse_cov_constraints(b)
    assert rep.passed
    assert np.all(rep.off_diagonal_values <= 1e-9)
    walk = elementwise_error(b)
    assert walk.walk_residual <= 1e-8
    assert walk.normal_residual <= 1e-8
    assert walk.null_residual <= 1e-8
    assert walk.frob_squared_expansion == pytest.approx(walk.frob_squared, rel=1e-8, abs=1e-12)


def test_rank_deficient_when_too_short():
    b = simulate(np.eye(3) * 0.5, 2, seed=0)
    with pytest.raises(RankDeficientError) as info:
        ols_estimate(b)
    assert info.value.sigma_min is not None


def test_rank_deficient_duplicate_rows():
    Y = np.vstack([np.arange(5.0), np.arange(5.0)])
    with pytest.raises(RankDeficientError):
        ols_estimate((Y, Y))


def test_row_distances_orthogonal_rows():
    Y = np.array([[3.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    np.testing.assert_allclose(row_distances(Y), [3.0, 2.0])
    Y = np.array([[1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(row_distances(Y), [np.sqrt(0.5), 1.0])


@given(seed=st.integers(0, 2**31), d=st.integers(1, 6), extra=st.integers(0, 20), cplx=st.booleans())
def test_negative_second_moment_identity(seed, d, extra, cplx):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((d, d + extra))
    if cplx:
        Y = Y + 1j * rng.standard_normal(Y.shape)
    lhs, rhs = negative_second_moment(Y)
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_inverse_cov_constraints_on_plain_matrix():
    rep = inverse_cov_constraints(np.random.default_rng(1).standard_normal((4, 30)))
    assert rep.passed and np.all(rep.off_diagonal_values <= 0)


def test_row_support():
    assert row_support(np.diag([0.5, 0.3]), 0) == (0,)
    J = jordan_block(0.5, 3)
    assert row_support(J, 0) == (0, 1, 2)
    assert row_support(J, 2) == (2,)


def test_regression_mse_mc():
    X = np.random.default_rng(5).standard_normal((40, 3))
    mean, se, exact, dist = regression_mse_mc(X, 20000, seed=1)
    assert exact == pytest.approx(dist, rel=1e-10)
    assert abs(mean - exact) <= 4 * se
