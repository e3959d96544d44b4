import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from specsysid.spectral import (
    EigenBlockSpec,
    build_structured,
    decompose,
    invariant_residuals,
    jordan_block,
    jordan_power_action,
    lyapunov_residual,
    random_orthogonal,
    random_unitary,
    restrict,
    solve_lyapunov,
    structured_decomposition,
)


def test_diagonal_build():
    A = build_structured([(0.5, 1), (0.3, 1)])
    np.testing.assert_array_equal(A, np.diag([0.5, 0.3]))


def test_single_block_is_jordan():
    A = build_structured([(0.7, 4)])
    expected = 0.7 * np.eye(4) + np.eye(4, k=1)
    np.testing.assert_array_equal(A, expected)


def test_defective_block_has_one_eigenvector():
    A = build_structured([EigenBlockSpec(0.5, 2)])
    np.testing.assert_array_equal(A, [[0.5, 1], [0, 0.5]])
    s = np.linalg.svd(A - 0.5 * np.eye(2), compute_uv=False)
    assert int(np.sum(s > 1e-12)) == 1


def test_dict_block_spec():
    A = build_structured([{"lambda": [0.1, 0.2], "size": 2}])
    assert A[0, 0] == 0.1 + 0.2j and A[0, 1] == 1


def test_build_rejects_bad_basis():
    with pytest.raises(ValueError, match="not unitary"):
        build_structured([(0.5, 2)], basis=np.array([[1.0, 0.0], [0.0, 2.0]]))
    with pytest.raises(ValueError, match="dimension"):
        build_structured([(0.5, 2)], basis=np.eye(3))


def test_decompose_diagonal():
    dec = decompose(np.diag([0.5, 0.3]))
    assert len(dec.eigen) == 2
    assert all(e.discrepancy == 0 for e in dec.eigen)
    np.testing.assert_allclose(sum(dec.projections), np.eye(2), atol=1e-14)


def test_decompose_single_jordan_block():
    dec = decompose(jordan_block(0.9, 3))
    (e,) = dec.eigen
    assert abs(e.value - 0.9) < 1e-6
    assert (e.algebraic, e.geometric, e.discrepancy) == (3, 1, 2)


def test_decompose_mixed_blocks():
    A = build_structured([(0.5, 2), (0.3, 1)])
    dec = decompose(A)
    got = {round(e.value.real, 6): (e.algebraic, e.geometric, e.discrepancy) for e in dec.eigen}
    assert got == {0.5: (2, 1, 1), 0.3: (1, 1, 0)}
    assert dec.orthogonality_defect <= 1e-10


def test_oblique_subspaces_report_defect():
    # upper-triangular coupling makes the two eigenvectors non-orthogonal
    A = np.array([[0.5, 1.0], [0.0, 0.3]])
    dec = decompose(A)
    assert dec.orthogonality_defect > 0.1
    res = invariant_residuals(A, dec)
    assert res["spectral_projection_sum"] < 1e-12
    assert res["projection_sum"] > 0.1


def test_restrict_diagonal():
    A = np.diag([0.5, 0.3])
    dec = decompose(A)
    np.testing.assert_allclose(restrict(A, dec, 0.5), np.diag([0.5, 0.0]), atol=1e-14)
    with pytest.raises(ValueError):
        restrict(A, dec, 0.9)


def test_restrict_mixed_pads_block():
    A = build_structured([(0.5, 2), (0.3, 1)])
    dec = structured_decomposition([(0.5, 2), (0.3, 1)])
    expected = np.zeros((3, 3))
    expected[:2, :2] = [[0.5, 1.0], [0.0, 0.5]]
    np.testing.assert_allclose(restrict(A, dec, 0.5), expected, atol=1e-14)


def test_restrict_power_norms_match():
    A = jordan_block(0.9, 3)
    dec = decompose(A)
    R = restrict(A, dec, dec.eigenvalues[0])
    for k in range(1, 11):
        a = np.linalg.norm(np.linalg.matrix_power(R, k), 2)
        b = np.linalg.norm(np.linalg.matrix_power(A, k), 2)
        assert a == pytest.approx(b, rel=1e-8)


def test_jordan_power_action_examples():
    np.testing.assert_allclose(jordan_power_action(0.9, 3, 2, 3), [0.81, 1.8, 1.0])
    np.testing.assert_allclose(jordan_power_action(0.9, 3, 7, 1), [0.9**7])
    np.testing.assert_allclose(jordan_power_action(0.4, 5, 0, 4), [1.0])


@given(m=st.integers(1, 8), k=st.integers(0, 30), lam=st.floats(-1.5, 1.5))
def test_jordan_power_action_matches_matrix_power(m, k, lam):
    P = np.linalg.matrix_power(jordan_block(lam, m), k)
    for j in range(1, m + 1):
        coeffs = jordan_power_action(lam, m, k, j)
        # column j holds the chain coefficients read upward from row j
        col = P[:, j - 1][::-1][m - j:]
        np.testing.assert_allclose(coeffs, col[: len(coeffs)], rtol=1e-10, atol=1e-10)
        assert np.all(np.abs(col[len(coeffs):]) == 0)


def test_lyapunov_scalar_cases():
    assert solve_lyapunov(np.zeros((1, 1)))[0, 0] == pytest.approx(1.0)
    assert solve_lyapunov([[0.5]])[0, 0] == pytest.approx(4.0 / 3.0, rel=1e-14)


def test_lyapunov_jordan_frozen():
    # high-precision series sum
    P = solve_lyapunov(jordan_block(0.5, 2))
    np.testing.assert_allclose(P, [[4 / 3, 8 / 9], [8 / 9, 116 / 27]], rtol=1e-13)
    assert lyapunov_residual(jordan_block(0.5, 2), P) <= 1e-8


def test_lyapunov_matches_scipy():
    A = build_structured([(0.6, 2), (0.2 + 0.5j, 1)], basis=random_unitary(3, 4))
    P = solve_lyapunov(A)
    ref = scipy.linalg.solve_discrete_lyapunov(A.conj().T, np.eye(3))
    np.testing.assert_allclose(P, ref, rtol=1e-10, atol=1e-12)


def test_lyapunov_rejects_unstable():
    with pytest.raises(ValueError, match="spectral radius"):
        solve_lyapunov(jordan_block(1.0, 2))


block_lists = st.lists(
    st.tuples(st.sampled_from([0.9, 0.5, 0.1, -0.3, 0.2 + 0.6j, -0.7j]), st.integers(1, 3)),
    min_size=1, max_size=3, unique_by=lambda b: b[0],
)


@given(blocks=block_lists, seed=st.integers(0, 2**16))
def test_structured_invariants(blocks, seed):
    n = sum(m for _, m in blocks)
    U = random_unitary(n, seed)
    A = build_structured(blocks, basis=U)
    dec = structured_decomposition(blocks, basis=U)
    res = invariant_residuals(A, dec)
    assert res["algebraic_sum"] == n
    assert res["projection_sum"] <= 1e-8
    assert res["idempotence"] <= 1e-8
    assert res["invariance"] <= 1e-8
    assert dec.orthogonality_defect <= 1e-10


@given(blocks=block_lists)
def test_decompose_recovers_structure(blocks):
    A = build_structured(blocks)
    dec = decompose(A)
    got = sorted((round(e.value.real, 6), round(e.value.imag, 6), e.algebraic, e.geometric)
                 for e in dec.eigen)
    want = sorted((round(complex(l).real, 6), round(complex(l).imag, 6), m, 1) for l, m in blocks)
    assert got == want
    res = invariant_residuals(A, dec)
    assert res["projection_sum"] <= 1e-8 and res["invariance"] <= 1e-8


def test_random_orthogonal_is_real_orthogonal():
    Q = random_orthogonal(5, 1)
    assert np.isrealobj(Q)
    np.testing.assert_allclose(Q.T @ Q, np.eye(5), atol=1e-13)
