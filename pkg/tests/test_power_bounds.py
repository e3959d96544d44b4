import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specsysid._validation import NumericalOverflowError
from specsysid.power_bounds import (
    AS_PRINTED,
    binomial_sum_bound,
    block_bounds,
    certificate,
    discrepancy_terms,
    exact_power_norms,
    geometric_sum_bound,
    global_threshold,
    log_power_norms,
    lower_bound_witness,
    operator_norm_bound,
    per_block_threshold,
    power_shift_bound,
)
from specsysid.spectral import build_structured, decompose, jordan_block, structured_decomposition

# ||J_m(lam)^k||_2 evaluated with mpmath at 40 digits
HIGH_PRECISION_NORMS = [
    (0.5, 2, 3, 0.77028470752104742),
    (0.7, 3, 5, 3.8308458444500161),
    (0.9, 3, 10, 20.13561646922287),
    (0.9, 4, 40, 201.33421590238396),
    (0.9, 2, 28, 1.6298730905118495),
    (0.99, 6, 3567, 1.3604426816100076),
]


@pytest.mark.parametrize("lam,m,k,expected", HIGH_PRECISION_NORMS)
def test_exact_norms_against_high_precision(lam, m, k, expected):
    norms = exact_power_norms(jordan_block(lam, m), k)
    assert norms[-1] == pytest.approx(expected, rel=1e-10)


def test_exact_norms_small_jordan():
    norms = exact_power_norms(jordan_block(0.5, 2), 2)
    assert norms[0] == pytest.approx((1 + math.sqrt(2)) / 2, rel=1e-14)
    assert norms[1] == pytest.approx(1.0590169943749475, rel=1e-13)


def test_log_power_norms_survive_large_growth():
    A = 3.0 * np.eye(2)
    logs = log_power_norms(A, 800)
    assert logs[-1] == pytest.approx(800 * math.log(3.0), rel=1e-12)
    with pytest.raises(NumericalOverflowError):
        exact_power_norms(A, 800)


def test_block_bound_values():
    assert binomial_sum_bound(0.5, 2, 1) == pytest.approx(1.5)
    assert geometric_sum_bound(0.5, 2, 1, as_printed=True) == pytest.approx(1 / 3)
    assert geometric_sum_bound(0.5, 2, 1) == pytest.approx(1.5)
    assert power_shift_bound(0.5, 2, 1, as_printed=True) == pytest.approx(1.0)
    assert power_shift_bound(0.5, 2, 1) == pytest.approx(2.0)


def test_nilpotent_block():
    assert binomial_sum_bound(0.0, 3, 1) == 1.0
    assert binomial_sum_bound(0.0, 3, 2) == 4.0
    assert binomial_sum_bound(0.0, 3, 3) == 0.0
    b = block_bounds(0.0, 3, 2)
    assert b["geometric_corrected"] == b["binomial_sum"]


def test_bounds_reject_unstable():
    with pytest.raises(ValueError):
        geometric_sum_bound(1.0, 2, 3)
    with pytest.raises(ValueError):
        power_shift_bound(0.0, 2, 3)
    assert math.isnan(block_bounds(1.2, 2, 3)["geometric_corrected"])


def test_printed_fractions_undershoot():
    exact = exact_power_norms(jordan_block(0.5, 2), 1)[0]
    assert geometric_sum_bound(0.5, 2, 1, as_printed=True) < exact
    assert power_shift_bound(0.5, 2, 1, as_printed=True) < exact


@given(
    lam=st.floats(0.05, 0.995),
    m=st.integers(1, 6),
    k=st.integers(1, 300),
    phase=st.floats(0, 2 * math.pi),
)
def test_sound_bounds_dominate_exact_norm(lam, m, k, phase):
    z = lam * complex(math.cos(phase), math.sin(phase))
    exact = exact_power_norms(jordan_block(z, m), k)[-1]
    b = block_bounds(z, m, k)
    for name in ("binomial_sum", "geometric_corrected", "power_shift_corrected"):
        assert b[name] >= exact * (1 - 1e-9), name


def test_discrepancy_crossover():
    # the Jordan term dominates for small k, the slower scalar mode from k = 4 on
    blocks = [(0.5, 2), (0.95, 1)]
    dec = structured_decomposition(blocks)
    for k in range(1, 4):
        t = discrepancy_terms(dec, k)
        assert t[0] > t[1]
    for k in range(4, 30):
        t = discrepancy_terms(dec, k)
        assert t[1] > t[0]


def test_operator_norm_bound_printed_and_corrected():
    dec = structured_decomposition([(0.5, 2)])
    assert operator_norm_bound(dec) == pytest.approx(1 / 3)
    assert operator_norm_bound(dec, as_printed=False) == pytest.approx(1.5)
    assert operator_norm_bound(dec, as_printed=False) >= np.linalg.norm(jordan_block(0.5, 2), 2)


@pytest.mark.parametrize("lam,m,expected", [(0.5, 2, 5), (0.5, 1, 1), (0.9, 2, 44)])
def test_per_block_threshold_values(lam, m, expected):
    assert per_block_threshold(lam, m) == expected


@given(lam=st.floats(0.01, 0.999), m=st.integers(1, 8))
def test_per_block_threshold_is_smallest_solution(lam, m):
    k = per_block_threshold(lam, m)
    a = math.log(1 / lam)

    def rhs(j):
        return math.log(m) / a + (m - 1) * math.log(j) / a + (m - 1)

    assert k > rhs(k)
    assert k == 1 or not (k - 1 > rhs(k - 1))


@given(lam=st.floats(0.05, 0.97), m=st.integers(2, 5))
def test_power_norm_below_one_after_sound_threshold(lam, m):
    k = per_block_threshold(lam, m)
    norms = exact_power_norms(jordan_block(lam, m), k + 10)
    assert np.all(norms[k - 1:] < 1.0)


def test_global_threshold_mixed():
    A = build_structured([(0.5, 2), (0.7, 3)])
    res = global_threshold(decompose(A), A=A)
    assert (res.k_hat, res.sound_k) == (25, 23)
    assert res.verified and not res.failures
    assert res.gamma == pytest.approx(4 * math.log(5) / math.log(1 / 0.7))


def test_global_threshold_counterexample():
    # closed-form horizon is too short for a slow size-2 block
    A = jordan_block(0.9, 2)
    res = global_threshold(decompose(A), A=A)
    assert res.k_hat == 27
    assert res.verified is False
    assert res.failures[0][0] == 28
    assert res.failures[0][1] == pytest.approx(1.6298730905118495, rel=1e-10)
    norms = exact_power_norms(A, res.sound_k + 5)
    assert np.all(norms[res.sound_k - 1:] < 1)


def test_global_threshold_diagonal():
    res = global_threshold(decompose(np.diag([0.5, 0.3])), A=np.diag([0.5, 0.3]))
    assert res.k_hat == 1 and res.verified


def test_global_threshold_unstable():
    with pytest.raises(ValueError, match="unstable"):
        global_threshold(decompose(jordan_block(1.0, 2)))


@pytest.mark.parametrize("n,rho,expected", [(3, 0.9, 2.212713266557599), (2, 0.5, 1.118033988749895)])
def test_witness_values(n, rho, expected):
    w = lower_bound_witness(n, rho)
    assert w.norm == pytest.approx(expected, rel=1e-12)
    direct = np.linalg.norm(np.linalg.matrix_power(jordan_block(rho, n), n - 1) @ w.vector)
    assert direct == pytest.approx(w.norm, rel=1e-12)


@given(n=st.integers(2, 60), rho=st.floats(0.01, 0.999))
def test_witness_exceeds_one(n, rho):
    assert lower_bound_witness(n, rho).norm > 1.0


def test_certificate_contents():
    cert = certificate(blocks=[(0.5, 2), (0.3, 1)], K=12)
    assert cert.horizon == 12 and len(cert.exact_norms) == 12
    assert not cert.sound_violations()
    printed = {v["bound"] for v in cert.violations}
    assert printed <= set(AS_PRINTED) and printed
    recs = cert.to_records()
    assert len(recs) == 12 * len(cert.bounds)


def test_certificate_unstable_keeps_exact_norms():
    cert = certificate(np.array([[1.1]]), K=5)
    np.testing.assert_allclose(cert.exact_norms, 1.1 ** np.arange(1, 6))
    assert cert.threshold is None
