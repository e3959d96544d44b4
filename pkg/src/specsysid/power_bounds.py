"""Exact matrix-power norms and the analytic bounds on them.

Every bound here is stated for one Jordan block ``J_m(lam)`` and lifted to a
whole matrix by taking the maximum over its distinct eigenvalues, which is
valid when the generalized eigenspaces are mutually orthogonal.

Bound names used in certificates
--------------------------------
``binomial_sum``
    ``|lam|^k k^(m-1) sum_{j<m} |lam|^-j``.  Always sound.
``power_shift_as_printed`` / ``power_shift_corrected``
    ``k^(m-1) |lam|^(k+1-m)``, the corrected form carrying an extra factor
    ``m`` from bounding the geometric sum by ``m`` times its largest term.
``geometric_as_printed`` / ``geometric_corrected``
    ``k^(m-1) |lam|^k (1-|lam|)/(1-|lam|^m)`` as printed, and the closed
    geometric sum ``k^(m-1) |lam|^(k-m+1) (1-|lam|^m)/(1-|lam|)``, which equals
    ``binomial_sum``.  The printed fraction is upside down and can fall below
    the exact norm.
``discrepancy_max`` / ``discrepancy_max_as_printed``
    Max over distinct eigenvalues of the geometric bound with the block size
    replaced by ``discrepancy + 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._validation import NumericalOverflowError, check_positive_int, check_square_matrix
from .spectral import (
    SpectralDecomposition,
    build_structured,
    decompose,
    structured_decomposition,
)

BOUND_NAMES = (
    "binomial_sum",
    "power_shift_as_printed",
    "power_shift_corrected",
    "geometric_as_printed",
    "geometric_corrected",
    "discrepancy_max",
    "discrepancy_max_as_printed",
)
AS_PRINTED = ("power_shift_as_printed", "geometric_as_printed", "discrepancy_max_as_printed")
VIOLATION_RTOL = 1e-9
_LOG_MAX = math.log(np.finfo(float).max)


def log_power_norms(A, K):
    """``log ||A^k||_2`` for ``k = 1..K`` (``-inf`` once the power vanishes).

    Powers are accumulated by repeated multiplication with the running product
    rescaled to unit max-entry at every step, so neither underflow nor
    overflow occurs for any ``K``.
    """
    A = check_square_matrix(A)
    K = check_positive_int(K, "K")
    out = np.full(K, -np.inf)
    M = np.eye(A.shape[0], dtype=complex)
    log_scale = 0.0
    for k in range(K):
        M = M @ A
        c = float(np.max(np.abs(M)))
        if c == 0.0:
            break
        M /= c
        log_scale += math.log(c)
        out[k] = math.log(np.linalg.norm(M, 2)) + log_scale
    return out


def exact_power_norms(A, K):
    """``||A^k||_2`` for ``k = 1..K`` via the largest singular value of ``A^k``.

    Raises
    ------
    NumericalOverflowError
        When a norm exceeds the float range; ``last_finite`` holds the last
        representable ``k``.
    """
    logs = log_power_norms(A, K)
    over = np.nonzero(logs > _LOG_MAX)[0]
    if over.size:
        k = int(over[0])
        raise NumericalOverflowError(
            f"||A^k|| overflows at k={k + 1}; last finite k={k}", last_finite=k
        )
    return np.exp(logs)


def _check_stable_block(lam):
    r = abs(complex(lam))
    if not 0.0 < r < 1.0:
        raise ValueError(f"bound requires 0 < |lambda| < 1, got |lambda| = {r:.6g}")
    return r


def binomial_sum_bound(lam, m, k):
    """``|lam|^k k^(m-1) sum_{j=0}^{m-1} |lam|^-j``; nilpotent case handled exactly."""
    m = check_positive_int(m, "m")
    k = check_positive_int(k, "k")
    r = abs(complex(lam))
    if r == 0.0:
        return float(k ** (m - 1)) if k < m else 0.0
    log_sum = logsumexp(-np.arange(m) * math.log(r))
    return math.exp(min(k * math.log(r) + (m - 1) * math.log(k) + log_sum, _LOG_MAX))


def geometric_sum_bound(lam, m, k, as_printed=False):
    """Geometric-series form of the block bound (see module notes)."""
    m = check_positive_int(m, "m")
    k = check_positive_int(k, "k")
    r = _check_stable_block(lam)
    if as_printed:
        val = (m - 1) * math.log(k) + k * math.log(r) + math.log((1 - r) / (1 - r**m))
    else:
        val = (m - 1) * math.log(k) + (k - m + 1) * math.log(r) + math.log((1 - r**m) / (1 - r))
    return math.exp(min(val, _LOG_MAX))


def power_shift_bound(lam, m, k, as_printed=False):
    """``k^(m-1) |lam|^(k+1-m)``, times ``m`` unless ``as_printed``."""
    m = check_positive_int(m, "m")
    k = check_positive_int(k, "k")
    r = _check_stable_block(lam)
    val = (m - 1) * math.log(k) + (k + 1 - m) * math.log(r)
    if not as_printed:
        val += math.log(m)
    return math.exp(min(val, _LOG_MAX))


def discrepancy_terms(dec: SpectralDecomposition, k, as_printed=False):
    """Per distinct eigenvalue, the geometric bound with block size ``D + 1``."""
    k = check_positive_int(k, "k")
    out = []
    for e in dec.eigen:
        size = e.discrepancy + 1
        if abs(e.value) == 0.0:
            out.append(binomial_sum_bound(0.0, size, k))
        else:
            out.append(geometric_sum_bound(e.value, size, k, as_printed=as_printed))
    return out


def discrepancy_bound(dec: SpectralDecomposition, k, as_printed=False):
    """Max over distinct eigenvalues of :func:`discrepancy_terms`."""
    return max(discrepancy_terms(dec, k, as_printed=as_printed))


def operator_norm_bound(dec: SpectralDecomposition, as_printed=True):
    """The ``k = 1`` case of :func:`discrepancy_bound`, a bound on ``||A||_2``."""
    return discrepancy_bound(dec, 1, as_printed=as_printed)


def per_block_threshold(lam, m, cap=10**6):
    """Smallest integer ``k`` with ``k > (ln m + (m-1) ln k) / ln(1/|lam|) + (m-1)``.

    Iterates ``k <- floor(RHS(k)) + 1`` from ``k = m``; since the right-hand
    side is increasing in ``k`` and the start lies below the solution set,
    the iterates increase monotonically onto the smallest solution.
    """
    m = check_positive_int(m, "m")
    r = _check_stable_block(lam)
    a = math.log(1.0 / r)

    def rhs(k):
        return math.log(m) / a + (m - 1) * math.log(k) / a + (m - 1)

    k = m
    for _ in range(cap):
        nxt = math.floor(rhs(k)) + 1
        if nxt <= k:
            return k if k > rhs(k) else k + 1
        k = nxt
    raise NumericalOverflowError(f"threshold iteration did not settle within {cap} steps")


@dataclass(frozen=True)
class ThresholdResult:
    """Horizon beyond which the power norm is claimed to stay below one.

    ``k_hat`` is the closed-form ``max_i ceil(4 (m_i - 1) ln m_i / ln(1/|l_i|))``;
    ``sound_k`` is the maximum of the :func:`per_block_threshold` values, which
    follows from the (sound) corrected power-shift bound.  ``failures`` lists
    ``(k, ||A^k||)`` pairs in ``k_hat < k <= k_hat + check_span`` where the
    claim fails.
    """

    k_hat: int
    gamma: float
    sound_k: int
    verified: bool | None = None
    failures: tuple = ()
    warnings: tuple[str, ...] = ()


def global_threshold(dec: SpectralDecomposition, A=None, check_span=10, defect_tol=1e-8):
    """Closed-form power-norm threshold for a stable matrix.

    When ``A`` is given the claim ``||A^k|| < 1`` is checked against exact
    norms for ``k_hat < k <= k_hat + check_span``.
    """
    notes = []
    for e in dec.eigen:
        if abs(e.value) >= 1.0:
            raise ValueError(f"unstable eigenvalue {e.value} (|lambda| = {abs(e.value):.6g})")
    if dec.orthogonality_defect > defect_tol:
        notes.append(
            f"orthogonality defect {dec.orthogonality_defect:.3e} exceeds {defect_tol:.0e};"
            " cross terms do not cancel"
        )
    terms, sound = [], []
    for i, e in enumerate(dec.eigen):
        m = dec.largest_block(i)
        r = abs(e.value)
        if m == 1:
            terms.append(1.0)
        elif r == 0.0:
            terms.append(0.0)
        else:
            terms.append(4 * (m - 1) * math.log(m) / math.log(1 / r))
        if r == 0.0:
            sound.append(m)
        else:
            sound.append(per_block_threshold(e.value, m))
    k_hat = max(1, math.ceil(max(terms) - 1e-12))
    n = dec.n
    rho = dec.spectral_radius
    gamma = 0.0 if n == 1 or rho == 0.0 else (n - 1) * math.log(n) / math.log(1 / rho)
    verified, failures = None, ()
    if A is not None:
        norms = exact_power_norms(A, k_hat + check_span)
        failures = tuple(
            (k, float(norms[k - 1])) for k in range(k_hat + 1, k_hat + check_span + 1)
            if norms[k - 1] >= 1.0
        )
        verified = not failures
    return ThresholdResult(k_hat, gamma, max(sound), verified, failures, tuple(notes))


@dataclass(frozen=True)
class Witness:
    vector: np.ndarray
    norm: float


def lower_bound_witness(n, rho):
    """``e_n`` together with ``||J_n(rho)^(n-1) e_n||``, which always exceeds one.

    The norm is ``sqrt(sum_m binom(n-1, m)^2 rho^(2(n-1-m)))``, evaluated in
    log space.
    """
    n = check_positive_int(n, "n", minimum=2)
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    p = n - 1
    logs = [
        2 * (math.lgamma(p + 1) - math.lgamma(m + 1) - math.lgamma(p - m + 1))
        + 2 * (p - m) * math.log(rho)
        for m in range(n)
    ]
    norm = math.exp(0.5 * logsumexp(logs))
    if not norm > 1.0:
        raise ArithmeticError(f"witness norm {norm} does not exceed one")
    e = np.zeros(n)
    e[-1] = 1.0
    return Witness(e, norm)


def _block_list(dec: SpectralDecomposition):
    return [(e.value, dec.largest_block(i)) for i, e in enumerate(dec.eigen)]


def block_bounds(lam, m, k):
    """All single-block bounds at one ``(lam, m, k)``; NaN where undefined."""
    out = {"binomial_sum": binomial_sum_bound(lam, m, k)}
    stable = 0.0 < abs(complex(lam)) < 1.0
    for name, fn in (("power_shift", power_shift_bound), ("geometric", geometric_sum_bound)):
        for printed in (True, False):
            key = f"{name}_{'as_printed' if printed else 'corrected'}"
            if stable:
                out[key] = fn(lam, m, k, as_printed=printed)
            elif abs(complex(lam)) == 0.0:
                out[key] = out["binomial_sum"]
            else:
                out[key] = float("nan")
    return out


@dataclass
class PowerNormCertificate:
    """Exact power norms of a matrix next to every analytic bound."""

    horizon: int
    exact_norms: np.ndarray
    bounds: dict
    eigen: list
    per_block_thresholds: list
    threshold: ThresholdResult | None
    operator_norm_bounds: dict
    orthogonality_defect: float
    violations: list = field(default_factory=list)

    def sound_violations(self):
        return [v for v in self.violations if v["bound"] not in AS_PRINTED]

    def to_records(self):
        recs = []
        for name, vals in self.bounds.items():
            for k, (b, x) in enumerate(zip(vals, self.exact_norms), start=1):
                recs.append({"k": k, "bound": name, "value": float(b), "exact": float(x)})
        return recs


def certificate(A=None, K=10, dec=None, blocks=None, basis=None):
    """Assemble a :class:`PowerNormCertificate` for ``A`` (or a block description)."""
    if blocks is not None:
        A = build_structured(blocks, basis)
        dec = structured_decomposition(blocks, basis)
    A = check_square_matrix(A)
    K = check_positive_int(K, "K")
    if dec is None:
        dec = decompose(A)
    exact = exact_power_norms(A, K)
    blist = _block_list(dec)
    stable = all(abs(lam) < 1.0 for lam, _ in blist)
    bounds = {name: np.zeros(K) for name in BOUND_NAMES}
    for k in range(1, K + 1):
        per = [block_bounds(lam, m, k) for lam, m in blist]
        for name in BOUND_NAMES[:5]:
            bounds[name][k - 1] = max(p[name] for p in per)
        if stable:
            bounds["discrepancy_max"][k - 1] = discrepancy_bound(dec, k)
            bounds["discrepancy_max_as_printed"][k - 1] = discrepancy_bound(dec, k, as_printed=True)
        else:
            bounds["discrepancy_max"][k - 1] = np.nan
            bounds["discrepancy_max_as_printed"][k - 1] = np.nan
    violations = []
    for name, vals in bounds.items():
        for k in range(K):
            if np.isfinite(vals[k]) and vals[k] < exact[k] * (1 - VIOLATION_RTOL):
                violations.append(
                    {"k": k + 1, "bound": name, "value": float(vals[k]), "exact": float(exact[k])}
                )
    thresholds = []
    for lam, m in blist:
        r = abs(lam)
        thresholds.append(per_block_threshold(lam, m) if 0.0 < r < 1.0 else None)
    threshold = None
    op = {}
    if stable:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            threshold = global_threshold(dec, A)
        op = {
            "as_printed": operator_norm_bound(dec, as_printed=True),
            "corrected": operator_norm_bound(dec, as_printed=False),
            "exact": float(exact[0]),
        }
    return PowerNormCertificate(
        horizon=K,
        exact_norms=exact,
        bounds=bounds,
        eigen=dec.summary(),
        per_block_thresholds=thresholds,
        threshold=threshold,
        operator_norm_bounds=op,
        orthogonality_defect=dec.orthogonality_defect,
        violations=violations,
    )
