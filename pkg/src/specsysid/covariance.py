"""Covariance of a scalar AR(1) trajectory ``x_{i+1} = lam x_i + w_i``, ``x_0 = 0``.

``Sigma[k, j] = E[x_k x_j]`` over the states ``x_1 .. x_N`` (1-based).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import RankDeficientError, check_positive_int, rank_threshold


def _check_lambda(lam):
    lam = float(lam)
    if not 0.0 < abs(lam) < 1.0:
        raise ValueError(f"lambda must satisfy 0 < |lambda| < 1, got {lam}")
    return lam


@dataclass(frozen=True)
class ArmaCovariance:
    N: int
    lam: float
    matrix: np.ndarray

    @property
    def trace(self):
        return float(np.trace(self.matrix))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def sqrt(self):
        """Symmetric square root with tiny negative eigenvalues clipped to zero."""
        w, V = np.linalg.eigh(self.matrix)
        if w[0] < -1e-10 * max(self.trace, 1.0):
            raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
        return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def build_sigma(N, lam):
    N = check_positive_int(N, "N")
    lam = _check_lambda(lam)
    a = lam * lam
    var = np.cumsum(a ** np.arange(N))  # var[j-1] = sum_{t<j} lam^{2t}
    idx = np.arange(N)
    k, j = np.meshgrid(idx, idx, indexing="ij")
    lo = np.minimum(k, j)
    S = lam ** np.abs(k - j) * var[lo]
    S = 0.5 * (S + S.T)
    S.setflags(write=False)
    return ArmaCovariance(N, lam, S)


def exact_trace(N, lam):
    """``sum_{i=1}^{N} i lam^(2(N-i))``."""
    N = check_positive_int(N, "N")
    lam = _check_lambda(lam)
    i = np.arange(1, N + 1)
    return float(np.sum(i * (lam * lam) ** (N - i)))


@dataclass(frozen=True)
class TraceReport:
    exact: float
    lower: float
    upper: float
    c1: float
    c2: float
    c3: float
    stationary_slope: float

    @property
    def valid(self):
        return self.lower <= self.exact <= self.upper


def trace_formulas(N, lam):
    """Exact trace next to the linear-in-``N`` bracket with the stated constants.

    With ``L = ln(lam^-2)``: ``c1 = lam^-2 / L``, ``c2 = lam^-2 / L^2``,
    ``c3 = 1 / L``; lower ``c1 N - c2``, upper ``c1 N - c2 + c1 (1 - c3/N)``.
    The bracket is evaluated as stated and ``valid`` records whether it holds.
    """
    exact = exact_trace(N, lam)
    lam = abs(float(lam))
    inv = lam**-2
    L = math.log(inv)
    c1, c2, c3 = inv / L, inv / L**2, 1.0 / L
    lower = c1 * N - c2
    upper = lower + c1 * (1.0 - c3 / N)
    return TraceReport(exact, lower, upper, c1, c2, c3, 1.0 / (1.0 - lam * lam))


def frobenius_closed_form(N, lam):
    """Multi-term closed form for ``Tr(Sigma^2)``, evaluated exactly as stated."""
    a = float(lam) ** 2
    term1 = 4 * N * a ** (N + 1) / (1 - a) ** 3
    term2 = 2 * (1 - a**N) * a / (1 - a) * (1 + a ** (N + 1))
    bracket = N + a**2 * (1 - a ** (2 * N)) / (1 - a**2) + a * (1 - a**N) / (1 - a)
    term3 = (2 / (1 - a) - 1) / (1 - a) ** 2 * bracket
    return term1 - term2 + term3


def frobenius_slope(lam):
    """Large-``N`` slope of ``Tr(Sigma^2)``: ``(1 + lam^2) / (1 - lam^2)^3``."""
    a = float(lam) ** 2
    return (1 + a) / (1 - a) ** 3


@dataclass(frozen=True)
class FrobeniusReport:
    closed_form: float
    direct: float
    relative_gap: float
    slope: float
    fitted_slope: float | None
    fitted_offset: float | None


def frobenius_formula(N, lam, fit=True):
    """Closed form versus the direct entry sum, with fitted linear constants.

    The fitted slope and offset come from the direct sums at ``N`` and ``2N``
    (``fit=True``) and are reported, not asserted.
    """
    direct = float(np.sum(build_sigma(N, lam).matrix ** 2))
    closed = float(frobenius_closed_form(N, lam))
    gap = abs(closed - direct) / direct
    fs = fo = None
    if fit:
        d2 = float(np.sum(build_sigma(2 * N, lam).matrix ** 2))
        fs = (d2 - direct) / N
        fo = direct - fs * N
    return FrobeniusReport(closed, direct, gap, frobenius_slope(lam), fs, fo)


def _as_matrix(S):
    return S.matrix if isinstance(S, ArmaCovariance) else np.asarray(S, dtype=float)


def moment_norm_bounds(S, k_max):
    """``[(Tr(S^k)/N)^(1/k), Tr(S^k)^(1/k)]`` for ``k = 1..k_max``.

    Traces of powers come from repeated multiplication with rescaling, so the
    brackets do not depend on an eigensolver.
    """
    M = _as_matrix(S)
    k_max = check_positive_int(k_max, "k_max")
    N = M.shape[0]
    scale = float(np.linalg.norm(M)) or 1.0
    B = M / scale
    P = np.eye(N)
    log_scale = 0.0
    out = []
    for k in range(1, k_max + 1):
        P = P @ B
        c = float(np.max(np.abs(P)))
        P /= c
        log_scale += math.log(c)
        log_tr = math.log(float(np.trace(P))) + log_scale + k * math.log(scale)
        upper = math.exp(log_tr / k)
        out.append((upper / N ** (1.0 / k), upper))
    return out


def orthonormal_complement_projector(V, N):
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    if V.shape[0] != N:
        raise ValueError(f"subspace basis must have {N} rows, got {V.shape[0]}")
    if V.shape[1] == 0:
        return np.eye(N)
    if V.shape[1] >= N:
        raise ValueError("subspace dimension must be smaller than N")
    s = np.linalg.svd(V, compute_uv=False)
    if s[-1] <= rank_threshold(s[0], V.shape):
        raise RankDeficientError("subspace basis is rank deficient", s[-1], s[0])
    Q, _ = np.linalg.qr(V)
    return np.eye(N) - Q @ Q.T


def expected_distance(S, V):
    """``(Tr(S P_perp), ||S||_F sqrt(N - dim V))`` for the complement of ``span(V)``."""
    M = _as_matrix(S)
    N = M.shape[0]
    P = orthonormal_complement_projector(V, N)
    dim = np.asarray(V).reshape(N, -1).shape[1]
    value = float(np.trace(M @ P))
    cap = float(np.linalg.norm(M) * math.sqrt(N - dim))
    return value, cap
