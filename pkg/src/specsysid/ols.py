"""Least-squares identification from a single trajectory and its exact error identities.

Conventions: the rows ``y_j`` of ``X_minus`` are vectors in ``C^N``; inner
products are linear in the first argument and conjugate-linear in the second.
``X_minus^+ = X_minus^* (X_minus X_minus^*)^{-1}`` is obtained from the thin SVD
``X_minus = U S V^*`` as ``V S^{-1} U^*``, and the Gram inverse as
``U S^{-2} U^*``; neither is formed by inverting the Gram matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr, solve_triangular

from ._validation import check_data_matrix, check_full_row_rank

WALK_TOL = 1e-10
CONSTRAINT_RTOL = 1e-7


def _conj_T(M):
    return M.conj().T


def row_distances(Y):
    """Distance of every row of ``Y`` to the span of the remaining rows.

    Each distance is the norm of the residual after projecting ``y_j`` onto an
    orthonormal basis (QR) of the other rows.
    """
    Y = check_data_matrix(Y, "Y")
    d = Y.shape[0]
    out = np.empty(d)
    for j in range(d):
        y = Y[j]
        others = np.delete(Y, j, axis=0)
        if others.shape[0]:
            Q, _ = np.linalg.qr(others.T)
            y = y - Q @ (Q.conj().T @ y)
        out[j] = np.linalg.norm(y)
    return out


def negative_second_moment(Y):
    """Return ``(sum_j sigma_j^-2, sum_j d_j^-2)`` for a full-row-rank ``Y``."""
    Y = check_data_matrix(Y, "Y")
    s = check_full_row_rank(Y, "Y")
    lhs = float(np.sum(s**-2.0))
    rhs = float(np.sum(row_distances(Y) ** -2.0))
    return lhs, rhs


@dataclass
class OlsDiagnostics:
    """Estimate, error and the structural quantities of one least-squares fit.

    Attributes
    ----------
    A_hat : ndarray
        ``X_plus X_minus^+``.
    frob_error : float or None
        ``||A - A_hat||_F`` when the true matrix is known.
    identity_error : float or None
        ``||E X_minus^+||_F`` computed from the noise directly.
    pinv_columns : ndarray
        ``(N, n)``; column ``k`` is ``c_k = X_minus^+ e_k``.
    distances : ndarray
        Row-to-hyperplane distances ``d_j``.
    inv_cov : ndarray
        ``(X_minus X_minus^*)^{-1}``.
    singular_values : ndarray
        Singular values of ``X_minus`` in decreasing order.
    sandwich_neg, sandwich_mart : tuple or None
        ``(lower, upper)`` bracketing ``||A - A_hat||_F``; see
        :func:`error_sandwiches`.
    """

    A_hat: np.ndarray
    frob_error: float | None
    identity_error: float | None
    pinv_columns: np.ndarray
    distances: np.ndarray
    inv_cov: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray = field(repr=False, default=None)
    sandwich_neg: tuple | None = None
    sandwich_mart: tuple | None = None

    @property
    def condition_number(self):
        return float(self.singular_values[0] / self.singular_values[-1])


def _split(bundle_or_data):
    if isinstance(bundle_or_data, tuple):
        Xm, Xp = bundle_or_data[:2]
        A = bundle_or_data[2] if len(bundle_or_data) > 2 else None
        E = bundle_or_data[3] if len(bundle_or_data) > 3 else None
    else:
        Xm, Xp = bundle_or_data.X_minus, bundle_or_data.X_plus
        A, E = bundle_or_data.A, bundle_or_data.E
    Xm = check_data_matrix(Xm, "X_minus")
    Xp = check_data_matrix(Xp, "X_plus")
    if Xm.shape != Xp.shape:
        raise ValueError("X_minus and X_plus must have the same shape")
    return Xm, Xp, A, E


def _sandwiches(E, V, s):
    EV = E @ V
    sv = np.linalg.svd(EV, compute_uv=False)
    root = math.sqrt(float(np.sum(s**-2.0)))
    fro = float(np.linalg.norm(EV))
    return (float(sv[-1]) * root, float(sv[0]) * root), (fro / float(s[0]), fro / float(s[-1]))


def ols_estimate(bundle):
    """Least-squares estimate of ``A`` with full diagnostics.

    ``bundle`` is a :class:`~specsysid.simulation.TrajectoryBundle` or a tuple
    ``(X_minus, X_plus[, A[, E]])``.

    Raises
    ------
    RankDeficientError
        If ``X_minus`` lacks full row rank (always when ``N < n``).
    """
    Xm, Xp, A, E = _split(bundle)
    s = check_full_row_rank(Xm, "X_minus")
    U, s, Vh = np.linalg.svd(Xm, full_matrices=False)
    V = _conj_T(Vh)
    pinv = (V / s) @ _conj_T(U)
    A_hat = Xp @ pinv
    inv_cov = (U / s**2) @ _conj_T(U)
    frob = ident = neg = mart = None
    if A is not None:
        frob = float(np.linalg.norm(np.asarray(A) - A_hat))
    if E is not None:
        E = np.asarray(E)
        ident = float(np.linalg.norm(E @ pinv))
        neg, mart = _sandwiches(E, V, s)
    return OlsDiagnostics(
        A_hat=A_hat,
        frob_error=frob,
        identity_error=ident,
        pinv_columns=pinv,
        distances=row_distances(Xm),
        inv_cov=inv_cov,
        singular_values=s,
        right_vectors=V,
        sandwich_neg=neg,
        sandwich_mart=mart,
    )


def error_sandwiches(bundle):
    """Two brackets on ``||A - A_hat||_F`` that hold for every realisation.

    With ``V`` the right singular vectors of ``X_minus`` (an orthonormal basis
    of its row space) and ``E_perp = E V`` (``n x n``):

    * ``sigma_n(E_perp) sqrt(sum d_j^-2) <= err <= sigma_1(E_perp) sqrt(sum d_j^-2)``
    * ``||E_perp||_F / sigma_1(X_minus) <= err <= ||E_perp||_F / sigma_n(X_minus)``,
      where ``||E_perp||_F = ||E X_minus^* (X_minus X_minus^*)^{-1/2}||_F``.

    Both orderings are checked and an ``AssertionError`` is raised on failure.
    """
    diag = ols_estimate(bundle)
    if diag.sandwich_neg is None:
        raise ValueError("noise ensemble E is required for the error sandwiches")
    err = diag.identity_error
    slack = 1e-12 * max(1.0, err)
    for name, (lo, hi) in (("neg", diag.sandwich_neg), ("mart", diag.sandwich_mart)):
        if not lo - slack <= err <= hi + slack:
            raise AssertionError(f"sandwich {name} violated: {lo} <= {err} <= {hi}")
    return diag.sandwich_neg, diag.sandwich_mart


@dataclass(frozen=True)
class ConstraintReport:
    """Relative residuals of the inverse-sample-covariance identities.

    ``off_diagonal_sum`` checks ``sum_{k!=j} v_jk <y_k, y_j> = 1 - v_jj ||y_j||^2``,
    ``orthogonality`` checks ``sum_k v_jk <y_k, y_l> = 0`` for ``l != j`` and
    ``diagonal`` checks ``v_jj = 1 / d_j^2``.  ``off_diagonal_values`` are the
    sums themselves, which are never positive because ``d_j <= ||y_j||``.
    """

    off_diagonal_sum: float
    orthogonality: float
    diagonal: float
    threshold: float
    off_diagonal_values: np.ndarray

    @property
    def passed(self):
        return max(self.off_diagonal_sum, self.orthogonality, self.diagonal) <= self.threshold


def inverse_cov_constraints(bundle):
    Xm = _split(bundle)[0] if not isinstance(bundle, np.ndarray) else check_data_matrix(bundle)
    diag = ols_estimate((Xm, Xm))
    v = diag.inv_cov
    G = Xm @ _conj_T(Xm)  # G[k, j] = <y_k, y_j>
    n = Xm.shape[0]
    norms2 = np.real(np.diag(G))
    # M[j, l] = sum_k v_jk <y_k, y_l>, which should be the identity
    M = v @ G
    off = np.array([M[j, j] - v[j, j] * G[j, j] for j in range(n)])
    target = 1.0 - np.real(np.diag(v)) * norms2
    scale1 = np.maximum(1.0, np.abs(target))
    r1 = float(np.max(np.abs(off - target) / scale1))
    offdiag = M - np.diag(np.diag(M))
    rowscale = np.abs(v) @ np.abs(G)
    r2 = float(np.max(np.abs(offdiag) / np.maximum(rowscale, np.finfo(float).tiny))) if n > 1 else 0.0
    dinv = diag.distances**-2.0
    r3 = float(np.max(np.abs(np.real(np.diag(v)) - dinv) / dinv))
    kappa = float(np.linalg.cond(G))
    return ConstraintReport(r1, r2, r3, CONSTRAINT_RTOL * kappa, np.real(off))


def row_support(A, j, tol=1e-14):
    """Noise rows that reach coordinate ``j`` (0-based) through powers of ``A``."""
    A = np.asarray(A)
    reach = np.abs(A) > tol
    seen = {j}
    frontier = [j]
    while frontier:
        r = frontier.pop()
        for c in np.nonzero(reach[r])[0]:
            if int(c) not in seen:
                seen.add(int(c))
                frontier.append(int(c))
    return tuple(sorted(seen))


@dataclass(frozen=True)
class WalkDecomposition:
    """Element-wise error written as weighted sums of noise entries.

    ``weights[:, k]`` are the walk weights ``c_k`` from an independent QR
    route; ``errors[j, k] = sum_i E[j, i] c_k[i]``.
    """

    weights: np.ndarray
    errors: np.ndarray
    walk_residual: float
    normal_residual: float
    null_residual: float
    frob_squared_expansion: float
    frob_squared: float
    supports: tuple


def elementwise_error(bundle, null_samples=8, seed=0):
    Xm, _, A, E = _split(bundle)
    if E is None:
        raise ValueError("noise ensemble E is required")
    E = np.asarray(E)
    check_full_row_rank(Xm, "X_minus")
    n, N = Xm.shape
    Q, R = qr(_conj_T(Xm), mode="economic")
    # X^+ = Q R^{-*}
    C = Q @ solve_triangular(R, np.eye(n), trans="C")
    W = E @ C
    U, s, Vh = np.linalg.svd(Xm, full_matrices=False)
    pinv = (_conj_T(Vh) / s) @ _conj_T(U)
    ref = E @ pinv
    walk = float(np.max(np.abs(W - ref)) / max(1.0, float(np.max(np.abs(ref)))))
    normal = float(np.max(np.abs(Xm @ C - np.eye(n))))
    rng = np.random.default_rng(seed)
    null = 0.0
    if N > n:
        G = rng.standard_normal((N, null_samples))
        Z = G - Q @ (_conj_T(Q) @ G)
        Z /= np.linalg.norm(Z, axis=0)
        null = float(np.max(np.abs(C.T @ Z.conj())))
    # double-sum expansion: diagonal terms plus cross terms over i != l
    terms = E[:, :, None] * C[None, :, :]  # (j, i, k)
    total = terms.sum(axis=1)
    diag_part = np.sum(np.abs(terms) ** 2)
    cross = np.sum(terms * (total.conj()[:, None, :] - terms.conj()))
    expansion = float(np.real(diag_part + cross))
    supports = tuple(row_support(A, j) for j in range(n)) if A is not None else ()
    return WalkDecomposition(
        weights=C,
        errors=W,
        walk_residual=walk,
        normal_residual=normal,
        null_residual=null,
        frob_squared_expansion=expansion,
        frob_squared=float(np.linalg.norm(ref) ** 2),
        supports=supports,
    )


def regression_mse_mc(X, trials, seed, beta=None):
    """Monte-Carlo check of ``E||beta_hat - beta||^2 = tr((X^* X)^{-1})``.

    ``X`` is a fixed ``p x d`` design; responses are ``X beta + eps`` with
    standard normal ``eps``. Returns ``(mean, standard_error, exact, distance_sum)``
    where ``distance_sum = sum_j d_j^-2`` over the columns of ``X``.
    """
    X = check_data_matrix(X, "X")
    p, d = X.shape
    if beta is None:
        beta = np.ones(d)
    rng = np.random.Generator(np.random.PCG64(seed))
    eps = rng.standard_normal((trials, p))
    Y = X @ beta + eps
    B, *_ = np.linalg.lstsq(X, Y.T, rcond=None)
    sq = np.sum(np.abs(B.T - beta) ** 2, axis=1)
    exact = float(np.real(np.trace(np.linalg.inv(_conj_T(X) @ X))))
    dist = float(np.sum(row_distances(X.T) ** -2.0))
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(trials)), exact, dist
