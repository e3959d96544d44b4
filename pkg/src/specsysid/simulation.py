"""Seeded simulation of ``x_{t+1} = A x_t + w_t`` with isotropic Gaussian noise.

Noise generator
---------------
``numpy.random.Generator(PCG64(seed))`` and its ziggurat ``standard_normal``.
The ``n x N`` ensemble is drawn as ``standard_normal((N, n)).T``, so column
``t`` (the noise ``w_t``) consumes ``n`` consecutive draws. The state starts
at ``x_0 = 0`` unless ``stationary_start`` is set.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, svds
from scipy.special import logsumexp

from ._validation import (
    NumericalOverflowError,
    check_positive_int,
    check_square_matrix,
    maybe_real,
)
from .spectral import SpectralDecomposition, solve_lyapunov

GENERATOR_NAME = "numpy.PCG64/standard_normal(ziggurat)"
ORTHOGONALITY_TOL = 1e-8
DENSE_LIPSCHITZ_MAX = 2000
LIPSCHITZ_MAX = 10_000


def matrix_hash(A):
    """sha256 of the complex128 little-endian bytes of ``A``."""
    arr = np.ascontiguousarray(np.asarray(A, dtype="<c16"))
    return hashlib.sha256(arr.tobytes()).hexdigest()


def draw_noise(n, N, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal((N, n)).T.copy()


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrajectoryBundle:
    """One simulated trajectory with its noise and data matrices.

    ``X_minus`` holds ``x_0 .. x_{N-1}`` and ``X_plus`` holds ``x_1 .. x_N``,
    both as columns; ``E[:, t]`` is the noise ``w_t``.
    """

    A: np.ndarray
    N: int
    seed: int | None
    E: np.ndarray
    X_minus: np.ndarray
    X_plus: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    def recursion_residual(self):
        return float(np.max(np.abs(self.X_plus - self.A @ self.X_minus - self.E)))


def simulate(A, N, seed=None, noise=None, stationary_start=False):
    """Simulate ``N`` steps and return a :class:`TrajectoryBundle`.

    Parameters
    ----------
    A : (n, n) array_like
    N : int
        Number of transitions (columns of the data matrices).
    seed : int, optional
        Seed of the noise generator. Ignored when ``noise`` is supplied.
    noise : (n, N) array_like, optional
        Inject a fixed noise ensemble instead of drawing one.
    stationary_start : bool
        Draw ``x_0`` from the stationary distribution (stable ``A`` only).
    """
    A = maybe_real(check_square_matrix(A))
    N = check_positive_int(N, "N")
    n = A.shape[0]
    if noise is None:
        if seed is None:
            raise ValueError("either seed or noise must be given")
        E = draw_noise(n, N, seed)
    else:
        E = np.asarray(noise)
        if E.ndim == 1:
            E = E.reshape(n, -1)
        if E.shape != (n, N):
            raise ValueError(f"noise must have shape {(n, N)}, got {E.shape}")
    dtype = np.result_type(A, E, float)
    X = np.zeros((n, N + 1), dtype=dtype)
    if stationary_start:
        P = solve_lyapunov(A.conj().T)
        rng = np.random.Generator(np.random.PCG64([0 if seed is None else seed, 1]))
        w, V = np.linalg.eigh(P)
        X[:, 0] = (V * np.sqrt(np.clip(w, 0, None))) @ rng.standard_normal(n)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(N):
            X[:, t + 1] = A @ X[:, t] + E[:, t]
    if not np.all(np.isfinite(X)):
        bad = int(np.argmax(~np.all(np.isfinite(X), axis=0)))
        raise NumericalOverflowError(
            f"state overflowed at step {bad}", last_finite=bad - 1
        )
    meta = {
        "generator": GENERATOR_NAME,
        "matrix_sha256": matrix_hash(A),
        "n": n,
        "N": N,
        "seed": seed,
        "stationary_start": bool(stationary_start),
        "noise_injected": noise is not None,
    }
    return TrajectoryBundle(
        A=_readonly(A),
        N=N,
        seed=seed,
        E=_readonly(E),
        X_minus=_readonly(X[:, :N]),
        X_plus=_readonly(X[:, 1:]),
        meta=meta,
    )


def states_from_powers(A, E, i):
    """``x_i = sum_{t=1}^{i} A^(i-t) w_{t-1}`` evaluated from explicit powers."""
    A = np.asarray(A)
    x = np.zeros(A.shape[0], dtype=np.result_type(A, E))
    P = np.eye(A.shape[0], dtype=A.dtype)
    for t in range(i, 0, -1):
        x = x + P @ E[:, t - 1]
        P = P @ A
    return x


@dataclass(frozen=True)
class RowBlockView:
    """Projected state series, one block per distinct eigenvalue."""

    eigenvalues: tuple
    blocks: tuple
    row_indices: tuple
    reconstruction_error: float


def row_blocks(bundle: TrajectoryBundle, dec: SpectralDecomposition):
    """Split ``X_minus`` into the per-eigenvalue components ``P_lam X_minus``.

    Only meaningful when the invariant subspaces are mutually orthogonal, so
    a decomposition with a larger defect is rejected.
    """
    if dec.orthogonality_defect > ORTHOGONALITY_TOL:
        raise ValueError(
            f"orthogonality defect {dec.orthogonality_defect:.3e} > {ORTHOGONALITY_TOL:.0e};"
            " blocks are not independent"
        )
    if dec.n != bundle.n:
        raise ValueError("decomposition and bundle dimensions differ")
    blocks, rows = [], []
    for P in dec.projections:
        B = maybe_real(P @ bundle.X_minus, tol=1e-13)
        blocks.append(_readonly(B))
        rows.append(tuple(int(r) for r in np.nonzero(np.abs(np.diag(P)) > 1e-12)[0]))
    total = sum(blocks)
    err = float(np.max(np.abs(total - bundle.X_minus))) if bundle.N else 0.0
    return RowBlockView(
        eigenvalues=tuple(dec.eigenvalues),
        blocks=tuple(blocks),
        row_indices=tuple(rows),
        reconstruction_error=err,
    )


def covariate_entry(lam, n, j, i, E):
    """Coordinate ``j`` (1-based) of ``x_i`` for ``A = J_n(lam)`` and noise ``E``.

    Evaluates ``sum_t sum_m binom(i-t, m) lam^(i-t-m) [w_{t-1}]_{m+j}``.
    """
    n = check_positive_int(n, "n")
    j = check_positive_int(j, "j")
    i = check_positive_int(i, "i", minimum=0)
    if j > n:
        raise ValueError(f"row index j={j} exceeds n={n}")
    E = np.asarray(E)
    if i > E.shape[1]:
        raise ValueError(f"time index i={i} exceeds available noise columns {E.shape[1]}")
    total = 0.0
    for t in range(1, i + 1):
        p = i - t
        for m in range(min(p, n - j) + 1):
            total += math.comb(p, m) * lam ** (p - m) * E[m + j - 1, t - 1]
    return total


def log_covariate_variance(lam, n, i):
    """``log Var([x_i]_1)`` for ``A = J_n(lam)``, evaluated in log space."""
    n = check_positive_int(n, "n")
    i = check_positive_int(i, "i")
    r = abs(float(lam))
    if not 0.0 < r < 1.0:
        raise ValueError("lambda must satisfy 0 < |lambda| < 1")
    lr = math.log(r)
    terms = []
    for l in range(1, i + 1):
        p = i - l
        for m in range(min(p, n - 1) + 1):
            lb = math.lgamma(p + 1) - math.lgamma(m + 1) - math.lgamma(p - m + 1)
            terms.append(2 * lb + 2 * (p - m) * lr)
    return float(logsumexp(terms))


def covariate_variance(lam, n, i):
    """Exact variance of the first coordinate of ``x_i`` for ``A = J_n(lam)``.

    Raises ``OverflowError`` when the value is not representable; use
    :func:`log_covariate_variance` in that regime.
    """
    lv = log_covariate_variance(lam, n, i)
    if lv > math.log(np.finfo(float).max):
        raise OverflowError(f"variance exp({lv:.1f}) overflows; use log_covariate_variance")
    return math.exp(lv)


def _forward(A, E, plus):
    n, N = E.shape
    X = np.zeros((n, N + 1), dtype=np.result_type(A, E))
    for t in range(N):
        X[:, t + 1] = A @ X[:, t] + E[:, t]
    return X[:, 1:] if plus else X[:, :N]


def _adjoint(A, Y, plus):
    n, N = Y.shape
    AH = A.conj().T
    G = np.zeros_like(Y, dtype=np.result_type(A, Y))
    g = np.zeros(n, dtype=G.dtype)
    for t in range(N - 1, -1, -1):
        g = (Y[:, t] if plus else (Y[:, t + 1] if t + 1 < N else 0.0)) + AH @ g
        G[:, t] = g
    return G


def noise_to_data_matrix(A, N, plus=False):
    """Dense ``nN x nN`` matrix of the linear map ``E -> X_minus`` (or ``X_plus``).

    Block ``(i, t)`` is ``A^(i-t-1)`` for ``i > t`` (``A^(i-t)`` for ``i >= t``
    when ``plus``), acting on the column-stacked noise.
    """
    A = maybe_real(check_square_matrix(A))
    n = A.shape[0]
    out = np.zeros((n * N, n * N), dtype=A.dtype)
    powers = [np.eye(n, dtype=A.dtype)]
    for _ in range(N):
        powers.append(powers[-1] @ A)
    shift = 0 if plus else 1
    for i in range(N):
        for t in range(i + 1 - shift):
            out[i * n:(i + 1) * n, t * n:(t + 1) * n] = powers[i - t - shift]
    return out


def lipschitz_constant(A, N, data="minus"):
    """Operator norm of the noise-to-data map, the smallest valid Lipschitz constant.

    ``data="minus"`` maps ``E`` to ``X_minus`` (whose first column is ``x_0 = 0``);
    ``data="plus"`` maps it to ``X_plus``.
    """
    if data not in ("minus", "plus"):
        raise ValueError("data must be 'minus' or 'plus'")
    A = maybe_real(check_square_matrix(A))
    N = check_positive_int(N, "N")
    n = A.shape[0]
    plus = data == "plus"
    size = n * N
    if size > LIPSCHITZ_MAX:
        raise ValueError(
            f"n*N = {size} exceeds {LIPSCHITZ_MAX}; use a power iteration on the"
            " forward/adjoint recursions instead"
        )
    if size <= DENSE_LIPSCHITZ_MAX:
        M = noise_to_data_matrix(A, N, plus=plus)
        return float(np.linalg.norm(M, 2)) if size else 0.0
    dtype = np.result_type(A, float)

    def mv(v):
        return _forward(A, v.reshape(N, n).T, plus).T.ravel()

    def rmv(v):
        return _adjoint(A, v.reshape(N, n).T, plus).T.ravel()

    op = LinearOperator((size, size), matvec=mv, rmatvec=rmv, dtype=dtype)
    s = svds(op, k=1, return_singular_vectors=False, tol=1e-12,
             rng=np.random.default_rng(0))
    return float(s[0])
