"""Invariant-subspace decomposition of square complex matrices.

Two routes produce a :class:`SpectralDecomposition`:

* :func:`structured_decomposition` reads the eigenvalues, multiplicities and
  invariant subspaces straight off a Jordan-block description, so the
  discrepancy ``AM - GM`` is exact by construction.
* :func:`decompose` is a numerical detector for arbitrary dense input.  Jordan
  structure is ill-posed under perturbation, so every rank decision is made
  against an explicit tolerance and ambiguous decisions are flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import EPS, NumericalOverflowError, check_positive_int, check_square_matrix

DEFAULT_CLUSTER_TOL = 1e-7


@dataclass(frozen=True)
class EigenBlockSpec:
    """One Jordan block: ``size`` copies of ``eigenvalue`` chained by ones."""

    eigenvalue: complex
    size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "eigenvalue", complex(self.eigenvalue))
        object.__setattr__(self, "size", check_positive_int(self.size, "block size"))


def _as_blocks(blocks) -> list[EigenBlockSpec]:
    out = []
    for b in blocks:
        if isinstance(b, EigenBlockSpec):
            out.append(b)
        elif isinstance(b, dict):
            lam = b.get("lambda", b.get("eigenvalue"))
            if isinstance(lam, (list, tuple)):
                lam = complex(lam[0], lam[1] if len(lam) > 1 else 0.0)
            out.append(EigenBlockSpec(lam, b.get("size", 1)))
        else:
            lam, size = b
            out.append(EigenBlockSpec(lam, size))
    if not out:
        raise ValueError("at least one block is required")
    return out


def jordan_block(lam, m):
    """Return ``J_m(lam)``: ``lam`` on the diagonal, ones on the superdiagonal."""
    m = check_positive_int(m, "m")
    return complex(lam) * np.eye(m, dtype=complex) + np.eye(m, k=1, dtype=complex)


def unitary_defect(U):
    U = np.asarray(U, dtype=complex)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))


def build_structured(blocks, basis=None, unitary_tol=1e-10):
    """Assemble ``U diag(J_{m_1}(l_1), ..., J_{m_K}(l_K)) U*``.

    Parameters
    ----------
    blocks : sequence of EigenBlockSpec, ``(eigenvalue, size)`` pairs or dicts
        The Jordan blocks, in order.
    basis : (n, n) array_like, optional
        Unitary change of basis. Identity when omitted.
    unitary_tol : float
        Maximum allowed ``||U*U - I||_2``.

    Returns
    -------
    ndarray of complex, shape (n, n)
    """
    blocks = _as_blocks(blocks)
    n = sum(b.size for b in blocks)
    J = np.zeros((n, n), dtype=complex)
    pos = 0
    for b in blocks:
        J[pos:pos + b.size, pos:pos + b.size] = jordan_block(b.eigenvalue, b.size)
        pos += b.size
    if basis is None:
        return J
    U = check_square_matrix(basis, "basis")
    if U.shape[0] != n:
        raise ValueError(f"block sizes sum to {n} but basis has dimension {U.shape[0]}")
    defect = unitary_defect(U)
    if defect > unitary_tol:
        raise ValueError(f"basis is not unitary: ||U*U - I||_2 = {defect:.3e} > {unitary_tol:.1e}")
    return U @ J @ U.conj().T


def random_unitary(n, seed=None):
    """Haar-distributed unitary matrix (QR of a complex Gaussian, phase-corrected)."""
    rng = np.random.default_rng(seed)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_orthogonal(n, seed=None):
    """Haar-distributed real orthogonal matrix."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


@dataclass(frozen=True)
class EigenInfo:
    value: complex
    algebraic: int
    geometric: int
    index: int
    reliable: bool = True

    @property
    def discrepancy(self) -> int:
        return self.algebraic - self.geometric


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues of a matrix with their generalized eigenspaces.

    ``projections[i]`` is the orthogonal projector ``V (V*V)^{-1} V*`` onto the
    generalized eigenspace spanned by ``bases[i]``.  These sum to the identity
    only when the eigenspaces are mutually orthogonal, which
    ``orthogonality_defect`` (max ``||P_i P_j||_2`` over ``i != j``) measures.
    ``spectral_projections`` are the oblique (Riesz) projectors along the other
    eigenspaces and always sum to the identity.
    """

    n: int
    eigen: tuple[EigenInfo, ...]
    bases: tuple[np.ndarray, ...]
    projections: tuple[np.ndarray, ...]
    spectral_projections: tuple[np.ndarray, ...]
    orthogonality_defect: float
    cluster_tol: float = DEFAULT_CLUSTER_TOL
    block_sizes: tuple[tuple[int, ...], ...] | None = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.value for e in self.eigen])

    @property
    def spectral_radius(self) -> float:
        return float(max(abs(e.value) for e in self.eigen))

    @property
    def reliable(self) -> bool:
        return all(e.reliable for e in self.eigen)

    def largest_block(self, i) -> int:
        """Size of the largest Jordan block for the ``i``-th distinct eigenvalue."""
        if self.block_sizes is not None:
            return max(self.block_sizes[i])
        return self.eigen[i].index

    def locate(self, lam, tol=None) -> int:
        """Index of the distinct eigenvalue closest to ``lam`` (within ``tol``)."""
        tol = self.cluster_tol if tol is None else tol
        dist = np.abs(self.eigenvalues - complex(lam))
        i = int(np.argmin(dist))
        if dist[i] > max(tol, 1e-12):
            raise ValueError(f"{lam} is not an eigenvalue (nearest distance {dist[i]:.3e})")
        return i

    def summary(self) -> list[dict]:
        return [
            {
                "lambda": [e.value.real, e.value.imag],
                "algebraic": e.algebraic,
                "geometric": e.geometric,
                "discrepancy": e.discrepancy,
                "largest_block": self.largest_block(i),
                "reliable": e.reliable,
            }
            for i, e in enumerate(self.eigen)
        ]


def _orth_projector(V):
    # V (V*V)^{-1} V*
    G = V.conj().T @ V
    return V @ np.linalg.solve(G, V.conj().T)


def _finish(n, infos, bases, cluster_tol, block_sizes=None, notes=()):
    projections = tuple(_orth_projector(V) for V in bases)
    defect = 0.0
    for i, Pi in enumerate(projections):
        for j, Pj in enumerate(projections):
            if i != j:
                defect = max(defect, float(np.linalg.norm(Pi @ Pj, 2)))
    Q = np.hstack(bases)
    spectral = []
    try:
        Qinv = np.linalg.inv(Q)
        pos = 0
        for V in bases:
            k = V.shape[1]
            spectral.append(Q[:, pos:pos + k] @ Qinv[pos:pos + k, :])
            pos += k
    except np.linalg.LinAlgError:
        notes = tuple(notes) + ("generalized eigenspaces numerically dependent",)
        spectral = [np.full((n, n), np.nan, dtype=complex) for _ in bases]
    return SpectralDecomposition(
        n=n,
        eigen=tuple(infos),
        bases=tuple(bases),
        projections=projections,
        spectral_projections=tuple(spectral),
        orthogonality_defect=defect,
        cluster_tol=cluster_tol,
        block_sizes=block_sizes,
        notes=tuple(notes),
    )


def structured_decomposition(blocks, basis=None, unitary_tol=1e-10, merge_tol=1e-12):
    """Exact decomposition of :func:`build_structured` output.

    Blocks sharing an eigenvalue (within ``merge_tol``) are merged into one
    generalized eigenspace; its geometric multiplicity is the number of blocks.
    """
    blocks = _as_blocks(blocks)
    n = sum(b.size for b in blocks)
    U = np.eye(n, dtype=complex) if basis is None else check_square_matrix(basis, "basis")
    if basis is not None:
        defect = unitary_defect(U)
        if defect > unitary_tol:
            raise ValueError(f"basis is not unitary: ||U*U - I||_2 = {defect:.3e}")
    groups: list[tuple[complex, list[int], list[int]]] = []
    pos = 0
    for b in blocks:
        cols = list(range(pos, pos + b.size))
        pos += b.size
        for lam, gcols, sizes in groups:
            if abs(lam - b.eigenvalue) <= merge_tol:
                gcols.extend(cols)
                sizes.append(b.size)
                break
        else:
            groups.append((b.eigenvalue, cols, [b.size]))
    infos, bases, sizes_out = [], [], []
    for lam, cols, sizes in groups:
        infos.append(EigenInfo(lam, sum(sizes), len(sizes), max(sizes)))
        bases.append(U[:, cols])
        sizes_out.append(tuple(sizes))
    return _finish(n, infos, bases, merge_tol, block_sizes=tuple(sizes_out))


def _cluster(values, tol):
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = [values[g].mean() for g in groups.values()]
    counts = [len(g) for g in groups.values()]
    order = np.argsort([-abs(v) for v in out], kind="stable")
    return [out[i] for i in order], [counts[i] for i in order]


def decompose(A, cluster_tol=DEFAULT_CLUSTER_TOL, rank_rtol=None):
    """Numerically detect distinct eigenvalues and generalized eigenspaces.

    Eigenvalues within ``cluster_tol`` of each other (single linkage) form one
    distinct eigenvalue; its algebraic multiplicity is the cluster size.  The
    geometric multiplicity is the nullity of ``A - lam I`` with singular-value
    cutoff ``rank_rtol * sigma_1`` (default ``n * eps``), and the generalized
    eigenspace is spanned by the right singular vectors of ``(A - lam I)^AM``
    belonging to its ``AM`` smallest singular values.

    A rank decision is flagged unreliable (``EigenInfo.reliable = False``) when
    a singular value counted as nonzero lies within ``10 * cluster_tol`` of the
    cutoff.

    Note that eigenvalues of a conjugated Jordan block of size ``m`` scatter by
    roughly ``eps**(1/m)``; pass a larger ``cluster_tol`` for such input or use
    :func:`structured_decomposition`.
    """
    A = check_square_matrix(A)
    if not cluster_tol > 0:
        raise ValueError("cluster_tol must be positive")
    n = A.shape[0]
    values, counts = _cluster(np.linalg.eigvals(A), cluster_tol)
    infos, bases = [], []
    scale = max(1.0, float(np.linalg.norm(A, 2)))
    for lam, am in zip(values, counts):
        B = A - lam * np.eye(n)
        reliable = True
        nullities = []
        Bk = np.eye(n, dtype=complex)
        Vh_last = None
        for _ in range(am):
            Bk = Bk @ B
            _, s, Vh = np.linalg.svd(Bk)
            rtol = n * EPS if rank_rtol is None else rank_rtol
            thr = rtol * max(s[0], EPS * scale)
            nullities.append(int(np.sum(s <= thr)))
            ambiguous = (s > thr) & (s <= thr + 10 * cluster_tol * max(1.0, s[0]))
            if np.any(ambiguous):
                reliable = False
            Vh_last = Vh
        gm = max(1, nullities[0])
        index = next((k + 1 for k, v in enumerate(nullities) if v >= am), am)
        if nullities[-1] != am:
            reliable = False
        V = Vh_last[n - am:, :].conj().T
        infos.append(EigenInfo(complex(lam), am, gm, index, reliable))
        bases.append(V)
    return _finish(n, infos, bases, cluster_tol)


def invariant_residuals(A, dec: SpectralDecomposition) -> dict:
    """Residuals of the structural identities a decomposition should satisfy."""
    A = check_square_matrix(A)
    n = A.shape[0]
    eye = np.eye(n)
    idem = max(float(np.linalg.norm(P @ P - P, 2)) for P in dec.projections)
    invariance = max(float(np.linalg.norm((eye - P) @ A @ P, 2)) for P in dec.projections)
    total = float(np.linalg.norm(sum(dec.projections) - eye, 2))
    spectral_total = float(np.linalg.norm(sum(dec.spectral_projections) - eye, 2))
    return {
        "algebraic_sum": sum(e.algebraic for e in dec.eigen),
        "idempotence": idem,
        "invariance": invariance,
        "projection_sum": total,
        "spectral_projection_sum": spectral_total,
        "orthogonality_defect": dec.orthogonality_defect,
    }


def restrict(A, dec: SpectralDecomposition, lam):
    """Action of ``A`` on the generalized eigenspace of ``lam``: ``A @ P_lam``."""
    A = check_square_matrix(A)
    i = dec.locate(lam)
    return A @ dec.projections[i]


def jordan_power_action(lam, m, k, j):
    """Coefficients of ``A^k v_j`` on the Jordan chain ``v_j, v_{j-1}, ...``.

    For a chain ``(A - lam I) v_1 = 0``, ``(A - lam I) v_{i+1} = v_i`` the
    ``l``-th entry of the result multiplies ``v_{j-l}`` and equals
    ``binom(k, l) * lam**(k - l)`` for ``l = 0 .. min(k, j - 1)``.
    """
    m = check_positive_int(m, "m")
    j = check_positive_int(j, "j")
    k = check_positive_int(k, "k", minimum=0)
    if j > m:
        raise ValueError(f"chain position j={j} exceeds block size m={m}")
    lam = complex(lam)
    coeffs = np.array([math.comb(k, l) * lam ** (k - l) for l in range(min(k, j - 1) + 1)])
    return coeffs.real if lam.imag == 0 else coeffs


def solve_lyapunov(A, tol=1e-14, window=16, max_doublings=64):
    """Controllability Gramian: the solution of ``A* P A - P + I = 0``.

    Sums ``sum_k (A*)^k A^k`` by doubling (``P <- P + (A^j)* P A^j``,
    ``A^j <- A^{2j}``) and stops once the added block falls below
    ``tol * ||P||_F``.

    Raises
    ------
    ValueError
        If the spectral radius is at least one.
    NumericalOverflowError
        If the added blocks fail to shrink over ``window`` consecutive
        doublings, or the sum leaves the representable range.
    """
    A = check_square_matrix(A)
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho >= 1.0:
        raise ValueError(f"series diverges: spectral radius {rho:.6g} >= 1")
    n = A.shape[0]
    P = np.eye(n, dtype=complex)
    M = A.copy()
    history = []
    for _ in range(max_doublings):
        term = M.conj().T @ P @ M
        tn = float(np.linalg.norm(term))
        P = P + term
        if not np.all(np.isfinite(P)):
            raise NumericalOverflowError("Gramian series overflowed")
        if tn <= tol * float(np.linalg.norm(P)):
            break
        history.append(tn)
        if len(history) > window and all(
            history[-i] >= history[-i - 1] for i in range(1, window + 1)
        ):
            raise NumericalOverflowError("Gramian series terms are not decreasing")
        M = M @ M
    else:
        raise NumericalOverflowError("Gramian series did not converge")
    P = 0.5 * (P + P.conj().T)
    return P.real.copy() if np.all(A.imag == 0) else P


def lyapunov_residual(A, P):
    A = check_square_matrix(A)
    return float(np.linalg.norm(A.conj().T @ P @ A - P + np.eye(A.shape[0])))

