"""scikit-learn style wrappers around the identification and decomposition routines."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ols import ols_estimate
from .spectral import DEFAULT_CLUSTER_TOL, decompose


def _trajectory_pairs(X, y):
    """Column-stacked ``(X_minus, X_plus)`` from sample-major inputs."""
    X = check_array(X, dtype=None, ensure_min_samples=2 if y is None else 1)
    if y is None:
        return X[:-1].T, X[1:].T
    y = check_array(y, dtype=None, ensure_2d=False)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if y.shape != X.shape:
        raise ValueError(f"next states must have shape {X.shape}, got {y.shape}")
    return X.T, y.T


class OLSIdentifier(RegressorMixin, BaseEstimator):
    """Least-squares estimate of the transition matrix of ``x_{t+1} = A x_t + w_t``.

    ``fit(X)`` takes a single trajectory with one state per row; ``fit(X, y)``
    takes states and their successors row by row. ``predict`` returns one-step
    predictions ``X A^T``.

    Attributes
    ----------
    A_ : ndarray of shape (n_features, n_features)
    diagnostics_ : OlsDiagnostics
    singular_values_, distances_ : ndarray
    """

    def __init__(self, keep_diagnostics=True):
        self.keep_diagnostics = keep_diagnostics

    def fit(self, X, y=None):
        Xm, Xp = _trajectory_pairs(X, y)
        diag = ols_estimate((Xm, Xp))
        self.A_ = diag.A_hat
        self.n_features_in_ = Xm.shape[0]
        self.singular_values_ = diag.singular_values
        self.distances_ = diag.distances
        self.diagnostics_ = diag if self.keep_diagnostics else None
        return self

    def predict(self, X):
        check_is_fitted(self, "A_")
        X = check_array(X, dtype=None)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.A_.T


class InvariantSubspaceTransformer(TransformerMixin, BaseEstimator):
    """Coordinates of states with respect to the generalized eigenspaces.

    The transition matrix is taken from ``matrix`` when given, otherwise
    estimated from the trajectory passed to ``fit`` by least squares. States
    are expressed in the concatenated basis of the invariant subspaces, so the
    columns in ``block_slices_[i]`` belong to ``eigenvalues_[i]``.
    """

    def __init__(self, matrix=None, cluster_tol=DEFAULT_CLUSTER_TOL):
        self.matrix = matrix
        self.cluster_tol = cluster_tol

    def fit(self, X=None, y=None):
        if self.matrix is not None:
            A = np.asarray(self.matrix)
        else:
            if X is None:
                raise ValueError("either matrix or a trajectory is required")
            A = OLSIdentifier(keep_diagnostics=False).fit(X, y).A_
        dec = decompose(A, cluster_tol=self.cluster_tol)
        self.decomposition_ = dec
        self.basis_ = np.hstack(dec.bases)
        self.eigenvalues_ = np.array(dec.eigenvalues)
        sizes = [b.shape[1] for b in dec.bases]
        edges = np.concatenate(([0], np.cumsum(sizes)))
        self.block_slices_ = [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        self.n_features_in_ = dec.n
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=None)
        return np.linalg.solve(self.basis_, X.T).T

    def inverse_transform(self, Z):
        check_is_fitted(self, "basis_")
        Z = np.asarray(Z)
        out = Z @ self.basis_.T
        return out.real if np.allclose(out.imag, 0) else out
