"""Cyclic Jacobi eigensolver for small dense symmetric matrices."""

from __future__ import annotations

import numpy as np

__all__ = ["jacobi_eigh", "generalized_eigh_diagonal"]


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric matrix.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * ||A||_F``.
    max_sweeps : int

    Returns
    -------
    w : (n,) ndarray
        Eigenvalues in ascending order.
    V : (n, n) ndarray
        Orthonormal eigenvectors as columns, matching ``w``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n), V

    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                diff = A[q, q] - A[p, p]
                if abs(apq) <= 1e-18 * (abs(A[p, p]) + abs(A[q, q])):
                    A[p, q] = A[q, p] = 0.0
                    continue
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/columns p and q
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                Vq = V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")

    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def generalized_eigh_diagonal(A, d, tol: float = 1e-12):
    """Solve ``A v = lam diag(d) v`` for symmetric ``A`` and positive ``d``.

    The pencil is reduced to a standard problem with ``diag(d)**-1/2`` on
    both sides.  Returned eigenvectors are ``diag(d)``-orthonormal.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise np.linalg.LinAlgError("weight matrix must be positive definite")
    s = 1.0 / np.sqrt(d)
    w, U = jacobi_eigh(s[:, None] * np.asarray(A, dtype=float) * s[None, :], tol=tol)
    return w, s[:, None] * U
