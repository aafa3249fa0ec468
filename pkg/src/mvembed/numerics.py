"""
Dense/sparse linear algebra used by every solver: top-k symmetric
eigendecomposition, truncated SVD, block conjugate-gradient least squares,
and inverse-square-root whitening.

Dense matrices are plain float64 ``numpy`` arrays; sparse matrices are any
``scipy.sparse`` matrix.  Decompositions go through LAPACK (``scipy.linalg``);
the CG solver is implemented here because the solvers need per-column early
stopping and warm starts over a block of right-hand sides.
"""

from typing import NamedTuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import InvalidInput, NotInvertible, NotPSD

SYM_TOL = 1e-10
PSD_TOL = 1e-10
SINGULAR_TOL = 1e-12


class EigResult(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class SvdResult(NamedTuple):
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def as_dense(A) -> np.ndarray:
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInput(f"expected a 2-d matrix, got shape {A.shape}")
    return A


def as_matrix(A):
    """Coerce to float64 while keeping sparse inputs sparse (CSR)."""
    if sp.issparse(A):
        return sp.csr_matrix(A, dtype=np.float64)
    return as_dense(A)


def fix_signs(Q: np.ndarray, *others: np.ndarray):
    """Flip each column so its largest-magnitude entry is positive.

    Any matrices in ``others`` get the same column flips (e.g. the right
    singular vectors paired with ``Q``).
    """
    if Q.shape[1] == 0:
        return (Q,) + others if others else Q
    idx = np.argmax(np.abs(Q), axis=0)
    signs = np.sign(Q[idx, np.arange(Q.shape[1])])
    signs[signs == 0] = 1.0
    flipped = Q * signs
    if others:
        return (flipped,) + tuple(M * signs for M in others)
    return flipped


def check_symmetric(A: np.ndarray, tol: float = SYM_TOL) -> np.ndarray:
    if A.shape[0] != A.shape[1]:
        raise InvalidInput(f"matrix must be square, got {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > tol * scale:
        raise InvalidInput("matrix is not symmetric")
    return 0.5 * (A + A.T)


def sym_eig_topk(A, k: int) -> EigResult:
    """k largest eigenpairs of a symmetric matrix, eigenvalues descending."""
    A = check_symmetric(as_dense(A))
    n = A.shape[0]
    if not 1 <= k <= n:
        raise InvalidInput(f"k={k} out of range for a {n}x{n} matrix")
    w, Q = la.eigh(A, subset_by_index=[n - k, n - 1])
    w, Q = w[::-1], Q[:, ::-1]
    return EigResult(w.copy(), fix_signs(np.ascontiguousarray(Q)))


def svd_topk(A, k: int) -> SvdResult:
    """Rank-k truncated SVD with singular values descending.

    Dense inputs use the full LAPACK decomposition; sparse inputs with
    k < min(shape) use ARPACK (``svds``) at tolerance 1e-10.
    """
    rows, cols = A.shape
    if not 1 <= k <= min(rows, cols):
        raise InvalidInput(f"k={k} out of range for a {rows}x{cols} matrix")
    if sp.issparse(A) and k < min(rows, cols) - 1:
        from scipy.sparse.linalg import svds

        U, S, Vt = svds(sp.csr_matrix(A, dtype=np.float64), k=k, tol=1e-10,
                        random_state=0)
        order = np.argsort(S)[::-1]
        U, S, Vt = U[:, order], S[order], Vt[order]
    else:
        U, S, Vt = la.svd(as_dense(A), full_matrices=False, lapack_driver="gesdd")
        U, S, Vt = U[:, :k], S[:k], Vt[:k]
    U, V = fix_signs(np.ascontiguousarray(U), np.ascontiguousarray(Vt.T))
    return SvdResult(U, np.maximum(S, 0.0), V)


def cg_least_squares(A, B, warm_start=None, max_iters: int = 20,
                     rel_tol: float = 1e-5, return_iters: bool = False):
    """Minimize ||A X - B||_F column by column with CG on the normal equations.

    Each column stops once its normal-equation residual ||A^T (B - A x)|| is
    at most ``rel_tol`` times ||A^T b||.  ``warm_start`` is the initial
    iterate.  With ``return_iters`` the per-column iteration counts are also
    returned.
    """
    A = as_matrix(A)
    B = as_dense(np.asarray(B, dtype=np.float64).reshape(A.shape[0], -1)
                 if np.ndim(B) == 1 else B)
    n, d = A.shape
    if B.shape[0] != n:
        raise InvalidInput(f"A has {n} rows but B has {B.shape[0]}")
    if max_iters < 1:
        raise InvalidInput("max_iters must be >= 1")
    if rel_tol <= 0:
        raise InvalidInput("rel_tol must be > 0")
    m = B.shape[1]
    if warm_start is None:
        X = np.zeros((d, m))
        R = B.copy()
    else:
        X = as_dense(warm_start).copy()
        if X.shape != (d, m):
            raise InvalidInput(f"warm start has shape {X.shape}, expected {(d, m)}")
        R = B - A @ X
    target = np.linalg.norm(A.T @ B, axis=0)
    S = A.T @ R
    gamma = np.einsum("ij,ij->j", S, S)
    P = S.copy()
    iters = np.zeros(m, dtype=int)
    for _ in range(max_iters):
        active = np.sqrt(gamma) > rel_tol * target
        active &= gamma > 0
        if not active.any():
            break
        Q = A @ P
        qq = np.einsum("ij,ij->j", Q, Q)
        ok = active & (qq > 0)
        alpha = np.zeros(m)
        alpha[ok] = gamma[ok] / qq[ok]
        X += P * alpha
        R -= Q * alpha
        S_new = A.T @ R
        gamma_new = np.einsum("ij,ij->j", S_new, S_new)
        beta = np.zeros(m)
        beta[ok] = gamma_new[ok] / gamma[ok]
        P[:, ok] = S_new[:, ok] + P[:, ok] * beta[ok]
        gamma = np.where(ok, gamma_new, gamma)
        S[:, ok] = S_new[:, ok]
        iters += ok
        if not ok.any():
            break
    if return_iters:
        return X, iters
    return X


def whiten(C, ridge: float = 0.0) -> np.ndarray:
    """Return (C + ridge I)^{-1/2} for a symmetric PSD matrix C."""
    if ridge < 0:
        raise InvalidInput("ridge must be >= 0")
    C = check_symmetric(as_dense(C))
    w, Q = la.eigh(C)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w[0] < -PSD_TOL * scale:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} is negative")
    w = np.maximum(w, 0.0) + ridge
    # without a ridge, eigenvalues at rounding level count as zero
    floor = SINGULAR_TOL * scale if ridge == 0 else 0.0
    if w.size and w[0] <= floor:
        raise NotInvertible("covariance is singular; use ridge > 0")
    return (Q / np.sqrt(w)) @ Q.T


def solve_psd(C, B, ridge: float = 0.0) -> np.ndarray:
    """Solve (C + ridge I) X = B for symmetric PSD C."""
    C = as_dense(C)
    Cr = C + ridge * np.eye(C.shape[0])
    try:
        return la.solve(Cr, B, assume_a="pos")
    except la.LinAlgError as exc:
        raise NotInvertible("covariance is singular; use ridge > 0") from exc


def orthonormal_columns(M: np.ndarray) -> np.ndarray:
    """Polar factor U V^T of M (nearest matrix with orthonormal columns)."""
    U, _, Vt = la.svd(M, full_matrices=False)
    return U @ Vt


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return la.subspace_angles(A, B)
