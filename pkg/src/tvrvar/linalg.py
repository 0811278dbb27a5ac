"""Dense kernels and Kronecker-structured products.

Vectorization is column-major throughout: ``vec(A)`` stacks the columns of
``A``, i.e. ``A.ravel(order="F")``. Nothing in here materializes a Kronecker
product; the dense versions live in the test-suite and in
:mod:`tvrvar.evaluation` as oracles.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import svds

from .errors import BreakdownError, DataError, ParameterError, SingularityError

EPS = np.finfo(float).eps

# above this size truncated_svd switches from LAPACK to ARPACK
_DENSE_SVD_LIMIT = 1500


def vec(A: np.ndarray) -> np.ndarray:
    return np.asarray(A).ravel(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape(rows, cols, order="F")


def _check_finite(M, what="matrix"):
    if not np.all(np.isfinite(M)):
        raise DataError(f"{what} contains non-finite entries")


@dataclass(frozen=True)
class LinearOperator:
    """A square or rectangular linear map given only by its action."""

    dim_in: int
    dim_out: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, u):
        return self.apply(u)

    def symmetry_gap(self, rng=None, trials=3):
        """Largest relative |u'Av - v'Au| over random probes."""
        if self.dim_in != self.dim_out:
            raise ParameterError("symmetry is only defined for square operators")
        rng = np.random.default_rng(0) if rng is None else rng
        gap = 0.0
        for _ in range(trials):
            u = rng.standard_normal(self.dim_in)
            v = rng.standard_normal(self.dim_in)
            Au, Av = self.apply(u), self.apply(v)
            scale = np.linalg.norm(u) * np.linalg.norm(Av) + np.linalg.norm(v) * np.linalg.norm(Au)
            if scale > 0:
                gap = max(gap, abs(u @ Av - v @ Au) / scale)
        return gap


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Per-column signs making the largest-magnitude entry nonnegative."""
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def truncated_svd(M: np.ndarray, R: int):
    """Leading ``R`` singular triplets of ``M``.

    Returns ``(U, s, Vt)`` with singular values in nonincreasing order and a
    deterministic sign convention: in each column of ``U`` the entry of
    largest magnitude is nonnegative (the matching row of ``Vt`` is flipped
    along with it).
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ParameterError("truncated_svd expects a 2-d array")
    m, n = M.shape
    if not 1 <= R <= min(m, n):
        raise ParameterError(f"rank R={R} must satisfy 1 <= R <= min(rows, cols) = {min(m, n)}")
    _check_finite(M)

    if min(m, n) <= _DENSE_SVD_LIMIT or R >= min(m, n) // 4:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        U, s, Vt = U[:, :R], s[:R], Vt[:R]
    else:
        # deterministic start vector keeps ARPACK reproducible
        v0 = np.ones(min(m, n)) / np.sqrt(min(m, n))
        U, s, Vt = svds(M, k=R, v0=v0, tol=0)
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]

    signs = fix_signs(U)
    return U * signs, s, Vt * signs[:, None]


def _pinv_stack(M: np.ndarray, rtol: float | None = None, tol: float | None = None):
    # works on (..., m, n) stacks; rtol is relative to each matrix's s_max
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if tol is None:
        if rtol is None:
            rtol = max(M.shape[-2:]) * EPS
        cutoff = rtol * s[..., :1] if s.shape[-1] else s
    else:
        cutoff = tol
    keep = s > cutoff
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    return np.swapaxes(Vt, -1, -2) @ (s_inv[..., None] * np.swapaxes(U, -1, -2))


def pseudo_inverse(M: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values at or below ``tol`` are treated as zero. The default is
    ``max(rows, cols) * eps * s_max``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ParameterError("pseudo_inverse expects a 2-d array")
    if tol is not None and tol < 0:
        raise ParameterError("tol must be nonnegative")
    _check_finite(M)
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    return _pinv_stack(M, tol=tol)


def solve_ridge(A: np.ndarray, B: np.ndarray, ridge: float = 0.0, name: str = "solve_ridge") -> np.ndarray:
    """Solve ``(A + ridge*I) X = B`` with a Cholesky factorization.

    ``A`` must be symmetric (to 1e-10 relative). ``name`` labels the caller
    in the singularity message.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError("A must be square")
    if B.shape[0] != A.shape[0]:
        raise ParameterError(f"B has {B.shape[0]} rows, A is {A.shape[0]}x{A.shape[0]}")
    if ridge < 0:
        raise ParameterError("ridge must be nonnegative")
    scale = np.abs(A).max(initial=0.0)
    if np.abs(A - A.T).max(initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise ParameterError("A is not symmetric")
    A_reg = 0.5 * (A + A.T) + ridge * np.eye(A.shape[0])
    try:
        factor = scipy.linalg.cho_factor(A_reg, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularityError(f"{name}: Gram matrix is numerically singular even with ridge={ridge:g}") from exc
    diag = np.abs(np.diag(factor[0]))
    # squared Cholesky diagonal ratio approximates the condition number
    if diag.min() == 0 or (diag.max() / diag.min()) ** 2 * EPS * A.shape[0] >= 1:
        raise SingularityError(f"{name}: Gram matrix is numerically singular even with ridge={ridge:g}")
    return scipy.linalg.cho_solve(factor, B, check_finite=False)


def kron_apply_vt_z(x: np.ndarray, V: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``(x' kron V)' z`` computed as ``vec(V' z x')``; length ``R**2``."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if V.ndim != 2 or x.shape != (V.shape[1],) or z.shape != (V.shape[0],):
        raise ParameterError(f"inconsistent shapes x{x.shape}, V{V.shape}, z{z.shape}")
    return np.outer(V.T @ z, x).ravel(order="F")


def kron_rows_vt_z(X: np.ndarray, V: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Batched :func:`kron_apply_vt_z`: row t is ``vec(V' z_t x_t')``.

    ``X`` is (n, R) with rows x_t, ``Z`` is (dN, n) with columns z_t.
    """
    if X.shape[0] != Z.shape[1] or V.shape[0] != Z.shape[0] or V.shape[1] != X.shape[1]:
        raise ParameterError(f"inconsistent shapes X{X.shape}, V{V.shape}, Z{Z.shape}")
    U = Z.T @ V
    n, R = X.shape
    # C[t, k*R + j] = x_t[k] * u_t[j], the column-major vec of u_t x_t'
    return (X[:, :, None] * U[:, None, :]).reshape(n, R * R)


def kron_apply_zx_I(z: np.ndarray, x: np.ndarray, Y_vec: np.ndarray) -> np.ndarray:
    """``((z x') kron I_q) vec(Y)`` computed as ``vec(Y x z')``.

    ``Y`` is q-by-len(x); q is inferred from ``len(Y_vec)``.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    Y_vec = np.asarray(Y_vec, dtype=float)
    if z.ndim != 1 or x.ndim != 1 or Y_vec.ndim != 1 or len(x) == 0 or len(Y_vec) % len(x):
        raise ParameterError(f"inconsistent shapes z{z.shape}, x{x.shape}, Y_vec{Y_vec.shape}")
    Y = unvec(Y_vec, len(Y_vec) // len(x), len(x))
    return np.outer(Y @ x, z).ravel(order="F")


def conjugate_gradient(op, rhs: np.ndarray, x0: np.ndarray, iters: int) -> np.ndarray:
    """Plain conjugate gradient for a symmetric positive semidefinite ``op``.

    Runs exactly ``iters`` steps of the textbook recurrence unless the
    residual drops below ``1e-12 * ||rhs||``.
    """
    if iters < 1:
        raise ParameterError("iters must be >= 1")
    rhs = np.asarray(rhs, dtype=float)
    v = np.array(x0, dtype=float)
    if v.shape != rhs.shape:
        raise ParameterError(f"x0 has shape {v.shape}, rhs {rhs.shape}")
    stop = 1e-12 * np.linalg.norm(rhs)
    r = rhs - op(v)
    q = r.copy()
    rr = r @ r
    for _ in range(iters):
        if np.sqrt(rr) <= stop:
            break
        Aq = op(q)
        curvature = q @ Aq
        if not curvature > 0:
            raise BreakdownError(f"conjugate gradient breakdown: q'Aq = {curvature:g} with |r| = {np.sqrt(rr):g}")
        alpha = rr / curvature
        v += alpha * q
        r -= alpha * Aq
        rr_new = r @ r
        q = r + (rr_new / rr) * q
        rr = rr_new
    return v
