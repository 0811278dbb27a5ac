"""Time-varying reduced-rank VAR with Tucker-factorized coefficients.

The coefficient matrix at time t is ``A_t = W G (x_t' kron V)'`` where

* ``W`` (N x R) holds the spatial modes,
* ``V`` (dN x R) the lagged spatial modes,
* ``X`` (T-d x R) the temporal modes, one row ``x_t`` per fitted time step,
* ``G`` (R x R^2) is the mode-1 unfolding of the core tensor, with the
  (mode-2, mode-3) column index ordered column-major: ``G[i, j + R*k]``.

Fitting is block coordinate descent over G, W, V and X. Every block uses
the batched regressors ``c_t = vec(V' z_t x_t')`` so no Kronecker product
is ever formed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import NumericalError, ParameterError
from .linalg import (
    EPS,
    LinearOperator,
    _pinv_stack,
    conjugate_gradient,
    fix_signs,
    kron_rows_vt_z,
    pseudo_inverse,
    solve_ridge,
    truncated_svd,
    unvec,
    vec,
)

if TYPE_CHECKING:
    from .dataset import LagPairs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FactorSet:
    W: np.ndarray
    G: np.ndarray
    V: np.ndarray
    X: np.ndarray
    d: int

    def __post_init__(self):
        R = self.W.shape[1]
        if self.G.shape != (R, R * R) or self.V.shape[1] != R or self.X.shape[1] != R:
            raise ParameterError(
                f"inconsistent factor shapes W{self.W.shape} G{self.G.shape} V{self.V.shape} X{self.X.shape}"
            )
        if self.V.shape[0] != self.d * self.W.shape[0]:
            raise ParameterError(f"V has {self.V.shape[0]} rows, expected d*N = {self.d * self.W.shape[0]}")

    @property
    def R(self) -> int:
        return self.W.shape[1]

    @property
    def N(self) -> int:
        return self.W.shape[0]

    @property
    def T(self) -> int:
        return self.X.shape[0] + self.d

    def core(self) -> np.ndarray:
        """Core tensor as an R x R x R array indexed (i, j, k)."""
        R = self.R
        return self.G.reshape(R, R, R, order="F")


@dataclass
class FitConfig:
    R: int
    d: int = 1
    L: int = 50
    cg_iters: int = 5
    ridge: float = 1e-8
    rel_tol: float = 1e-8
    seed: int = 0
    trace_updates: bool = False

    def validate(self, N: int, T: int) -> FitConfig:
        if not 1 <= self.d <= T - 1:
            raise ParameterError(f"order d={self.d} must satisfy 1 <= d <= T-1 = {T - 1}")
        bound = min(N, T - self.d)
        if not 1 <= self.R <= bound:
            raise ParameterError(f"rank R={self.R} must satisfy 1 <= R <= min(N, T-d) = {bound}")
        if self.L < 0:
            raise ParameterError("sweep count L must be >= 0")
        if self.cg_iters < 1:
            raise ParameterError("cg_iters must be >= 1")
        if self.ridge < 0 or self.rel_tol < 0:
            raise ParameterError("ridge and rel_tol must be nonnegative")
        return self


@dataclass
class FitReport:
    objective_trace: list = field(default_factory=list)
    sweeps_run: int = 0
    converged: bool = False
    wall_time: float = 0.0
    initial_objective: float = float("nan")
    # (sweep, block, objective) after every block when cfg.trace_updates
    update_trace: list = field(default_factory=list)


def _check_pairs(factors: FactorSet, pairs: LagPairs):
    if factors.N != pairs.N or factors.V.shape[0] != pairs.Z.shape[0] or factors.X.shape[0] != pairs.count:
        raise ParameterError(
            f"factors (N={factors.N}, dN={factors.V.shape[0]}, T-d={factors.X.shape[0]}) do not match "
            f"data (N={pairs.N}, dN={pairs.Z.shape[0]}, T-d={pairs.count})"
        )


def regressors(factors: FactorSet, pairs: LagPairs) -> np.ndarray:
    """Rows ``c_t = vec(V' z_t x_t')``, shape (T-d, R^2)."""
    return kron_rows_vt_z(factors.X, factors.V, pairs.Z)


def fitted_values(factors: FactorSet, pairs: LagPairs) -> np.ndarray:
    """``y_hat_t = W G c_t`` as an N x (T-d) matrix."""
    C = regressors(factors, pairs)
    return factors.W @ (factors.G @ C.T)


def objective(factors: FactorSet, pairs: LagPairs) -> float:
    """Half the summed squared one-step residuals."""
    _check_pairs(factors, pairs)
    E = pairs.Y - fitted_values(factors, pairs)
    return 0.5 * float(np.einsum("ij,ij->", E, E))


def one_step_predict(factors: FactorSet, pairs: LagPairs):
    """Fitted values (N x (T-d)) and the per-time residual norms."""
    _check_pairs(factors, pairs)
    Yhat = fitted_values(factors, pairs)
    return Yhat, np.linalg.norm(pairs.Y - Yhat, axis=0)


def coefficient_at(factors: FactorSet, t: int) -> np.ndarray:
    """Materialize ``A_t`` (N x dN) for a 1-based time index ``d+1 <= t <= T``."""
    if not factors.d + 1 <= t <= factors.T:
        raise ParameterError(f"time index t={t} outside [{factors.d + 1}, {factors.T}]")
    x = factors.X[t - factors.d - 1]
    # contract the core's third mode with x_t, then map modes 1 and 2
    core = np.tensordot(factors.core(), x, axes=([2], [0]))
    return factors.W @ core @ factors.V.T


def coefficient_tensor(factors: FactorSet) -> np.ndarray:
    """All coefficient matrices stacked as (T-d, N, dN)."""
    core_t = np.einsum("ijk,tk->tij", factors.core(), factors.X)
    return np.einsum("ni,tij,mj->tnm", factors.W, core_t, factors.V, optimize=True)


# -- block updates ----------------------------------------------------------

def _scaled_ridge(gram: np.ndarray, ridge: float) -> float:
    return ridge * np.trace(gram) / gram.shape[0] if ridge else 0.0


def update_W(factors: FactorSet, pairs: LagPairs, ridge: float = 0.0) -> np.ndarray:
    """Closed-form least squares for ``W`` with the other blocks fixed."""
    _check_pairs(factors, pairs)
    B = regressors(factors, pairs) @ factors.G.T  # rows b_t = G c_t
    gram = B.T @ B
    numer = pairs.Y @ B
    return solve_ridge(gram, numer.T, _scaled_ridge(gram, ridge), name="update_W").T


def update_G(factors: FactorSet, pairs: LagPairs, ridge: float = 0.0) -> np.ndarray:
    """Closed-form least squares for ``G``: ``W^+ (sum y_t c_t') (sum c_t c_t')^-1``."""
    _check_pairs(factors, pairs)
    C = regressors(factors, pairs)
    gram = C.T @ C
    rhs = (pairs.Y @ C).T
    return pseudo_inverse(factors.W) @ solve_ridge(gram, rhs, _scaled_ridge(gram, ridge), name="update_G").T


def _weighted_lag_sum(Z, X, Pflat):
    # sum_t z_t x_t' P_t' where row t of Pflat is vec(P_t); returns dN x R
    n, R = X.shape
    P = Pflat.reshape(n, R, R)  # P[t, b, a] = P_t[a, b]
    return Z @ np.einsum("tba,tb->ta", P, X)


def v_system(factors: FactorSet, pairs: LagPairs):
    """The normal equations for ``vec(V)`` as ``(operator, rhs)``.

    The operator applies ``vec(sum_t z_t x_t' P_t(V)')`` with
    ``vec(P_t) = G'W'WG vec(V' z_t x_t')``; the right-hand side is
    ``vec(sum_t z_t x_t' Q_t')`` with ``vec(Q_t) = G'W'y_t``.
    """
    _check_pairs(factors, pairs)
    WG = factors.W @ factors.G
    H = WG.T @ WG
    Z, X = pairs.Z, factors.X
    dN, R = factors.V.shape

    def apply(v):
        C = kron_rows_vt_z(X, unvec(v, dN, R), Z)
        return vec(_weighted_lag_sum(Z, X, C @ H))

    rhs = vec(_weighted_lag_sum(Z, X, pairs.Y.T @ WG))
    return LinearOperator(dN * R, dN * R, apply), rhs


def update_V(factors: FactorSet, pairs: LagPairs, cg_iters: int = 5, check_symmetry: bool = False) -> np.ndarray:
    """Conjugate gradient on the generalized Sylvester system for ``V``, warm-started at the current ``V``."""
    op, rhs = v_system(factors, pairs)
    if check_symmetry:
        gap = op.symmetry_gap()
        if gap > 1e-8:
            raise NumericalError(f"update_V operator is not symmetric (gap {gap:.2e})")
    v = conjugate_gradient(op, rhs, vec(factors.V), cg_iters)
    return unvec(v, *factors.V.shape)


def x_design(factors: FactorSet, pairs: LagPairs) -> np.ndarray:
    """Per-time design blocks ``K_t = G (I_R kron V'z_t)``, shape (T-d, R, R).

    ``M_t = W K_t`` is the matrix multiplying ``x_t`` in the residual.
    """
    U = pairs.Z.T @ factors.V
    return np.einsum("ijk,tj->tik", factors.core(), U)


def update_X(factors: FactorSet, pairs: LagPairs, ridge: float = 0.0) -> np.ndarray:
    """Independent minimum-norm least squares ``x_t = M_t^+ y_t`` for every t.

    Uses ``W = Q R_w`` so that ``M_t^+ = (R_w K_t)^+ Q'``; the truncation
    threshold is the one the N x R matrix ``M_t`` would get. ``ridge`` is
    accepted for a uniform block signature; the pseudo-inverse needs none.
    """
    _check_pairs(factors, pairs)
    K = x_design(factors, pairs)
    Q, Rw = np.linalg.qr(factors.W)
    B = Rw[None] @ K
    rhs = pairs.Y.T @ Q
    rtol = max(factors.N, factors.R) * EPS
    Bp = _pinv_stack(B, rtol=rtol)
    return np.einsum("tij,tj->ti", Bp, rhs)


# -- gradients (used for verification) --------------------------------------

def gradients(factors: FactorSet, pairs: LagPairs) -> dict:
    """Analytic partials of the objective w.r.t. W, G, V and every x_t."""
    _check_pairs(factors, pairs)
    C = regressors(factors, pairs)
    E = pairs.Y - factors.W @ (factors.G @ C.T)  # residuals, N x n
    B = C @ factors.G.T
    K = x_design(factors, pairs)
    gX = -np.einsum("tij,ni,nt->tj", K, factors.W, E)
    op, rhs = v_system(factors, pairs)
    gV = unvec(op(vec(factors.V)) - rhs, *factors.V.shape)
    return {
        "W": -E @ B,
        "G": -factors.W.T @ E @ C,
        "V": gV,
        "X": gX,
    }


# -- initialization and driver ----------------------------------------------

def initialize(pairs: LagPairs, cfg: FitConfig) -> FactorSet:
    """SVD start: W, V, X from leading singular vectors, then one G solve.

    W spans the leading left singular vectors of Y, V those of the stacked
    regressors Z, and X the leading left singular vectors of Y' (the rows
    of S' for t = d+1..T).
    """
    cfg.validate(pairs.N, pairs.T)
    if cfg.d != pairs.d:
        raise ParameterError(f"config order d={cfg.d} differs from the lag embedding's d={pairs.d}")
    R = cfg.R
    W, _, Vt_y = truncated_svd(pairs.Y, R)
    X = Vt_y.T
    X = X * fix_signs(X)
    V, _, _ = truncated_svd(pairs.Z, R)
    G0 = np.zeros((R, R * R))
    factors = FactorSet(W=W, G=G0, V=V, X=X, d=pairs.d)
    return replace(factors, G=update_G(factors, pairs, cfg.ridge))


UPDATE_ORDER = ("G", "W", "V", "X")


def sweep(factors: FactorSet, pairs: LagPairs, cfg: FitConfig, on_block=None) -> FactorSet:
    """One pass of the four block updates in the order G, W, V, X."""
    factors = replace(factors, G=update_G(factors, pairs, cfg.ridge))
    if on_block:
        on_block("G", factors)
    factors = replace(factors, W=update_W(factors, pairs, cfg.ridge))
    if on_block:
        on_block("W", factors)
    factors = replace(factors, V=update_V(factors, pairs, cfg.cg_iters))
    if on_block:
        on_block("V", factors)
    factors = replace(factors, X=update_X(factors, pairs, cfg.ridge))
    if on_block:
        on_block("X", factors)
    return factors


def fit(pairs: LagPairs, cfg: FitConfig, init: FactorSet | None = None):
    """Alternating minimization from an SVD start (or ``init``).

    Returns ``(factors, report)``. Stops after ``cfg.L`` sweeps or once the
    relative objective change drops below ``cfg.rel_tol``. A numerical
    failure re-raises with the partial report attached as ``exc.report``.
    """
    start = time.perf_counter()
    cfg.validate(pairs.N, pairs.T)
    report = FitReport()
    try:
        factors = initialize(pairs, cfg) if init is None else init
        _check_pairs(factors, pairs)
    except NumericalError as exc:
        exc.report = report
        raise
    f_prev = objective(factors, pairs)
    report.initial_objective = f_prev

    on_block = None
    if cfg.trace_updates:
        def on_block(name, current):
            report.update_trace.append((report.sweeps_run, name, objective(current, pairs)))

    for k in range(cfg.L):
        try:
            factors = sweep(factors, pairs, cfg, on_block)
        except NumericalError as exc:
            report.wall_time = time.perf_counter() - start
            exc.args = (f"sweep {k}: {exc}",)
            exc.report = report
            raise
        f = objective(factors, pairs)
        report.objective_trace.append(f)
        report.sweeps_run = k + 1
        log.debug("sweep %d objective %.6e", k, f)
        if f == 0.0 or abs(f_prev - f) <= cfg.rel_tol * f_prev:
            report.converged = True
            break
        f_prev = f
    report.wall_time = time.perf_counter() - start
    return factors, report


def normalize_modes(factors: FactorSet) -> FactorSet:
    """Unit-norm columns of W with the scale absorbed into G (A_t unchanged)."""
    norms = np.linalg.norm(factors.W, axis=0)
    norms[norms == 0] = 1.0
    return replace(factors, W=factors.W / norms, G=norms[:, None] * factors.G)
