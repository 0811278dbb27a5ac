"""Exact dynamic mode decomposition (the time-invariant baseline)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesMatrix
from .errors import ParameterError, RankError
from .linalg import EPS, truncated_svd


@dataclass(frozen=True)
class DmdResult:
    eigenvalues: np.ndarray  # (R,) complex
    modes: np.ndarray  # (N, R) complex spatial modes
    amplitudes: np.ndarray  # (R,) complex
    temporal: np.ndarray  # (T-1, R) complex, temporal[t, k] = b_k * lambda_k**t

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)


def _order_eigs(lam: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Indices sorting by nonincreasing |lambda| with conjugate pairs adjacent."""
    order = list(np.argsort(-np.abs(lam), kind="stable"))
    out = []
    used = set()
    for i in order:
        if i in used:
            continue
        used.add(i)
        if abs(lam[i].imag) <= tol * max(abs(lam[i]), 1.0):
            out.append(i)
            continue
        rest = [j for j in order if j not in used]
        partner = min(rest, key=lambda j: abs(lam[j] - np.conj(lam[i])), default=None)
        pair = [i] if partner is None else [i, partner]
        if partner is not None:
            used.add(partner)
            # positive imaginary part first
            pair.sort(key=lambda j: -lam[j].imag)
        out.extend(pair)
    return np.array(out, dtype=int)


def fit_dmd(data, R: int) -> DmdResult:
    """Rank-``R`` exact DMD of consecutive snapshot pairs.

    Amplitudes are fitted to the first snapshot. Raises ``RankError`` when
    the truncation reaches a zero singular value.
    """
    S = data.S if isinstance(data, TimeSeriesMatrix) else TimeSeriesMatrix(data).S
    N, T = S.shape
    if not 1 <= R <= min(N, T - 1):
        raise ParameterError(f"rank R={R} must satisfy 1 <= R <= min(N, T-1) = {min(N, T - 1)}")
    S1, S2 = S[:, :-1], S[:, 1:]
    U, s, Vt = truncated_svd(S1, R)
    if s[-1] <= max(S1.shape) * EPS * max(s[0], 1e-300):
        raise RankError(f"singular value {R} of the snapshot matrix is zero; use a rank below {R}")
    S2V = S2 @ (Vt.T / s)
    Atilde = U.T @ S2V
    lam, w = np.linalg.eig(Atilde)
    order = _order_eigs(lam)
    lam, w = lam[order], w[:, order]
    modes = S2V @ w
    b = np.linalg.lstsq(modes, S1[:, 0].astype(complex), rcond=None)[0]
    steps = np.arange(T - 1)
    temporal = b[None, :] * lam[None, :] ** steps[:, None]
    return DmdResult(eigenvalues=lam, modes=modes, amplitudes=b, temporal=temporal)


def reconstruct(result: DmdResult, steps) -> np.ndarray:
    """Snapshots ``Phi diag(b) lambda**t`` at 0-based times ``steps`` (N x len(steps))."""
    steps = np.asarray(steps)
    vander = result.eigenvalues[:, None] ** steps[None, :]
    return result.modes @ (result.amplitudes[:, None] * vander)


def dmd_frequency_report(result: DmdResult, dt: float = 1.0):
    """Per-mode ``(growth rate, frequency)`` in units of ``1/dt``.

    A zero eigenvalue reports growth ``-inf``.
    """
    if not dt > 0:
        raise ParameterError("dt must be positive")
    lam = result.eigenvalues
    mag = np.abs(lam)
    with np.errstate(divide="ignore"):
        growth = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)) / dt, -np.inf)
    freq = np.angle(lam) / (2 * np.pi * dt)
    return growth, freq


def normalize_dmd_modes(result: DmdResult) -> DmdResult:
    """Unit-norm spatial modes with the scale moved into the amplitudes."""
    norms = np.linalg.norm(result.modes, axis=0)
    norms[norms == 0] = 1.0
    return DmdResult(
        eigenvalues=result.eigenvalues,
        modes=result.modes / norms,
        amplitudes=result.amplitudes * norms,
        temporal=result.temporal * norms,
    )
