"""Time-series matrices: file formats, lag embedding, synthetic generators.

A data matrix ``S`` is N variables by T time steps; column ``t`` is the
snapshot ``s_t``. CSV files hold one variable per row.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError, GenerationError, ParameterError, ParseError, SizeError

BINARY_MAGIC = b"TVM1"
MATRIX_FORM_CAP = 10**7


@dataclass(frozen=True)
class TimeSeriesMatrix:
    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        if S.ndim != 2:
            raise DataError(f"time-series matrix must be 2-d, got shape {S.shape}")
        if S.shape[0] < 1 or S.shape[1] < 2:
            raise DataError(f"need N >= 1 variables and T >= 2 time steps, got {S.shape}")
        if not np.all(np.isfinite(S)):
            bad = np.argwhere(~np.isfinite(S))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]} (missing values are not supported)")
        object.__setattr__(self, "S", S)

    @property
    def N(self) -> int:
        return self.S.shape[0]

    @property
    def T(self) -> int:
        return self.S.shape[1]


@dataclass(frozen=True)
class LagPairs:
    """Aligned regression pairs ``(y_t, z_t)`` for ``t = d+1..T``.

    ``Y`` is N x (T-d) with columns y_t; ``Z`` is dN x (T-d) with columns
    ``z_t = (s_{t-1}; ...; s_{t-d})``, most recent lag first.
    """

    d: int
    Y: np.ndarray
    Z: np.ndarray

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def count(self) -> int:
        return self.Y.shape[1]

    @property
    def ys(self) -> np.ndarray:
        return self.Y.T

    @property
    def zs(self) -> np.ndarray:
        return self.Z.T

    @property
    def T(self) -> int:
        return self.count + self.d


@dataclass(frozen=True)
class SynthSpec:
    N: int
    T: int
    d: int = 1
    R: int = 3
    kind: str = "planted-var"
    switch_t: int | None = None
    base_freq: float = 1 / 30
    noise_sd: float = 0.0
    seed: int = 0
    hard_splice: bool = False

    def validate(self):
        if self.kind not in ("planted-var", "multiresolution"):
            raise ParameterError(f"unknown synthetic kind {self.kind!r}")
        if self.N < 1 or self.T < 2 or self.d < 1 or self.R < 1:
            raise ParameterError("need N >= 1, T >= 2, d >= 1, R >= 1")
        if self.noise_sd < 0:
            raise ParameterError("noise_sd must be nonnegative")
        if self.kind == "planted-var":
            if self.d >= self.T:
                raise ParameterError(f"order d={self.d} must be below T={self.T}")
            if self.R > min(self.N, self.T - self.d):
                raise ParameterError(f"rank R={self.R} exceeds min(N, T-d) = {min(self.N, self.T - self.d)}")
        else:
            if self.switch_t is None or not self.d + 1 < self.switch_t < self.T:
                raise ParameterError(f"switch_t must satisfy d+1 < switch_t < T, got {self.switch_t}")
            if self.base_freq <= 0:
                raise ParameterError("base_freq must be positive")
        return self


def _rng(seed):
    # counter-based stream: spawning children stays deterministic in parallel use
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


# -- file formats -----------------------------------------------------------

def load_csv(path, header: bool = False, transpose: bool = False) -> TimeSeriesMatrix:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise FormatError(f"{path}: row {i} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(i, j, cell) from None
    return TimeSeriesMatrix(values.T if transpose else values)


def save_csv(path, M) -> None:
    """Write a real matrix with 17 significant digits (round-trips exactly)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def load_binary(path, transpose: bool = False) -> TimeSeriesMatrix:
    data = Path(path).read_bytes()
    if data[:4] != BINARY_MAGIC:
        raise FormatError(f"{path}: missing TVM1 magic")
    if len(data) < 20:
        raise FormatError(f"{path}: truncated header")
    N, T = struct.unpack("<QQ", data[4:20])
    if len(data) != 20 + 8 * N * T:
        raise FormatError(f"{path}: expected {N}x{T} values, payload is {len(data) - 20} bytes")
    S = np.frombuffer(data, dtype="<f8", offset=20).reshape((N, T), order="F")
    return TimeSeriesMatrix(S.T if transpose else S.copy())


def save_binary(path, M) -> None:
    M = np.asarray(M, dtype=float)
    N, T = M.shape
    with Path(path).open("wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<QQ", N, T))
        fh.write(np.asarray(M, dtype="<f8").tobytes(order="F"))


def load_matrix(path, binary: bool | None = None, header: bool = False, transpose: bool = False) -> TimeSeriesMatrix:
    """Read CSV or TVM1; ``binary=None`` sniffs the magic bytes."""
    if binary is None:
        with Path(path).open("rb") as fh:
            binary = fh.read(4) == BINARY_MAGIC
    if binary:
        return load_binary(path, transpose=transpose)
    return load_csv(path, header=header, transpose=transpose)


# -- lag embedding ----------------------------------------------------------

def lag_embed(data: TimeSeriesMatrix, d: int) -> LagPairs:
    S = data.S if isinstance(data, TimeSeriesMatrix) else TimeSeriesMatrix(data).S
    T = S.shape[1]
    if not 1 <= d <= T - 1:
        raise ParameterError(f"order d={d} must satisfy 1 <= d <= T-1 = {T - 1}")
    Y = S[:, d:]
    if d == 1:
        Z = S[:, :-1]
    else:
        Z = np.vstack([S[:, d - 1 - k:T - 1 - k] for k in range(d)])
    return LagPairs(d=d, Y=Y, Z=Z)


def build_matrix_form(pairs: LagPairs, cap: int = MATRIX_FORM_CAP):
    """Dense ``Y`` and block-diagonal ``Ztilde``; small problems only."""
    n, dN = pairs.count, pairs.Z.shape[0]
    if n * n * dN > cap:
        raise SizeError(
            f"block-diagonal regressor would hold {n * n * dN} entries (cap {cap}); "
            "use the vector-form objective instead"
        )
    Zt = np.zeros((dN * n, n))
    for t in range(n):
        Zt[t * dN:(t + 1) * dN, t] = pairs.Z[:, t]
    return pairs.Y.copy(), Zt


# -- synthetic data ---------------------------------------------------------

def _companion_radius(A: np.ndarray, N: int, d: int) -> float:
    if d == 1:
        M = A
    else:
        M = np.zeros((d * N, d * N))
        M[:N] = A
        M[N:, :-N] = np.eye((d - 1) * N)
    return np.max(np.abs(np.linalg.eigvals(M)))


def synth_planted_var(spec: SynthSpec):
    """Data rolled forward from a random planted factor model.

    Returns ``(TimeSeriesMatrix, FactorSet)``. The core is rescaled so that
    every coefficient matrix (its companion form when d > 1) has spectral
    radius at most 0.95.
    """
    from .model import FactorSet, coefficient_tensor

    if spec.kind != "planted-var":
        raise ParameterError("synth_planted_var needs kind='planted-var'")
    spec.validate()
    N, T, d, R = spec.N, spec.T, spec.d, spec.R
    rng = _rng(spec.seed)
    W = rng.standard_normal((N, R))
    V = rng.standard_normal((d * N, R))
    X = rng.standard_normal((T - d, R))
    G = rng.standard_normal((R, R * R))

    def max_radius(G):
        A = coefficient_tensor(FactorSet(W=W, G=G, V=V, X=X, d=d))
        return max(_companion_radius(A_t, N, d) for A_t in A)

    rho = max_radius(G)
    if rho > 0:
        G = G * (0.95 / rho)
    for _ in range(100):
        rho = max_radius(G)
        if rho <= 0.95:
            break
        G = G * 0.5
    else:
        raise GenerationError("spectral radius did not drop below 0.95 after 100 halvings")

    factors = FactorSet(W=W, G=G, V=V, X=X, d=d)
    A = coefficient_tensor(factors)
    S = np.zeros((N, T))
    S[:, :d] = rng.standard_normal((N, d))
    noise = rng.standard_normal((N, T - d)) * spec.noise_sd
    for c in range(d, T):
        z = S[:, c - d:c][:, ::-1].ravel(order="F")
        S[:, c] = A[c - d] @ z + noise[:, c - d]
    return TimeSeriesMatrix(S), factors


def smooth_patterns(N: int, K: int, rng, harmonics: int = 4) -> np.ndarray:
    """K random smooth profiles over N sites, each of unit norm (N x K)."""
    u = np.linspace(0.0, 1.0, N)
    P = np.zeros((N, K))
    for k in range(K):
        amp = rng.standard_normal(harmonics) / np.arange(1, harmonics + 1)
        shift = rng.uniform(0, 2 * np.pi, harmonics)
        P[:, k] = sum(a * np.cos(np.pi * (m + 1) * u + s) for m, (a, s) in enumerate(zip(amp, shift)))
        P[:, k] /= np.linalg.norm(P[:, k]) or 1.0
    return P


def synth_multiresolution(spec: SynthSpec) -> TimeSeriesMatrix:
    """Smooth spatial patterns oscillating at ``base_freq``, doubling at ``switch_t``.

    Time is 0-based; columns ``t >= switch_t`` run at twice the base
    frequency. The splice is phase-continuous unless ``hard_splice``.
    """
    if spec.kind != "multiresolution":
        raise ParameterError("synth_multiresolution needs kind='multiresolution'")
    spec.validate()
    rng = _rng(spec.seed)
    P = smooth_patterns(spec.N, spec.R, rng)
    phase0 = rng.uniform(0, 2 * np.pi, spec.R)
    t = np.arange(spec.T, dtype=float)
    f0, ts = spec.base_freq, spec.switch_t
    if spec.hard_splice:
        angle = 2 * np.pi * np.where(t < ts, f0, 2 * f0) * t
    else:
        angle = 2 * np.pi * np.where(t < ts, f0 * t, f0 * ts + 2 * f0 * (t - ts))
    S = P @ np.sin(angle[None, :] + phase0[:, None])
    S += spec.noise_sd * rng.standard_normal(S.shape)
    return TimeSeriesMatrix(S)


def synthesize(spec: SynthSpec):
    """Dispatch on ``spec.kind``; always returns ``(data, factors_or_None)``."""
    if spec.kind == "planted-var":
        return synth_planted_var(spec)
    return synth_multiresolution(spec), None
