"""On-disk layout for fitted factors and DMD results."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import save_csv
from .dmd import DmdResult, dmd_frequency_report
from .errors import FormatError
from .model import FactorSet, FitReport

FACTOR_FILES = ("W.csv", "V.csv", "X.csv", "G.csv")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n", encoding="utf-8")


def _read_plain_csv(path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return M


def factor_manifest(factors: FactorSet, report: FitReport | None) -> dict:
    out = {"N": factors.N, "T": factors.T, "d": factors.d, "R": factors.R}
    if report is not None:
        out.update(
            objective_trace=[float(f) for f in report.objective_trace],
            sweeps_run=report.sweeps_run,
            converged=bool(report.converged),
        )
    return out


def export_factors(outdir, factors: FactorSet, report: FitReport | None = None) -> list[str]:
    """Write W/V/X/G and the objective trace as CSV; returns the file names.

    The JSON manifest is written by the caller (see :func:`factor_manifest`).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name, M in zip(FACTOR_FILES, (factors.W, factors.V, factors.X, factors.G)):
        save_csv(outdir / name, M)
    files = list(FACTOR_FILES)
    if report is not None:
        with (outdir / "objective_trace.csv").open("w", encoding="utf-8") as fh:
            fh.write("sweep,objective\n")
            for k, f in enumerate(report.objective_trace, start=1):
                fh.write(f"{k},{f:.17g}\n")
        files.append("objective_trace.csv")
    return files


def import_factors(directory) -> FactorSet:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FormatError(f"{directory}: no manifest.json next to the factor files")
    meta = json.loads(manifest_path.read_text(encoding="utf-8"))
    mats = {name[0]: _read_plain_csv(directory / name) for name in FACTOR_FILES}
    R = int(meta["R"])
    if mats["W"].shape[1] != R:
        raise FormatError(f"{directory}: W has {mats['W'].shape[1]} columns, manifest says R={R}")
    return FactorSet(W=mats["W"], G=mats["G"], V=mats["V"], X=mats["X"], d=int(meta["d"]))


def _complex_columns(M: np.ndarray, prefix: str):
    header = ",".join(f"{prefix}{k + 1}_re,{prefix}{k + 1}_im" for k in range(M.shape[1]))
    out = np.empty((M.shape[0], 2 * M.shape[1]))
    out[:, 0::2] = M.real
    out[:, 1::2] = M.imag
    return header, out


def _write_table(path, header: str, M: np.ndarray):
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in M:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def export_dmd(outdir, result: DmdResult, dt: float = 1.0) -> tuple[list[str], dict]:
    """Write modes/temporal/eigenvalue tables; returns (files, manifest fields)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    growth, freq = dmd_frequency_report(result, dt)
    _write_table(outdir / "modes.csv", *_complex_columns(result.modes, "mode"))
    _write_table(outdir / "temporal.csv", *_complex_columns(result.temporal, "mode"))
    lam = result.eigenvalues
    table = np.column_stack([lam.real, lam.imag, np.abs(lam), growth, freq, result.amplitudes.real, result.amplitudes.imag])
    _write_table(outdir / "eigenvalues.csv", "re,im,abs,growth,frequency,amplitude_re,amplitude_im", table)
    meta = {
        "rank": result.rank,
        "dt": dt,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in lam],
        "frequencies": [float(f) for f in freq],
        "growth_rates": [float(g) if np.isfinite(g) else None for g in growth],
    }
    return ["modes.csv", "temporal.csv", "eigenvalues.csv"], meta
