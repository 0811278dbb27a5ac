"""Planted-model recovery diagnostics.

Reports the relative objective and the per-time coefficient error for each
generator seed. With noiseless data every y_t lies in span(W), so R
equations per step meet R free entries of x_t and the fit can be exact
without matching A_t; ``--noise`` and ``--project`` help show this.
"""
import argparse

import numpy as np

from tvrvar.dataset import SynthSpec, lag_embed, synth_planted_var
from tvrvar.model import FitConfig, coefficient_tensor, fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--t", type=int, default=200)
    ap.add_argument("--rank", type=int, default=3)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--sweeps", type=int, default=50)
    ap.add_argument("--project", action="store_true", help="compare A_t z_t instead of A_t")
    args = ap.parse_args()

    for seed in args.seeds:
        spec = SynthSpec(N=args.n, T=args.t, R=args.rank, noise_sd=args.noise, seed=seed)
        data, truth = synth_planted_var(spec)
        pairs = lag_embed(data, 1)
        fitted, rep = fit(pairs, FitConfig(R=args.rank, L=args.sweeps))
        A, Ahat = coefficient_tensor(truth), coefficient_tensor(fitted)
        if args.project:
            a = np.einsum("tij,jt->ti", A, pairs.Z)
            b = np.einsum("tij,jt->ti", Ahat, pairs.Z)
            errs = np.linalg.norm(b - a, axis=1) / np.maximum(np.linalg.norm(a, axis=1), 1e-300)
        else:
            errs = np.linalg.norm(Ahat - A, axis=(1, 2)) / np.linalg.norm(A, axis=(1, 2))
        rel = rep.objective_trace[-1] / (0.5 * np.sum(pairs.Y**2)) if rep.objective_trace else float("nan")
        print(f"seed {seed}: rel objective {rel:.2e}  coef error max {errs.max():.2e}  median {np.median(errs):.2e}")


if __name__ == "__main__":
    main()
