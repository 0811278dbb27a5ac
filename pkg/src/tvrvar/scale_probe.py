"""Fit a large synthetic matrix and print wall time and peak memory as JSON.

Run as ``python -m tvrvar.scale_probe``; the evaluation suite launches it in
a subprocess so the peak resident set size belongs to this fit alone.
"""
import argparse
import json
import resource
import sys
import time

from .dataset import SynthSpec, lag_embed, synth_multiresolution
from .model import FitConfig, fit


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5380)
    ap.add_argument("--t", type=int, default=4380)
    ap.add_argument("--rank", type=int, default=4)
    ap.add_argument("--sweeps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    start = time.perf_counter()
    spec = SynthSpec(
        N=args.n, T=args.t, d=1, R=args.rank, kind="multiresolution",
        switch_t=args.t // 2, base_freq=1 / 365, noise_sd=0.1, seed=args.seed,
    )
    pairs = lag_embed(synth_multiresolution(spec), 1)
    generated = time.perf_counter()
    _, report = fit(pairs, FitConfig(R=args.rank, d=1, L=args.sweeps, rel_tol=0.0))
    done = time.perf_counter()
    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    print(json.dumps({
        "N": args.n,
        "T": args.t,
        "R": args.rank,
        "sweeps_run": report.sweeps_run,
        "generate_s": generated - start,
        "fit_s": done - generated,
        "wall_time_s": done - start,
        "peak_rss_gb": peak_kb / 2**20,
        "final_objective": report.objective_trace[-1] if report.objective_trace else None,
    }, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
