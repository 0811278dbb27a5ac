"""Time the fit at a chosen size (defaults to the 5380 x 4380 criterion).

Thin wrapper over ``python3 -m tvrvar.scale_probe`` that also caps BLAS
threads, so timings on shared machines are comparable.
"""
import argparse

from threadpoolctl import threadpool_limits

from tvrvar import scale_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__, allow_abbrev=False)
    ap.add_argument("--threads", type=int, default=None)
    args, rest = ap.parse_known_args()
    with threadpool_limits(limits=args.threads):
        scale_probe.main(rest)


if __name__ == "__main__":
    main()
