"""Command-line entry point: ``tvvar {fit,synth,dmd,eval}``.

Exit codes: 0 success, 1 failed evaluation criterion, 2 bad arguments,
3 unreadable or invalid data, 4 numerical failure. Every flag can also be
set through an environment variable ``TVVAR_<FLAG>`` (``--cg-iters`` is
``TVVAR_CG_ITERS``); explicit flags win.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import SynthSpec, lag_embed, load_matrix, save_binary, save_csv, synthesize
from .dmd import fit_dmd, normalize_dmd_modes
from .errors import DataError, NumericalError, ParameterError
from .export import export_dmd, export_factors, factor_manifest, import_factors, write_json
from .model import FitConfig, fit, normalize_modes

EXIT_FAILED, EXIT_ARGS, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3, 4

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> str:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return f"{h:016x}"


def file_digest(path) -> str:
    return fnv1a64(Path(path).read_bytes())


def _versions():
    import scipy

    return {"tvrvar": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()}


def _config_echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) and not k.startswith("_")}


def write_manifest(path, args, start, outputs, input_path=None, **extra):
    manifest = {
        "command_line": ["tvvar", *args._argv],
        "config": _config_echo(args),
        "input_digest": file_digest(input_path) if input_path else None,
        "versions": _versions(),
        "wall_time": time.perf_counter() - start,
        "outputs": sorted(outputs),
    }
    manifest.update(extra)
    write_json(path, manifest)


def _load_input(args):
    try:
        return load_matrix(args.input, binary=True if args.binary else None, header=args.header, transpose=args.transpose)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror or exc}") from exc


# -- commands ---------------------------------------------------------------

def cmd_fit(args) -> int:
    start = time.perf_counter()
    data = _load_input(args)
    cfg = FitConfig(R=args.rank, d=args.order, L=args.sweeps, cg_iters=args.cg_iters, ridge=args.ridge, rel_tol=args.tol)
    cfg.validate(data.N, data.T)
    pairs = lag_embed(data, cfg.d)
    init = import_factors(args.warm_start) if args.warm_start else None
    factors, report = fit(pairs, cfg, init=init)
    if args.normalize_modes:
        factors = normalize_modes(factors)
    out = Path(args.out)
    files = export_factors(out, factors, report)
    write_manifest(
        out / "manifest.json", args, start, files + ["manifest.json"], input_path=args.input,
        fit_wall_time=report.wall_time, **factor_manifest(factors, report),
    )
    return 0


def cmd_synth(args) -> int:
    start = time.perf_counter()
    kind = {"planted": "planted-var", "multires": "multiresolution"}[args.kind]
    switch_t = args.switch_t if args.switch_t is not None else args.t // 2
    spec = SynthSpec(
        N=args.n, T=args.t, d=args.order, R=args.rank, kind=kind, switch_t=switch_t,
        base_freq=args.base_freq, noise_sd=args.noise, seed=args.seed, hard_splice=args.hard_splice,
    ).validate()
    data, truth = synthesize(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    (save_binary if args.binary else save_csv)(out, data.S)
    outputs = [str(out)]
    if truth is not None and args.truth:
        outputs += [str(Path(args.truth) / f) for f in export_factors(args.truth, truth)]
        write_json(Path(args.truth) / "manifest.json", factor_manifest(truth, None))
        outputs.append(str(Path(args.truth) / "manifest.json"))
    manifest_path = out.with_name(out.name + ".manifest.json")
    outputs.append(str(manifest_path))
    write_manifest(manifest_path, args, start, outputs, output_digest=file_digest(out), N=data.N, T=data.T)
    return 0


def cmd_dmd(args) -> int:
    start = time.perf_counter()
    data = _load_input(args)
    if not 1 <= args.rank <= min(data.N, data.T - 1):
        raise ParameterError(f"--rank {args.rank} must satisfy 1 <= R <= min(N, T-1) = {min(data.N, data.T - 1)}")
    result = fit_dmd(data, args.rank)
    if args.normalize_modes:
        result = normalize_dmd_modes(result)
    out = Path(args.out)
    files, meta = export_dmd(out, result, args.dt)
    write_manifest(out / "manifest.json", args, start, files + ["manifest.json"], input_path=args.input, **meta)
    return 0


def cmd_eval(args) -> int:
    from .evaluation import run_suite

    start = time.perf_counter()

    def progress(res):
        status = "PASS" if res["passed"] else "FAIL"
        print(f"[{status}] criterion {res['id']} {res['name']} ({res['runtime_s']:.2f} s)", flush=True)

    report = run_suite(args.suite, corrupt=args.corrupt_update, criteria=args.criteria, progress=progress)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    write_manifest(out / "manifest.json", args, start, ["report.json", "manifest.json"], passed=report["passed"])
    failed = [f"{r['id']}:{r['name']}" for r in report["criteria"] if not r["passed"]]
    if failed:
        print(f"tvvar: failed criteria: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILED
    return 0


# -- parser -----------------------------------------------------------------

def _add_input_flags(p):
    p.add_argument("--input", required=True, help="CSV (rows = variables) or TVM1 binary matrix")
    p.add_argument("--binary", action="store_true", help="force the TVM1 binary reader")
    p.add_argument("--header", action="store_true", help="skip one header row in CSV input")
    p.add_argument("--transpose", action="store_true", help="input stores variables in columns")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvvar", description="Time-varying reduced-rank VAR and DMD baseline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the time-varying reduced-rank VAR")
    _add_input_flags(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--sweeps", type=int, default=50)
    p.add_argument("--cg-iters", type=int, default=5)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.add_argument("--normalize-modes", action="store_true")
    p.add_argument("--warm-start", default=None, help="directory with previously exported factors")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="generate synthetic data")
    p.add_argument("--kind", choices=("planted", "multires"), required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--t", type=int, default=200)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--switch-t", type=int, default=None)
    p.add_argument("--base-freq", type=float, default=1 / 30)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hard-splice", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true")
    p.add_argument("--truth", default=None, help="directory for planted factors")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dmd", help="exact DMD baseline")
    _add_input_flags(p)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--normalize-modes", action="store_true")
    p.set_defaults(func=cmd_dmd)

    p = sub.add_parser("eval", help="run the verification suites")
    p.add_argument("--suite", choices=("quick", "full"), default="quick")
    p.add_argument("--out", required=True)
    p.add_argument("--criteria", type=int, nargs="+", default=None)
    p.add_argument("--corrupt-update", choices=("G", "W", "V", "X"), default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_eval)

    _apply_env_defaults(parser)
    return parser


_TRUE = {"1", "true", "yes", "on"}


def _apply_env_defaults(parser, environ=None):
    environ = os.environ if environ is None else environ
    parsers = [parser]
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            parsers.extend(action.choices.values())
    for p in parsers:
        for action in p._actions:
            if not action.option_strings or action.dest in ("help", "version"):
                continue
            key = "TVVAR_" + action.dest.upper()
            if key not in environ:
                continue
            raw = environ[key]
            if isinstance(action, argparse._StoreTrueAction):
                action.default = raw.strip().lower() in _TRUE
            else:
                action.default = action.type(raw) if action.type else raw
                action.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = argv
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                return args.func(args)
        return args.func(args)
    except ParameterError as exc:
        print(f"tvvar: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except DataError as exc:
        print(f"tvvar: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"tvvar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
