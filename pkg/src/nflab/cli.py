"""Command-line entry point ``nflab``."""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys

from . import __version__
from .errors import ConfigError, NflabError, ResonanceViolation
from .harness import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, _clean


def _threads(n):
    n = n or os.environ.get("NFLAB_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _print(obj):
    print(json.dumps(_clean(obj), indent=2, sort_keys=True))


def _cmd_simulate(args, stop_after=None):
    from .harness import run_config

    manifest, code = run_config(args.config, out_dir=args.out, stop_after=stop_after,
                                dump_operators=True if args.dump_operators else None)
    summary = {k: manifest.get(k) for k in ("run_id", "status", "failed_stage", "error", "verdicts", "csv", "path")}
    _print(summary)
    return code


def _cmd_normalform(args):
    return _cmd_simulate(args, stop_after="normal_form")


def _cmd_diophantine(args):
    from .arithmetic import diophantine_scan, frequency_system

    freq = frequency_system(args.nu, args.omega)
    try:
        rec = diophantine_scan(freq, args.kappa, args.kmax, args.variant)
    except ResonanceViolation as exc:
        _print({"resonance_violation": str(exc)})
        return EXIT_NUMERICAL
    _print(rec.as_dict())
    return EXIT_OK


def _cmd_decompose(args):
    from .arithmetic import frequency_system

    freq = frequency_system(args.nu)
    _print(freq.as_dict())
    return EXIT_OK


def _cmd_compare(args):
    from .harness import compare, load_config

    configs = None
    if args.configs:
        configs = tuple(load_config(p) for p in args.configs)
    report = compare(args.a, args.b, configs)
    series = report.pop("series")
    _print(report)
    if args.series:
        for side, text in series.items():
            with open(f"{args.series}_{side}.dat", "w") as fh:
                fh.write("# r epsilon_hat\n" + text + "\n")
    return EXIT_OK


def _cmd_selftest(args):
    from .acceptance import CRITERIA, QUICK, run_all

    which = args.criteria or (sorted(CRITERIA) if args.full else list(QUICK))
    ok = True
    for res in run_all(which):
        print(res.line(), flush=True)
        ok &= res.passed
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def build_parser():
    p = argparse.ArgumentParser(prog="nflab", description="Normal-form laboratory for driven Schroedinger operators.")
    p.add_argument("--version", action="version", version=f"nflab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count (overrides NFLAB_THREADS)")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, text in (("simulate", _cmd_simulate, "run every stage of a config"),
                           ("normalform", _cmd_normalform, "run a config up to the normal-form stage")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--out", default=None, help="output directory (default from config)")
        s.add_argument("--dump-operators", action="store_true", help="write dense operator blocks")
        s.set_defaults(func=fn)

    s = sub.add_parser("diophantine", help="scan the Diophantine constant of (omega, nu)")
    s.add_argument("--omega", nargs="+", required=True, help="drive frequencies, e.g. sqrt2")
    s.add_argument("--nu", nargs="+", default=["1"], help="oscillator frequencies (reduced automatically)")
    s.add_argument("--kappa", type=float, default=2.0)
    s.add_argument("--kmax", type=int, default=50)
    s.add_argument("--variant", choices=["non.res3", "non.res.re"], default="non.res3")
    s.set_defaults(func=_cmd_diophantine)

    s = sub.add_parser("decompose", help="resonance lattice and reduced frequencies of nu")
    s.add_argument("--nu", nargs="+", required=True)
    s.set_defaults(func=_cmd_decompose)

    s = sub.add_parser("compare", help="compare two run manifests")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--configs", nargs=2, default=None, help="configs of the two runs (checked for consistency)")
    s.add_argument("--series", default=None, help="prefix for two-column .dat files")
    s.set_defaults(func=_cmd_compare)

    s = sub.add_parser("selftest", help="run the acceptance experiments")
    s.add_argument("--full", action="store_true", help="include the long propagation experiments")
    s.add_argument("--criteria", type=int, nargs="+", default=None)
    s.set_defaults(func=_cmd_selftest)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _threads(args.threads):
            return args.func(args)
    except ConfigError as exc:
        print(f"nflab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NflabError as exc:
        print(f"nflab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
