"""Command-line front end: one subcommand per experiment kind.

Exit codes: 0 success, 2 configuration error, 3 numerical integrity error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ._version import __version__
from .config import EXPERIMENT_KINDS, load_config
from .errors import ConfigurationError, NumericalIntegrityError
from .runner import run

_KIND_HELP = {
    "closed-spectrum": "solve a closed graph's levels with a completeness "
                       "certificate",
    "closed-stats": "solve a closed graph and compute spectral statistics",
    "goe-spectrum": "sample GOE spectra and compute the same statistics",
    "open-scatter": "attach channels and sample S(k), averages, correlators",
    "goe-scatter": "matched-transmission GOE S-matrix ensemble",
    "pf-analysis": "classical transfer-operator spectrum and mixing decay",
    "compare": "compare one statistic between two finished runs",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qgraphlab",
        description="Spectral and scattering experiments on metric graphs.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="kind", required=True, metavar="subcommand")
    for kind in EXPERIMENT_KINDS:
        s = sub.add_parser(kind, help=_KIND_HELP.get(kind, ""))
        s.add_argument("--config", required=True,
                       help="JSON experiment configuration")
        s.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        s.add_argument("--workers", type=int, default=None,
                       help="override the worker count")
        s.add_argument("--out", default=None,
                       help="override the output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = replace(cfg, kind=args.kind)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.workers is not None:
            cfg = replace(cfg, workers=args.workers)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        man = run(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalIntegrityError as exc:
        print(f"numerical integrity error: {exc}", file=sys.stderr)
        return 3

    print(f"manifest: {Path(cfg.out_dir) / 'manifest.json'}")
    print(f"result_hash: {man.result_hash}")
    for key, value in man.summary.items():
        print(f"  {key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
