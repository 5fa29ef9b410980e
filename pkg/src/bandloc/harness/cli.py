"""Command-line interface.

Every subcommand builds an :class:`ExperimentConfig` (optionally starting from
a JSON file given with ``--config``), runs it and writes CSV outputs plus a
manifest into ``--out``.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 3 acceptance
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ESTIMATORS, ConfigError, load_config
from .runner import run

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_ACCEPTANCE = 0, 1, 2, 3


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# subcommand -> (help, [(flag, param name, type, help)])
_ENSEMBLE_FLAGS = [
    ("--W", "W", int, "block width"),
    ("--n", "n", int, "number of blocks"),
    ("--N", "N", int, "matrix size (multiple of W)"),
    ("--symmetry", "symmetry", str, "real or complex"),
    ("--diag-law", "diag_law", str, "diagonal block law as JSON, e.g. '{\"kind\": \"box_wigner\", \"D\": 1}'"),
    ("--offdiag-law", "offdiag_law", str, "coupling law as JSON"),
]

_COMMANDS = {
    "sample": ("write the blocks of one draw", [("--index", "index", int, "sample index")]),
    "resolvent": ("resolvent entries of one draw via the Schur chains", [
        ("--lambda", "lambda", float, "spectral parameter"),
        ("--x", "x", int, "row site (1-based)"),
        ("--y", "y", int, "column site (default: all)"),
        ("--index", "index", int, "sample index"),
        ("--oracle", "oracle", _bool, "compare with the dense solve"),
    ]),
    "moments": ("fractional moment E|G(x,y)|^s, optional tail curve", [
        ("--lambda", "lambda", float, "spectral parameter"),
        ("--x", "x", int, "site x"),
        ("--y", "y", int, "site y"),
        ("--s", "s", float, "exponent in (0, 1)"),
        ("--t-grid", "t_grid", _floats, "comma-separated thresholds for P(|G| > t)"),
    ]),
    "decay": ("decay profile of E|G(x0, x0+d)|^s with exponential fit", [
        ("--lambda", "lambda", float, "spectral parameter"),
        ("--s", "s", float, "exponent in (0, 1)"),
        ("--x0", "x0", int, "anchor site"),
        ("--distances", "distances", _ints, "comma-separated distances (default: all)"),
        ("--fit-window", "fit_window", int, "fit only d above this (>= 3W)"),
    ]),
    "scan": ("localization length xi(W) over block widths", [
        ("--lambda", "lambda", float, "spectral parameter"),
        ("--s", "s", float, "exponent in (0, 1)"),
        ("--x0", "x0", int, "anchor site"),
        ("--widths", "widths", _ints, "comma-separated widths"),
        ("--blocks", "blocks", int, "blocks per matrix (N = blocks * W)"),
    ]),
    "dos": ("density of states against the semicircle", [
        ("--bins", "bins", int, "number of bins"),
        ("--lim", "lim", float, "histogram half-range in units of sigma"),
    ]),
    "spacing": ("nearest-neighbour spacing statistics", [
        ("--lambda0", "lambda0", float, "window center"),
        ("--window", "window", float, "window half-width"),
        ("--unfolding", "unfolding", str, "empirical or semicircle"),
    ]),
    "minami": ("pair rate in short intervals", [
        ("--lambda0", "lambda0", float, "interval center"),
        ("--lengths", "lengths", _floats, "comma-separated interval lengths"),
        ("--decade", "decade", float, "lowest length in units of the mean spacing"),
        ("--points", "points", int, "lengths per decade"),
    ]),
    "eigvec": ("eigenvector correlator decay", [
        ("--r", "r", float, "energy window half-width"),
        ("--x0", "x0", int, "anchor site"),
        ("--fit-window", "fit_window", int, "fit only distances above this (>= 3W)"),
    ]),
    "wegner": ("block Wegner tail P(||(V-A)^-1|| > t W^1.5)", [
        ("--t-grid", "t_grid", _floats, "comma-separated thresholds"),
        ("--shift", "shift", str, "zero or random"),
        ("--two-block", "two_block", _bool, "use the coupled two-block matrix"),
    ]),
    "holder": ("Holder gap of ln E exp(qX) from samples", [
        ("--law", "law", str, "gaussian, uniform or two_point"),
        ("--mean", "mean", float, "location shift"),
        ("--r", "r", float, "lower exponent"),
        ("--s", "s", float, "upper exponent"),
    ]),
    "domination": ("conditional domination bound simulation", [
        ("--n", "n", int, "number of variables"),
        ("--delta", "delta", float, "jump size"),
        ("--p0", "p0", float, "conditional probability floor"),
        ("--model", "model", str, "iid, markov or constant"),
    ]),
    "acceptance": ("run the acceptance suite", [
        ("--determinism", "determinism", _bool, "also rerun with another worker count and compare"),
    ]),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bandloc", description="Random band matrix experiments.")
    p.add_argument("--seed", type=int, default=None, help="master seed (64-bit)")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.add_argument("--out", default=None, help="output directory")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (help_text, flags) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--name", help="experiment name (output file prefix)")
        sp.add_argument("--samples", type=int, help="number of draws")
        if name not in ("holder", "domination", "acceptance"):
            for flag, dest, typ, h in _ENSEMBLE_FLAGS:
                sp.add_argument(flag, dest=f"ens_{dest}", type=typ, help=h)
        for flag, dest, typ, h in flags:
            sp.add_argument(flag, dest=f"par_{dest}", type=typ, help=h)
    return p


def _config_dict(args) -> dict:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
    else:
        d = {}
    d.setdefault("name", args.name or args.command)
    if args.name:
        d["name"] = args.name
    d["estimator"] = args.command
    ens = dict(d.get("ensemble") or {})
    for k, v in vars(args).items():
        if v is None:
            continue
        if k.startswith("ens_"):
            key = k[4:]
            if key in ("diag_law", "offdiag_law"):
                v = json.loads(v)
            if key in ("n", "N"):
                ens.pop("n", None)
                ens.pop("N", None)
            ens[key] = v
        elif k.startswith("par_"):
            d.setdefault("params", {})[k[4:]] = v
    if ens:
        d["ensemble"] = ens
    for k, v in (("samples", args.samples), ("seed", args.seed), ("workers", args.workers),
                 ("output_dir", args.out)):
        if v is not None:
            d[k] = v
    return d


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        d = _config_dict(args)
        cfg = load_config(d)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        manifest = run(cfg)
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for f in manifest.outputs:
        print(f"wrote {cfg.output_dir}/{f}")
    if cfg.estimator == "acceptance":
        failed = manifest.failures.get("failed_criteria", [])
        if failed:
            print(f"acceptance failed: criteria {failed}", file=sys.stderr)
            return EXIT_ACCEPTANCE
        print("acceptance passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
