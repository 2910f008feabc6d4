"""Command-line front end: ``nlsinverse VERB [options]``.

Exit codes: 0 success, 1 numerical failure (or a tolerance miss in
``roundtrip``/``selfcheck``), 2 invalid configuration or input files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from ..closed_form import EXAMPLES
from ..errors import ContractViolation, ScatteringError
from .config import ConfigError, ExperimentConfig, load_config
from .manifest import RunManifest
from . import commands

log = logging.getLogger("nlsinverse")

VERBS = ("forward", "extract", "invert", "roundtrip", "example", "selfcheck")


def _global_flags(parser, suppress=False):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", type=Path, default=default(None), help="YAML experiment config")
    parser.add_argument("--out", type=Path, default=default(None),
                        help="output directory (overrides output.directory)")
    parser.add_argument("--threads", type=int, default=default(1),
                        help="worker threads for the forward sweep")
    parser.add_argument("--seed", type=int, default=default(None),
                        help="reserved; the pipeline is deterministic")


def _tolerance(text):
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance for {name!r} is not a number") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsinverse",
        description="Forward and inverse scattering for -u'' + Q(x, u) u = k^2 u.")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="verb", required=True, metavar="VERB")

    def verb(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    verb("forward", "solve the nonlinear problem over the configured k grid and eps list")
    p = verb("extract", "fit A_n(k), B_n(k) from a sweep file")
    p.add_argument("sweep", type=Path, nargs="?", help="sweep CSV (default: OUT/sweep.csv)")
    p.add_argument("--n-max", type=int, default=None, help="highest order to fit (default: number of eps values)")
    verb("invert", "recover q_1 ... q_{N-1} from the configured data source")
    verb("roundtrip", "forward, extract and invert a known potential; report errors")
    p = verb("example", "closed-form pure-q2 examples: amplitudes and reconstructions")
    p.add_argument("name", help=f"one of {', '.join(EXAMPLES)}")
    p.add_argument("--param", type=float, default=None,
                   help="gamma or alpha (default 1.0 and 0.5)")
    p.add_argument("--b", type=float, default=1.0, help="support width")
    p.add_argument("--k-cutoff", type=float, default=200.0, help="integral route cutoff")
    p.add_argument("--M", type=int, default=64, help="mode truncation for the series routes")
    p = verb("selfcheck", "run the invariant table")
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                   help="override one check's tolerance (repeatable)")
    return parser


def _hash(payload) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _needs_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config", f"the {args.verb} command needs a config file")
    return load_config(args.config)


def run(args) -> int:
    if args.threads < 1:
        raise ConfigError("--threads", "must be >= 1")
    cfg = None
    if args.verb in ("forward", "invert", "roundtrip") or args.config is not None:
        cfg = _needs_config(args)
    out = args.out or Path(cfg.output_directory if cfg else "out")

    if cfg is not None:
        payload = {"verb": args.verb, "config": cfg.as_dict()}
    else:
        payload = {"verb": args.verb, **{k: v for k, v in vars(args).items()
                                         if k not in ("out", "config", "threads", "seed")}}
    if args.verb == "extract":
        sweep_file = args.sweep or out / "sweep.csv"
        payload["sweep_sha256"] = hashlib.sha256(Path(sweep_file).read_bytes()).hexdigest() \
            if Path(sweep_file).exists() else None
    manifest = RunManifest(args.verb, _hash(payload), out, payload)
    manifest.warn_if_rerun()
    out.mkdir(parents=True, exist_ok=True)

    if args.verb == "forward":
        code = commands.cmd_forward(cfg, out, manifest, args.threads)
    elif args.verb == "extract":
        if not Path(sweep_file).exists():
            raise ConfigError("sweep", f"sweep file {sweep_file} not found")
        code = commands.cmd_extract(sweep_file, args.n_max, out, manifest)
    elif args.verb == "invert":
        code = commands.cmd_invert(cfg, out, manifest)
    elif args.verb == "roundtrip":
        code = commands.cmd_roundtrip(cfg, out, manifest, args.threads)
    elif args.verb == "example":
        if args.name not in EXAMPLES:
            raise ConfigError("name", f"unknown example {args.name!r}; valid names: {', '.join(EXAMPLES)}")
        param = args.param if args.param is not None else (1.0 if args.name == "constant_gamma" else 0.5)
        code = commands.cmd_example(args.name, param, args.b, out, manifest, args.k_cutoff, args.M)
    else:
        code = commands.cmd_selfcheck(dict(args.tolerance), manifest)
    manifest.diagnostics["exit_code"] = code
    print(f"manifest: {manifest.write()}")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ContractViolation, FileNotFoundError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except ScatteringError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
