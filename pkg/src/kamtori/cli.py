"""Command-line interface.

Exit codes: 0 success, 1 configuration/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

from ._version import __version__
from .config import validate_config
from .errors import ConfigError, KamtoriError
from .experiments import run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--system", help="system name (pendulum, ruessmann3, ...)")
    parser.add_argument("--scheme", help="scheme name (im, sv, se, runge)")
    parser.add_argument("--p0", help="comma-separated initial momenta (or x for Cartesian)")
    parser.add_argument("--q0", help="comma-separated initial coordinates (or y)")
    parser.add_argument("--h", type=float, help="step size")
    parser.add_argument("--h-start", type=float, dest="h_start")
    parser.add_argument("--h-stop", type=float, dest="h_stop")
    parser.add_argument("--h-step", type=float, dest="h_step")
    parser.add_argument("--n-steps", type=int, dest="n_steps")
    parser.add_argument("--n-lines", type=int, dest="n_lines")
    parser.add_argument("--tol", type=float, help="solver or search tolerance (per subcommand)")
    parser.add_argument("--out", help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kamtori",
        description=(
            "Symplectic integrators on integrable Hamiltonian systems: "
            "NAFF frequency analysis, Diophantine/resonant step-size "
            "classification and invariant-error scans."
        ),
    )
    parser.add_argument("--version", action="version", version=f"kamtori {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("integrate", "spectrum", "scan", "drift", "portrait"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)

    p = sub.add_parser("label", help="search the best resonance label (k, l) for omega, h")
    _add_common(p)
    p.add_argument("--omega", help="comma-separated frequency vector", required=False)
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--lmax", type=int, default=None)

    p = sub.add_parser("figure", help="reproduce a paper figure's data files")
    p.add_argument("number", type=int, choices=(1, 2, 3, 4))
    _add_common(p)

    p = sub.add_parser("verify-acceptance", help="run the acceptance criteria and report")
    p.add_argument("--only", help="run only the criterion with this id")
    p.add_argument("--fast", action="store_true", help=argparse.SUPPRESS)

    return parser


def _vector_arg(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _merge_config(args: argparse.Namespace, kind: str) -> str:
    """Build the JSON config text from an optional file plus CLI overrides."""
    raw = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            text = fh.read()
        raw = json.loads(text)  # errors re-validated below with line info
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    raw["kind"] = kind
    if getattr(args, "system", None):
        raw["system"] = args.system
    if getattr(args, "scheme", None):
        raw["scheme"] = args.scheme
    if getattr(args, "p0", None) or getattr(args, "q0", None):
        if not (getattr(args, "p0", None) and getattr(args, "q0", None)):
            raise ConfigError("--p0 and --q0 must be given together")
        raw["initial"] = {"p": _vector_arg(args.p0), "q": _vector_arg(args.q0)}
    if getattr(args, "h", None) is not None:
        raw["h"] = args.h
    if getattr(args, "h_start", None) is not None:
        raw["h_grid"] = {
            "start": args.h_start,
            "stop": args.h_stop if args.h_stop is not None else args.h_start,
            "step": args.h_step if args.h_step is not None else 0.01,
        }
    if getattr(args, "n_steps", None) is not None:
        raw["n_steps"] = args.n_steps
    if getattr(args, "n_lines", None) is not None:
        raw["n_lines"] = args.n_lines
    if getattr(args, "tol", None) is not None:
        if kind == "label":
            raw["tol"] = args.tol
        else:
            raw.setdefault("solver", {})["tol"] = args.tol
    if getattr(args, "omega", None):
        raw["omega"] = _vector_arg(args.omega)
    if getattr(args, "kmax", None) is not None:
        raw["k_max"] = args.kmax
    if getattr(args, "lmax", None) is not None:
        raw["l_max"] = args.lmax
    if getattr(args, "out", None):
        raw["out_dir"] = args.out
    return json.dumps(raw, indent=1)


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    if args.command == "verify-acceptance":
        from .acceptance import run_acceptance

        return run_acceptance(only=args.only, fast=args.fast)

    kind = args.command if args.command != "figure" else f"figure{args.number}"
    try:
        config = validate_config(_merge_config(args, kind))
        manifest = run(config, out_root=os.environ.get("KAMTORI_OUT"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON at line {exc.lineno}: {exc.msg}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KamtoriError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out_dir = config.out_dir
    root = os.environ.get("KAMTORI_OUT")
    if root and not os.path.isabs(out_dir):
        out_dir = os.path.join(root, out_dir)
    print(f"run ok: {len(manifest.files)} files in {out_dir}")
    if kind == "label":
        with open(os.path.join(out_dir, "label.json")) as fh:
            print(fh.read().rstrip())
    if kind == "drift":
        with open(os.path.join(out_dir, "drift.json")) as fh:
            print(fh.read().rstrip())
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
