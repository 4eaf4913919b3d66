"""Command-line interface: ``hsm constants | kernel | verify | sweep``.

Exit codes: 0 all cases pass, 2 some case failed, 3 an infrastructure
problem (errored case, unreadable config, unwritable output, bad usage).
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .kernels import KernelPointPair, heat_kernel, phi_kernel, psi_kernel
from .report import emit_report, render_text, write_atomic
from .special import (
    DIVERGES,
    F_limit,
    KernelParams,
    PoleError,
    hls_constant,
    phi_prefactor,
    psi_prefactor,
    sobolev_constant,
)
from .suites import SUITES, SuiteConfig, bubble_sweep, run_suite, sweep_csv

EXIT_OK, EXIT_FAIL, EXIT_INFRA = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INFRA, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_CONFIG_TYPES = {
    "suite": str, "grid_m": int, "box": float, "seed": int, "out": str, "format": str,
    "eps_start": float, "eps_end": float, "steps": int, "height": float,
    "cutoff_radius": float, "fine": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
    "sweep_out": str,
}


def _parse_tol(items) -> dict:
    """``["1e-3", "ck=1e-2"]`` -> ``{"quad": 1e-3, "ck": 1e-2}``."""
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            key, val = "quad", item
        out[key.strip()] = float(val)
    return out


def read_config(path: str) -> dict:
    """Plain ``key = value`` lines; ``#`` starts a comment; keys as the flags.

    ``tol = T`` sets the quadrature tolerance, ``tol.NAME = T`` any other.
    """
    values, tol = {}, {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key == "tol":
            tol.update(_parse_tol([val]))
        elif key.startswith("tol."):
            tol[key[4:]] = float(val)
        elif key in _CONFIG_TYPES:
            values[key] = _CONFIG_TYPES[key](val)
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    if tol:
        values["tol"] = tol
    return values


def build_config(args) -> SuiteConfig:
    """File values first, then any flag given on the command line."""
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for key in _CONFIG_TYPES:
        flag = getattr(args, key, None)
        if flag is not None and flag is not False:
            values[key] = flag
    tol = _parse_tol(getattr(args, "tol", None))
    if tol:
        values["tol"] = {**values.get("tol", {}), **tol}
    return SuiteConfig(**values)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is DIVERGES:
        return "diverges"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_constants(args) -> int:
    prm = KernelParams(args.n, args.alpha)
    rows = [("n", prm.n), ("alpha", prm.alpha), ("beta", prm.beta), ("regime", prm.regime)]
    if prm.n >= 3:
        rows.append(("sobolev_constant", sobolev_constant(prm.n)))
    for name, fn_ in (("phi_prefactor", phi_prefactor), ("psi_prefactor", psi_prefactor),
                      ("hls_constant", hls_constant)):
        try:
            rows.append((name, fn_(prm.n, prm.alpha)))
        except (PoleError, ValueError) as exc:
            rows.append((name, f"undefined ({exc})"))
    if 0 <= prm.beta <= 1:
        rows.append(("F_limit", F_limit(prm.beta)))
    if prm.alpha < prm.n:
        rows.append(("hls_bound", psi_prefactor(prm.n, prm.alpha) * hls_constant(prm.n, prm.alpha)))
    for k, v in rows:
        print(f"{k} = {_fmt(v)}")
    return EXIT_OK


def cmd_kernel(args) -> int:
    pts = np.asarray(args.point, dtype=float)
    if pts.size != 2 * args.n:
        raise ValueError(f"--point needs 2n = {2 * args.n} numbers (p then p')")
    pair = KernelPointPair.from_arrays(pts[:args.n], pts[args.n:])
    if args.which == "heat":
        if args.t is None:
            raise ValueError("--t is required for the heat kernel")
        val = heat_kernel(args.n, pair, args.t)
    else:
        if args.alpha is None:
            raise ValueError("--alpha is required for phi and psi")
        prm = KernelParams(args.n, args.alpha)
        val = phi_kernel(prm, pair) if args.which == "phi" else psi_kernel(prm, pair)
    print(repr(float(val)))
    return EXIT_OK


def cmd_verify(args) -> int:
    config = build_config(args)
    report = run_suite(config.suite, config)
    if config.out:
        emit_report(report, config.format, config.out)
        sys.stdout.write(render_text(report))
    else:
        sys.stdout.write(emit_report(report, config.format))
    return report.exit_code


def cmd_sweep(args) -> int:
    config = build_config(args)
    rows = bubble_sweep(config)
    text = sweep_csv(rows)
    if config.out:
        write_atomic(config.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--grid-m", dest="grid_m", type=int, help="main grid resolution per axis")
    p.add_argument("--seed", type=int, help="seed for the trial-function corpus")
    p.add_argument("--out", help="output path (stdout if omitted)")


def _add_sweep(p):
    p.add_argument("--eps-start", dest="eps_start", type=float)
    p.add_argument("--eps-end", dest="eps_end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--height", type=float, help="bubble center height")
    p.add_argument("--cutoff-radius", dest="cutoff_radius", type=float)
    p.add_argument("--fine", action="store_true", help="wider cutoff and the 2%% sharpness tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hsm", description="Hardy-Sobolev-Maz'ya numerics and verification suites.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("constants", help="print constants for (n, alpha)")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float, default=2.0)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("kernel", help="evaluate one kernel at a point pair")
    p.add_argument("--which", choices=("heat", "phi", "psi"), required=True)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--point", type=float, nargs="+", required=True,
                   help="x_1 .. x_{n-1} y x'_1 .. x'_{n-1} y'")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=SUITES + ("all",))
    _add_common(p)
    p.add_argument("--box", type=float, help="half-width of the semigroup grid")
    p.add_argument("--tol", action="append", metavar="[NAME=]T",
                   help="tolerance override; a bare number sets the quadrature tolerance")
    p.add_argument("--format", choices=("json", "csv", "text"))
    p.add_argument("--sweep-out", dest="sweep_out", help="where the main suite writes its sweep CSV")
    _add_sweep(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="bubble-family sweep to CSV")
    _add_common(p)
    _add_sweep(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"hsm: error: {exc}", file=sys.stderr)
        return EXIT_INFRA


if __name__ == "__main__":
    sys.exit(main())
