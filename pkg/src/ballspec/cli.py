"""
Command-line front end.

Exit codes: 0 success, 2 usage error, 3 convergence failure, 4 unreadable or
malformed input file, 5 verification failure or unsolvable problem.
``--config path.json`` supplies option values (keys are option names with
dashes or underscores); values in the file override the command line.
``BALLSPEC_THREADS`` caps the BLAS/OpenMP thread pools.
"""

from __future__ import annotations

import argparse
import os
import sys

from ._io import FileFormatError, dumps, read_json
from .specialfn import ConvergenceError

EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
EXIT_FORMAT = 4
EXIT_VERIFY = 5


class UsageError(ValueError):
    pass


def _positive(kind):
    def parse(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value

    return parse


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_field(path: str):
    from .fieldgrid import VectorField

    try:
        return VectorField.from_dict(read_json(path))
    except ValueError as exc:
        raise FileFormatError(str(exc)) from exc


def _load_coeffs(path: str):
    from .decomposition import SpectralCoeffs

    data = read_json(path)
    if isinstance(data, dict) and "coefficients" in data:
        data = data["coefficients"]
    try:
        return SpectralCoeffs.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"malformed coefficient file: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_zeros(args) -> int:
    from .specialfn import find_zeros

    try:
        table = find_zeros(args.kind, args.n, count=args.count, cutoff=args.cutoff)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(table.to_csv(), args.output)
    return 0


def cmd_eigentable(args) -> int:
    from .eigenbasis import build_eigentable

    try:
        table = build_eigentable(args.family, args.radius, args.cutoff, args.nmax)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(dumps(table.to_dict()), args.output)
    return 0


def cmd_sample_grid(args) -> int:
    from .fieldgrid import BallGrid, VectorField
    from .testfields import named_field

    grid = BallGrid(args.radius, args.nr, args.ntheta, args.nphi)
    if args.field:
        try:
            handle = named_field(args.field, args.radius)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        _emit(dumps(VectorField.sample(grid, handle).to_dict()), args.output)
        return 0
    nodes = grid.flat_nodes()
    payload = {
        "grid": grid.as_dict(),
        "order": "r fastest, then theta, then phi",
        "nodes": {"r": nodes[:, 0], "theta": nodes[:, 1], "phi": nodes[:, 2]},
        "weights": grid.weights.ravel(order="F"),
    }
    _emit(dumps(payload), args.output)
    return 0


def cmd_decompose(args) -> int:
    from .decomposition import analyze, parseval_report

    f = _load_field(args.input)
    c = analyze(f, cutoff=args.cutoff)
    payload = {"coefficients": c.to_dict(), "parseval": parseval_report(f, c).as_dict()}
    _emit(dumps(payload), args.output)
    return 0


def _field_source(args):
    """(VectorField, handle or None) from --input or --field."""
    from .fieldgrid import BallGrid, VectorField
    from .testfields import named_field

    if bool(args.input) == bool(args.field):
        raise UsageError("give exactly one of --input or --field")
    if args.input:
        return _load_field(args.input), None
    try:
        handle = named_field(args.field, args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid = BallGrid(args.radius, args.nr, args.ntheta, args.nphi)
    return VectorField.sample(grid, handle), handle


def cmd_sobolev(args) -> int:
    from .sobolev import membership_test

    f, handle = _field_source(args)
    try:
        report = membership_test(f, args.s, args.family, handle=handle, cutoff=args.cutoff, tol=args.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(report.to_json(), args.output)
    return 0


def cmd_solve(args) -> int:
    from .bvp import solve
    from .decomposition import analyze

    if args.coeffs:
        if args.input or args.field:
            raise UsageError("give only one of --coeffs, --input, --field")
        c = _load_coeffs(args.coeffs)
    else:
        f, _ = _field_source(args)
        c = analyze(f, cutoff=args.cutoff)
    sol = solve(c, args.lam, args.tol_res)
    _emit(sol.to_json(), args.output)
    return 0 if sol.solvable else EXIT_VERIFY


def cmd_verify(args) -> int:
    from .verify import run_suite

    try:
        report = run_suite(args.suite, nmax=args.nmax, cutoff=args.cutoff, R=args.radius)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(dumps(report), args.output)
    return 0 if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--radius", type=_positive(float), default=1.0)
    grid.add_argument("--nr", type=_positive(int), default=48)
    grid.add_argument("--ntheta", type=_positive(int), default=48)
    grid.add_argument("--nphi", type=_positive(int), default=96)

    p = argparse.ArgumentParser(prog="ballspec", description=__doc__.split("\n\n")[0].strip())
    sub = p.add_subparsers(dest="command", required=True)

    z = sub.add_parser("zeros", parents=[common], help="zeros of psi_n or psi_n' as CSV")
    z.add_argument("--kind", required=True, choices=["psi", "psi-prime", "psi_prime"])
    z.add_argument("--n", type=int, required=True)
    g = z.add_mutually_exclusive_group(required=True)
    g.add_argument("--count", type=_positive(int))
    g.add_argument("--cutoff", type=_positive(float))
    z.set_defaults(func=cmd_zeros)

    e = sub.add_parser("eigentable", parents=[common], help="eigenvalue table as JSON")
    e.add_argument("--family", required=True, choices=["grad_div", "curl"])
    e.add_argument("--radius", type=_positive(float), default=1.0)
    e.add_argument("--cutoff", type=_positive(float), default=10.0)
    e.add_argument("--nmax", type=int)
    e.set_defaults(func=cmd_eigentable)

    s = sub.add_parser("sample-grid", parents=[common, grid], help="grid nodes, or a built-in field, as JSON")
    s.add_argument("--field", help="built-in field name (bump, bump-potential, bump-solenoidal, radial, ez, zero)")
    s.set_defaults(func=cmd_sample_grid)

    d = sub.add_parser("decompose", parents=[common], help="spectral coefficients and Parseval report")
    d.add_argument("--input", required=True)
    d.add_argument("--cutoff", type=_positive(float), default=30.0)
    d.set_defaults(func=cmd_decompose)

    b = sub.add_parser("sobolev", parents=[common, grid], help="Sobolev membership report")
    b.add_argument("--input")
    b.add_argument("--field")
    b.add_argument("--s", type=int, required=True)
    b.add_argument("--family", choices=["potential", "solenoidal"], default="potential")
    b.add_argument("--cutoff", type=_positive(float), default=30.0)
    b.add_argument("--tol", type=_positive(float), default=1e-6)
    b.set_defaults(func=cmd_sobolev)

    v = sub.add_parser("solve", parents=[common, grid], help="solve grad div v + lambda v = f")
    v.add_argument("--input")
    v.add_argument("--field")
    v.add_argument("--coeffs", help="coefficient JSON (as written by decompose)")
    v.add_argument("--lambda", dest="lam", type=float, required=True)
    v.add_argument("--cutoff", type=_positive(float), default=30.0)
    v.add_argument("--tol-res", dest="tol_res", type=_positive(float))
    v.set_defaults(func=cmd_solve)

    r = sub.add_parser("verify", parents=[common], help="run verification suites")
    r.add_argument("--suite", default="all")
    r.add_argument("--nmax", type=_positive(int), default=3)
    r.add_argument("--cutoff", type=_positive(float), default=12.0)
    r.add_argument("--radius", type=_positive(float), default=1.0)
    r.set_defaults(func=cmd_verify)
    return p


def _config_flags(path: str) -> list[str]:
    """Config entries as trailing flags, so they override the command line and get the same checks."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise FileFormatError("config must be a JSON object")
    out: list[str] = []
    for key, value in data.items():
        name = str(key).replace("_", "-")
        if name in ("config", "command"):
            raise UsageError(f"config key {key!r} is not allowed")
        if name == "lam":
            name = "lambda"
        if value is None:
            continue
        out += [f"--{name}", str(value)]
    return out


def _thread_limit():
    raw = os.environ.get("BALLSPEC_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"BALLSPEC_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"BALLSPEC_THREADS must be a positive integer, got {raw!r}")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = parser.parse_args(argv + _config_flags(args.config))
        limiter = _thread_limit()
        try:
            return args.func(args)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"ballspec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileFormatError as exc:
        print(f"ballspec: file format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ConvergenceError as exc:
        print(f"ballspec: convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
