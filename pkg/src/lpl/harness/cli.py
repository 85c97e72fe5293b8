"""Command-line entry point: ``lpl <experiment> [--config FILE] [--seed N] [--out DIR]``.

Exit codes: 0 success, 1 invalid input, 2 chain divergence, 3 a proxcheck
property failed, 64 usage error.
"""
import argparse
import sys

from ..errors import ContractViolation, DivergenceError
from . import config as C
from .experiments import EXPERIMENTS
from .proxcheck import format_table, run_proxcheck

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_DIVERGED = 2
EXIT_CHECK_FAILED = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    parser = _Parser(prog="lpl", description="Proximal Langevin sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "gmm2d": "PnP-ULA vs PnP-PSGLA on a 2D Gaussian-mixture posterior",
        "stability": "distance between chains with perturbed drifts",
        "discretization": "step-size bias of the invariant law",
        "moreau": "effect of replacing g by its Moreau envelope",
        "inpaint": "TV inpainting with inexact PSGLA",
        "proxcheck": "property suite of the proximal maps",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text,
                           epilog="config keys:\n" + C.describe(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", metavar="FILE", help="key = value settings file")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
        if "steps" in C.schema(name):
            p.add_argument("--steps", type=int, help="chain length (overrides the config)")
        if "replicates" in C.schema(name) and name != "proxcheck":
            p.add_argument("--replicates", type=int, help="number of seeds (overrides the config)")
    return parser


def _resolve_config(args):
    cfg = C.load_config(args.command, args.config) if args.config else C.default_config(args.command)
    overrides = {}
    for key in ("seed", "out", "steps", "replicates"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if overrides.get("steps") is not None and overrides["steps"] < 1:
        raise ContractViolation("--steps must be at least 1")
    return cfg.with_values(**overrides)


def _report(res, out):
    for r in res.sorted_rows():
        print(f"{res.param_name}={r.param:<10g} {r.metric:<28} {r.value:.6g} +- {r.se:.2g}", file=out)
    for name, (ok, detail) in sorted(res.checks.items()):
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", file=out)


def run(args, out=None):
    out = sys.stdout if out is None else out
    cfg = _resolve_config(args)
    if args.command == "proxcheck":
        rows = run_proxcheck(cfg.probes, cfg.pairs, cfg.seed)
        print(format_table(rows), file=out)
        return EXIT_OK if all(r.passed for r in rows) else EXIT_CHECK_FAILED
    cfg.validate_paths()
    res = EXPERIMENTS[args.command](cfg)
    _report(res, out)
    print(f"wrote {cfg.out_dir}", file=out)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return run(args)
    except DivergenceError as exc:
        print(f"lpl {args.command}: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ContractViolation as exc:
        print(f"lpl {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
