"""Command-line entry point: ``plap-lab <subcommand> [--config PATH] [--seed N] ...``."""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from .config import DEFAULTS, load_config, parse_problem
from .experiments import RUNNERS, run_solve_problem
from .solver import SolverError


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plap-lab", description="Numerical verification lab for regularized p-Laplace problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key=value config (for solve: a problem file)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=Path)
        sp.add_argument("--grid", type=_int_list, help="grid sizes N (h = 1/N), comma separated")
        sp.add_argument("--eps-list", type=_float_list, help="decreasing regularizations, comma separated")
    return parser


def _is_problem_file(path: Path) -> bool:
    text = path.read_text()
    if not text.lstrip().startswith("["):
        return True
    cp = configparser.ConfigParser()
    cp.read_string(text)
    return cp.has_section("problem")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except SolverError as exc:
        rep = exc.report
        print(f"solver failure: {exc} after {rep.iterations} iterations, {rep.fallback_steps} fallback steps", file=sys.stderr)
        return 2


def _run(args) -> int:
    name = args.command
    if name == "solve" and args.config is not None and _is_problem_file(args.config):
        spec = parse_problem(args.config.read_text())
        if args.grid:
            spec = type(spec)(**{**spec.__dict__, "n": args.grid[-1]})
        result = run_solve_problem(spec)
        out = args.out or Path("results")
    else:
        cfg = load_config(args.config, name) if args.config else DEFAULTS[name]
        cfg = cfg.with_overrides(seed=args.seed, out=str(args.out) if args.out else None, grid=args.grid, eps_list=args.eps_list)
        result = RUNNERS[name](cfg)
        out = Path(cfg.out)
    for path in result.write(out):
        print(f"wrote {path}")
    for b in result.budgets:
        print(b.line())
    print(f"{name}: {'all budgets pass' if result.passed else 'budget failure'}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
