"""Command-line front end.

Subcommands: ``learn``, ``code``, ``synth``, ``experiment`` and ``eval``.
Every subcommand takes ``--seed``, ``--format``, ``--threads`` and
``--config``; a JSON config supplies defaults that explicit flags override.

Exit codes: 0 success, 2 I/O or file format, 3 invalid configuration,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .coding import CodingBudget, code_matrix
from .core import (
    BlockDictError,
    DimensionMismatch,
    FormatError,
    InfeasibleConfig,
    InvalidStructure,
    SingularLeastSquares,
    ZeroColumn,
    ZeroSignal,
    read_matrix,
    read_structure,
    structure_from_sizes,
    write_matrix,
    write_structure,
)
from .experiments import (
    AXES,
    EXPERIMENTS,
    ExperimentSpec,
    derive_seed,
    format_value,
    run_experiment,
    summarize,
    write_csv,
)
from .framework import LearnConfig, learn_block_dictionary
from .metrics import recovery_percentage, representation_error
from .sac import block_sparsity_objective
from .synth import (
    GroundTruth,
    add_noise,
    generate_dictionary,
    generate_signals,
    save_ground_truth,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4


class UsageError(Exception):
    """Bad command-line or config input; maps to the invalid-config exit code."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which this tool reserves for I/O
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt_num(v) -> str:
    return format(float(v), ".17g")


def _ext(fmt: str) -> str:
    return "bin" if fmt == "bin" else "csv"


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_blocks(text: str) -> list[int]:
    """Block sizes from ``"20x3"`` or ``"12x2,12x3"`` or ``"3,3,2"``."""
    sizes: list[int] = []
    for part in str(text).split(","):
        part = part.strip().lower()
        if not part:
            continue
        try:
            if "x" in part:
                count, size = part.split("x")
                sizes.extend([int(size)] * int(count))
            else:
                sizes.append(int(part))
        except ValueError:
            raise UsageError(f"cannot parse block sizes {text!r}") from None
    if not sizes or any(v < 1 for v in sizes):
        raise UsageError(f"block sizes must be positive: {text!r}")
    return sizes


def parse_values(text) -> list:
    if isinstance(text, list):
        return text
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if part:
            v = float(part)
            out.append(int(v) if v.is_integer() else v)
    if not out:
        raise UsageError("sweep needs at least one value")
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_learn(args) -> int:
    X = read_matrix(args.input)
    n_atoms = args.atoms if args.atoms is not None else 2 * X.shape[0]
    cfg = LearnConfig(n_atoms=n_atoms, k=args.k, s=args.s, s_low=args.s_low,
                      outer_iters=args.iters, ksvd_init_iters=args.init_iters,
                      init=args.init, seed=args.seed, tol=args.tol, workers=args.threads)
    cfg.validate(X.shape[0])
    truth = None
    if args.truth is not None:
        src = Path(args.truth)
        D_star = read_matrix(_find(src, "D_star"))
        truth = (D_star, read_structure(src / "d_star.csv"))
    result = learn_block_dictionary(X, cfg, truth=truth)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = _ext(args.format)
    write_matrix(out / f"D.{ext}", result.D, args.format)
    write_matrix(out / f"theta.{ext}", result.Theta, args.format)
    write_structure(out / "d.csv", result.d)
    with open(out / "trace.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        header = ["iter", "e", "num_blocks", "objective_b"]
        w.writerow(header + (["blocks_recovered"] if truth is not None else []))
        for r in result.trace:
            row = [r.iteration, _fmt_num(r.e), r.num_blocks, _fmt_num(r.objective_b)]
            if truth is not None:
                row.append(_fmt_num(r.p))
            w.writerow(row)
    final = result.trace[-1]
    print(f"e={_fmt_num(final.e)} blocks={result.d.n_blocks} iterations={final.iteration}")
    return EXIT_OK


def _find(directory: Path, stem: str) -> Path:
    for ext in ("csv", "bin"):
        if (directory / f"{stem}.{ext}").exists():
            return directory / f"{stem}.{ext}"
    raise FileNotFoundError(f"no {stem}.csv or {stem}.bin in {directory}")


def cmd_code(args) -> int:
    D = read_matrix(args.dict)
    X = read_matrix(args.input)
    d = read_structure(args.blocks) if args.blocks is not None else None
    Theta = code_matrix(D, d, X, CodingBudget(args.k), workers=args.threads)
    out = args.out or f"theta.{_ext(args.format)}"
    write_matrix(out, Theta, args.format)
    print(f"e={_fmt_num(representation_error(X, D, Theta))}")
    return EXIT_OK


def cmd_synth(args) -> int:
    sizes = parse_blocks(args.blocks)
    if sum(sizes) != args.k_atoms:
        raise InfeasibleConfig(f"blocks {args.blocks} hold {sum(sizes)} atoms, --k-atoms is {args.k_atoms}")
    D_star = generate_dictionary(args.n, args.k_atoms, derive_seed(args.seed, 0))
    d_star = structure_from_sizes(sizes)
    X, Theta = generate_signals(D_star, d_star, args.sparsity, args.l, derive_seed(args.seed, 1))
    X = add_noise(X, args.snr, derive_seed(args.seed, 2))
    manifest = {"n": args.n, "k_atoms": args.k_atoms, "blocks": args.blocks,
                "sparsity": args.sparsity, "l": args.l, "snr_db": format_value(args.snr),
                "seed": args.seed, "format": args.format}
    save_ground_truth(args.out, X, GroundTruth(D_star, d_star, Theta), manifest, args.format)
    print(f"wrote {args.out}: X {X.shape[0]}x{X.shape[1]}, {d_star.n_blocks} blocks")
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = ExperimentSpec(
        experiment=args.name, axis=args.axis, values=parse_values(args.values),
        trials=args.trials, L=args.L, outer_iters=args.iters,
        ksvd_init_iters=args.init_iters, N=args.n,
        sizes=parse_blocks(args.blocks) if args.blocks else None, k=args.k,
        snr_db=args.snr, ksvd_atoms=args.ksvd_atoms, seed=args.seed,
        workers=args.threads, only=args.algorithms)
    rows = run_experiment(spec)
    write_csv(args.out, rows)
    for r in summarize(rows):
        p = "" if r["p"] is None else f"{r['p']:.1f}"
        e = "" if r["e"] is None else f"{r['e']:.4g}"
        print(f"{format_value(r['sweep_value']):>6} {r['algorithm']:<16} e={e} p={p} [{r['status']}]")
    return EXIT_OK


def cmd_eval(args) -> int:
    X = read_matrix(args.input)
    D = read_matrix(args.dict)
    Theta = read_matrix(args.theta)
    print(f"e={_fmt_num(representation_error(X, D, Theta))}")
    if args.blocks is not None:
        d = read_structure(args.blocks)
        print(f"b={_fmt_num(block_sparsity_objective(Theta, d) / X.shape[1])}")
        if args.truth is not None:
            src = Path(args.truth)
            p = recovery_percentage(D, d, read_matrix(_find(src, "D_star")),
                                    read_structure(src / "d_star.csv"))
            print(f"p={_fmt_num(p)}")
    elif args.truth is not None:
        raise UsageError("--truth needs --blocks")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("csv", "bin"), default="csv",
                        help="format of written matrices (inputs are detected)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--config", help="JSON file of option defaults")

    parser = _Parser(prog="blockdict", description="Block-sparse dictionary learning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("learn", parents=[common], help="learn D, its block structure and codes")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=2, help="blocks per signal")
    p.add_argument("--s", type=int, default=3, help="maximal block size")
    p.add_argument("--s-low", type=int, default=None, help="OMP atoms per block (default: s)")
    p.add_argument("--atoms", type=int, default=None, help="dictionary size (default: 2 x rows)")
    p.add_argument("--iters", type=int, default=250)
    p.add_argument("--init-iters", type=int, default=250)
    p.add_argument("--init", choices=("ksvd", "signals"), default="ksvd")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--truth", default=None, help="synth directory; adds block recovery to the trace")
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("code", parents=[common], help="sparse-code signals over a fixed dictionary")
    p.add_argument("--dict", required=True)
    p.add_argument("--blocks", default=None, help="structure file; omit for plain OMP")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True, help="blocks (or atoms without --blocks)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_code)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic ground truth")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--k-atoms", type=int, default=60)
    p.add_argument("--blocks", default="20x3")
    p.add_argument("--sparsity", type=int, default=2)
    p.add_argument("--l", type=int, default=600)
    p.add_argument("--snr", type=_float, default=math.inf)
    p.add_argument("--out", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", parents=[common], help="run a synthetic experiment to CSV")
    p.add_argument("name", choices=EXPERIMENTS)
    p.add_argument("--axis", choices=AXES, default="snr")
    p.add_argument("--values", default="inf", help="comma-separated sweep values")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--L", type=int, default=600)
    p.add_argument("--iters", type=int, default=250)
    p.add_argument("--init-iters", type=int, default=250)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--blocks", default=None, help="true block sizes, e.g. 20x3")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--snr", type=_float, default=math.inf, help="SNR when not sweeping it")
    p.add_argument("--ksvd-atoms", type=int, default=None)
    p.add_argument("--algorithms", nargs="+", default=None,
                   help="subset of the experiment's algorithms")
    p.add_argument("--out", default="results.csv")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("eval", parents=[common], help="score existing D, d and codes")
    p.add_argument("--dict", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--blocks", default=None)
    p.add_argument("--truth", default=None, help="synth directory for block recovery")
    p.set_defaults(func=cmd_eval)
    return parser


def _load_config(path) -> dict:
    try:
        with open(path) as f:
            cfg = json.load(f)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    cfg = _load_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"{args.config}: unknown option(s) {unknown} for {args.command}")
    for key in ("snr", "snr_db"):
        if isinstance(cfg.get(key), str):
            cfg[key] = float(cfg[key])
    sub.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        if exc.filename is not None:
            print(f"error: cannot access {exc.filename}: {exc.strerror}", file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularLeastSquares, ZeroSignal, ZeroColumn, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InfeasibleConfig, InvalidStructure, DimensionMismatch, BlockDictError, ValueError) as exc:
        print(f"invalid configuration: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
