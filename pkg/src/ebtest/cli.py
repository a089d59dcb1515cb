"""Command-line surface: analyze a data file, run simulations, emit theory reports.

Exit codes: 0 success, 2 input/validation error, 3 numeric-solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import theory
from .procedures import PROCEDURES, AnalysisResult, analyze
from .simulate import (
    SignalConfig,
    load_flat_config,
    replicates_to_csv,
    report_to_dict,
    run_experiment,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3


class CliInputError(Exception):
    pass


def _float_repr(value: float) -> str:
    return repr(float(value))


def _read_observations(path: str) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliInputError(f"cannot read {path}: {exc}") from exc
    values = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            values.append(float(stripped))
        except ValueError:
            raise CliInputError(
                f"{path}:{lineno}: unparseable value {stripped!r}"
            ) from None
    if not values:
        raise CliInputError(f"{path}: no observations found")
    return np.array(values)


def _open_out(path: str | None):
    if path is None:
        return sys.stdout, False
    return open(path, "w"), True


def _analysis_to_json(result: AnalysisResult) -> dict:
    return {
        "n": result.n,
        "t": result.t,
        "w_hat": result.w_hat,
        "at_lower_boundary": result.weight.at_lower_boundary,
        "at_upper_boundary": result.weight.at_upper_boundary,
        "lambda_hat": result.lambda_hat,
        "k_hat": result.k_hat,
        "ell": result.ell.tolist(),
        "q": result.q.tolist(),
        "reject": {
            tag: dec.reject.astype(int).tolist()
            for tag, dec in result.decisions.items()
        },
    }


def _write_analysis_csv(result: AnalysisResult, fh) -> None:
    fh.write(f"# n={result.n}\n")
    fh.write(f"# t={_float_repr(result.t)}\n")
    fh.write(f"# w_hat={_float_repr(result.w_hat)}\n")
    fh.write(f"# lambda_hat={_float_repr(result.lambda_hat)}\n")
    fh.write(f"# k_hat={result.k_hat}\n")
    tags = list(result.decisions)
    fh.write("index,ell,q," + ",".join(f"reject_{tag}" for tag in tags) + "\n")
    for i in range(result.n):
        flags = ",".join(str(int(result.decisions[tag].reject[i])) for tag in tags)
        fh.write(
            f"{i},{_float_repr(result.ell[i])},{_float_repr(result.q[i])},{flags}\n"
        )


def cmd_analyze(args) -> int:
    if not 0.0 < args.t < 1.0:
        raise CliInputError("--t must lie in (0, 1)")
    x = _read_observations(args.input)
    result = analyze(x, args.t)
    fh, close = _open_out(args.out)
    try:
        if args.format == "json":
            json.dump(_analysis_to_json(result), fh, indent=2)
            fh.write("\n")
        else:
            _write_analysis_csv(result, fh)
    finally:
        if close:
            fh.close()
    return EXIT_OK


def _resolve_threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("EBTEST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliInputError(f"EBTEST_THREADS={env!r} is not an integer")
    return os.cpu_count() or 1


def _parse_procedures(spec: str) -> tuple[str, ...]:
    tags = tuple(tag.strip() for tag in spec.split(",") if tag.strip())
    for tag in tags:
        if tag not in PROCEDURES:
            raise CliInputError(
                f"unknown procedure {tag!r}; choose from {','.join(PROCEDURES)}"
            )
    if not tags:
        raise CliInputError("--procedures must name at least one procedure")
    return tags


# flat config-file key -> simulate argparse destination
_CONFIG_TO_FLAG = {
    "n": "n", "s_n": "s", "v_n": "v", "t": "t", "replicates": "reps",
    "seed": "seed", "sign_mode": "sign_mode",
    "magnitude_surplus": "magnitude_surplus", "alpha": "alpha", "A": "A",
    "procedures": "procedures",
}


def _merge_config_file(args) -> None:
    """Fill unset simulate flags from --config; explicit flags win."""
    if args.config is None:
        return
    try:
        loaded = load_flat_config(args.config)
    except (OSError, ValueError) as exc:
        raise CliInputError(str(exc)) from exc
    for key, value in loaded.items():
        dest = _CONFIG_TO_FLAG[key]
        if getattr(args, dest) is None:
            if dest == "procedures" and not isinstance(value, str):
                value = ",".join(value)
            setattr(args, dest, value)


def cmd_simulate(args) -> int:
    _merge_config_file(args)
    for dest, flag in (("n", "--n"), ("s", "--s"), ("v", "--v"),
                       ("t", "--t"), ("reps", "--reps")):
        if getattr(args, dest) is None:
            raise CliInputError(f"{flag} is required (flag or config file)")
    if args.seed is None:
        args.seed = 0
    if args.sign_mode is None:
        args.sign_mode = "all_positive"
    if args.magnitude_surplus is None:
        args.magnitude_surplus = 0.0
    if args.alpha is None:
        args.alpha = 2.0
    if args.procedures is None:
        args.procedures = ",".join(PROCEDURES)
    if args.reps < 1:
        raise CliInputError("--reps must be >= 1")
    if not 0.0 < args.t < 1.0:
        raise CliInputError("--t must lie in (0, 1)")
    try:
        config = SignalConfig(
            n=args.n,
            s_n=args.s,
            v_n=args.v,
            sign_mode=args.sign_mode,
            magnitude_surplus=args.magnitude_surplus,
        )
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    procedures = _parse_procedures(args.procedures)
    threads = _resolve_threads(args)

    theory_q = None
    if args.with_theory_bands:
        regime = theory.ProblemRegime(
            n=args.n, s_n=args.s, v_n=args.v, t=args.t,
            alpha=args.alpha, A=args.A,
        )
        try:
            theory_q = theory.theory_quantities(regime)
        except theory.SolverError as exc:
            print(f"solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER

    report = run_experiment(
        config, args.t, args.reps, args.seed,
        parallelism=threads, theory=theory_q, procedures=procedures,
    )
    if args.format == "csv":
        if args.out is None:
            raise CliInputError("--format csv requires --out")
        replicates_to_csv(report, args.out)
    else:
        fh, close = _open_out(args.out)
        try:
            json.dump(report_to_dict(report), fh, indent=2)
            fh.write("\n")
        finally:
            if close:
                fh.close()
    return EXIT_OK


def cmd_theory(args) -> int:
    try:
        regime = theory.ProblemRegime(
            n=args.n, s_n=args.s, v_n=args.v, t=args.t,
            alpha=args.alpha, A=args.A,
        )
    except ValueError as exc:
        raise CliInputError(str(exc)) from exc
    try:
        report = theory.theory_report(regime)
    except theory.SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    fh, close = _open_out(args.out)
    try:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebtest",
        description="Empirical-Bayes multiple testing: analysis, simulation, theory checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="analyze a file of observations")
    p_an.add_argument("input", help="newline-separated decimal reals, one per line")
    p_an.add_argument("--t", type=float, required=True, help="target FDR level")
    p_an.add_argument("--format", choices=("json", "csv"), default="json")
    p_an.add_argument("--out", default=None, help="output path (default stdout)")
    p_an.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="run a seeded Monte Carlo experiment")
    p_sim.add_argument("--config", default=None,
                       help="flat key=value config file; flags override it")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--s", type=int, default=None, help="number of signals")
    p_sim.add_argument("--v", type=float, default=None, help="signal margin")
    p_sim.add_argument("--t", type=float, default=None)
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--sign-mode", choices=("all_positive", "random_sign"),
                       default=None)
    p_sim.add_argument("--magnitude-surplus", type=float, default=None)
    p_sim.add_argument("--procedures", default=None)
    p_sim.add_argument("--alpha", type=float, default=None)
    p_sim.add_argument("--A", type=float, default=None)
    p_sim.add_argument("--with-theory-bands", action="store_true",
                       help="solve the deterministic bands and score coverage")
    p_sim.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: EBTEST_THREADS or cores)")
    p_sim.add_argument("--format", choices=("json", "csv"), default="json")
    p_sim.add_argument("--out", default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_th = sub.add_parser("theory", help="emit the deterministic theory report")
    p_th.add_argument("--n", type=int, required=True)
    p_th.add_argument("--s", type=int, required=True)
    p_th.add_argument("--v", type=float, required=True)
    p_th.add_argument("--t", type=float, required=True)
    p_th.add_argument("--alpha", type=float, default=2.0)
    p_th.add_argument("--A", type=float, default=None)
    p_th.add_argument("--out", default=None)
    p_th.set_defaults(func=cmd_theory)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
