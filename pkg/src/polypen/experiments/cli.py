"""Command line: one-shot fits, limit-law summaries, and full grid runs.

Exit codes: 0 success, 1 config error (bad flags, unreadable or invalid
config, bad output path), 2 numerical failure (non-convergence, singular
inputs).  Error messages go to stderr; results go to stdout or files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..asymptotics import LimitLaw, recovery_probability_formula
from ..datagen import gen_dataset, paper_penalty, paper_scenario
from ..errors import ConfigError, PolypenError
from ..metrics import empirical_pattern_distribution
from ..numerics import RngStream
from ..penalty import pattern
from ..solver import SolveOptions, fit
from .config import ExperimentConfig, load_config, parse_experiment, parse_task
from .output import emit_csv, emit_plot, write_metadata
from .runner import limit_moments, run_experiment, sample_limit_cell

__all__ = ["cli_main", "main"]

_PAPER_N_VALUES = (500, 1000, 5000, 10000)
_PAPER_ALPHAS = (0.25, 0.5, 1.0)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; we owe 1 for config errors."""

    def error(self, message):
        raise ConfigError(message)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _build_parser() -> _Parser:
    parser = _Parser(prog="polypen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="generate one dataset and solve it once")
    p_fit.add_argument("--config", required=True, help="JSON file with scenario and penalty")
    p_fit.add_argument("--seed", type=int, default=0)

    p_limit = sub.add_parser("limit", help="Monte-Carlo summary of the limit law")
    p_limit.add_argument("--config", required=True, help="JSON file with scenario and penalty")
    p_limit.add_argument("--seed", type=int, default=0)
    p_limit.add_argument("--draws", type=int, default=5000)
    p_limit.add_argument("--threads", type=int, default=1)

    p_rec = sub.add_parser(
        "recovery", help="pattern recovery probability: formula and direct Monte Carlo"
    )
    p_rec.add_argument("--config", required=True, help="JSON file with scenario and penalty")
    p_rec.add_argument("--seed", type=int, default=0)
    p_rec.add_argument("--draws", type=int, default=5000)
    p_rec.add_argument("--threads", type=int, default=1)

    p_exp = sub.add_parser("experiment", help="full (n, alpha) grid from a config file")
    p_exp.add_argument("--config", required=True, help="JSON experiment config")
    p_exp.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_exp.add_argument("--reps", type=int, default=None, help="override replications")
    p_exp.add_argument("--draws", type=int, default=None, help="override asymptotic draws")
    p_exp.add_argument("--threads", type=int, default=1)
    p_exp.add_argument("--out", default=None, help="override the output directory")

    p_fig = sub.add_parser(
        "paper-figures", help="run the built-in logistic benchmark at a chosen scale"
    )
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.add_argument("--reps", type=int, default=500)
    p_fig.add_argument("--draws", type=int, default=5000)
    p_fig.add_argument("--threads", type=int, default=1)
    p_fig.add_argument("--out", default="paper-figures")

    return parser


def _check_seed(seed: int) -> int:
    if seed < 0 or seed >= 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    return seed


def _check_threads(threads: int) -> int:
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    return threads


def _load_task(path: str):
    data = load_config(path)
    try:
        return parse_task(data)
    except ConfigError:
        raise
    except PolypenError as exc:
        # invalid scenario/penalty contents are config problems, not runtime ones
        raise ConfigError(str(exc)) from exc


def _cmd_fit(args) -> int:
    scenario, penalty = _load_task(args.config)
    rng = RngStream(_check_seed(args.seed))
    data = gen_dataset(scenario, rng.child(0))
    report = fit(data, scenario.loss, penalty, SolveOptions())
    pat = pattern(penalty, report.minimizer)
    print(f"n = {scenario.n}")
    print(f"converged = {str(report.converged).lower()}")
    print(f"iterations = {report.iterations}")
    print(f"objective = {_g17(report.objective)}")
    print(f"kkt = {_g17(report.kkt)}")
    print("theta_hat = " + " ".join(_g17(v) for v in report.minimizer))
    print(f"pattern = {pat.encode()}")
    return 0


def _make_law(scenario, penalty, rng: RngStream) -> LimitLaw:
    moments = limit_moments(scenario, rng.child(2))
    return LimitLaw(scenario.theta0, moments, penalty)


def _cmd_limit(args) -> int:
    scenario, penalty = _load_task(args.config)
    threads = _check_threads(args.threads)
    if args.draws < 1:
        raise ConfigError("--draws must be >= 1")
    rng = RngStream(_check_seed(args.seed))
    law = _make_law(scenario, penalty, rng)
    us, pats, failures = sample_limit_cell(
        law, args.draws, rng.child(1), threads=threads
    )
    dist = empirical_pattern_distribution(pats, rng.child(1), failures=failures)
    target = law.true_pattern
    sq = np.einsum("ij,ij->i", us, us)
    print(f"draws = {args.draws}")
    print(f"failures = {failures}")
    print(f"rmse = {_g17(np.sqrt(sq.mean()))}")
    print(f"recovery = {_g17(dist.probability(target))} (se = {_g17(dist.se(target))})")
    rows = dist.rows()
    print(f"patterns = {len(rows)}")
    for encoded, prob, se, count in rows[:10]:
        print(f"  {_g17(prob)} (se = {_g17(se)}, count = {count})  {encoded}")
    return 0


def _cmd_recovery(args) -> int:
    scenario, penalty = _load_task(args.config)
    threads = _check_threads(args.threads)
    if args.draws < 1:
        raise ConfigError("--draws must be >= 1")
    rng = RngStream(_check_seed(args.seed))
    law = _make_law(scenario, penalty, rng)
    formula = recovery_probability_formula(law, args.draws, rng.child(3))
    _, pats, failures = sample_limit_cell(law, args.draws, rng.child(1), threads=threads)
    target = law.true_pattern
    hits = sum(1 for p in pats if p == target)
    rate = hits / len(pats)
    se = float(np.sqrt(rate * (1.0 - rate) / len(pats)))
    # the two estimates must always appear together
    print(f"pattern = {target.encode()}")
    print(f"formula: p = {_g17(formula.probability)}  se = {_g17(formula.se)}  draws = {formula.draws}")
    print(f"direct:  p = {_g17(rate)}  se = {_g17(se)}  draws = {len(pats)}")
    return 0


def _write_outputs(table, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    emit_csv(table, csv_path)
    print(f"wrote {csv_path}")
    for metric in ("rmse", "rre", "recovery"):
        svg_path = os.path.join(out_dir, f"{metric}.svg")
        emit_plot(table, metric, svg_path)
        print(f"wrote {svg_path}")
    meta_path = os.path.join(out_dir, "metadata.json")
    write_metadata(table, meta_path)
    print(f"wrote {meta_path}")


def _cmd_experiment(args) -> int:
    data = load_config(args.config)
    try:
        cfg = parse_experiment(data)
        cfg = cfg.with_overrides(
            seed=None if args.seed is None else _check_seed(args.seed),
            replications=args.reps,
            asymptotic_draws=args.draws,
            out_dir=args.out,
        )
    except ConfigError:
        raise
    except PolypenError as exc:
        raise ConfigError(str(exc)) from exc
    table = run_experiment(cfg, threads=_check_threads(args.threads))
    _write_outputs(table, cfg.out_dir)
    return 0


def _cmd_paper_figures(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    if args.draws < 1:
        raise ConfigError("--draws must be >= 1")
    cfg = ExperimentConfig(
        scenario=paper_scenario(),
        penalty=paper_penalty(),
        n_values=_PAPER_N_VALUES,
        alpha_values=_PAPER_ALPHAS,
        replications=args.reps,
        asymptotic_draws=args.draws,
        seed=_check_seed(args.seed),
        out_dir=args.out,
    )
    table = run_experiment(cfg, threads=_check_threads(args.threads))
    _write_outputs(table, cfg.out_dir)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "limit": _cmd_limit,
    "recovery": _cmd_recovery,
    "experiment": _cmd_experiment,
    "paper-figures": _cmd_paper_figures,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (PolypenError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
