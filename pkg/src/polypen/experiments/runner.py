"""Grid runner: finite-n replications against the asymptotic limit.

Stream layout, fixed so results never depend on scheduling:

    child(0, i, j, r)   replication r of the finite cell (n_values[i], alpha_values[j])
    child(1, j, k)      draw k of the asymptotic cell at alpha_values[j]
    child(2)            Monte-Carlo moment estimation, when no closed form exists

Cells and replications may run on a thread pool; aggregation walks the
results in index order, so the output is byte-identical for any --threads.
"""

from __future__ import annotations

import dataclasses
import platform
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy

from ..asymptotics import LimitLaw, sample_limit
from ..datagen import ScenarioSpec, build_covariance, gen_dataset
from ..errors import NoClosedForm, NoConvergedReplications, NotConverged
from ..loss import MomentPair, moments_analytic, moments_mc
from ..metrics import ReplicationResult, recovery_rate, residual_errors, rmse
from ..numerics import RngStream
from ..penalty import Pattern, limit_pattern, pattern
from ..solver import SolveOptions, fit
from .config import ExperimentConfig

__all__ = [
    "ResultRow",
    "ResultTable",
    "limit_moments",
    "run_experiment",
    "sample_limit_cell",
]

_MC_MOMENT_DRAWS = 1_000_000
_CELL_FAILURE_LIMIT = 0.01


@dataclass(frozen=True)
class ResultRow:
    """One grid cell: a finite sample size (key = str(n)) or the limit law
    (key = "asymptotic"), at one penalty scale."""

    key: str
    alpha: float
    rmse: float
    rmse_se: float
    mean_rre: float
    rre_se: float
    recovery: float
    recovery_se: float
    count: int
    exclusions: int

    @property
    def n(self) -> int | None:
        return None if self.key == "asymptotic" else int(self.key)


@dataclass(frozen=True)
class ResultTable:
    """All grid cells of one run plus the identifying metadata."""

    config: ExperimentConfig
    rows: tuple[ResultRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        expected = {
            (key, alpha)
            for alpha in self.config.alpha_values
            for key in [*(str(n) for n in self.config.n_values), "asymptotic"]
        }
        seen = [(row.key, row.alpha) for row in self.rows]
        if len(seen) != len(set(seen)):
            raise NoConvergedReplications("duplicate grid cells in result table")
        if set(seen) != expected:
            raise NoConvergedReplications("result rows do not cover the config grid exactly")

    def row(self, key: str, alpha: float) -> ResultRow:
        for r in self.rows:
            if r.key == key and r.alpha == alpha:
                return r
        raise KeyError((key, alpha))

    def metadata(self) -> dict:
        """Run record: seed, config echo + hash, library versions.

        Deliberately free of timestamps, hostnames, and thread counts so the
        same (config, seed) always produces identical bytes.
        """
        try:
            from importlib.metadata import version

            pkg_version = version("polypen")
        except Exception:
            pkg_version = "unknown"
        config = self.config.to_config()
        del config["out_dir"]  # output location is not part of the run's identity
        return {
            "seed": self.config.seed,
            "config": config,
            "config_hash": self.config.config_hash(),
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "polypen": pkg_version,
            },
        }


def _map_ordered(fn, count: int, threads: int) -> list:
    """fn over range(count), results in index order regardless of pool size."""
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


def limit_moments(scenario: ScenarioSpec, rng: RngStream, *, draws: int = _MC_MOMENT_DRAWS) -> MomentPair:
    """(C, C_delta) for the scenario: closed form when one exists, Monte
    Carlo with `draws` design/response pairs otherwise."""
    exx = build_covariance(scenario.design)
    noise = scenario.effective_noise()
    try:
        return moments_analytic(scenario.loss, exx, scenario.theta0, noise)
    except NoClosedForm:
        return moments_mc(
            scenario.loss, scenario.design.sampler(), noise, scenario.theta0, draws, rng
        )


def sample_limit_cell(
    law: LimitLaw,
    draws: int,
    stream: RngStream,
    *,
    threads: int = 1,
    opts: SolveOptions = SolveOptions(),
) -> tuple[np.ndarray, tuple[Pattern, ...], int]:
    """`draws` realizations of the limiting minimizer with their patterns.

    Returns (u matrix over successful draws, their patterns, failure count);
    fails the whole cell once failures pass the 1% threshold.
    """

    def one(k: int):
        try:
            u = sample_limit(law, stream.child(k), opts)
        except NotConverged:
            return None
        return u, limit_pattern(law.penalty, law.theta0, u)

    outs = _map_ordered(one, draws, threads)
    failures = sum(1 for o in outs if o is None)
    if failures > _CELL_FAILURE_LIMIT * draws:
        raise NoConvergedReplications(
            f"{failures} of {draws} limit draws failed to converge; "
            "more than 1% failures would bias the cell"
        )
    kept = [o for o in outs if o is not None]
    us = np.array([u for u, _ in kept])
    pats = tuple(pat for _, pat in kept)
    return us, pats, failures


def _asymptotic_row(
    law: LimitLaw,
    alpha: float,
    draws: int,
    stream: RngStream,
    threads: int,
    opts: SolveOptions,
) -> ResultRow:
    us, pats, failures = sample_limit_cell(law, draws, stream, threads=threads, opts=opts)
    sq = np.einsum("ij,ij->i", us, us)
    mean_sq, se_sq = _mean_se(sq)
    cell_rmse = float(np.sqrt(mean_sq))
    rmse_se = se_sq / (2.0 * cell_rmse) if cell_rmse > 0 else 0.0
    rre = np.array([residual_errors(u, law.penalty, law.theta0)[1] for u in us])
    mean_rre, rre_se = _mean_se(rre)
    target = law.true_pattern
    hits = sum(1 for p in pats if p == target)
    rate = hits / len(pats)
    rate_se = float(np.sqrt(rate * (1.0 - rate) / len(pats)))
    return ResultRow(
        key="asymptotic",
        alpha=alpha,
        rmse=cell_rmse,
        rmse_se=rmse_se,
        mean_rre=mean_rre,
        rre_se=rre_se,
        recovery=rate,
        recovery_se=rate_se,
        count=draws,
        exclusions=failures,
    )


def _finite_row(
    cfg: ExperimentConfig,
    n: int,
    alpha: float,
    cell_stream: RngStream,
    threads: int,
    opts: SolveOptions,
) -> ResultRow:
    scenario = dataclasses.replace(cfg.scenario, n=n)
    pen = cfg.penalty.with_scale(alpha)
    theta0 = cfg.scenario.theta0
    root_n = np.sqrt(float(n))

    def one(r: int) -> ReplicationResult:
        data = gen_dataset(scenario, cell_stream.child(r))
        report = fit(data, scenario.loss, pen, opts)
        theta_hat = report.minimizer
        converged = report.converged and bool(np.all(np.isfinite(theta_hat)))
        if not np.all(np.isfinite(theta_hat)):
            theta_hat = np.zeros_like(theta0)
        return ReplicationResult(
            theta_hat=theta_hat,
            pattern=pattern(pen, theta_hat),
            u_n=root_n * (theta_hat - theta0),
            converged=converged,
        )

    # Separable logistic samples trip a solver warning per replication;
    # in bulk runs the converged flag already records the outcome.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = _map_ordered(one, cfg.replications, threads)

    cell_rmse = rmse(results)  # enforces the 1% exclusion rule
    converged = [r for r in results if r.converged]
    exclusions = len(results) - len(converged)
    sq = np.array([r.u_n @ r.u_n for r in converged])
    mean_sq, se_sq = _mean_se(sq)
    rmse_se = se_sq / (2.0 * cell_rmse) if cell_rmse > 0 else 0.0
    rre = np.array([residual_errors(r.u_n, pen, theta0)[1] for r in converged])
    mean_rre, rre_se = _mean_se(rre)
    rec = recovery_rate(results, pen, theta0)
    return ResultRow(
        key=str(n),
        alpha=alpha,
        rmse=cell_rmse,
        rmse_se=rmse_se,
        mean_rre=mean_rre,
        rre_se=rre_se,
        recovery=rec.rate,
        recovery_se=rec.se,
        count=len(results),
        exclusions=exclusions,
    )


def run_experiment(
    cfg: ExperimentConfig,
    *,
    threads: int = 1,
    opts: SolveOptions = SolveOptions(),
) -> ResultTable:
    """Run the full (n, alpha) grid plus the asymptotic row for each alpha.

    Moments for the limit law are computed once per run (they do not depend
    on n or alpha).  Output is fully determined by (config, seed).
    """
    rng = RngStream(cfg.seed)
    moments = limit_moments(cfg.scenario, rng.child(2))
    rows: list[ResultRow] = []
    for j, alpha in enumerate(cfg.alpha_values):
        for i, n in enumerate(cfg.n_values):
            rows.append(
                _finite_row(cfg, n, alpha, rng.child(0, i, j), threads, opts)
            )
        law = LimitLaw(cfg.scenario.theta0, moments, cfg.penalty.with_scale(alpha))
        rows.append(
            _asymptotic_row(law, alpha, cfg.asymptotic_draws, rng.child(1, j), threads, opts)
        )
    return ResultTable(config=cfg, rows=tuple(rows))
