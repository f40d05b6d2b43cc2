"""Strict config parsing for experiment runs.

Config files are JSON objects.  Every key is checked against the schema and
unknown keys are rejected outright — a misspelled option must fail loudly
rather than silently fall back to a default.  The full schema is documented
in the README.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..datagen import DesignSpec, ScenarioSpec
from ..errors import ConfigError
from ..loss import LossSpec, NoiseSpec
from ..penalty import PenaltySpec

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_design",
    "parse_loss",
    "parse_noise",
    "parse_penalty",
    "parse_scenario",
    "parse_experiment",
    "parse_task",
]

# Scenario "n" is a placeholder in grid runs (each cell overrides it), and a
# convenience default for one-shot subcommands that never hit the grid.
_DEFAULT_N = 1000


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(d) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key '{key}' in {where}")
    return d[key]


def _as_mapping(val, where: str) -> dict:
    if not isinstance(val, dict):
        raise ConfigError(f"{where} must be an object")
    return val


def _as_int(val, where: str, *, minimum: int | None = None) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{where} must be an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(f"{where} must be >= {minimum}")
    return val


def _as_float(val, where: str) -> float:
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where} must be a number")
    out = float(val)
    if not np.isfinite(out):
        raise ConfigError(f"{where} must be finite")
    return out


def _as_number_list(val, where: str) -> list[float]:
    if not isinstance(val, list) or not val:
        raise ConfigError(f"{where} must be a non-empty array of numbers")
    return [_as_float(v, f"{where}[{i}]") for i, v in enumerate(val)]


def parse_design(d, where: str = "scenario.design") -> DesignSpec:
    d = _as_mapping(d, where)
    kind = _require(d, "kind", where)
    if kind == "identity":
        _check_keys(d, {"kind", "p"}, where)
        return DesignSpec.identity(_as_int(_require(d, "p", where), f"{where}.p", minimum=1))
    if kind == "cs_blocks":
        _check_keys(d, {"kind", "block_size", "rho", "blocks"}, where)
        return DesignSpec.compound_symmetry_blocks(
            _as_int(_require(d, "block_size", where), f"{where}.block_size", minimum=1),
            _as_float(_require(d, "rho", where), f"{where}.rho"),
            _as_int(_require(d, "blocks", where), f"{where}.blocks", minimum=1),
        )
    if kind == "explicit":
        _check_keys(d, {"kind", "matrix"}, where)
        mat = _require(d, "matrix", where)
        if not isinstance(mat, list) or not all(isinstance(r, list) for r in mat):
            raise ConfigError(f"{where}.matrix must be an array of arrays")
        return DesignSpec.explicit(np.asarray(mat, dtype=float))
    raise ConfigError(f"{where}.kind must be one of identity, cs_blocks, explicit")


def parse_loss(d, where: str = "scenario.loss") -> LossSpec:
    d = _as_mapping(d, where)
    kind = _require(d, "kind", where)
    if kind == "squared":
        _check_keys(d, {"kind"}, where)
        return LossSpec.squared()
    if kind == "logistic":
        _check_keys(d, {"kind", "tau"}, where)
        tau = _as_float(d.get("tau", 1.0), f"{where}.tau")
        return LossSpec.logistic(tau)
    if kind == "poisson":
        _check_keys(d, {"kind"}, where)
        return LossSpec.poisson()
    if kind == "huber":
        _check_keys(d, {"kind", "k"}, where)
        return LossSpec.huber(_as_float(_require(d, "k", where), f"{where}.k"))
    if kind == "quantile":
        _check_keys(d, {"kind", "alpha"}, where)
        return LossSpec.quantile(_as_float(_require(d, "alpha", where), f"{where}.alpha"))
    raise ConfigError(
        f"{where}.kind must be one of squared, logistic, poisson, huber, quantile"
    )


def parse_noise(d, where: str = "scenario.noise") -> NoiseSpec:
    d = _as_mapping(d, where)
    kind = _require(d, "kind", where)
    if kind == "gaussian":
        _check_keys(d, {"kind", "sigma", "shift"}, where)
        out = NoiseSpec.gaussian(_as_float(d.get("sigma", 1.0), f"{where}.sigma"))
    elif kind == "laplace":
        _check_keys(d, {"kind", "scale", "shift"}, where)
        out = NoiseSpec.laplace(_as_float(d.get("scale", 1.0), f"{where}.scale"))
    elif kind == "student_t":
        _check_keys(d, {"kind", "df", "scale", "shift"}, where)
        out = NoiseSpec.student_t(
            _as_float(_require(d, "df", where), f"{where}.df"),
            _as_float(d.get("scale", 1.0), f"{where}.scale"),
        )
    else:
        raise ConfigError(f"{where}.kind must be one of gaussian, laplace, student_t")
    shift = _as_float(d.get("shift", 0.0), f"{where}.shift")
    if shift:
        out = dataclasses.replace(out, shift=shift)
    return out


def parse_penalty(d, where: str = "penalty") -> PenaltySpec:
    d = _as_mapping(d, where)
    kind = _require(d, "kind", where)
    scale = _as_float(d.get("scale", 1.0), f"{where}.scale")
    if kind == "none":
        _check_keys(d, {"kind", "scale"}, where)
        return PenaltySpec.none()
    if kind == "lasso":
        _check_keys(d, {"kind", "scale", "lam"}, where)
        return PenaltySpec.lasso(_as_float(_require(d, "lam", where), f"{where}.lam"), scale)
    if kind == "weighted_lasso":
        _check_keys(d, {"kind", "scale", "weights"}, where)
        w = _as_number_list(_require(d, "weights", where), f"{where}.weights")
        return PenaltySpec.weighted_lasso(w, scale)
    if kind == "slope":
        _check_keys(d, {"kind", "scale", "lam"}, where)
        lam = _as_number_list(_require(d, "lam", where), f"{where}.lam")
        return PenaltySpec.slope(lam, scale)
    if kind in ("fused_lasso", "elastic_net"):
        _check_keys(d, {"kind", "scale", "lam1", "lam2"}, where)
        lam1 = _as_float(_require(d, "lam1", where), f"{where}.lam1")
        lam2 = _as_float(_require(d, "lam2", where), f"{where}.lam2")
        factory = PenaltySpec.fused_lasso if kind == "fused_lasso" else PenaltySpec.elastic_net
        return factory(lam1, lam2, scale)
    raise ConfigError(
        f"{where}.kind must be one of none, lasso, weighted_lasso, slope, "
        "fused_lasso, elastic_net"
    )


def parse_scenario(d, where: str = "scenario", *, default_n: int = _DEFAULT_N) -> ScenarioSpec:
    d = _as_mapping(d, where)
    _check_keys(d, {"design", "theta0", "loss", "noise", "n"}, where)
    design = parse_design(_require(d, "design", where), f"{where}.design")
    theta0 = _as_number_list(_require(d, "theta0", where), f"{where}.theta0")
    loss = parse_loss(_require(d, "loss", where), f"{where}.loss")
    noise = parse_noise(d["noise"], f"{where}.noise") if "noise" in d else None
    n = _as_int(d.get("n", default_n), f"{where}.n", minimum=1)
    return ScenarioSpec(design, np.asarray(theta0), loss, noise, n)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one grid run: scenario, penalty shape, the
    (n, alpha) grid, and the realization budgets.

    Each grid cell runs the penalty at scale alpha (the alpha value replaces
    the penalty's own scale field), so the penalty config describes the shape
    only.  `seed` drives every stream in the run.
    """

    scenario: ScenarioSpec
    penalty: PenaltySpec
    n_values: tuple[int, ...]
    alpha_values: tuple[float, ...]
    replications: int = 500
    asymptotic_draws: int = 5000
    seed: int = 0
    out_dir: str = "results"

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "alpha_values", tuple(float(a) for a in self.alpha_values))
        if not self.n_values:
            raise ConfigError("n_values must be non-empty")
        if not self.alpha_values:
            raise ConfigError("alpha_values must be non-empty")
        if any(n < 1 for n in self.n_values):
            raise ConfigError("n_values must be positive")
        if len(set(self.n_values)) != len(self.n_values):
            raise ConfigError("n_values must be distinct")
        if any(not np.isfinite(a) or a < 0 for a in self.alpha_values):
            raise ConfigError("alpha_values must be finite and nonnegative")
        if len(set(self.alpha_values)) != len(self.alpha_values):
            raise ConfigError("alpha_values must be distinct")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.asymptotic_draws < 1:
            raise ConfigError("asymptotic_draws must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        self.penalty.check_dim(self.scenario.p)

    def with_overrides(
        self,
        *,
        seed: int | None = None,
        replications: int | None = None,
        asymptotic_draws: int | None = None,
        out_dir: str | None = None,
    ) -> "ExperimentConfig":
        """Copy with any command-line overrides applied."""
        updates: dict = {}
        if seed is not None:
            updates["seed"] = seed
        if replications is not None:
            updates["replications"] = replications
        if asymptotic_draws is not None:
            updates["asymptotic_draws"] = asymptotic_draws
        if out_dir is not None:
            updates["out_dir"] = out_dir
        return dataclasses.replace(self, **updates) if updates else self

    def to_config(self) -> dict:
        return {
            "scenario": self.scenario.to_config(),
            "penalty": self.penalty.to_config(),
            "n_values": list(self.n_values),
            "alpha_values": list(self.alpha_values),
            "replications": self.replications,
            "asymptotic_draws": self.asymptotic_draws,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form, minus the output directory.

        The hash identifies the statistical content of a run; where the
        results land must not change their identity.
        """
        body = self.to_config()
        del body["out_dir"]
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def parse_experiment(d, where: str = "config") -> ExperimentConfig:
    d = _as_mapping(d, where)
    _check_keys(
        d,
        {
            "scenario",
            "penalty",
            "n_values",
            "alpha_values",
            "replications",
            "asymptotic_draws",
            "seed",
            "out_dir",
        },
        where,
    )
    raw_n = _require(d, "n_values", where)
    if not isinstance(raw_n, list) or not raw_n:
        raise ConfigError(f"{where}.n_values must be a non-empty array")
    n_values = tuple(
        _as_int(v, f"{where}.n_values[{i}]", minimum=1) for i, v in enumerate(raw_n)
    )
    alpha_values = tuple(_as_number_list(_require(d, "alpha_values", where), f"{where}.alpha_values"))
    scenario = parse_scenario(_require(d, "scenario", where), f"{where}.scenario", default_n=n_values[0])
    penalty = parse_penalty(_require(d, "penalty", where), f"{where}.penalty")
    out_dir = d.get("out_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError(f"{where}.out_dir must be a non-empty string")
    return ExperimentConfig(
        scenario=scenario,
        penalty=penalty,
        n_values=n_values,
        alpha_values=alpha_values,
        replications=_as_int(d.get("replications", 500), f"{where}.replications", minimum=1),
        asymptotic_draws=_as_int(d.get("asymptotic_draws", 5000), f"{where}.asymptotic_draws", minimum=1),
        seed=_as_int(d.get("seed", 0), f"{where}.seed", minimum=0),
        out_dir=out_dir,
    )


def parse_task(d, where: str = "config") -> tuple[ScenarioSpec, PenaltySpec]:
    """Scenario plus penalty, as used by the one-shot subcommands."""
    d = _as_mapping(d, where)
    _check_keys(d, {"scenario", "penalty"}, where)
    scenario = parse_scenario(_require(d, "scenario", where), f"{where}.scenario")
    penalty = parse_penalty(_require(d, "penalty", where), f"{where}.penalty")
    penalty.check_dim(scenario.p)
    return scenario, penalty


def load_config(path: str) -> dict:
    """Read a JSON config file; syntax and IO problems become ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path!r} must contain a JSON object")
    return data
