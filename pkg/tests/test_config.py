"""Strict JSON config parsing: schema checks, defaults, hashing, overrides."""

import copy
import json

import numpy as np
import pytest

from polypen.errors import ConfigError
from polypen.experiments import (
    ExperimentConfig,
    load_config,
    parse_experiment,
    parse_task,
)


def base_config():
    return {
        "scenario": {
            "design": {"kind": "cs_blocks", "block_size": 2, "rho": 0.3, "blocks": 2},
            "theta0": [1.0, -1.0, 0.0, 0.0],
            "loss": {"kind": "logistic"},
        },
        "penalty": {"kind": "lasso", "lam": 1.0},
        "n_values": [200, 400],
        "alpha_values": [0.5, 1.0],
        "replications": 10,
        "asymptotic_draws": 50,
        "seed": 3,
        "out_dir": "results",
    }


class TestUnknownKeys:
    @pytest.mark.parametrize(
        "mutate",
        [
            lambda c: c.update(extra=1),
            lambda c: c["scenario"].update(bogus=1),
            lambda c: c["scenario"]["design"].update(rho2=0.5),
            lambda c: c["scenario"]["loss"].update(alpha=0.5),
            lambda c: c["penalty"].update(lam2=1.0),
        ],
    )
    def test_rejected_at_every_level(self, mutate):
        cfg = base_config()
        mutate(cfg)
        with pytest.raises(ConfigError, match="unknown key"):
            parse_experiment(cfg)

    def test_noise_keys_checked(self):
        cfg = base_config()
        cfg["scenario"]["loss"] = {"kind": "squared"}
        cfg["scenario"]["noise"] = {"kind": "gaussian", "sigma": 1.0, "df": 3}
        with pytest.raises(ConfigError, match="unknown key"):
            parse_experiment(cfg)


class TestTypes:
    def test_bool_is_not_an_integer(self):
        cfg = base_config()
        cfg["replications"] = True
        with pytest.raises(ConfigError):
            parse_experiment(cfg)
        cfg = base_config()
        cfg["n_values"] = [True, 400]
        with pytest.raises(ConfigError):
            parse_experiment(cfg)

    def test_n_values_must_be_integers(self):
        cfg = base_config()
        cfg["n_values"] = [200.5]
        with pytest.raises(ConfigError):
            parse_experiment(cfg)

    def test_alpha_values_must_be_numbers(self):
        cfg = base_config()
        cfg["alpha_values"] = ["big"]
        with pytest.raises(ConfigError):
            parse_experiment(cfg)

    def test_scalar_grids_rejected(self):
        for key in ("n_values", "alpha_values"):
            cfg = base_config()
            cfg[key] = 5
            with pytest.raises(ConfigError):
                parse_experiment(cfg)

    def test_out_dir_must_be_nonempty_string(self):
        cfg = base_config()
        cfg["out_dir"] = ""
        with pytest.raises(ConfigError):
            parse_experiment(cfg)


class TestGridValidation:
    def test_duplicates_rejected(self):
        cfg = base_config()
        cfg["n_values"] = [200, 200]
        with pytest.raises(ConfigError, match="distinct"):
            parse_experiment(cfg)
        cfg = base_config()
        cfg["alpha_values"] = [0.5, 0.5]
        with pytest.raises(ConfigError, match="distinct"):
            parse_experiment(cfg)

    def test_positivity(self):
        cfg = base_config()
        cfg["n_values"] = [0]
        with pytest.raises(ConfigError):
            parse_experiment(cfg)
        cfg = base_config()
        cfg["alpha_values"] = [-0.25]
        with pytest.raises(ConfigError):
            parse_experiment(cfg)
        cfg = base_config()
        cfg["replications"] = 0
        with pytest.raises(ConfigError):
            parse_experiment(cfg)

    def test_alpha_zero_is_legal(self):
        cfg = base_config()
        cfg["alpha_values"] = [0.0, 1.0]
        assert parse_experiment(cfg).alpha_values == (0.0, 1.0)

    def test_empty_grids_rejected(self):
        for key in ("n_values", "alpha_values"):
            cfg = base_config()
            cfg[key] = []
            with pytest.raises(ConfigError):
                parse_experiment(cfg)

    def test_seed_range(self):
        cfg = base_config()
        cfg["seed"] = -1
        with pytest.raises(ConfigError):
            parse_experiment(cfg)
        with pytest.raises(ConfigError):
            ExperimentConfig(
                scenario=parse_experiment(base_config()).scenario,
                penalty=parse_experiment(base_config()).penalty,
                n_values=(100,),
                alpha_values=(1.0,),
                seed=2**64,
            )

    def test_penalty_dimension_checked_against_scenario(self):
        cfg = base_config()
        cfg["penalty"] = {"kind": "weighted_lasso", "weights": [1.0, 1.0]}  # p = 4 scenario
        with pytest.raises(Exception):
            parse_experiment(cfg)


class TestDefaults:
    def test_scenario_n_defaults_to_first_grid_value(self):
        cfg = base_config()
        assert "n" not in cfg["scenario"]
        parsed = parse_experiment(cfg)
        assert parsed.scenario.n == 200

    def test_explicit_scenario_n_kept(self):
        cfg = base_config()
        cfg["scenario"]["n"] = 777
        assert parse_experiment(cfg).scenario.n == 777

    def test_budget_defaults(self):
        cfg = base_config()
        del cfg["replications"], cfg["asymptotic_draws"], cfg["seed"], cfg["out_dir"]
        parsed = parse_experiment(cfg)
        assert parsed.replications == 500
        assert parsed.asymptotic_draws == 5000
        assert parsed.seed == 0
        assert parsed.out_dir == "results"


class TestRoundTrip:
    def test_to_config_reparses_identically(self):
        parsed = parse_experiment(base_config())
        again = parse_experiment(parsed.to_config())
        assert again.to_config() == parsed.to_config()
        assert again.config_hash() == parsed.config_hash()

    def test_all_penalty_kinds_round_trip(self):
        penalties = [
            {"kind": "none"},
            {"kind": "lasso", "lam": 0.5, "scale": 2.0},
            {"kind": "weighted_lasso", "weights": [2.0, 1.0, 0.5, 0.0]},
            {"kind": "slope", "lam": [2.0, 1.5, 1.0, 0.5]},
            {"kind": "fused_lasso", "lam1": 0.3, "lam2": 0.7},
            {"kind": "elastic_net", "lam1": 0.3, "lam2": 0.7},
        ]
        for pen_cfg in penalties:
            cfg = base_config()
            cfg["penalty"] = pen_cfg
            parsed = parse_experiment(cfg)
            again = parse_experiment(parsed.to_config())
            assert again.to_config()["penalty"] == parsed.to_config()["penalty"]

    def test_noise_round_trip(self):
        cfg = base_config()
        cfg["scenario"]["loss"] = {"kind": "quantile", "alpha": 0.25}
        cfg["scenario"]["noise"] = {"kind": "student_t", "df": 4.0, "scale": 1.5}
        parsed = parse_experiment(cfg)
        again = parse_experiment(parsed.to_config())
        assert again.to_config()["scenario"] == parsed.to_config()["scenario"]


class TestConfigHash:
    def test_out_dir_not_hashed(self):
        a = parse_experiment(base_config())
        cfg = base_config()
        cfg["out_dir"] = "elsewhere"
        b = parse_experiment(cfg)
        assert a.config_hash() == b.config_hash()

    def test_seed_is_hashed(self):
        a = parse_experiment(base_config())
        cfg = base_config()
        cfg["seed"] = 4
        b = parse_experiment(cfg)
        assert a.config_hash() != b.config_hash()

    def test_stable_across_processes(self):
        # pure function of the canonical JSON: pin the value for this config
        h = parse_experiment(base_config()).config_hash()
        assert h == parse_experiment(copy.deepcopy(base_config())).config_hash()
        assert len(h) == 64
        int(h, 16)  # hex digest


class TestWithOverrides:
    def test_overrides_apply(self):
        parsed = parse_experiment(base_config())
        out = parsed.with_overrides(seed=9, replications=2, asymptotic_draws=7, out_dir="x")
        assert (out.seed, out.replications, out.asymptotic_draws, out.out_dir) == (9, 2, 7, "x")
        # untouched fields carried over
        assert out.n_values == parsed.n_values

    def test_no_overrides_is_identity(self):
        parsed = parse_experiment(base_config())
        assert parsed.with_overrides() is parsed


class TestParseTask:
    def test_happy_path(self):
        cfg = {"scenario": base_config()["scenario"], "penalty": base_config()["penalty"]}
        scenario, penalty = parse_task(cfg)
        assert scenario.p == 4
        assert penalty.variant == "lasso"

    def test_grid_keys_rejected(self):
        cfg = {
            "scenario": base_config()["scenario"],
            "penalty": base_config()["penalty"],
            "n_values": [100],
        }
        with pytest.raises(ConfigError, match="unknown key"):
            parse_task(cfg)

    def test_dimension_mismatch(self):
        cfg = {
            "scenario": base_config()["scenario"],
            "penalty": {"kind": "slope", "lam": [1.0, 0.5]},
        }
        with pytest.raises(Exception):
            parse_task(cfg)


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.json"))

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(str(p))

    def test_non_object(self, tmp_path):
        p = tmp_path / "arr.json"
        p.write_text("[1, 2, 3]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(str(p))

    def test_happy_path(self, tmp_path):
        p = tmp_path / "ok.json"
        p.write_text(json.dumps(base_config()))
        parsed = parse_experiment(load_config(str(p)))
        assert parsed.n_values == (200, 400)


class TestScenarioParsing:
    def test_theta0_becomes_array(self):
        parsed = parse_experiment(base_config())
        assert isinstance(parsed.scenario.theta0, np.ndarray)
        np.testing.assert_array_equal(parsed.scenario.theta0, [1.0, -1.0, 0.0, 0.0])

    def test_noise_requires_known_kind(self):
        cfg = base_config()
        cfg["scenario"]["loss"] = {"kind": "squared"}
        cfg["scenario"]["noise"] = {"kind": "uniform"}
        with pytest.raises(ConfigError):
            parse_experiment(cfg)

    def test_explicit_design_matrix(self):
        cfg = base_config()
        cfg["scenario"]["design"] = {"kind": "explicit", "matrix": [[1.0, 0.2], [0.2, 1.0]]}
        cfg["scenario"]["theta0"] = [1.0, 0.0]
        cfg["penalty"] = {"kind": "lasso", "lam": 1.0}
        parsed = parse_experiment(cfg)
        assert parsed.scenario.p == 2

    def test_zero_sigma_gaussian_noise_allowed(self):
        cfg = base_config()
        cfg["scenario"]["loss"] = {"kind": "squared"}
        cfg["scenario"]["noise"] = {"kind": "gaussian", "sigma": 0.0}
        parsed = parse_experiment(cfg)
        assert parsed.scenario.noise.sigma == 0.0
