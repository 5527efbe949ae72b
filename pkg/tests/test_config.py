# tests/test_config.py
from pathlib import Path

import pytest

from src.core.config import (
    ConfigError,
    CorrectionConfig,
    ExperimentConfig,
    experiment_from_dict,
    load_experiments,
    validate_experiment,
)


class TestLoadExperiments:
    def test_loads_single_experiment(self, write_config, small_experiment):
        experiments = load_experiments(write_config(small_experiment))
        assert len(experiments) == 1
        cfg = experiments[0]
        assert cfg.id == "small"
        assert cfg.n == 40
        assert cfg.p == 12
        assert cfg.target_r2 == 0.9
        assert cfg.sigma_eps is None

    def test_missing_file_raises(self):
        with pytest.raises(ConfigError, match="not found"):
            load_experiments("/nonexistent/experiments.yaml")

    def test_invalid_yaml_raises(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("n: [1, 2\n")
        with pytest.raises(ConfigError, match="Invalid YAML"):
            load_experiments(str(path))

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_experiments(str(path))

    def test_defaults_merged_into_entries(self, write_config):
        path = write_config({
            "defaults": {"p": 100, "rho_corr": 0.1, "reps": 5, "correction": {"whiten": False}},
            "experiments": [
                {"id": "a", "n": 50, "target_r2": 0.98},
                {"id": "b", "n": 60, "sigma_eps": 1.0, "reps": 3, "correction": {"a_method": "row"}},
            ],
        })
        a, b = load_experiments(path)
        assert (a.id, a.n, a.p, a.reps) == ("a", 50, 100, 5)
        assert (b.id, b.n, b.p, b.reps) == ("b", 60, 100, 3)
        assert a.correction.whiten is False
        assert b.correction.whiten is False
        assert b.correction.a_method == "row"

    def test_ids_default_to_position(self, write_config):
        path = write_config({
            "defaults": {"p": 10, "sigma_eps": 1.0},
            "experiments": [{"n": 20}, {"n": 30}],
        })
        assert [cfg.id for cfg in load_experiments(path)] == ["experiment-1", "experiment-2"]

    def test_empty_experiment_list_raises(self, write_config):
        with pytest.raises(ConfigError, match="must not be empty"):
            load_experiments(write_config({"experiments": []}))

    def test_null_defaults_section(self, write_config, small_experiment):
        path = write_config({"defaults": None, "experiments": [small_experiment]})
        assert load_experiments(path)[0].n == 40


class TestExperimentFromDict:
    def test_defaults_applied(self):
        cfg = experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.98})
        assert cfg.reps == 200
        assert cfg.beta_type == "I"
        assert cfg.lambda_mode == "gaussian"
        assert cfg.lambda_m == 10
        assert cfg.varsigma == 1e-4
        assert cfg.holdout_n == 200
        assert cfg.d_instr == 1
        assert cfg.mean_rule == "shifted"
        assert cfg.center_selection is True
        assert cfg.correction == CorrectionConfig()
        assert cfg.correction.standardize_v is False
        assert cfg.coefficients.tail_low == -0.5
        assert cfg.coefficients.tail_high == 0.15

    def test_beta_type_inside_coefficients(self):
        cfg = experiment_from_dict({
            "n": 100, "p": 500, "sigma_eps": 1.0,
            "coefficients": {"beta_type": "custom", "beta_I": [4.0, -1.5], "I": [1, 2]},
        })
        assert cfg.beta_type == "custom"
        assert cfg.coefficients.I == [1, 2]

    def test_unknown_key_raises(self):
        with pytest.raises(ConfigError, match="unknown experiment keys"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "colour": "red"})

    def test_unknown_correction_key_raises(self):
        with pytest.raises(ConfigError, match="correction"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "correction": {"kernel": "epa"}})

    def test_missing_n_raises(self):
        with pytest.raises(ConfigError, match="n is required"):
            experiment_from_dict({"p": 100, "target_r2": 0.9})

    def test_both_noise_settings_raise(self):
        with pytest.raises(ConfigError, match="exactly one"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "sigma_eps": 1.0})

    def test_no_noise_setting_raises(self):
        with pytest.raises(ConfigError, match="exactly one"):
            experiment_from_dict({"n": 50, "p": 100})

    @pytest.mark.parametrize("key,value,fragment", [
        ("reps", 0, "reps"),
        ("holdout_n", 0, "holdout_n"),
        ("d_instr", 0, "d_instr"),
        ("beta_type", "IV", "beta_type"),
        ("lambda_mode", "cv", "lambda_mode"),
        ("rho_corr", 1.0, "rho_corr"),
        ("mean_rule", "median", "mean_rule"),
    ])
    def test_invalid_values_raise(self, key, value, fragment):
        raw = {"n": 50, "p": 100, "target_r2": 0.9, key: value}
        with pytest.raises(ConfigError, match=fragment):
            experiment_from_dict(raw)

    def test_fixed_lambda_needs_value(self):
        with pytest.raises(ConfigError, match="lambda_value"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "lambda_mode": "fixed"})

    def test_custom_beta_needs_coefficients(self):
        with pytest.raises(ConfigError, match="custom"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "beta_type": "custom"})

    def test_row_method_requires_single_instrument(self):
        with pytest.raises(ConfigError, match="row"):
            experiment_from_dict({
                "n": 50, "p": 100, "target_r2": 0.9, "d_instr": 2,
                "correction": {"a_method": "row"},
            })

    def test_non_positive_bandwidth_raises(self):
        with pytest.raises(ConfigError, match="bandwidth"):
            experiment_from_dict({"n": 50, "p": 100, "target_r2": 0.9, "correction": {"bandwidth": 0}})


class TestEffectiveDKeep:
    def test_defaults_to_n_minus_one(self):
        cfg = validate_experiment(ExperimentConfig(n=100, p=500, sigma_eps=1.0, use_sis=True))
        assert cfg.effective_d_keep == 99

    def test_explicit_value_wins(self):
        cfg = ExperimentConfig(n=100, p=500, sigma_eps=1.0, use_sis=True, d_keep=40)
        assert cfg.effective_d_keep == 40


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestShippedConfigs:
    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
    def test_loads(self, path):
        experiments = load_experiments(str(path))
        assert experiments
        assert len({cfg.id for cfg in experiments}) == len(experiments)
        assert all(cfg.correction.standardize_v for cfg in experiments)

    def test_screened_designs_keep_custom_block(self):
        experiments = load_experiments(str(CONFIG_DIR / "screened_p1000.yaml"))
        assert all(cfg.use_sis and cfg.effective_d_keep == 99 for cfg in experiments)
        assert experiments[0].coefficients.beta_I[4] == -3.0
