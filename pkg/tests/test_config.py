import pytest
import yaml

from shared.config import ExperimentConfig, RunConfig, load_config, parse_complex
from shared.errors import ConfigError


def test_shipped_configs_load(configs_dir):
    paths = sorted(configs_dir.glob("*.yaml"))
    assert len(paths) >= 9
    for path in paths:
        config = load_config(path)
        assert config.source == str(path)
        assert len(config.config_hash) == 64


def test_defaults_without_a_file():
    config = load_config()
    assert config.run.experiment == "check"
    assert config.trap is None


def test_environment_supplies_run_defaults(monkeypatch):
    monkeypatch.setenv("QCLAB_SEED", "17")
    monkeypatch.setenv("QCLAB_OUTPUT_DIR", "/tmp/qclab-out")
    run = RunConfig()
    assert run.seed == 17
    assert run.output_dir == "/tmp/qclab-out"


def test_file_values_override_the_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("QCLAB_SEED", "17")
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump({"run": {"seed": 3}}))
    assert load_config(path).run.seed == 3
    assert load_config(path).with_overrides(seed=5).run.seed == 5


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("model:\n  grid:\n    halfwidth: 3\n")
    with pytest.raises(ConfigError, match="halfwidth"):
        load_config(path)
    path.write_text("extras: {}\n")
    with pytest.raises(ConfigError, match="extras"):
        load_config(path)


def test_malformed_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("model: [unclosed\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(path)


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(ConfigError, match="sum"):
        ExperimentConfig.from_dict({
            "state": {"kind": "mixture", "atoms": [{"weight": 0.5, "point": [1]}, {"weight": 0.6, "point": [2]}]}
        })


def test_parse_complex_forms():
    assert parse_complex([0.1, 0.2]) == 0.1 + 0.2j
    assert parse_complex(3) == 3 + 0j
    assert parse_complex("1-2j") == 1 - 2j
    with pytest.raises(ConfigError):
        parse_complex(True)
    with pytest.raises(ConfigError):
        parse_complex("one")


def test_hash_tracks_the_effective_configuration(configs_dir):
    config = load_config(configs_dir / "effective_coherent.yaml")
    assert config.config_hash == load_config(configs_dir / "effective_coherent.yaml").config_hash
    assert config.with_overrides(seed=99).config_hash != config.config_hash
    assert config.with_overrides(eps=[0.5]).sweep.eps == (0.5,)


def test_bad_values_are_reported():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"run": {"experiment": "dance"}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sweep": {"eps": [0.5, -1.0]}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"sweep": {"cutoffs": {"ceiling": 100}}})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"model": {"n_particles": 3}})


def test_trap_cutoff_ceiling_is_separate_from_the_sweep():
    config = ExperimentConfig.from_dict({"trap": {"cutoff_ceiling": 100}})
    assert config.trap.cutoff_ceiling == 100
    assert config.sweep.cutoffs.ceiling == 64
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"trap": {"cutoff_ceiling": 512}})
