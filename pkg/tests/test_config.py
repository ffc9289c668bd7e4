"""Run configuration loading, overrides and key checking."""

import json
from pathlib import Path

import pytest

from wpultr.config import ENV_MAPPINGS, RunConfig
from wpultr.core.errors import ConfigError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ENV_MAPPINGS:
        monkeypatch.delenv(name, raising=False)


def write_config(tmp_path: Path, data, name="config.json") -> Path:
    path = tmp_path / name
    text = data if isinstance(data, str) else json.dumps(data, indent=2)
    path.write_text(text, encoding="utf-8")
    return path


class TestLoad:
    def test_sections(self, tmp_path):
        path = write_config(tmp_path, {
            "seed": 5,
            "scm": {"n_queries": 40, "click_coeffs": {"b_pos": 0.0}},
            "causal": {"alpha": 0.01},
            "unbias": {"steps": 30, "graph_mode": "predefined"},
        })
        config = RunConfig.load(path)
        assert config.seed == 5
        scm = config.scm()
        assert scm.n_queries == 40
        assert scm.seed == 5
        assert scm.click_coeffs.b_pos == 0.0
        assert config.causal().alpha == 0.01

        unbias = config.unbias()
        assert unbias.steps == 30
        assert unbias.seed == 5
        assert unbias.causal.alpha == 0.01
        assert unbias.jobs == 1

    def test_defaults(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path, {"seed": 1}))
        assert config.out_dir == Path("runs")
        assert config.jobs == 1
        assert config.eval().cutoffs == (1, 3, 5, 10)
        assert config.baselines().seed == 1

    def test_yaml_is_accepted(self, tmp_path):
        path = write_config(tmp_path, "seed: 3\neval:\n  cutoffs: [1, 5]\n", "config.yaml")
        config = RunConfig.load(path)
        assert config.eval().cutoffs == (1, 5)

    def test_empty_file(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path, ""), {"seed": 2})
        assert config.seed == 2

    def test_no_file(self):
        assert RunConfig.load(None, {"seed": 4}).seed == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(tmp_path / "absent.json")


class TestErrors:
    def test_unknown_top_level_key(self, tmp_path):
        path = write_config(tmp_path, '{\n  "seed": 1,\n  "sede": 2\n}\n')
        with pytest.raises(ConfigError) as info:
            RunConfig.load(path)
        assert info.value.key == "sede"
        assert info.value.line == 3

    def test_unknown_section_key(self, tmp_path):
        path = write_config(tmp_path, '{\n  "seed": 1,\n  "causal": {\n    "alpah": 0.1\n  }\n}\n')
        with pytest.raises(ConfigError) as info:
            RunConfig.load(path)
        assert info.value.key == "causal.alpah"
        assert info.value.line == 4

    def test_unknown_nested_key(self, tmp_path):
        path = write_config(tmp_path, {"seed": 1, "scm": {"click_coeffs": {"b_size": 1.0}}})
        with pytest.raises(ConfigError) as info:
            RunConfig.load(path)
        assert info.value.key == "scm.click_coeffs.b_size"

    def test_derived_unbias_keys_rejected(self, tmp_path):
        path = write_config(tmp_path, {"seed": 1, "unbias": {"seed": 3}})
        with pytest.raises(ConfigError):
            RunConfig.load(path)

    def test_parse_error_has_line(self, tmp_path):
        path = write_config(tmp_path, '{\n  "seed": 1,\n  "scm": [1, 2\n')
        with pytest.raises(ConfigError) as info:
            RunConfig.load(path)
        assert isinstance(info.value.line, int)

    def test_top_level_must_be_object(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(write_config(tmp_path, "[1, 2]"))

    def test_section_must_be_object(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.load(write_config(tmp_path, {"seed": 1, "eval": 3}))

    def test_missing_seed(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path, {}))
        with pytest.raises(ConfigError, match="seed"):
            config.seed

    @pytest.mark.parametrize("seed", ["7", True, 1.5])
    def test_seed_must_be_integer(self, tmp_path, seed):
        config = RunConfig.load(write_config(tmp_path, {"seed": seed}))
        with pytest.raises(ConfigError):
            config.seed

    def test_invalid_section_value(self, tmp_path):
        config = RunConfig.load(write_config(tmp_path, {"seed": 1, "unbias": {"blocking": "none"}}))
        with pytest.raises(ConfigError) as info:
            config.unbias()
        assert info.value.key == "unbias"


class TestOverrides:
    def test_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WPULTR_SEED", "7")
        monkeypatch.setenv("WPULTR_JOBS", "3")
        monkeypatch.setenv("WPULTR_OUT_DIR", str(tmp_path / "out"))
        config = RunConfig.load(write_config(tmp_path, {"seed": 1}))
        assert config.seed == 7
        assert config.jobs == 3
        assert config.out_dir == tmp_path / "out"

    def test_flags_beat_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WPULTR_SEED", "7")
        config = RunConfig.load(write_config(tmp_path, {"seed": 1}), {"seed": 9, "jobs": None})
        assert config.seed == 9
        assert config.jobs == 1

    def test_bad_integer_in_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WPULTR_JOBS", "many")
        with pytest.raises(ConfigError):
            RunConfig.load(write_config(tmp_path, {"seed": 1}))

    def test_to_dict_leaves_out_run_location(self, tmp_path):
        path = write_config(tmp_path, {"seed": 1, "out_dir": "x", "jobs": 4, "eval": {"n_buckets": 5}})
        data = RunConfig.load(path).to_dict()
        assert data == {"seed": 1, "eval": {"n_buckets": 5}}
