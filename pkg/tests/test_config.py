import json

import pytest

from config import JOBS_ENV_VAR, RunConfig, load_run_config, resolve_jobs

SIMULATE = {"d": 2, "n": 100}


def test_defaults_validate_with_a_data_source():
    config = RunConfig(simulate=SIMULATE).validate()
    assert config.alpha == 0.1
    assert config.schemes == ["independent", "corrected"]


@pytest.mark.parametrize("changes", [
    {"alpha": 0.0},
    {"alpha": 1.0},
    {"schemes": []},
    {"schemes": ["independent", "bonferroni"]},
    {"seeds": []},
    {"copula_kind": "student"},
    {"norm": "l2"},
    {"mc_samples": 999},
    {"split_fraction": 1.0},
    {"fractions": {"train": 0.6, "cal": 0.3, "test": 0.3}},
    {"simulate": None},
    {"simulate": None, "data_path": "data.csv"},
])
def test_invalid_configs(changes):
    values = {"simulate": SIMULATE}
    values.update(changes)
    with pytest.raises(ValueError):
        RunConfig(**values).validate()


def test_config_hash_ignores_output_locations():
    first = RunConfig(simulate=SIMULATE, out_dir="a", db_path="a.db")
    second = RunConfig(simulate=SIMULATE, out_dir="b")
    assert first.config_hash() == second.config_hash()
    assert len(first.config_hash()) == 16
    assert RunConfig(simulate=SIMULATE, alpha=0.2).config_hash() != first.config_hash()


def test_load_run_config_merges_file_and_overrides(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"alpha": 0.2, "seeds": [1, 2], "simulate": SIMULATE}))
    config = load_run_config(str(path), {"alpha": 0.05, "norm": None})
    assert config.alpha == 0.05
    assert config.seeds == [1, 2]
    assert config.norm == "l1"


def test_load_run_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"simulate": SIMULATE, "learning_rate": 0.1}))
    with pytest.raises(ValueError, match="learning_rate"):
        load_run_config(str(path))


def test_resolve_jobs(monkeypatch):
    monkeypatch.delenv(JOBS_ENV_VAR, raising=False)
    assert resolve_jobs() == 1
    assert resolve_jobs(4) == 4
    monkeypatch.setenv(JOBS_ENV_VAR, "2")
    assert resolve_jobs(4) == 2
    monkeypatch.setenv(JOBS_ENV_VAR, "many")
    with pytest.raises(ValueError):
        resolve_jobs()
    monkeypatch.setenv(JOBS_ENV_VAR, "0")
    with pytest.raises(ValueError):
        resolve_jobs()
