"""TOML config loading: strict keys, overrides, hashing, run dirs."""

import pytest

from vitac.config import ConfigError, Experiment, load_config, parse_override


def test_defaults_without_file():
    exp = load_config()
    assert exp.name == "vitac"
    assert exp.world.image_size == 64
    assert exp.agent.fusion == "attention"
    assert exp.section("train")["steps"] == 150_000
    assert exp.section("evaluate")["threshold"] is None


def test_shipped_configs_parse():
    default = load_config("configs/default.toml")
    assert default.world.object.kind == "box"
    smoke = load_config("configs/smoke.toml")
    assert smoke.world.image_size == 32
    assert smoke.world.sensor.rows == 32
    assert smoke.agent.proprio_dims == (32, 16)
    assert smoke.name == "smoke"
    assert default.hash != smoke.hash


def test_unknown_keys_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[world]\nimage_sz = 64\n")
    with pytest.raises(ConfigError, match="image_sz"):
        load_config(bad)
    bad.write_text("[training]\nsteps = 5\n")
    with pytest.raises(ConfigError, match="section"):
        load_config(bad)
    bad.write_text("[collect]\nepisodes = 5\n")
    with pytest.raises(ConfigError, match="collect"):
        load_config(bad)


def test_invalid_values_surface_section():
    with pytest.raises(ConfigError, match="agent"):
        load_config(None, overrides=["agent.fusion=mean"])


def test_overrides_parse_types():
    path, value = parse_override("agent.lr=3e-4")
    assert path == ["agent", "lr"] and value == pytest.approx(3e-4)
    _, value = parse_override("world.image_size=32")
    assert value == 32
    _, value = parse_override("ablate.seeds=[4, 5]")
    assert value == [4, 5]
    _, value = parse_override('run.name="abc"')
    assert value == "abc"
    _, value = parse_override("run.name=abc")  # bare string accepted
    assert value == "abc"
    with pytest.raises(ConfigError, match="section.key=value"):
        parse_override("just-a-flag")


def test_overrides_apply_and_change_hash():
    base = load_config()
    exp = load_config(None, overrides=["agent.lr=3e-4", "world.image_size=32",
                                       "world.sensor.rows=32"])
    assert exp.agent.lr == pytest.approx(3e-4)
    assert exp.world.image_size == 32
    assert exp.world.sensor.rows == 32
    assert exp.hash != base.hash
    assert len(exp.hash8) == 8


def test_run_dir_naming(tmp_path):
    exp = load_config(None, overrides=[f'run.out_root="{tmp_path}"', 'run.name="study"'])
    d = exp.run_dir("policy", seed=3)
    assert d.is_dir()
    assert d.name == f"study-policy-{exp.hash8}-s3"


def test_dump_round_trip(tmp_path):
    exp = load_config("configs/smoke.toml")
    out = tmp_path / "experiment.json"
    exp.dump(out)
    import json

    payload = json.loads(out.read_text())
    assert payload["hash"] == exp.hash
    assert payload["config"]["world"]["image_size"] == 32
