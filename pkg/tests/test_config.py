"""Config parsing, typing, and precedence tests."""

import numpy as np
import pytest

from pegx import config, harness


def test_defaults_build_settings():
    cfg = config.load_config()
    settings = config.settings_from_config(cfg)
    assert isinstance(settings, harness.RunSettings)
    assert settings.embodiment_a.tau == 0.05
    assert settings.embodiment_b.tau == 0.09
    assert settings.train_steps_a == 150_000
    assert settings.train_steps_b == 400_000
    assert settings.finetune_steps == 30_000
    assert settings.hp.batch_size == 256
    assert settings.actor_hidden == [64, 64]
    assert settings.critic_hidden == [300, 400]
    assert settings.finetune_reset_critics is False


def test_parse_typed_values():
    text = """
    # comment line
    sac.batch_size = 64
    sac.gamma = 0.95
    sim.noise_eval = false
    sac.actor_hidden = 32, 32
    geom.hole_center = 0.01, -0.02, 0.0
    """
    out = config.parse_config_text(text)
    assert out["sac.batch_size"] == 64
    assert out["sac.gamma"] == 0.95
    assert out["sim.noise_eval"] is False
    assert out["sac.actor_hidden"] == (32, 32)
    assert out["geom.hole_center"] == (0.01, -0.02, 0.0)


def test_unknown_key_rejected_with_line_number():
    with pytest.raises(config.ConfigError) as err:
        config.parse_config_text("a = 1\nsac.nope = 2\n", source="f.cfg")
    assert "f.cfg:1" in str(err.value)
    with pytest.raises(config.ConfigError) as err:
        config.parse_config_text("sac.gamma = 0.9\nsac.nope = 2\n", source="f.cfg")
    assert "f.cfg:2" in str(err.value)


def test_malformed_values_rejected():
    with pytest.raises(config.ConfigError):
        config.parse_config_text("sac.batch_size = many")
    with pytest.raises(config.ConfigError):
        config.parse_config_text("sim.noise_eval = maybe")
    with pytest.raises(config.ConfigError):
        config.parse_config_text("geom.hole_center = 1, 2")
    with pytest.raises(config.ConfigError):
        config.parse_config_text("sac.gamma")


def test_precedence_defaults_env_file_flags(tmp_path, monkeypatch):
    # the same key set at every layer: highest layer wins
    env_file = tmp_path / "env.cfg"
    env_file.write_text("sac.batch_size = 11\n")
    explicit = tmp_path / "run.cfg"
    explicit.write_text("sac.batch_size = 22\n")

    monkeypatch.delenv("PEGX_CONFIG", raising=False)
    assert config.load_config()["sac.batch_size"] == 256

    monkeypatch.setenv("PEGX_CONFIG", str(env_file))
    assert config.load_config()["sac.batch_size"] == 11
    assert config.load_config(str(explicit))["sac.batch_size"] == 22
    got = config.load_config(str(explicit), overrides={"sac.batch_size": "33"})
    assert got["sac.batch_size"] == 33


def test_override_unknown_key_rejected():
    with pytest.raises(config.ConfigError):
        config.load_config(overrides={"sac.nope": "1"})


def test_settings_reflect_overrides():
    cfg = config.load_config(overrides={
        "emb_b.v_max": "0.2",
        "scenario.eval_episodes": "36",
        "finetune.reset_critics": "true",
        "sim.workspace_lo": "-0.2,-0.2,-0.1",
    })
    settings = config.settings_from_config(cfg)
    assert settings.embodiment_b.v_max == 0.2
    assert settings.eval_episodes == 36
    assert settings.finetune_reset_critics is True
    assert np.allclose(settings.embodiment_a.workspace_lo, [-0.2, -0.2, -0.1])
