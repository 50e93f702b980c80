"""Config-file parsing, validation, and echo tests."""

import pytest

from semifl import config
from semifl.errors import ConfigError


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:
    def test_empty_file_is_reference_defaults(self, tmp_path):
        cfg = config.parse_config(write(tmp_path, ""))
        assert cfg.mode == "semifl"
        assert cfg.arch == "cnn"
        assert cfg.pattern == "c3"
        assert cfg.rounds == 200
        assert cfg.local_epochs == 5
        assert cfg.local_batch == 20
        assert cfg.learning_rate == 0.01
        assert cfg.clients == 100
        assert cfg.per_client == 600
        assert cfg.clusters == 10
        assert cfg.cl_batch == 200
        assert cfg.eval_every == 5
        assert cfg.client_fraction == 1.0

    def test_partition_seed_falls_back_to_master(self, tmp_path):
        cfg = config.parse_config(write(tmp_path, "master_seed = 11\n"))
        assert cfg.effective_partition_seed == 11
        cfg2 = config.parse_config(write(tmp_path, "master_seed = 11\npartition_seed = 3\n"))
        assert cfg2.effective_partition_seed == 3


class TestParsing:
    def test_comments_whitespace_and_values(self, tmp_path):
        text = """
        # a full-line comment
        mode = fl          # trailing comment
        client_fraction = 0.1

        rounds=30
        dataset = synthetic:10x12
        """
        cfg = config.parse_config(write(tmp_path, text))
        assert cfg.mode == "fl"
        assert cfg.client_fraction == 0.1
        assert cfg.rounds == 30
        assert cfg.dataset_kind() == ("synthetic", (10, 12))

    def test_unknown_key_names_line(self, tmp_path):
        path = write(tmp_path, "mode = fl\nspeed = 9\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:2: unknown key 'speed'"):
            config.parse_config(path)

    def test_bad_value_names_key_and_line(self, tmp_path):
        path = write(tmp_path, "rounds = soon\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:1.*'rounds'.*integer"):
            config.parse_config(path)

    def test_negative_rounds_names_key_and_line(self, tmp_path):
        path = write(tmp_path, "mode = cl\nrounds = -5\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:2: rounds must be >= 1"):
            config.parse_config(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = write(tmp_path, "rounds = 5\nrounds = 6\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:2: duplicate key"):
            config.parse_config(path)

    def test_missing_equals(self, tmp_path):
        path = write(tmp_path, "just words\n")
        with pytest.raises(ConfigError, match="key = value"):
            config.parse_config(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            config.parse_config("/nonexistent/run.cfg")


class TestValidation:
    @pytest.mark.parametrize("line,fragment", [
        ("mode = p2p", "mode must be one of"),
        ("pattern = c7", "pattern must be one of"),
        ("client_fraction = 0", "client_fraction"),
        ("client_fraction = 1.2", "client_fraction"),
        ("learning_rate = -0.5", "learning_rate"),
        ("eval_every = 0", "eval_every"),
        ("dataset = synthetic:tenx5", "dataset"),
        ("cluster_order = sometimes", "cluster_order"),
        ("pattern = explicit", "assignment_file"),
    ])
    def test_rejections(self, tmp_path, line, fragment):
        with pytest.raises(ConfigError, match=fragment):
            config.parse_config(write(tmp_path, line + "\n"))

    def test_order_spec(self, tmp_path):
        cfg = config.parse_config(write(tmp_path, "cluster_order = shuffled:42\n"))
        assert cfg.order_spec() == ("shuffled", 42)
        cfg2 = config.parse_config(write(tmp_path, ""))
        assert cfg2.order_spec() == ("fixed", 0)


class TestRender:
    def test_roundtrip_defaults(self, tmp_path):
        cfg = config.ExperimentConfig()
        back = config.parse_config(write(tmp_path, config.render_config(cfg)))
        assert back == cfg

    def test_roundtrip_modified(self, tmp_path):
        cfg = config.ExperimentConfig(mode="fl", rounds=17, client_fraction=0.25,
                                      dataset="synthetic:4x9", master_seed=99)
        back = config.parse_config(write(tmp_path, config.render_config(cfg)))
        assert back == cfg


class TestDataDir:
    def test_env_fallback(self, monkeypatch):
        monkeypatch.setenv(config.DATA_DIR_ENV, "/tmp/idx")
        assert config.resolve_data_dir(config.ExperimentConfig()) == "/tmp/idx"
        assert config.resolve_data_dir(
            config.ExperimentConfig(data_dir="/explicit")) == "/explicit"
        monkeypatch.delenv(config.DATA_DIR_ENV)
        assert config.resolve_data_dir(config.ExperimentConfig()) == ""
