"""Run configuration: presets, file parsing, validation."""

import dataclasses

import pytest

from uqnet.config import (
    PRESETS,
    RunConfig,
    adam_config,
    base_network_config,
    config_to_text,
    desk_preset,
    paper_preset,
    parse_config,
    train_settings,
)


class TestPresets:
    def test_desk_defaults(self):
        cfg = desk_preset()
        assert cfg.input_side == 32
        assert cfg.kernel_sizes == (3, 5, 7)
        assert cfg.epochs == (15, 20, 25)
        assert cfg.n_folds == 5
        assert cfg.seed is None  # must be supplied explicitly

    def test_paper_scale(self):
        cfg = paper_preset()
        assert cfg.input_side == 224
        assert cfg.kernel_sizes == (3, 5, 7, 9, 11, 13, 15)

    def test_registry(self):
        assert set(PRESETS) == {"desk", "paper"}


class TestValidated:
    def test_requires_seed_and_out_dir(self):
        with pytest.raises(ValueError, match="seed"):
            desk_preset().validated()
        with pytest.raises(ValueError, match="out"):
            dataclasses.replace(desk_preset(), seed=1).validated()
        ok = dataclasses.replace(desk_preset(), seed=1, out_dir="/tmp/x").validated()
        assert ok.seed == 1

    def test_epochs_must_cover_three_levels(self):
        bad = dataclasses.replace(desk_preset(), seed=1, out_dir="/tmp/x", epochs=(5,))
        with pytest.raises(ValueError, match="epoch"):
            bad.validated()


class TestBridges:
    def test_network_config_fields(self):
        cfg = dataclasses.replace(desk_preset(), dropout_rate=0.3, mc_samples_t=11)
        net = base_network_config(cfg)
        assert net.input_side == 32
        assert net.dropout_rate == 0.3
        assert net.mc_samples_T == 11
        assert net.heteroscedastic is True

    def test_adam_fields(self):
        cfg = dataclasses.replace(desk_preset(), learning_rate=0.01, weight_decay=0.1)
        adam = adam_config(cfg)
        assert adam.learning_rate == 0.01
        assert adam.weight_decay == 0.1

    def test_train_settings_pick_level_epochs(self):
        cfg = desk_preset()
        assert train_settings(cfg, 0).epochs == 15
        assert train_settings(cfg, 1).epochs == 20
        assert train_settings(cfg, 2).epochs == 25


class TestParseConfig:
    def test_overrides_layer_on_base(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "[model]\nkernel_sizes = 3,5\ndropout_rate = 0.35\n"
            "[run]\nseed = 99\nout_dir = /tmp/out\n"
            "[train]\nepochs = 2,3,4\n"
        )
        cfg = parse_config(path, desk_preset())
        assert cfg.kernel_sizes == (3, 5)
        assert cfg.dropout_rate == 0.35
        assert cfg.seed == 99
        assert cfg.epochs == (2, 3, 4)
        assert cfg.batch_size == desk_preset().batch_size  # untouched

    def test_unknown_section_and_key_rejected(self, tmp_path):
        bad_section = tmp_path / "a.cfg"
        bad_section.write_text("[nope]\nx = 1\n")
        with pytest.raises(ValueError, match="nope"):
            parse_config(bad_section)
        bad_key = tmp_path / "b.cfg"
        bad_key.write_text("[model]\nwhat = 1\n")
        with pytest.raises(ValueError, match="what"):
            parse_config(bad_key)

    def test_bad_value_contextualized(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("[model]\ndropout_rate = high\n")
        with pytest.raises(ValueError, match="dropout_rate"):
            parse_config(path)

    def test_bool_parsing(self, tmp_path):
        path = tmp_path / "d.cfg"
        path.write_text("[model]\nheteroscedastic = false\n")
        assert parse_config(path).heteroscedastic is False
        path.write_text("[model]\nheteroscedastic = yes\n")
        assert parse_config(path).heteroscedastic is True

    def test_round_trip_through_text(self, tmp_path):
        cfg = dataclasses.replace(
            desk_preset(), seed=7, out_dir="/tmp/rt", kernel_sizes=(3, 7),
            dropout_rate=0.15, manifest="/data/m.csv",
        )
        path = tmp_path / "rt.cfg"
        path.write_text(config_to_text(cfg))
        back = parse_config(path, RunConfig())
        assert back == cfg
