"""Round-trips and validation for the config, embedding, checkpoint, and
report formats."""

import dataclasses
import struct

import numpy as np
import pytest

from wcse.checkpoint import (
    EvalWhitening,
    checkpoint_from_bytes,
    checkpoint_to_bytes,
    load_checkpoint,
    save_checkpoint,
)
from wcse.config import TrainConfig, config_from_text, config_to_text, load_config, save_config
from wcse.embfile import (
    embeddings_from_bytes,
    embeddings_to_bytes,
    read_embeddings,
    write_embeddings,
)
from wcse.encoder import EncoderState
from wcse.errors import CheckpointError, ConfigError, FileFormatError
from wcse.pipeline import format_record, parse_report_text
from wcse.whitening import WhiteningStats


class TestConfig:
    def test_roundtrip_default(self):
        cfg = TrainConfig()
        assert config_from_text(config_to_text(cfg)) == cfg

    def test_roundtrip_modified(self):
        cfg = TrainConfig(
            temperature=0.07,
            lambda_m=0.25,
            num_positives=4,
            group_size=4,
            shuffled=False,
            loss_kind="sum_in",
            aug_kind="dropout_only",
            steps=17,
            data_noise=0.125,
        )
        assert config_from_text(config_to_text(cfg)) == cfg

    def test_double_roundtrip_is_identity(self):
        text = config_to_text(TrainConfig(seed=3, momentum=0.875))
        assert config_to_text(config_from_text(text)) == text

    def test_lambda_auto_spelling(self):
        text = config_to_text(TrainConfig(lambda_m=None))
        assert "lambda_m = auto" in text
        assert config_from_text(text).lambda_m is None

    def test_comments_and_blanks_ignored(self):
        cfg = config_from_text("# comment\n\nsteps = 5  # trailing\n")
        assert cfg.steps == 5

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_text("not_a_key = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_text("steps = 3\nsteps = 4\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError):
            config_from_text("steps\n")

    @pytest.mark.parametrize(
        "field,value",
        [
            ("temperature", 0.0),
            ("num_positives", 1),
            ("momentum", 1.0),
            ("group_size", 5),
            ("loss_kind", "nope"),
            ("aug_kind", "nope"),
            ("dropout_rate", 1.0),
            ("batch_size", 1),
            ("eval_every", 0),
            ("data_clusters", 1),
            ("seed", -1),
        ],
    )
    def test_validation_rejects(self, field, value):
        cfg = dataclasses.replace(TrainConfig(), **{field: value})
        with pytest.raises(ConfigError):
            cfg.validate()

    def test_file_roundtrip(self, tmp_path):
        cfg = TrainConfig(steps=9, seed=4)
        path = tmp_path / "cfg.txt"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.txt")


class TestEmbeddingFile:
    def test_roundtrip_preserves_f32_values(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(13, 7)).astype(np.float32).astype(np.float64)
        path = tmp_path / "x.wemb"
        write_embeddings(path, x)
        back = read_embeddings(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, x)

    def test_byte_layout(self):
        data = embeddings_to_bytes(np.ones((2, 3)))
        magic, version, rows, cols, elem = struct.unpack_from("<4sIIII", data)
        assert magic == b"WEMB"
        assert (version, rows, cols, elem) == (1, 2, 3, 0)
        assert len(data) == 20 + 2 * 3 * 4

    def test_bad_magic(self):
        data = bytearray(embeddings_to_bytes(np.ones((1, 1))))
        data[:4] = b"XXXX"
        with pytest.raises(FileFormatError):
            embeddings_from_bytes(bytes(data))

    def test_truncated_payload(self):
        data = embeddings_to_bytes(np.ones((2, 2)))
        with pytest.raises(FileFormatError):
            embeddings_from_bytes(data[:-3])

    def test_non_finite_rejected_on_write(self):
        x = np.ones((2, 2))
        x[0, 0] = np.nan
        with pytest.raises(FileFormatError):
            embeddings_to_bytes(x)

    def test_non_finite_rejected_on_read(self):
        data = bytearray(embeddings_to_bytes(np.ones((1, 1))))
        data[20:24] = struct.pack("<f", float("inf"))
        with pytest.raises(FileFormatError):
            embeddings_from_bytes(bytes(data))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            read_embeddings(tmp_path / "absent.wemb")


class TestCheckpoint:
    def _state(self):
        return EncoderState.initialize(4, 6, 4, 0.1, seed=5)

    def _whitening(self):
        rng = np.random.default_rng(1)
        stats = []
        for _ in range(2):
            m = rng.normal(size=(2, 2))
            stats.append(
                WhiteningStats(
                    mean=rng.normal(size=2),
                    cov=(m + m.T) / 2 + 2 * np.eye(2),
                    momentum=0.95,
                    update_count=7,
                )
            )
        return EvalWhitening(group_size=2, momentum=0.95, ridge_epsilon=1e-5, stats=stats)

    def test_roundtrip_bare(self):
        state = self._state()
        back, whit = checkpoint_from_bytes(checkpoint_to_bytes(state))
        assert whit is None
        for name in ("w1", "b1", "w2", "b2"):
            assert np.array_equal(getattr(back, name), getattr(state, name))
        assert back.dropout_rate == state.dropout_rate
        assert back.seed == state.seed

    def test_roundtrip_with_whitening(self, tmp_path):
        state = self._state()
        whit = self._whitening()
        path = tmp_path / "model.wcse"
        save_checkpoint(path, state, whit)
        back_state, back_whit = load_checkpoint(path)
        assert back_whit.group_size == 2
        assert back_whit.ridge_epsilon == 1e-5
        for s1, s2 in zip(whit.stats, back_whit.stats):
            assert np.array_equal(s1.mean, s2.mean)
            assert np.array_equal(s1.cov, s2.cov)
            assert s1.update_count == s2.update_count

    def test_serialization_deterministic(self):
        state = self._state()
        whit = self._whitening()
        assert checkpoint_to_bytes(state, whit) == checkpoint_to_bytes(state, whit)

    def test_magic_bytes(self):
        data = checkpoint_to_bytes(self._state())
        assert data[:4] == b"WCSE"

    def test_bad_magic(self):
        data = bytearray(checkpoint_to_bytes(self._state()))
        data[:4] = b"ZZZZ"
        with pytest.raises(CheckpointError):
            checkpoint_from_bytes(bytes(data))

    def test_version_mismatch_is_explicit(self):
        data = bytearray(checkpoint_to_bytes(self._state()))
        struct.pack_into("<I", data, 4, 99)
        with pytest.raises(CheckpointError, match="incompatible"):
            checkpoint_from_bytes(bytes(data))

    def test_truncation_rejected(self):
        data = checkpoint_to_bytes(self._state())
        with pytest.raises(CheckpointError):
            checkpoint_from_bytes(data[:-8])

    def test_trailing_bytes_rejected(self):
        data = checkpoint_to_bytes(self._state())
        with pytest.raises(CheckpointError):
            checkpoint_from_bytes(data + b"\x00")


class TestReportFormat:
    def test_records_parse_line_by_line(self):
        text = "step=0,train_loss=1.5,alignment=0.2,uniformity=-3.0,spearman=0.1\n" \
               "step=5,train_loss=1.25,alignment=0.25,uniformity=-3.25,spearman=0.5\n" \
               "best_step=5,best_spearman=0.5,final_step=5\n"
        records = parse_report_text(text)
        assert len(records) == 3
        assert records[0]["step"] == "0"
        assert float(records[1]["uniformity"]) == -3.25
        assert records[2]["best_step"] == "5"

    def test_float_formatting_roundtrips(self):
        value = 0.1 + 0.2
        line = format_record([("x", value)])
        assert float(line.split("=", 1)[1]) == value

    def test_non_increasing_steps_rejected(self):
        text = "step=3,train_loss=1.0\nstep=3,train_loss=1.0\n"
        with pytest.raises(ConfigError):
            parse_report_text(text)

    def test_malformed_field_rejected(self):
        with pytest.raises(ConfigError):
            parse_report_text("steppy\n")
