import numpy as np
import pytest

from advvc.checkpoint import load_checkpoint, save_checkpoint
from advvc.errors import FingerprintMismatchError, IntegrityError, MissingCheckpointError


def test_round_trip_is_byte_identical(tiny_finetuned, tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(tiny_finetuned, a)
    loaded = load_checkpoint(a)
    save_checkpoint(loaded, b)
    assert a.read_bytes() == b.read_bytes()
    assert loaded.fingerprint == tiny_finetuned.fingerprint
    assert loaded.stage_speakers == tiny_finetuned.stage_speakers
    for k, v in tiny_finetuned.arrays.items():
        assert loaded.arrays[k].dtype == v.dtype
        np.testing.assert_array_equal(loaded.arrays[k], v)
    np.testing.assert_array_equal(loaded.stats.mean, tiny_finetuned.stats.mean)


def test_loaded_model_matches_state(tiny_finetuned):
    model = tiny_finetuned.build_model()
    for k, v in model.state_dict().items():
        np.testing.assert_array_equal(v.numpy(), tiny_finetuned.arrays[k])
    assert len(model.discriminators) == 2


@pytest.mark.parametrize("cut", [1, 40, 1000])
def test_truncation_detected(tiny_finetuned, tmp_path, cut):
    path = tmp_path / "m.ckpt"
    save_checkpoint(tiny_finetuned, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-cut])
    with pytest.raises(IntegrityError):
        load_checkpoint(path)


def test_bit_flip_detected(tiny_finetuned, tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(tiny_finetuned, path)
    raw = bytearray(path.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(IntegrityError, match="hash"):
        load_checkpoint(path)


def test_fingerprint_mismatch_names_both(tiny_finetuned, tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(tiny_finetuned, path)
    with pytest.raises(FingerprintMismatchError) as info:
        load_checkpoint(path, expected_fingerprint="deadbeef")
    msg = str(info.value)
    assert "deadbeef" in msg and tiny_finetuned.fingerprint in msg
    assert info.value.exit_code == 6


def test_missing_file(tmp_path):
    with pytest.raises(MissingCheckpointError):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_not_a_checkpoint(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"hello world" * 20)
    with pytest.raises(IntegrityError):
        load_checkpoint(path)


def test_row_of_unknown_speaker(tiny_finetuned):
    assert tiny_finetuned.row_of(tiny_finetuned.stage_speakers[1]) == tiny_finetuned.stage_rows[1]
    with pytest.raises(KeyError):
        tiny_finetuned.row_of("nobody")
