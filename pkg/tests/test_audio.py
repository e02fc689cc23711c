import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pamkit import audio
from pamkit.audio import AudioClip, decode_wav, encode_wav, quantize, slice_clip
from pamkit.detect import SoundEvent
from pamkit.errors import (
    MultichannelRejected,
    NotRiff,
    OutOfRange,
    TruncatedData,
    UnsupportedEncoding,
)


def raw_wav(path, words, rate=16000, channels=1, bits=16, fmt_tag=1, extra_chunk=False):
    """Hand-rolled RIFF writer independent of :func:`encode_wav`."""
    if bits == 16:
        payload = np.asarray(words, dtype="<i2").tobytes()
    else:
        payload = bytes(np.asarray(words, dtype=np.uint8))
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if extra_chunk:
        body += b"LIST" + struct.pack("<I", 5) + b"hello" + b"\x00"
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


def test_zero_file_decodes_to_zeros(tmp_path):
    clip = decode_wav(raw_wav(tmp_path / "z.wav", np.zeros(16000)))
    assert len(clip) == 16000 and clip.sample_rate_hz == 16000
    assert np.all(clip.samples == 0.0)
    assert clip.duration_s == 1.0


def test_full_scale_positive_sample(tmp_path):
    clip = decode_wav(raw_wav(tmp_path / "one.wav", [32767]))
    assert clip.samples[0] == 32767 / 32768


def test_eight_bit_rejected(tmp_path):
    with pytest.raises(UnsupportedEncoding):
        decode_wav(raw_wav(tmp_path / "u8.wav", [128] * 10, bits=8))


def test_float_format_rejected(tmp_path):
    with pytest.raises(UnsupportedEncoding):
        decode_wav(raw_wav(tmp_path / "f.wav", [0] * 10, fmt_tag=3))


def test_not_riff(tmp_path):
    p = tmp_path / "junk.wav"
    p.write_bytes(b"hello world, certainly not audio" * 4)
    with pytest.raises(NotRiff):
        decode_wav(p)


def test_truncated_data(tmp_path):
    p = raw_wav(tmp_path / "t.wav", np.arange(100))
    p.write_bytes(p.read_bytes()[:-50])
    with pytest.raises(TruncatedData):
        decode_wav(p)


def test_extra_chunks_tolerated(tmp_path):
    words = np.array([1, -2, 3, -4], dtype=np.int16)
    clip = decode_wav(raw_wav(tmp_path / "x.wav", words, extra_chunk=True))
    assert np.array_equal(clip.samples * 32768, words)


def test_stereo_policy(tmp_path):
    inter = np.array([[100, -100], [200, -200], [300, -300]]).ravel()
    p = raw_wav(tmp_path / "s.wav", inter, channels=2)
    with pytest.raises(MultichannelRejected):
        decode_wav(p)
    clip = decode_wav(p, audio.FIRST_CHANNEL)
    assert np.array_equal(clip.samples * 32768, [100, 200, 300])


def test_partial_decode_matches_slice(tmp_path):
    rng = np.random.default_rng(1)
    words = rng.integers(-30000, 30000, 16000 * 3)
    p = raw_wav(tmp_path / "p.wav", words)
    whole = decode_wav(p)
    part = decode_wav(p, start_s=0.5, end_s=1.75)
    ref = slice_clip(whole, 0.5, 1.75)
    assert part.offset_s == 0.5 and np.array_equal(part.samples, ref.samples)


def test_slice_examples():
    c = AudioClip(np.arange(160000) / 160000.0, 16000)
    assert np.array_equal(slice_clip(c, 0, c.duration_s).samples, c.samples)
    s = slice_clip(c, 2.0, 3.0)
    assert len(s) == 16000 and s.samples[0] == c.samples[32000] and s.offset_s == 2.0
    with pytest.raises(OutOfRange):
        slice_clip(c, 5.0, 4.0)
    with pytest.raises(OutOfRange):
        slice_clip(c, 0.0, 11.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 400), st.integers(1, 400), st.integers(0, 200), st.integers(1, 200))
def test_slice_composes(a, la, x, lx):
    rate = 100
    c = AudioClip(np.linspace(-1, 1, 1000), rate, offset_s=0.25)
    b = a + la
    if b > 1000 or x + lx > la:
        return
    inner = slice_clip(slice_clip(c, a / rate, b / rate), x / rate, (x + lx) / rate)
    direct = slice_clip(c, (a + x) / rate, (a + x + lx) / rate)
    assert np.array_equal(inner.samples, direct.samples)
    assert abs(inner.offset_s - direct.offset_s) < 1e-12


def test_encode_clamps_and_rounds(tmp_path):
    c = AudioClip(np.array([1.0, -1.0, 0.5, -0.5, 0.5 / 32768, -0.5 / 32768]), 8000)
    encode_wav(c, tmp_path / "q.wav")
    words = np.frombuffer((tmp_path / "q.wav").read_bytes()[44:], dtype="<i2")
    assert words.tolist() == [32767, -32768, 16384, -16384, 1, -1]
    const = quantize(np.full(10, 0.5))
    assert np.all(const == 16384)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-32768, 32767), min_size=1, max_size=300))
def test_decode_encode_decode_identity(tmp_path_factory, words):
    d = tmp_path_factory.mktemp("rt")
    first = decode_wav(raw_wav(d / "a.wav", words))
    encode_wav(first, d / "b.wav")
    second = decode_wav(d / "b.wav")
    assert np.array_equal(first.samples, second.samples)
    assert (d / "a.wav").read_bytes()[44:] == (d / "b.wav").read_bytes()[44:]


def test_clip_is_immutable():
    c = AudioClip(np.zeros(10), 100)
    with pytest.raises(ValueError):
        c.samples[0] = 1.0


def test_event_clips_written(tmp_path):
    rng = np.random.default_rng(0)
    p = raw_wav(tmp_path / "rec.wav", rng.integers(-1000, 1000, 16000 * 4))
    evs = [SoundEvent(str(p), 1.0, 2.5, "call"), SoundEvent(str(p), 3.0, 3.25)]
    paths = audio.write_event_clips(evs, tmp_path / "clips")
    assert [q.name for q in paths] == ["rec_1.000_2.500_call.wav", "rec_3.000_3.250_unlabeled.wav"]
    whole = decode_wav(p)
    got = decode_wav(paths[0])
    assert np.array_equal(got.samples, whole.samples[16000:40000])
