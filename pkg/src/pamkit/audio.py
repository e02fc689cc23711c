"""RIFF/WAVE PCM-16 decoding and encoding, clip slicing and event clip export.

Only 16-bit integer PCM is accepted.  Samples are scaled by 1/32768 on
decode; on encode they are multiplied by 32768, rounded half away from zero
and clamped to the int16 range, so ``decode(encode(decode(f)))`` reproduces
the payload of ``f`` exactly.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    IoFailure,
    MultichannelRejected,
    NotRiff,
    OutOfRange,
    TruncatedData,
    UnsupportedEncoding,
)

PCM_SCALE = 32768.0
WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# KSDATAFORMAT_SUBTYPE_PCM, the sub-format GUID of WAVE_FORMAT_EXTENSIBLE PCM
_PCM_SUBFORMAT = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"

FIRST_CHANNEL = "first_channel"
REJECT_MULTICHANNEL = "reject_multichannel"


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono PCM samples in [-1, 1] at a fixed sample rate.

    ``offset_s`` is the position of sample 0 inside ``source_path``.
    """

    samples: np.ndarray
    sample_rate_hz: int
    source_path: Optional[str] = None
    offset_s: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if arr is self.samples:
            arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))
        if self.offset_s < 0:
            raise ValueError("offset_s must be nonnegative")

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0


@dataclass(frozen=True)
class WavInfo:
    path: str
    sample_rate_hz: int
    channels: int
    n_frames: int
    data_offset: int
    block_align: int = field(repr=False)

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz


def _read_chunks_header(fh, path):
    head = fh.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise NotRiff(f"{path}: not a RIFF/WAVE file")
    fmt = None
    while True:
        ch = fh.read(8)
        if len(ch) == 0:
            break
        if len(ch) < 8:
            raise TruncatedData(f"{path}: truncated chunk header")
        cid, size = ch[:4], struct.unpack("<I", ch[4:])[0]
        if cid == b"fmt ":
            body = fh.read(size)
            if len(body) < 16:
                raise TruncatedData(f"{path}: truncated fmt chunk")
            fmt = body
            if size % 2:
                fh.read(1)
        elif cid == b"data":
            if fmt is None:
                raise UnsupportedEncoding(f"{path}: data chunk before fmt chunk")
            return fmt, fh.tell(), size
        else:
            fh.seek(size + (size % 2), os.SEEK_CUR)
    raise TruncatedData(f"{path}: no data chunk")


def wav_info(path) -> WavInfo:
    """Parse the header of a PCM-16 WAV file without reading the payload."""
    path = str(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    with fh:
        fmt, data_offset, data_size = _read_chunks_header(fh, path)
        file_size = os.fstat(fh.fileno()).st_size
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == WAVE_FORMAT_EXTENSIBLE and len(fmt) >= 40 and fmt[24:40] == _PCM_SUBFORMAT:
        tag = WAVE_FORMAT_PCM
    if tag != WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"{path}: format tag {tag:#06x} is not integer PCM")
    if bits != 16:
        raise UnsupportedEncoding(f"{path}: {bits}-bit samples, only 16-bit PCM supported")
    if channels < 1 or block_align != 2 * channels or rate <= 0:
        raise UnsupportedEncoding(f"{path}: inconsistent fmt chunk")
    available = file_size - data_offset
    if data_size > available or data_size % block_align:
        raise TruncatedData(
            f"{path}: data chunk declares {data_size} bytes, {available} present"
        )
    return WavInfo(path, rate, channels, data_size // block_align, data_offset, block_align)


def decode_wav(
    path,
    channel_policy: str = REJECT_MULTICHANNEL,
    start_s: Optional[float] = None,
    end_s: Optional[float] = None,
) -> AudioClip:
    """Decode a PCM-16 WAV file (or the ``[start_s, end_s)`` part of it).

    Partial reads seek straight to the requested frames, so long recordings
    can be processed in bounded segments.
    """
    info = wav_info(path)
    if info.channels > 1 and channel_policy != FIRST_CHANNEL:
        if channel_policy != REJECT_MULTICHANNEL:
            raise ValueError(f"unknown channel policy {channel_policy!r}")
        raise MultichannelRejected(f"{path}: {info.channels} channels")
    first = 0 if start_s is None else int(round(start_s * info.sample_rate_hz))
    last = info.n_frames if end_s is None else int(round(end_s * info.sample_rate_hz))
    last = min(last, info.n_frames)
    if first < 0 or first >= last:
        raise OutOfRange(f"{path}: cannot read [{start_s}, {end_s}) of {info.duration_s} s")
    with open(info.path, "rb") as fh:
        fh.seek(info.data_offset + first * info.block_align)
        raw = fh.read((last - first) * info.block_align)
    if len(raw) != (last - first) * info.block_align:
        raise TruncatedData(f"{path}: short read")
    frames = np.frombuffer(raw, dtype="<i2").reshape(-1, info.channels)
    samples = frames[:, 0].astype(np.float64) / PCM_SCALE
    return AudioClip(samples, info.sample_rate_hz, info.path, first / info.sample_rate_hz)


def quantize(samples) -> np.ndarray:
    """Map [-1, 1] floats to int16 words, rounding half away from zero."""
    scaled = np.asarray(samples, dtype=np.float64) * PCM_SCALE
    words = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(words, -32768, 32767).astype("<i2")


def encode_wav(clip: AudioClip, path) -> None:
    payload = quantize(clip.samples).tobytes()
    rate = clip.sample_rate_hz
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, WAVE_FORMAT_PCM, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def slice_clip(clip: AudioClip, start_s: float, end_s: float) -> AudioClip:
    """Return the samples of ``clip`` between two times relative to its start."""
    eps = 0.5 / clip.sample_rate_hz
    if not (0 <= start_s < end_s <= clip.duration_s + eps):
        raise OutOfRange(f"slice [{start_s}, {end_s}] outside [0, {clip.duration_s}]")
    first = int(round(start_s * clip.sample_rate_hz))
    count = int(round((end_s - start_s) * clip.sample_rate_hz))
    if count <= 0 or first + count > len(clip):
        raise OutOfRange(f"slice [{start_s}, {end_s}] selects no whole samples")
    return AudioClip(
        clip.samples[first:first + count],
        clip.sample_rate_hz,
        clip.source_path,
        clip.offset_s + start_s,
    )


def event_clip_filename(source, start_s: float, end_s: float, label: Optional[str]) -> str:
    stem = Path(str(source)).stem
    return f"{stem}_{start_s:.3f}_{end_s:.3f}_{label or 'unlabeled'}.wav"


def write_event_clips(events, out_dir, channel_policy: str = REJECT_MULTICHANNEL) -> list:
    """Cut each event out of its source recording into ``out_dir``.

    Returns the written paths in event order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for ev in events:
        clip = decode_wav(ev.source, channel_policy, ev.start_s, ev.end_s)
        target = out_dir / event_clip_filename(ev.source, ev.start_s, ev.end_s, ev.label)
        encode_wav(clip, target)
        written.append(target)
    return written
