"""Signal-processing primitives.

Everything here is a pure function of its inputs.  The FFT is a batched
radix-2 decimation-in-time transform operating on the last axis; the
spectrogram and MFCC code call it on blocks of frames at once.

Conventions worth knowing:

* spectrogram power is ``|X[k]|**2`` of the windowed, zero-padded frame
  with no scaling, for bins ``0 .. dft_size/2``.  Parseval then reads
  ``(P[0] + 2*sum(P[1:-1]) + P[-1]) / dft_size == sum((w*x)**2)``
  (see :func:`frame_energy`).
* MFCCs: power spectrum -> triangular mel filterbank -> natural log floored
  at ``LOG_FLOOR`` -> orthonormal DCT-II -> first ``n_cep`` coefficients.
  No pre-emphasis, no liftering.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .audio import AudioClip
from .errors import BandTooNarrow, ClipTooShort, EmptyClip, EmptyInput, NonPowerOfTwoLength

LOG_FLOOR = 1e-10
WINDOW_KINDS = ("hamming", "hanning", "rectangular")

# frames per FFT block; bounds memory at roughly block * dft_size * 16 bytes
_BLOCK_FRAMES = 2048


def window_function(kind: str, n: int) -> np.ndarray:
    """Symmetric window coefficients of length ``n`` (``n >= 2``)."""
    if n < 2:
        raise ValueError("window length must be at least 2")
    i = np.arange(n)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * i / (n - 1))
    if kind == "hanning":
        return 0.5 - 0.5 * np.cos(2 * np.pi * i / (n - 1))
    if kind == "rectangular":
        return np.ones(n)
    raise ValueError(f"unknown window kind {kind!r}")


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n) - 1).bit_length()


@lru_cache(maxsize=None)
def _base_dft(m: int) -> np.ndarray:
    k = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(k, k) / m)


@lru_cache(maxsize=None)
def _twiddles(m: int) -> np.ndarray:
    return np.exp(-1j * np.pi * np.arange(m) / m)[:, None]


def _fft_last_axis(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    batch = x.shape[:-1]
    # direct DFT on length-16 leaves, then log2(n/16) butterfly stages
    base = min(n, 16)
    X = np.matmul(_base_dft(base), x.reshape(*batch, base, n // base))
    while X.shape[-2] < n:
        half = X.shape[-1] // 2
        even = X[..., :half]
        odd = _twiddles(X.shape[-2]) * X[..., half:]
        X = np.concatenate([even + odd, even - odd], axis=-2)
    return X.reshape(*batch, n)


def fft(signal, inverse: bool = False) -> np.ndarray:
    """Discrete Fourier transform along the last axis.

    Forward: ``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)``.  The inverse is scaled
    by ``1/N``.  ``N`` must be a power of two.
    """
    x = np.asarray(signal, dtype=np.complex128)
    n = x.shape[-1] if x.ndim else 0
    if not is_power_of_two(n):
        raise NonPowerOfTwoLength(f"FFT length {n} is not a power of two")
    if inverse:
        return np.conj(_fft_last_axis(np.conj(x))) / n
    return _fft_last_axis(x)


def rfft(frames, dft_size: int) -> np.ndarray:
    """One-sided spectrum (bins ``0..dft_size/2``) of real frames.

    Frames shorter than ``dft_size`` are zero-padded.  Two real samples are
    packed per complex value so the core transform runs at half length.
    """
    x = np.asarray(frames, dtype=np.float64)
    if not is_power_of_two(dft_size) or dft_size < 2:
        raise NonPowerOfTwoLength(f"DFT size {dft_size} is not a power of two >= 2")
    if x.shape[-1] > dft_size:
        raise ValueError("frame longer than dft_size")
    if x.shape[-1] < dft_size:
        pad = [(0, 0)] * (x.ndim - 1) + [(0, dft_size - x.shape[-1])]
        x = np.pad(x, pad)
    half = dft_size // 2
    Z = _fft_last_axis(x[..., 0::2] + 1j * x[..., 1::2])
    k = np.arange(half + 1)
    zk = Z[..., k % half]
    zc = np.conj(Z[..., (half - k) % half])
    even = 0.5 * (zk + zc)
    odd = -0.5j * (zk - zc)
    return even + np.exp(-2j * np.pi * k / dft_size) * odd


# ---------------------------------------------------------------------------
# spectrogram


@dataclass(frozen=True)
class SpectrogramConfig:
    window_samples: int = 1600
    overlap_fraction: float = 0.0
    dft_size: int = 2048
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.window_samples < 2:
            raise ValueError("window_samples must be >= 2")
        if not 0 <= self.overlap_fraction < 1:
            raise ValueError("overlap_fraction must be in [0, 1)")
        if not is_power_of_two(self.dft_size) or self.dft_size < self.window_samples:
            raise ValueError("dft_size must be a power of two >= window_samples")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}")

    @property
    def hop_samples(self) -> int:
        return max(1, int(round(self.window_samples * (1.0 - self.overlap_fraction))))


@dataclass(frozen=True, eq=False)
class Spectrogram:
    power: np.ndarray  # [n_frames, n_bins]
    frame_duration_s: float
    hop_s: float
    bin_hz: float
    start_offset_s: float
    sample_rate_hz: int
    dft_size: int
    start_sample: int = 0  # index of frame 0's first sample within the source

    @property
    def n_frames(self) -> int:
        return self.power.shape[0]

    @property
    def n_bins(self) -> int:
        return self.power.shape[1]

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_s * self.sample_rate_hz))

    @property
    def frame_start_samples(self) -> np.ndarray:
        return self.start_sample + self.hop_samples * np.arange(self.n_frames)

    @property
    def frame_starts_s(self) -> np.ndarray:
        """Absolute start time of each frame within the source recording."""
        return self.frame_start_samples / self.sample_rate_hz

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        return self.bin_hz * np.arange(self.n_bins)

    @property
    def end_s(self) -> float:
        return self.start_offset_s + self.hop_s * (self.n_frames - 1) + self.frame_duration_s


def n_frames_for(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 0
    return 1 + (n_samples - window) // hop


def _frame_view(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(samples, window)[::hop]


def iter_spectrogram_blocks(
    clip: AudioClip, cfg: SpectrogramConfig, block_frames: int = _BLOCK_FRAMES
) -> Iterator[Spectrogram]:
    """Yield consecutive spectrogram pieces of at most ``block_frames`` frames.

    Concatenating the ``power`` of all pieces gives :func:`spectrogram`'s
    result; detectors that only need a per-frame reduction use this to stay
    within bounded memory on two-hour recordings.
    """
    if len(clip) < cfg.window_samples:
        raise ClipTooShort(
            f"clip has {len(clip)} samples, spectrogram window needs {cfg.window_samples}"
        )
    hop = cfg.hop_samples
    rate = clip.sample_rate_hz
    win = window_function(cfg.window_kind, cfg.window_samples)
    frames = _frame_view(clip.samples, cfg.window_samples, hop)
    origin = int(round(clip.offset_s * rate))
    for first in range(0, frames.shape[0], block_frames):
        block = frames[first:first + block_frames] * win
        spectrum = rfft(block, cfg.dft_size)
        power = spectrum.real ** 2 + spectrum.imag ** 2
        yield Spectrogram(
            power=power,
            frame_duration_s=cfg.window_samples / rate,
            hop_s=hop / rate,
            bin_hz=rate / cfg.dft_size,
            start_offset_s=(origin + first * hop) / rate,
            sample_rate_hz=rate,
            dft_size=cfg.dft_size,
            start_sample=origin + first * hop,
        )


def spectrogram(clip: AudioClip, cfg: SpectrogramConfig = SpectrogramConfig()) -> Spectrogram:
    """Power spectrogram with trailing partial frames dropped."""
    blocks = list(iter_spectrogram_blocks(clip, cfg))
    head = blocks[0]
    power = np.concatenate([b.power for b in blocks], axis=0)
    return Spectrogram(
        power, head.frame_duration_s, head.hop_s, head.bin_hz,
        head.start_offset_s, head.sample_rate_hz, head.dft_size, head.start_sample,
    )


def frame_energy(power_row: np.ndarray, dft_size: int) -> np.ndarray:
    """Time-domain energy of a windowed frame recovered from its one-sided power."""
    p = np.asarray(power_row)
    interior = p[..., 1:-1].sum(axis=-1)
    return (p[..., 0] + 2.0 * interior + p[..., -1]) / dft_size


# ---------------------------------------------------------------------------
# mel / cepstrum


def mel_scale(f_hz):
    f = np.asarray(f_hz, dtype=np.float64)
    if np.any(f < 0):
        raise ValueError("frequency must be nonnegative")
    out = 2595.0 * np.log10(1.0 + f / 700.0)
    return float(out) if out.ndim == 0 else out


def inv_mel_scale(mel):
    m = np.asarray(mel, dtype=np.float64)
    out = 700.0 * (10.0 ** (m / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


def mel_points_hz(n_filters: int, fmin_hz: float, fmax_hz: float) -> np.ndarray:
    """The ``n_filters + 2`` edge/peak frequencies, equally spaced in mel."""
    mels = np.linspace(mel_scale(fmin_hz), mel_scale(fmax_hz), n_filters + 2)
    return inv_mel_scale(mels)


@lru_cache(maxsize=64)
def _filterbank_cached(n_filters, fmin_hz, fmax_hz, dft_size, sample_rate):
    nyquist = sample_rate / 2.0
    if not 0 <= fmin_hz < fmax_hz <= nyquist:
        raise ValueError(f"band [{fmin_hz}, {fmax_hz}] Hz invalid for Nyquist {nyquist} Hz")
    freqs = np.arange(dft_size // 2 + 1) * sample_rate / dft_size
    in_band = np.count_nonzero((freqs >= fmin_hz) & (freqs <= fmax_hz))
    if in_band < n_filters + 2:
        raise BandTooNarrow(
            f"{in_band} DFT bins in [{fmin_hz}, {fmax_hz}] Hz, need {n_filters + 2}"
        )
    pts = mel_points_hz(n_filters, fmin_hz, fmax_hz)
    lo, peak, hi = pts[:-2, None], pts[1:-1, None], pts[2:, None]
    rising = (freqs - lo) / (peak - lo)
    falling = (hi - freqs) / (hi - peak)
    fb = np.clip(np.minimum(rising, falling), 0.0, None)
    fb.flags.writeable = False
    return fb


def mel_filterbank(n_filters: int, fmin_hz: float, fmax_hz: float, dft_size: int,
                   sample_rate: int) -> np.ndarray:
    """Triangular filters, ``[n_filters, dft_size/2 + 1]``.

    Filter ``m`` rises linearly from mel point ``m`` to its peak at point
    ``m + 1`` and falls to zero at point ``m + 2``.
    """
    return _filterbank_cached(int(n_filters), float(fmin_hz), float(fmax_hz),
                              int(dft_size), int(sample_rate))


@lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix; ``dct_matrix(n) @ v`` transforms ``v``."""
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * i + 1) / (2 * n))
    mat[0] /= np.sqrt(2.0)
    mat.flags.writeable = False
    return mat


@dataclass(frozen=True)
class MfccConfig:
    n_filters: int = 26
    n_cep: int = 12
    fmin_hz: float = 400.0
    fmax_hz: float = 1500.0
    win_s: float = 0.25
    include_deltas: bool = True
    n_fixed_windows: int = 9
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.n_filters < 1 or self.n_cep < 1 or self.n_fixed_windows < 1:
            raise ValueError("n_filters, n_cep and n_fixed_windows must be positive")
        if self.n_cep > self.n_filters:
            raise ValueError("n_cep must not exceed n_filters")
        if not 0 <= self.fmin_hz < self.fmax_hz:
            raise ValueError("need 0 <= fmin_hz < fmax_hz")
        if self.win_s <= 0:
            raise ValueError("win_s must be positive")
        if self.window_kind not in WINDOW_KINDS:
            raise ValueError(f"window_kind must be one of {WINDOW_KINDS}")

    def fixed_length(self) -> int:
        """Length of the vector produced by :func:`mfcc_fixed`."""
        n, c = self.n_fixed_windows, self.n_cep
        return n * c + ((n - 1) * c if self.include_deltas else 0) + 1

    def fingerprint(self, mode: str) -> dict:
        d = asdict(self)
        d["mode"] = mode
        return d

    @classmethod
    def from_fingerprint(cls, fp: dict) -> "MfccConfig":
        return cls(**{k: v for k, v in fp.items() if k != "mode"})


@dataclass(eq=False)
class FeatureVector:
    values: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def __len__(self):
        return self.values.shape[0]


def _cepstra(frames: np.ndarray, cfg: MfccConfig, rate: int) -> np.ndarray:
    """MFCCs of each row of ``frames`` (rows are raw, unwindowed samples)."""
    length = frames.shape[-1]
    if length < 2:
        raise ClipTooShort("MFCC window shorter than two samples")
    dft_size = max(2, next_power_of_two(length))
    fb = mel_filterbank(cfg.n_filters, cfg.fmin_hz, cfg.fmax_hz, dft_size, rate)
    dct = dct_matrix(cfg.n_filters)[: cfg.n_cep]
    win = window_function(cfg.window_kind, length)
    out = []
    for first in range(0, frames.shape[0], _BLOCK_FRAMES):
        spec = rfft(frames[first:first + _BLOCK_FRAMES] * win, dft_size)
        power = spec.real ** 2 + spec.imag ** 2
        energies = power @ fb.T
        out.append(np.log(np.maximum(energies, LOG_FLOOR)) @ dct.T)
    return np.concatenate(out, axis=0)


def mfcc_frames(clip: AudioClip, cfg: MfccConfig = MfccConfig()):
    """Per-window MFCCs over non-overlapping windows of ``cfg.win_s``.

    Returns ``(coefficients [n_frames, n_cep], frame start times in seconds)``;
    times are absolute within the source recording.
    """
    win = int(round(cfg.win_s * clip.sample_rate_hz))
    if win < 2 or len(clip) < win:
        raise ClipTooShort(f"clip of {clip.duration_s:.3f} s shorter than {cfg.win_s} s window")
    frames = _frame_view(clip.samples, win, win)
    coeffs = _cepstra(frames, cfg, clip.sample_rate_hz)
    origin = int(round(clip.offset_s * clip.sample_rate_hz))
    times = (origin + np.arange(frames.shape[0]) * win) / clip.sample_rate_hz
    return coeffs, times


def mfcc_fixed(clip: AudioClip, cfg: MfccConfig = MfccConfig(), label=None) -> FeatureVector:
    """Fixed-length descriptor of a whole sound event.

    The clip is cut into ``n_fixed_windows`` equal windows of
    ``len(clip) // n_fixed_windows`` samples.  The vector holds the static
    coefficients window by window, then (optionally) the first differences
    between consecutive windows, and finally the clip duration in seconds.
    """
    if len(clip) == 0:
        raise EmptyClip("cannot featurize an empty clip")
    n = cfg.n_fixed_windows
    length = len(clip) // n
    if length < 2:
        raise ClipTooShort(f"{len(clip)} samples cannot fill {n} windows")
    frames = clip.samples[: n * length].reshape(n, length)
    static = _cepstra(frames, cfg, clip.sample_rate_hz)
    parts = [static.ravel()]
    if cfg.include_deltas:
        parts.append(np.diff(static, axis=0).ravel())
    parts.append([clip.duration_s])
    return FeatureVector(np.concatenate(parts), label)


# ---------------------------------------------------------------------------


def quantile_type7(values, q: float) -> float:
    """Linear-interpolation sample quantile (R's default estimator)."""
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if x.size == 0:
        raise EmptyInput("quantile of an empty vector")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be in [0, 1]")
    h = (x.size - 1) * q
    lo, hi = math.floor(h), math.ceil(h)
    return float(x[lo] + (h - lo) * (x[hi] - x[lo]))
