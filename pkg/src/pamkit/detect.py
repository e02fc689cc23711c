"""Candidate sound-event detectors.

Two detectors share one event representation:

* :func:`bled_detect` sums spectrogram power inside a frequency band per
  frame and keeps runs of frames whose energy strictly exceeds a quantile
  of the recording's own energy distribution;
* :func:`window_classifier_detect` classifies every fixed MFCC window with
  a trained model and keeps runs assigned to a target class.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .audio import AudioClip
from .dsp import (
    MfccConfig,
    Spectrogram,
    SpectrogramConfig,
    iter_spectrogram_blocks,
    mfcc_frames,
    quantile_type7,
)
from .errors import BandOutOfRange, ClipTooShort, FeatureConfigMismatch, MalformedCsv

# slack for comparing float durations built from sample counts
_DURATION_EPS = 1e-9

EVENTS_HEADER = ["source", "start_s", "end_s", "label", "probability", "peak_score"]


@dataclass(frozen=True, order=True)
class SoundEvent:
    source: str
    start_s: float
    end_s: float
    label: Optional[str] = field(default=None, compare=False)
    probability: Optional[float] = field(default=None, compare=False)
    peak_score: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"event start {self.start_s} not before end {self.end_s}")
        if self.probability is not None and not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class BledConfig:
    band_hz: tuple = (400.0, 1500.0)
    quantile: float = 0.5
    min_duration_s: float = 6.0
    max_gap_windows: int = 0
    spectrogram: SpectrogramConfig = SpectrogramConfig()

    def __post_init__(self):
        if not self.band_hz[0] < self.band_hz[1]:
            raise ValueError("band_hz must satisfy fmin < fmax")
        if not 0.0 <= self.quantile <= 1.0:
            raise ValueError("quantile must be in [0, 1]")
        if self.min_duration_s <= 0:
            raise ValueError("min_duration_s must be positive")
        if self.max_gap_windows < 0:
            raise ValueError("max_gap_windows must be nonnegative")


@dataclass(frozen=True)
class WindowClassifierConfig:
    target_class: str
    prob_threshold: float = 0.5
    min_duration_s: float = 6.0
    mfcc: MfccConfig = MfccConfig()

    def __post_init__(self):
        if not 0.0 <= self.prob_threshold <= 1.0:
            raise ValueError("prob_threshold must be in [0, 1]")
        if self.min_duration_s <= 0:
            raise ValueError("min_duration_s must be positive")


def _band_mask(freqs: np.ndarray, band_hz, nyquist: float) -> np.ndarray:
    fmin, fmax = band_hz
    if fmin < 0 or fmax > nyquist or fmin >= fmax:
        raise BandOutOfRange(f"band {band_hz} Hz outside [0, {nyquist}] Hz")
    mask = (freqs >= fmin) & (freqs <= fmax)
    if not mask.any():
        raise BandOutOfRange(f"no frequency bin centre inside {band_hz} Hz")
    return mask


def band_energy_series(spec: Spectrogram, band_hz) -> np.ndarray:
    """Per-frame power summed over bins whose centre lies in ``band_hz`` (inclusive)."""
    mask = _band_mask(spec.bin_freqs_hz, band_hz, spec.sample_rate_hz / 2.0)
    return spec.power[:, mask].sum(axis=1)


def find_runs(mask, max_gap: int = 0) -> list:
    """Maximal runs of True, bridging at most ``max_gap`` False entries.

    Returns inclusive ``(first, last)`` index pairs; runs always start and
    end on a True entry.
    """
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > max_gap + 1)
    firsts = np.concatenate([[idx[0]], idx[breaks + 1]])
    lasts = np.concatenate([idx[breaks], [idx[-1]]])
    return [(int(a), int(b)) for a, b in zip(firsts, lasts)]


def _source_of(clip: AudioClip) -> str:
    return clip.source_path or ""


def bled_energy(clip: AudioClip, cfg: BledConfig):
    """Band energy per frame and each frame's first sample index, in bounded memory."""
    series = []
    starts = []
    for block in iter_spectrogram_blocks(clip, cfg.spectrogram):
        series.append(band_energy_series(block, cfg.band_hz))
        starts.append(block.frame_start_samples)
    return np.concatenate(series), np.concatenate(starts)


def bled_detect(clip: AudioClip, cfg: BledConfig = BledConfig()) -> list:
    """Band-limited energy detector.

    The threshold is the ``cfg.quantile`` quantile of the clip's own band
    energy series; a frame is active only if its energy is strictly above it,
    so a constant-energy clip produces no events.
    """
    if len(clip) < cfg.spectrogram.window_samples:
        raise ClipTooShort("clip shorter than one spectrogram frame")
    energy, starts = bled_energy(clip, cfg)
    return bled_events(energy, starts, clip.sample_rate_hz, cfg, _source_of(clip))


def bled_events(energy, starts, rate: int, cfg: BledConfig = BledConfig(), source=None) -> list:
    """Threshold a band energy series whose frames begin at sample indices ``starts``."""
    energy = np.asarray(energy, dtype=np.float64)
    if energy.size == 0:
        raise ClipTooShort("no spectrogram frames")
    threshold = quantile_type7(energy, cfg.quantile)
    events = []
    for first, last in find_runs(energy > threshold, cfg.max_gap_windows):
        start = int(starts[first]) / rate
        end = (int(starts[last]) + cfg.spectrogram.window_samples) / rate
        if end - start + _DURATION_EPS < cfg.min_duration_s:
            continue
        events.append(SoundEvent(
            source, start, end,
            peak_score=float(energy[first:last + 1].max()),
        ))
    return events


_FRAME_KEYS = ("n_filters", "n_cep", "fmin_hz", "fmax_hz", "win_s", "window_kind")


def check_frame_config(model, mfcc: MfccConfig) -> None:
    fp = model.feature_config
    if fp.get("mode") != "frames":
        raise FeatureConfigMismatch(
            f"window detector needs a per-window model, got mode {fp.get('mode')!r}"
        )
    want = mfcc.fingerprint("frames")
    diff = [k for k in _FRAME_KEYS if fp.get(k) != want[k]]
    if diff:
        raise FeatureConfigMismatch(f"model/detector MFCC settings differ in {diff}")


def window_classifier_detect(clip: AudioClip, model, cfg: WindowClassifierConfig) -> list:
    """Sliding-window detector driven by a classifier trained on MFCC windows."""
    check_frame_config(model, cfg.mfcc)
    if cfg.target_class not in model.classes:
        raise FeatureConfigMismatch(f"model has no class {cfg.target_class!r}")
    coeffs, times = mfcc_frames(clip, cfg.mfcc)
    labels, probs = model.predict(coeffs)
    target = model.classes.index(cfg.target_class)
    active = (labels == target) & (probs >= cfg.prob_threshold)
    rate = clip.sample_rate_hz
    win = int(round(cfg.mfcc.win_s * rate))
    events = []
    for first, last in find_runs(active):
        start = float(times[first])
        end = (int(round(times[last] * rate)) + win) / rate
        if end - start + _DURATION_EPS < cfg.min_duration_s:
            continue
        run = probs[first:last + 1]
        events.append(SoundEvent(
            _source_of(clip), start, end, label=cfg.target_class,
            probability=float(np.clip(run.mean(), 0.0, 1.0)),
            peak_score=float(run.max()),
        ))
    return events


def merge_events(events) -> list:
    """Union overlapping or touching events of the same source.

    Used to stitch detections from overlapping analysis segments; the merged
    event keeps the larger peak score and drops label/probability.
    """
    out = []
    for ev in sorted(events):
        prev = out[-1] if out else None
        if prev is not None and prev.source == ev.source and ev.start_s <= prev.end_s + _DURATION_EPS:
            peaks = [p for p in (prev.peak_score, ev.peak_score) if p is not None]
            out[-1] = replace(
                prev, end_s=max(prev.end_s, ev.end_s), label=None, probability=None,
                peak_score=max(peaks) if peaks else None,
            )
        else:
            out.append(ev)
    return out


# ---------------------------------------------------------------------------
# events CSV


def _fmt_optional(value, spec):
    return "" if value is None else format(value, spec)


def write_events_csv(events, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(EVENTS_HEADER)
    for ev in events:
        writer.writerow([
            ev.source, f"{ev.start_s:.3f}", f"{ev.end_s:.3f}", ev.label or "",
            _fmt_optional(ev.probability, ".6f"), _fmt_optional(ev.peak_score, ".6g"),
        ])


def read_events_csv(path) -> list:
    events = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"source", "start_s", "end_s"} - set(reader.fieldnames or [])
        if missing:
            raise MalformedCsv(path, 1, f"missing columns {sorted(missing)}")
        for row in reader:
            try:
                events.append(SoundEvent(
                    row["source"], float(row["start_s"]), float(row["end_s"]),
                    label=row.get("label") or None,
                    probability=float(row["probability"]) if row.get("probability") else None,
                    peak_score=float(row["peak_score"]) if row.get("peak_score") else None,
                ))
            except (TypeError, ValueError) as exc:
                raise MalformedCsv(path, reader.line_num, str(exc)) from exc
    return events
