"""End-to-end detect -> featurize -> classify -> filter over long recordings.

Recordings are read in bounded segments.  Consecutive segments overlap by
at least ``min_duration_s`` (rounded up to whole detector frames) and start
on the detector's frame grid.  The energy detector keeps only the per-frame
band energies of each segment (8 bytes per frame) and thresholds the whole
recording's series at once, so its output does not depend on segmenting.
For the window detector an event crossing a boundary is seen either whole
by one segment or in two overlapping pieces that are merged back together.
Classification always runs on the merged event, decoded straight from the
source file.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import audio
from .detect import (
    BledConfig,
    WindowClassifierConfig,
    bled_energy,
    bled_events,
    merge_events,
    window_classifier_detect,
    write_events_csv,
)
from .dsp import MfccConfig, mfcc_fixed
from .errors import ClipTooShort, PamkitError
from .learn import LabeledDataset, write_feature_table

log = logging.getLogger(__name__)

WORKERS_ENV = "PAMKIT_WORKERS"
ENERGY = "energy"
WINDOW = "window"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class PipelineConfig:
    detector: str = ENERGY
    classifier: object = None  # TrainedModel on fixed-length event vectors
    detector_model: object = None  # TrainedModel on MFCC windows (window detector)
    target_class: Optional[str] = None
    bled: BledConfig = BledConfig()
    window: Optional[WindowClassifierConfig] = None
    prob_threshold: float = 0.0
    output_dir: Optional[Path] = None
    emit_clips: bool = False
    emit_feature_table: bool = False
    segment_s: float = 7200.0
    workers: int = field(default_factory=default_workers)
    channel_policy: str = audio.REJECT_MULTICHANNEL

    def __post_init__(self):
        if self.detector not in (ENERGY, WINDOW):
            raise ValueError(f"detector must be {ENERGY!r} or {WINDOW!r}")
        if self.detector == WINDOW and (self.detector_model is None or self.window is None):
            raise ValueError("window detector needs detector_model and window config")
        if self.classifier is not None and self.target_class is None:
            raise ValueError("classification needs a target_class")
        if self.segment_s <= 0:
            raise ValueError("segment_s must be positive")


@dataclass
class PipelineResult:
    events: list
    features: list  # (FeatureVector values, label) for kept events
    failures: list  # (path, message)
    n_candidates: int = 0


def _frame_geometry(cfg: PipelineConfig, rate: int):
    if cfg.detector == ENERGY:
        spec = cfg.bled.spectrogram
        return spec.hop_samples, spec.window_samples, cfg.bled.min_duration_s
    win = int(round(cfg.window.mfcc.win_s * rate))
    return win, win, cfg.window.min_duration_s


def segment_bounds(n_samples: int, rate: int, cfg: PipelineConfig) -> list:
    """``[(first, last)]`` sample ranges of the analysis segments of one file."""
    hop, window, min_dur = _frame_geometry(cfg, rate)
    seg = max(hop, int(cfg.segment_s * rate) // hop * hop)
    overlap = math.ceil(min_dur * rate / hop) * hop
    if seg <= overlap:
        raise ValueError(
            f"segment_s={cfg.segment_s} must exceed the {overlap / rate:.3f} s segment overlap"
        )
    bounds, first = [], 0
    while True:
        last = min(first + seg, n_samples)
        if last - first >= window:
            bounds.append((first, last))
        if last >= n_samples:
            return bounds
        first = last - overlap


def _energy_recording(path, bounds, rate, cfg: PipelineConfig) -> list:
    energies, starts, next_start = [], [], 0
    for first, last in bounds:
        clip = audio.decode_wav(path, cfg.channel_policy, first / rate, last / rate)
        e, s = bled_energy(clip, cfg.bled)
        keep = s >= next_start  # frames shared with the previous segment's overlap
        energies.append(e[keep])
        starts.append(s[keep])
        if s.size:
            next_start = int(s[-1]) + 1
    return bled_events(np.concatenate(energies), np.concatenate(starts), rate, cfg.bled,
                       str(path))


def detect_recording(path, cfg: PipelineConfig) -> list:
    """Candidate events of one recording, stitched across segments."""
    info = audio.wav_info(path)
    rate = info.sample_rate_hz
    bounds = segment_bounds(info.n_frames, rate, cfg)
    if not bounds:
        raise ClipTooShort(f"{path}: shorter than one detector frame")
    if cfg.detector == ENERGY:
        return _energy_recording(path, bounds, rate, cfg)
    found = []
    for first, last in bounds:
        clip = audio.decode_wav(path, cfg.channel_policy, first / rate, last / rate)
        found.extend(window_classifier_detect(clip, cfg.detector_model, cfg.window))
    merged = merge_events(found)
    return [replace(ev, source=str(path)) for ev in merged]


def _classify_events(path, events, cfg: PipelineConfig):
    if cfg.classifier is None:
        return [(ev, None) for ev in events]
    mfcc = MfccConfig.from_fingerprint(cfg.classifier.feature_config)
    out = []
    for ev in events:
        clip = audio.decode_wav(path, cfg.channel_policy, ev.start_s, ev.end_s)
        vec = mfcc_fixed(clip, mfcc)
        idx, prob = cfg.classifier.predict(vec.values)
        label = cfg.classifier.classes[int(idx[0])]
        out.append((replace(ev, label=label, probability=float(prob[0])), vec.values))
    return out


def process_recording(path, cfg: PipelineConfig):
    """Returns ``(n_candidates, [(event, feature values or None)])`` of kept events."""
    candidates = detect_recording(path, cfg)
    kept = []
    for ev, values in _classify_events(path, candidates, cfg):
        if cfg.classifier is not None:
            if ev.label != cfg.target_class or ev.probability < cfg.prob_threshold:
                continue
        elif cfg.prob_threshold > 0 and (ev.probability or 0.0) < cfg.prob_threshold:
            continue
        kept.append((ev, values))
    return len(candidates), kept


def run_pipeline(recordings, cfg: PipelineConfig) -> PipelineResult:
    """Run every recording; per-file failures are collected, not raised."""
    recordings = [str(r) for r in recordings]
    if not recordings:
        raise ValueError("no recordings given")

    def work(path):
        try:
            return path, process_recording(path, cfg), None
        except (PamkitError, OSError, ValueError) as exc:
            log.error("%s: %s", path, exc)
            return path, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        results = list(pool.map(work, recordings))
    kept, failures, n_candidates = [], [], 0
    for path, res, err in results:
        if err is not None:
            failures.append((path, err))
            continue
        n_candidates += res[0]
        kept.extend(res[1])
    kept.sort(key=lambda p: (p[0].source, p[0].start_s, p[0].end_s))
    result = PipelineResult(
        [ev for ev, _ in kept],
        [(values, ev.label) for ev, values in kept if values is not None],
        failures, n_candidates,
    )
    if cfg.output_dir is not None:
        write_outputs(result, recordings, cfg)
    return result


def _config_summary(cfg: PipelineConfig) -> dict:
    return {
        "detector": cfg.detector,
        "target_class": cfg.target_class,
        "prob_threshold": cfg.prob_threshold,
        "segment_s": cfg.segment_s,
        "bled": asdict(cfg.bled),
        "window": asdict(cfg.window) if cfg.window else None,
        "classifier_kind": getattr(cfg.classifier, "kind", None),
        "classifier_classes": list(getattr(cfg.classifier, "classes", ()) or ()),
        "classifier_feature_config": getattr(cfg.classifier, "feature_config", None),
    }


def write_outputs(result: PipelineResult, recordings, cfg: PipelineConfig) -> None:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.csv", "w", newline="") as fh:
        write_events_csv(result.events, fh)
    if cfg.emit_feature_table and result.features:
        X = np.vstack([v for v, _ in result.features])
        labels = [l for _, l in result.features]
        ds = LabeledDataset.from_arrays(X, labels, sorted(set(labels)),
                                        cfg.classifier.feature_config)
        with open(out / "features.csv", "w", newline="") as fh:
            write_feature_table(ds, fh)
    if cfg.emit_clips:
        audio.write_event_clips(result.events, out / "clips", cfg.channel_policy)
    summary = {
        "recordings": len(recordings),
        "failed": [{"path": p, "error": e} for p, e in result.failures],
        "candidates": result.n_candidates,
        "events": len(result.events),
        "config": _config_summary(cfg),
    }
    with open(out / "run_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
