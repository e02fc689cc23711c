import numpy as np
import pytest

from pamkit import pipeline
from pamkit.audio import decode_wav
from pamkit.detect import WindowClassifierConfig, bled_detect
from pamkit.dsp import MfccConfig, mfcc_frames
from pamkit.errors import ClipTooShort
from pamkit.learn import LabeledDataset, train_gmm
from synth import clip, noise_with_tones, tone, write

STARTS = [50.0, 290.0, 301.0, 595.0]


@pytest.fixture(scope="module")
def noisy(tmp_path_factory):
    return write(tmp_path_factory.mktemp("p") / "n.wav", noise_with_tones(620, STARTS, 10.0, seed=5))


def spans(events):
    return [(e.start_s, e.end_s) for e in events]


def test_segment_bounds_cover_and_overlap():
    cfg = pipeline.PipelineConfig(segment_s=30.0)
    b = pipeline.segment_bounds(16000 * 100, 16000, cfg)
    assert b[0][0] == 0 and b[-1][1] == 16000 * 100
    for (a0, a1), (b0, b1) in zip(b, b[1:]):
        assert a1 - b0 == 96000  # 6 s rounded up to whole 1600-sample frames
        assert b0 % 1600 == 0
    with pytest.raises(ValueError):
        pipeline.segment_bounds(16000 * 100, 16000, pipeline.PipelineConfig(segment_s=5.0))


@pytest.mark.parametrize("segment_s", [11.0, 77.7, 300.0])
def test_energy_segmented_equals_whole(noisy, segment_s):
    whole = bled_detect(decode_wav(noisy))
    seg = pipeline.detect_recording(noisy, pipeline.PipelineConfig(segment_s=segment_s, workers=1))
    assert spans(seg) == spans(whole) and len(seg) == len(STARTS)
    assert [e.peak_score for e in seg] == [e.peak_score for e in whole]


def test_window_detector_segmented_equals_whole(tmp_path):
    cfg = MfccConfig()
    floor = np.random.default_rng(0).standard_normal((2, 160000)) * 1e-3
    t, _ = mfcc_frames(clip(tone(10.0, 900.0, 0.3) + floor[0]), cfg)
    s, _ = mfcc_frames(clip(floor[1]), cfg)
    model = train_gmm(LabeledDataset.from_arrays(np.vstack([t, s]), ["tone"] * len(t) + ["quiet"] * len(s),
                                                 feature_config=cfg.fingerprint("frames")), 1)
    x = np.random.default_rng(2).standard_normal(16000 * 90) * 1e-3
    for start in (10, 27, 61):
        x[16000 * start:16000 * (start + 8)] += tone(8.0, 900.0, 0.3)
    path = write(tmp_path / "w.wav", x)
    win = WindowClassifierConfig("tone", 0.5, 6.0)
    runs = [pipeline.detect_recording(path, pipeline.PipelineConfig(
        detector=pipeline.WINDOW, detector_model=model, window=win, segment_s=seg, workers=1))
        for seg in (7200.0, 20.0)]
    assert spans(runs[0]) == spans(runs[1]) and len(runs[0]) == 3


def test_too_short_recording(tmp_path):
    path = write(tmp_path / "s.wav", np.zeros(100))
    with pytest.raises(ClipTooShort):
        pipeline.detect_recording(path, pipeline.PipelineConfig(workers=1))


def test_run_pipeline_collects_failures(noisy, tmp_path):
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"RIFF")
    result = pipeline.run_pipeline([noisy, bad], pipeline.PipelineConfig(workers=2))
    assert len(result.events) == len(STARTS) and result.n_candidates == len(STARTS)
    assert [p for p, _ in result.failures] == [str(bad)]


def test_workers_do_not_change_output(noisy, tmp_path):
    other = write(tmp_path / "o.wav", noise_with_tones(120, [30.0], 10.0, seed=9))
    one = pipeline.run_pipeline([other, noisy], pipeline.PipelineConfig(workers=1))
    two = pipeline.run_pipeline([other, noisy], pipeline.PipelineConfig(workers=2))
    assert one.events == two.events
    assert one.events == sorted(one.events)
