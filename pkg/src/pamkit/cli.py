"""Command-line front end: one subcommand per workflow step plus ``pipeline``.

Exit codes: 0 success, 1 usage error, 2 data error (or every input failed),
3 partial failure.  Any flag may also be given in a ``--config`` file of
``key = value`` lines (keys are flag names without the leading dashes);
flags on the command line win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, audio, evaluate, pipeline, render, spatial
from .detect import BledConfig, WindowClassifierConfig, read_events_csv, write_events_csv
from .dsp import MfccConfig, SpectrogramConfig, mfcc_fixed, spectrogram
from .errors import FeatureConfigMismatch, PamkitError
from .learn import (
    MODE_FIXED,
    MODE_FRAMES,
    LDAModel,
    assemble_dataset,
    classify,
    confusion_matrix,
    load_model,
    pca,
    read_feature_table,
    save_model,
    split_train_test,
    train_lda,
    train_model,
    write_feature_table,
)

log = logging.getLogger("pamkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _band(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected two frequencies, e.g. 400,1500")
    return tuple(vals)


# ---------------------------------------------------------------------------
# shared option groups


def _add_mfcc(p):
    g = p.add_argument_group("MFCC features")
    d = MfccConfig()
    g.add_argument("--n-filters", type=int, default=d.n_filters, help="mel filters (default %(default)s)")
    g.add_argument("--n-cep", type=int, default=d.n_cep, help="cepstral coefficients kept (default %(default)s)")
    g.add_argument("--fmin", type=float, default=d.fmin_hz, help="filterbank low edge in Hz (default %(default)s)")
    g.add_argument("--fmax", type=float, default=d.fmax_hz, help="filterbank high edge in Hz (default %(default)s)")
    g.add_argument("--win-s", type=float, default=d.win_s, help="MFCC window for frame mode, seconds (default %(default)s)")
    g.add_argument("--n-fixed-windows", type=int, default=d.n_fixed_windows,
                   help="windows per event for fixed-length vectors (default %(default)s)")
    g.add_argument("--no-deltas", action="store_true", help="omit first-difference coefficients")
    g.add_argument("--mfcc-window", default=d.window_kind, choices=("hamming", "hanning", "rectangular"),
                   help="taper applied before each MFCC DFT (default %(default)s)")


def _mfcc_cfg(a) -> MfccConfig:
    return MfccConfig(n_filters=a.n_filters, n_cep=a.n_cep, fmin_hz=a.fmin, fmax_hz=a.fmax,
                      win_s=a.win_s, include_deltas=not a.no_deltas,
                      n_fixed_windows=a.n_fixed_windows, window_kind=a.mfcc_window)


def _add_spectrogram(p):
    g = p.add_argument_group("spectrogram")
    d = SpectrogramConfig()
    g.add_argument("--window-samples", type=int, default=d.window_samples,
                   help="frame length in samples (default %(default)s)")
    g.add_argument("--overlap", type=float, default=d.overlap_fraction,
                   help="fractional frame overlap in [0, 1) (default %(default)s)")
    g.add_argument("--dft-size", type=int, default=d.dft_size, help="DFT length, power of two (default %(default)s)")
    g.add_argument("--window-kind", default=d.window_kind, choices=("hamming", "hanning", "rectangular"),
                   help="frame taper (default %(default)s)")


def _spec_cfg(a) -> SpectrogramConfig:
    return SpectrogramConfig(a.window_samples, a.overlap, a.dft_size, a.window_kind)


def _add_detector(p):
    g = p.add_argument_group("energy detector")
    g.add_argument("--band", type=_band, default=(400.0, 1500.0),
                   help="detection band fmin,fmax in Hz (default 400,1500)")
    g.add_argument("--quantile", type=float, default=0.5, help="energy threshold quantile (default %(default)s)")
    g.add_argument("--min-dur", type=float, default=6.0, help="minimum event duration, seconds (default %(default)s)")
    g.add_argument("--max-gap", type=int, default=0,
                   help="sub-threshold frames bridged inside one event (default %(default)s)")
    _add_spectrogram(p)


def _bled_cfg(a) -> BledConfig:
    return BledConfig(a.band, a.quantile, a.min_dur, a.max_gap, _spec_cfg(a))


def _add_source(p, features=True):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--manifest", type=Path, help="CSV of path,label rows (paths relative to the manifest)")
    g.add_argument("--dir", type=Path, help="directory with one sub-directory of clips per label")
    if features:
        g.add_argument("--features", type=Path, help="feature table written by 'featurize'")
    p.add_argument("--mode", choices=(MODE_FIXED, MODE_FRAMES), default=MODE_FIXED,
                   help="one vector per clip (fixed) or per MFCC window (frames) (default %(default)s)")
    p.add_argument("--channel-policy", choices=(audio.REJECT_MULTICHANNEL, audio.FIRST_CHANNEL),
                   default=audio.REJECT_MULTICHANNEL, help="how to treat stereo input (default %(default)s)")
    _add_mfcc(p)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _load_dataset(a):
    if getattr(a, "features", None) is not None:
        side = _sidecar(a.features)
        fp = json.loads(side.read_text()) if side.exists() else {}
        return read_feature_table(a.features, fp)
    ds = assemble_dataset(a.manifest or a.dir, _mfcc_cfg(a), a.mode, a.channel_policy)
    if ds.warnings:
        print(f"warning: skipped {len(ds.warnings)} unreadable clip(s)", file=sys.stderr)
        for w in ds.warnings:
            print(f"  {w}", file=sys.stderr)
    return ds


def _add_model_hyper(p):
    g = p.add_argument_group("classifier")
    g.add_argument("--model-kind", choices=("gmm", "svm", "mlp", "lda"), default="gmm",
                   help="classifier family (default %(default)s)")
    g.add_argument("--components", type=int, help="GMM components per class (default 2)")
    g.add_argument("--lam", type=float, help="SVM L2 regularization (default 1e-4)")
    g.add_argument("--epochs", type=int, help="SVM or MLP training epochs")
    g.add_argument("--hidden", type=int, help="MLP hidden units (default 32)")
    g.add_argument("--learning-rate", type=float, help="MLP gradient step (default 0.5)")
    g.add_argument("--shrinkage", type=float, help="LDA covariance shrinkage (default 0.1)")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default %(default)s)")


_HYPER = {
    "gmm": {"components": "k_components"},
    "svm": {"lam": "lam", "epochs": "epochs"},
    "mlp": {"hidden": "hidden", "epochs": "epochs", "learning_rate": "learning_rate"},
    "lda": {"shrinkage": "shrinkage"},
}


def _train(a, ds):
    own = _HYPER[a.model_kind]
    hyper = {}
    for flag in ("components", "lam", "epochs", "hidden", "learning_rate", "shrinkage"):
        value = getattr(a, flag)
        if value is None:
            continue
        if flag not in own:
            raise UsageError(f"--{flag.replace('_', '-')} does not apply to --model-kind {a.model_kind}")
        hyper[own[flag]] = value
    return train_model(a.model_kind, ds, seed=a.seed, **hyper)


# ---------------------------------------------------------------------------
# subcommands


def cmd_featurize(a):
    ds = _load_dataset(a)
    a.out.parent.mkdir(parents=True, exist_ok=True)
    with open(a.out, "w", newline="") as fh:
        write_feature_table(ds, fh)
    _sidecar(a.out).write_text(json.dumps(ds.feature_config, indent=1, sort_keys=True) + "\n")
    print(f"{len(ds)} vectors of length {ds.n_features} -> {a.out}", file=sys.stderr)
    return EXIT_OK


def cmd_train(a):
    ds = _load_dataset(a)
    if a.train_fraction is not None:
        train, test = split_train_test(ds, a.train_fraction, a.seed)
    else:
        train, test = ds, None
    model = _train(a, train)
    save_model(model, a.out)
    if test is not None and len(test):
        print(confusion_matrix(model, test).format())
    return EXIT_OK


def _wavs_under(path: Path):
    if path.is_dir():
        return sorted(p for p in path.rglob("*") if p.suffix.lower() == ".wav")
    return [path]


def cmd_classify(a):
    model = load_model(a.model)
    if model.feature_config.get("mode", MODE_FIXED) != MODE_FIXED:
        raise FeatureConfigMismatch("classify needs a model trained on fixed-length vectors")
    cfg = MfccConfig.from_fingerprint(model.feature_config)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["source", "class", "probability"])
    failures = 0
    paths = _wavs_under(a.inp)
    for path in paths:
        try:
            vec = mfcc_fixed(audio.decode_wav(path, a.channel_policy), cfg)
        except PamkitError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        label, prob = classify(model, vec)
        writer.writerow([str(path), label, f"{prob:.6f}"])
    return _status(failures, len(paths))


def _status(failures, total):
    if failures == 0:
        return EXIT_OK
    return EXIT_DATA if failures >= total else EXIT_PARTIAL


def _detector_config(a, classifier=None):
    kw = dict(bled=_bled_cfg(a), segment_s=a.segment_s, workers=a.workers,
              channel_policy=a.channel_policy)
    method = a.method
    if method in (pipeline.WINDOW, "window_classifier"):
        model_path = getattr(a, "detector_model", None) or getattr(a, "model", None)
        if model_path is None or a.target_class is None:
            raise UsageError("the window detector needs a model and --target-class")
        model = load_model(model_path)
        mfcc = MfccConfig.from_fingerprint(model.feature_config)
        kw.update(detector=pipeline.WINDOW, detector_model=model,
                  window=WindowClassifierConfig(a.target_class, a.window_threshold, a.min_dur, mfcc))
    return kw


def _add_run_opts(p):
    p.add_argument("--segment-s", type=float, default=7200.0,
                   help="analysis segment length for long files, seconds (default %(default)s)")
    p.add_argument("--workers", type=int, default=pipeline.default_workers(),
                   help=f"files processed in parallel (default ${pipeline.WORKERS_ENV} or 1)")
    p.add_argument("--channel-policy", choices=(audio.REJECT_MULTICHANNEL, audio.FIRST_CHANNEL),
                   default=audio.REJECT_MULTICHANNEL, help="how to treat stereo input (default %(default)s)")


def cmd_detect(a):
    cfg = pipeline.PipelineConfig(**_detector_config(a))
    events, failures = [], 0
    for path in a.recordings:
        try:
            events.extend(pipeline.detect_recording(path, cfg))
        except PamkitError as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            failures += 1
    events.sort()
    if a.out:
        with open(a.out, "w", newline="") as fh:
            write_events_csv(events, fh)
    else:
        write_events_csv(events, sys.stdout)
    return _status(failures, len(a.recordings))


def cmd_pipeline(a):
    classifier = None
    if a.model is not None:
        classifier = load_model(a.model)
    elif a.train_manifest is not None:
        ds = assemble_dataset(a.train_manifest, _mfcc_cfg(a), MODE_FIXED, a.channel_policy)
        classifier = _train(a, ds)
        if a.output_dir is not None:
            Path(a.output_dir).mkdir(parents=True, exist_ok=True)
            save_model(classifier, Path(a.output_dir) / "model.json")
    if classifier is not None and a.target_class is None:
        raise UsageError("--target-class is required when classifying")
    a.method = a.detector
    kw = _detector_config(a)
    cfg = pipeline.PipelineConfig(
        classifier=classifier, target_class=a.target_class, prob_threshold=a.prob_threshold,
        output_dir=a.output_dir, emit_clips=a.emit_clips,
        emit_feature_table=a.emit_features and classifier is not None, **kw,
    )
    result = pipeline.run_pipeline(a.recordings, cfg)
    if a.output_dir is None:
        write_events_csv(result.events, sys.stdout)
    for path, err in result.failures:
        print(f"error: {path}: {err}", file=sys.stderr)
    print(f"{len(result.events)} event(s) kept of {result.n_candidates} candidate(s)",
          file=sys.stderr)
    return _status(len(result.failures), len(a.recordings))


def cmd_eval(a):
    detections = read_events_csv(a.detections)
    annotations = evaluate.read_annotations_csv(a.annotations)
    kept, rejected = detections, None
    if a.target_class is not None:
        kept = [d for d in detections if d.label in (None, a.target_class)]
        rejected = [d for d in detections if d.label not in (None, a.target_class)]
    m = evaluate.match_events(kept, annotations, a.min_overlap, target_class=a.target_class,
                              negatives=rejected)
    report = evaluate.recall_and_fp_rate(m, a.hours)
    if a.out:
        with open(a.out, "w", newline="") as fh:
            evaluate.write_report_csv(report, fh)
    else:
        print(report.format())
    if a.scores_out:
        scored = evaluate.score_detections(detections, annotations, a.min_overlap, a.target_class)
        with open(a.scores_out, "w", newline="") as fh:
            evaluate.write_scores_csv(scored, fh)
    return EXIT_OK


def cmd_roc(a):
    scored = evaluate.read_scores_csv(a.scores)
    points = evaluate.roc_curve(scored, a.thresholds)
    if a.out:
        with open(a.out, "w", newline="") as fh:
            evaluate.write_roc_csv(points, fh)
    else:
        evaluate.write_roc_csv(points, sys.stdout)
    if a.svg:
        Path(a.svg).write_bytes(render.render_roc(points))
    return EXIT_OK


def cmd_density(a):
    sites = spatial.read_sites_csv(a.sites)
    if a.events is not None:
        if a.site_map is None:
            raise UsageError("--events needs --site-map")
        sites = spatial.counts_from_events(read_events_csv(a.events),
                                           spatial.read_site_map_csv(a.site_map), sites)
    grid = spatial.idw_interpolate(sites, spatial.GridSpec.covering(sites, a.cell, a.margin), a.power)
    if a.out:
        with open(a.out, "w", newline="") as fh:
            spatial.write_grid_csv(grid, fh)
    else:
        spatial.write_grid_csv(grid, sys.stdout)
    if a.svg:
        Path(a.svg).write_bytes(render.render_heatmap(grid))
    return EXIT_OK


def cmd_render_spectrogram(a):
    clip = audio.decode_wav(a.inp, a.channel_policy, a.start, a.end)
    spec = spectrogram(clip, _spec_cfg(a))
    fmt = "svg" if a.events is not None else a.format
    img = render.ImageSpec(a.width, a.height, a.db_floor, fmt)
    if a.events is not None:
        src = str(a.inp)
        events = [e for e in read_events_csv(a.events)
                  if e.source in (src, Path(src).name) and e.start_s >= spec.start_offset_s
                  and e.end_s <= spec.end_s]
        data = render.render_events_overlay(spec, events, img, a.band, a.view_band)
    else:
        data = render.render_spectrogram(spec, img, a.view_band)
    Path(a.out).write_bytes(data)
    return EXIT_OK


def cmd_render_biplot(a):
    ds = _load_dataset(a)
    if a.method == "pca":
        coords = pca(ds, 2).transform(ds.X)
        names = ("PC1", "PC2")
    else:
        model = train_lda(ds, seed=a.seed)
        coords = model.project(ds.X)
        if coords.shape[1] == 1:
            coords = np.column_stack([coords[:, 0], np.zeros(len(ds))])
            names = ("LD1", "")
        else:
            names = ("LD1", "LD2")
    points = [(float(x), float(y), c) for (x, y), c in zip(coords[:, :2], ds.labels)]
    Path(a.out).write_bytes(render.render_scatter(points, *names))
    return EXIT_OK


def cmd_render_roc(a):
    if a.roc is not None:
        points = evaluate.read_roc_csv(a.roc)
    else:
        points = evaluate.roc_curve(evaluate.read_scores_csv(a.scores), a.thresholds)
    Path(a.out).write_bytes(render.render_roc(points))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pamkit", description="Detect, classify, evaluate and map acoustic events.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="file of 'key = value' defaults for the subcommand's flags")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("featurize", help="turn labeled clips into a feature table")
    _add_source(p, features=False)
    p.add_argument("--out", type=Path, required=True, help="feature table CSV (a .json fingerprint is written beside it)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="fit a classifier and save it as JSON")
    _add_source(p)
    _add_model_hyper(p)
    p.add_argument("--train-fraction", type=float,
                   help="hold out the rest of each class and print a confusion matrix")
    p.add_argument("--out", type=Path, required=True, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label clips with a trained model")
    p.add_argument("--model", type=Path, required=True, help="model file from 'train'")
    p.add_argument("--in", dest="inp", type=Path, required=True, help="a WAV file or a directory of them")
    p.add_argument("--channel-policy", choices=(audio.REJECT_MULTICHANNEL, audio.FIRST_CHANNEL),
                   default=audio.REJECT_MULTICHANNEL, help="how to treat stereo input (default %(default)s)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("detect", help="find candidate sound events")
    p.add_argument("recordings", nargs="+", help="WAV recordings")
    p.add_argument("--method", choices=("energy", "window", "window_classifier"), default="energy",
                   help="band-energy detector or per-window classifier (default %(default)s)")
    _add_detector(p)
    p.add_argument("--model", type=Path, help="per-window model (train --mode frames) for --method window")
    p.add_argument("--target-class", help="class the window detector looks for")
    p.add_argument("--prob-threshold", dest="window_threshold", type=float, default=0.5,
                   help="window detector probability cut (default %(default)s)")
    _add_run_opts(p)
    p.add_argument("--out", type=Path, help="events CSV (default: standard output)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("pipeline", help="detect, classify and filter events in recordings")
    p.add_argument("recordings", nargs="+", help="WAV recordings")
    p.add_argument("--detector", choices=("energy", "window", "window_classifier"), default="energy",
                   help="candidate detector (default %(default)s)")
    _add_detector(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--model", type=Path, help="event classifier trained on fixed-length vectors")
    g.add_argument("--train-manifest", type=Path, help="train the event classifier from this manifest first")
    _add_model_hyper(p)
    _add_mfcc(p)
    p.add_argument("--detector-model", type=Path, help="per-window model for --detector window")
    p.add_argument("--target-class", help="class whose events are kept")
    p.add_argument("--prob-threshold", type=float, default=0.0,
                   help="minimum classifier probability of kept events (default %(default)s)")
    p.add_argument("--window-threshold", type=float, default=0.5,
                   help="window detector probability cut (default %(default)s)")
    p.add_argument("--output-dir", type=Path, help="where events.csv and run_summary.json go")
    p.add_argument("--emit-clips", action="store_true", help="cut one WAV per kept event")
    p.add_argument("--emit-features", action="store_true", help="write the kept events' feature table")
    _add_run_opts(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("eval", help="score detections against annotations")
    p.add_argument("--detections", type=Path, required=True, help="events CSV")
    p.add_argument("--annotations", type=Path, required=True, help="annotations CSV")
    p.add_argument("--hours", type=float, required=True, help="audited recording hours")
    p.add_argument("--min-overlap", type=float, default=1.0, help="overlap needed for a match, seconds (default %(default)s)")
    p.add_argument("--target-class", help="only annotations of this class count; other-labeled detections are negatives")
    p.add_argument("--out", type=Path, help="report CSV (default: printed)")
    p.add_argument("--scores-out", type=Path, help="write probability,is_target rows for 'roc'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="ROC points from scored detections")
    p.add_argument("--scores", type=Path, required=True, help="CSV of probability,is_target")
    p.add_argument("--thresholds", type=_floats, default=list(evaluate.DEFAULT_THRESHOLDS),
                   help="comma-separated probability thresholds (default 0,.5,.75,.85,.95,.99)")
    p.add_argument("--out", type=Path, help="ROC CSV (default: standard output)")
    p.add_argument("--svg", type=Path, help="also draw the curve")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("density", help="IDW call-density grid over recorder sites")
    p.add_argument("--sites", type=Path, required=True, help="CSV of name,x_m,y_m[,call_count]")
    p.add_argument("--events", type=Path, help="events CSV to count per site")
    p.add_argument("--site-map", type=Path, help="CSV of source,site linking recordings to sites")
    p.add_argument("--cell", type=float, default=50.0, help="grid spacing, metres (default %(default)s)")
    p.add_argument("--margin", type=float, default=0.0, help="grid margin around the sites, metres (default %(default)s)")
    p.add_argument("--power", type=float, default=2.0, help="IDW distance exponent (default %(default)s)")
    p.add_argument("--out", type=Path, help="grid CSV (default: standard output)")
    p.add_argument("--svg", type=Path, help="also draw a heat map")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("render", help="draw spectrograms, biplots and ROC curves")
    rsub = p.add_subparsers(dest="what", metavar="WHAT", parser_class=_Parser)
    rsub.required = True

    r = rsub.add_parser("spectrogram", help="spectrogram image, optionally with event boxes")
    r.add_argument("--in", dest="inp", type=Path, required=True, help="WAV file")
    r.add_argument("--start", type=float, help="start time, seconds")
    r.add_argument("--end", type=float, help="end time, seconds")
    r.add_argument("--events", type=Path, help="events CSV to overlay (forces SVG)")
    r.add_argument("--band", type=_band, default=(400.0, 1500.0), help="event box band fmin,fmax in Hz")
    r.add_argument("--view-band", type=_band, help="displayed frequency range fmin,fmax in Hz")
    r.add_argument("--format", choices=("pgm", "svg"), default="pgm", help="image format (default %(default)s)")
    r.add_argument("--width", type=int, default=800, help="pixels (default %(default)s)")
    r.add_argument("--height", type=int, default=300, help="pixels (default %(default)s)")
    r.add_argument("--db-floor", type=float, default=-80.0, help="dB mapped to black (default %(default)s)")
    r.add_argument("--channel-policy", choices=(audio.REJECT_MULTICHANNEL, audio.FIRST_CHANNEL),
                   default=audio.REJECT_MULTICHANNEL, help="how to treat stereo input")
    _add_spectrogram(r)
    r.add_argument("--out", type=Path, required=True, help="image file")
    r.set_defaults(func=cmd_render_spectrogram)

    r = rsub.add_parser("biplot", help="2-D PCA or LDA scatter of a labeled dataset")
    _add_source(r)
    r.add_argument("--method", choices=("pca", "lda"), default="pca", help="projection (default %(default)s)")
    r.add_argument("--seed", type=int, default=0, help="seed (default %(default)s)")
    r.add_argument("--out", type=Path, required=True, help="SVG file")
    r.set_defaults(func=cmd_render_biplot)

    r = rsub.add_parser("roc", help="ROC curve from a ROC CSV or a scores CSV")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--roc", type=Path, help="ROC CSV from 'roc'")
    g.add_argument("--scores", type=Path, help="CSV of probability,is_target")
    r.add_argument("--thresholds", type=_floats, default=list(evaluate.DEFAULT_THRESHOLDS),
                   help="thresholds used with --scores")
    r.add_argument("--out", type=Path, required=True, help="SVG file")
    r.set_defaults(func=cmd_render_roc)
    return parser


# ---------------------------------------------------------------------------
# config file


def read_config(path: Path) -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use dashes or underscores."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (t.strip() for t in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _leaf_parser(parser, argv):
    """The (sub)parser that will handle ``argv``'s command."""
    node, rest = parser, list(argv)
    while True:
        subs = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs:
            return node
        names = subs[0].choices
        idx = next((i for i, t in enumerate(rest) if t in names), None)
        if idx is None:
            return node
        node, rest = names[rest[idx]], rest[idx + 1:]


def _apply_config(leaf, values: dict):
    actions = {a.dest: a for a in leaf._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("help", "func"):
            raise UsageError(f"config key {key!r} is not an option of '{leaf.prog}'")
        if isinstance(action, argparse._StoreTrueAction):
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects true/false, got {raw!r}")
            defaults[key] = low in _TRUE
        elif action.nargs in ("+", "*"):
            defaults[key] = [action.type(t) if action.type else t for t in raw.split()]
        else:
            try:
                value = action.type(raw) if action.type else raw
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r} must be one of {sorted(action.choices)}")
            defaults[key] = value
        # a config value satisfies a required flag
        action.required = False
        if action.nargs in ("+",):
            action.nargs = "*"
    leaf.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre.add_argument("-v", "--verbose", action="store_true")
    known, _ = pre.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if known.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if known.config is not None:
            _apply_config(_leaf_parser(parser, argv), read_config(known.config))
    except UsageError as exc:
        print(f"pamkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pamkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PamkitError as exc:
        print(f"pamkit: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError) as exc:
        print(f"pamkit: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
