"""Labeled feature datasets: assembly from audio, splitting and CSV export."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..audio import REJECT_MULTICHANNEL, decode_wav
from ..dsp import MfccConfig, mfcc_fixed, mfcc_frames
from ..errors import (
    ClassTooSmall,
    EmptyDataset,
    MalformedCsv,
    MixedVectorLengths,
    PamkitError,
)
from ..seeding import rng_for

log = logging.getLogger(__name__)

MODE_FIXED = "fixed"
MODE_FRAMES = "frames"


@dataclass(eq=False)
class LabeledDataset:
    X: np.ndarray  # [n_samples, n_features]
    labels: list
    classes: tuple
    feature_config: dict
    sources: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != len(self.labels):
            raise ValueError("X must be [n_samples, n_features] with one label per row")
        unknown = set(self.labels) - set(self.classes)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} not among classes")

    def __len__(self):
        return self.X.shape[0]

    @property
    def y(self) -> np.ndarray:
        """Integer class index per row, in ``classes`` order."""
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[l] for l in self.labels], dtype=np.int64)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(
            self.X[rows], [self.labels[i] for i in rows], self.classes,
            self.feature_config,
            [self.sources[i] for i in rows] if self.sources else [],
        )

    @classmethod
    def from_arrays(cls, X, labels, classes=None, feature_config=None) -> "LabeledDataset":
        labels = [str(l) for l in labels]
        if classes is None:
            classes = tuple(sorted(set(labels)))
        return cls(np.asarray(X, float), labels, tuple(classes), dict(feature_config or {}))


def _manifest_rows(path: Path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip():
                continue
            if lineno == 1 and [c.strip().lower() for c in row[:2]] == ["path", "label"]:
                continue
            if len(row) < 2 or not row[1].strip():
                raise MalformedCsv(path, lineno, "expected 'path,label'")
            clip = Path(row[0].strip())
            if not clip.is_absolute():
                clip = path.parent / clip
            rows.append((clip, row[1].strip()))
    return rows


def _tree_rows(root: Path):
    return [(wav, sub.name)
            for sub in sorted(p for p in root.iterdir() if p.is_dir())
            for wav in sorted(sub.glob("*.wav"))]


def labeled_paths(source) -> list:
    """``(path, label)`` pairs from a manifest CSV or a ``<root>/<label>/*.wav`` tree."""
    source = Path(source)
    rows = _tree_rows(source) if source.is_dir() else _manifest_rows(source)
    return sorted(rows, key=lambda r: (str(r[0]), r[1]))


def assemble_dataset(source, cfg: MfccConfig = MfccConfig(), mode: str = MODE_FIXED,
                     channel_policy: str = REJECT_MULTICHANNEL) -> LabeledDataset:
    """Featurize every labeled clip.

    ``mode="fixed"`` yields one :func:`~pamkit.dsp.mfcc_fixed` vector per clip;
    ``mode="frames"`` yields one row per MFCC window, which is what the
    window-classifier detector is trained on.  Unreadable clips are skipped
    and listed in ``warnings``.
    """
    if mode not in (MODE_FIXED, MODE_FRAMES):
        raise ValueError(f"unknown featurization mode {mode!r}")
    vectors, labels, sources, skipped = [], [], [], []
    for path, label in labeled_paths(source):
        try:
            clip = decode_wav(path, channel_policy)
            if mode == MODE_FIXED:
                rows = [mfcc_fixed(clip, cfg).values]
            else:
                rows = list(mfcc_frames(clip, cfg)[0])
        except (PamkitError, OSError) as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped.append(f"{path}: {exc}")
            continue
        vectors.extend(rows)
        labels.extend([label] * len(rows))
        sources.extend([str(path)] * len(rows))
    if not vectors:
        raise EmptyDataset(f"no usable clips in {source}")
    if len({len(v) for v in vectors}) > 1:
        raise MixedVectorLengths("feature vectors differ in length")
    return LabeledDataset(np.vstack(vectors), labels, tuple(sorted(set(labels))),
                          cfg.fingerprint(mode), sources, skipped)


def split_train_test(ds: LabeledDataset, train_fraction: float, seed: int = 0):
    """Stratified split: ``ceil(train_fraction * n_c)`` rows of each class go to train."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = rng_for(seed, "split")
    labels = np.asarray(ds.labels, dtype=object)
    train, test = [], []
    for cls in ds.classes:
        rows = np.flatnonzero(labels == cls)
        if rows.size < 2:
            raise ClassTooSmall(f"class {cls!r} has {rows.size} sample(s), need at least 2")
        rows = rng.permutation(rows)
        n_train = math.ceil(train_fraction * rows.size)
        train.extend(rows[:n_train])
        test.extend(rows[n_train:])
    return ds.subset(sorted(train)), ds.subset(sorted(test))


def write_feature_table(ds: LabeledDataset, fh) -> None:
    """One row per vector: feature values then the label."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"f{i}" for i in range(ds.n_features)] + ["label"])
    for row, label in zip(ds.X, ds.labels):
        writer.writerow([repr(float(v)) for v in row] + [label])


def read_feature_table(path, feature_config=None) -> LabeledDataset:
    X, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise MalformedCsv(path, 1, "last header column must be 'label'")
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise MixedVectorLengths(
                    f"{path}:{reader.line_num}: {len(row) - 1} values, expected {len(header) - 1}"
                )
            try:
                X.append([float(v) for v in row[:-1]])
            except ValueError as exc:
                raise MalformedCsv(path, reader.line_num, str(exc)) from exc
            labels.append(row[-1])
    if not X:
        raise EmptyDataset(f"{path} holds no feature rows")
    return LabeledDataset.from_arrays(np.array(X), labels, feature_config=feature_config)
