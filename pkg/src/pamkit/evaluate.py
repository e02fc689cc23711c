"""Scoring detections against human annotations.

Matching is one-to-one and greedy in detection start order: a detection is
a true positive when it overlaps a still-unmatched annotation by at least
``min_overlap_s`` seconds (the annotation with the largest overlap wins,
ties to the earliest).  Recall is ``tp / (tp + fn)`` and the false-positive
rate is ``fp / audited_hours``.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .errors import EmptyInput, MalformedCsv, UnsortedInput

DEFAULT_THRESHOLDS = (0.0, 0.5, 0.75, 0.85, 0.95, 0.99)
QUALITIES = ("high", "low")


@dataclass(frozen=True, order=True)
class Annotation:
    source: str
    start_s: float
    end_s: float
    label: str = field(default="", compare=False)
    quality: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ValueError(f"annotation start {self.start_s} not before end {self.end_s}")
        if self.quality not in (None, *QUALITIES):
            raise ValueError(f"quality must be one of {QUALITIES}, got {self.quality!r}")


@dataclass
class Matching:
    pairs: list  # (detection, annotation)
    false_positives: list
    missed: list
    tn: int = 0

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return len(self.false_positives)

    @property
    def fn(self) -> int:
        return len(self.missed)


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    recall: Optional[float]
    fp_per_hour: float
    audited_hours: float
    per_quality: dict = field(default_factory=dict)  # quality -> recall or None

    def as_rows(self):
        rows = [("tp", self.tp), ("fp", self.fp), ("fn", self.fn), ("tn", self.tn),
                ("recall", _fmt(self.recall)), ("fp_per_hour", _fmt(self.fp_per_hour)),
                ("audited_hours", _fmt(self.audited_hours))]
        rows += [(f"recall_{q}", _fmt(r)) for q, r in sorted(self.per_quality.items())]
        return rows

    def format(self) -> str:
        return "\n".join(f"{k:>14}: {'n/a' if v == '' else v}" for k, v in self.as_rows())


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


def _overlap(a, b) -> float:
    return min(a.end_s, b.end_s) - max(a.start_s, b.start_s)


def _is_sorted(items) -> bool:
    return all((a.source, a.start_s) <= (b.source, b.start_s) for a, b in zip(items, items[1:]))


def match_events(detections, annotations, min_overlap_s: float = 1.0, *,
                 target_class: Optional[str] = None, negatives=None,
                 presorted: bool = False) -> Matching:
    """One-to-one greedy matching of detections to annotations.

    With ``presorted=True`` inputs must already be ordered by
    ``(source, start_s)`` (:class:`UnsortedInput` otherwise); by default a
    canonical sort is applied so the result does not depend on input order.
    ``negatives`` are rejected candidate events; those overlapping no
    annotation are counted as true negatives.
    """
    detections = list(detections)
    annotations = [a for a in annotations if target_class is None or a.label == target_class]
    if presorted:
        if not (_is_sorted(detections) and _is_sorted(annotations)):
            raise UnsortedInput("detections and annotations must be sorted by (source, start_s)")
    detections = sorted(detections, key=lambda e: (e.source, e.start_s, e.end_s))
    annotations = sorted(annotations, key=lambda a: (a.source, a.start_s, a.end_s))
    by_source = defaultdict(list)
    for ann in annotations:
        by_source[ann.source].append(ann)
    used = set()
    pairs, fps = [], []
    for det in detections:
        best, best_ov = None, None
        for j, ann in enumerate(by_source.get(det.source, ())):
            key = (det.source, j)
            if key in used:
                continue
            ov = _overlap(det, ann)
            if ov >= min_overlap_s and (best_ov is None or ov > best_ov):
                best, best_ov = j, ov
        if best is None:
            fps.append(det)
        else:
            used.add((det.source, best))
            pairs.append((det, by_source[det.source][best]))
    missed = [a for src, anns in by_source.items() for j, a in enumerate(anns)
              if (src, j) not in used]
    missed.sort(key=lambda a: (a.source, a.start_s, a.end_s))
    tn = 0
    if negatives is not None:
        tn = sum(1 for ev in negatives
                 if not any(_overlap(ev, a) > 0 for a in by_source.get(ev.source, ())))
    return Matching(pairs, fps, missed, tn)


def recall_and_fp_rate(counts, audited_hours: float, per_quality=None) -> EvalReport:
    """Recall and hourly false-positive rate from ``counts``.

    ``counts`` is a :class:`Matching` or any object with ``tp``, ``fp``,
    ``fn`` and ``tn`` attributes.  A recall with no annotations is ``None``.
    When ``counts`` is a :class:`Matching`, recall is also broken down by
    annotation quality.
    """
    if not audited_hours > 0:
        raise ValueError("audited_hours must be positive")
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, getattr(counts, "tn", 0)
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if per_quality is None and isinstance(counts, Matching):
        per_quality = {}
        for q in QUALITIES:
            hit = sum(1 for _, a in counts.pairs if a.quality == q)
            miss = sum(1 for a in counts.missed if a.quality == q)
            if hit + miss:
                per_quality[q] = hit / (hit + miss)
    return EvalReport(tp, fp, fn, tn, recall, fp / audited_hours, audited_hours,
                      dict(per_quality or {}))


def score_detections(detections, annotations, min_overlap_s: float = 1.0,
                     target_class: Optional[str] = None):
    """``(probability, is_target)`` per detection, for ROC analysis.

    Every detection takes part regardless of its predicted label, so events
    rejected by the classifier act as the negatives of the curve.
    """
    m = match_events(detections, annotations, min_overlap_s, target_class=target_class)
    hits = {id(d) for d, _ in m.pairs}
    scored = []
    for det in detections:
        if det.probability is None:
            raise ValueError(f"detection at {det.start_s} s has no probability")
        scored.append((det.probability, id(det) in hits))
    return scored


def roc_curve(scored, thresholds=DEFAULT_THRESHOLDS) -> list:
    """TPR/FPR of the rule ``probability >= t`` for each threshold, sorted by ``t``."""
    scored = list(scored)
    if not scored:
        raise EmptyInput("no scored events")
    for p, _ in scored:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    n_pos = sum(1 for _, t in scored if t)
    n_neg = len(scored) - n_pos
    points = []
    for t in sorted(thresholds):
        tp = sum(1 for p, pos in scored if pos and p >= t)
        fp = sum(1 for p, pos in scored if not pos and p >= t)
        points.append(RocPoint(float(t), tp / n_pos if n_pos else 0.0, fp / n_neg if n_neg else 0.0))
    return points


# ---------------------------------------------------------------------------
# CSV


def read_annotations_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"source", "start_s", "end_s", "label"} - set(reader.fieldnames or [])
        if missing:
            raise MalformedCsv(path, 1, f"missing columns {sorted(missing)}")
        for row in reader:
            try:
                out.append(Annotation(row["source"], float(row["start_s"]), float(row["end_s"]),
                                      row["label"], (row.get("quality") or None)))
            except (TypeError, ValueError) as exc:
                raise MalformedCsv(path, reader.line_num, str(exc)) from exc
    return out


def read_scores_csv(path) -> list:
    out = []
    truthy = {"1", "true", "yes", "t", "y"}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"probability", "is_target"} <= set(reader.fieldnames or []):
            raise MalformedCsv(path, 1, "expected columns probability,is_target")
        for row in reader:
            try:
                out.append((float(row["probability"]), row["is_target"].strip().lower() in truthy))
            except (TypeError, ValueError, AttributeError) as exc:
                raise MalformedCsv(path, reader.line_num, str(exc)) from exc
    return out


def write_scores_csv(scored, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["probability", "is_target"])
    for p, t in scored:
        writer.writerow([f"{p:.6f}", int(bool(t))])


def write_roc_csv(points, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["threshold", "tpr", "fpr"])
    for pt in points:
        writer.writerow([f"{pt.threshold:.4f}", f"{pt.tpr:.6f}", f"{pt.fpr:.6f}"])


def read_roc_csv(path) -> list:
    with open(path, newline="") as fh:
        return [RocPoint(float(r["threshold"]), float(r["tpr"]), float(r["fpr"]))
                for r in csv.DictReader(fh)]


def write_report_csv(report: EvalReport, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["metric", "value"])
    writer.writerows(report.as_rows())
