"""Confusion matrices; rows are predicted classes, columns actual classes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ClassMismatch, EmptyDataset


@dataclass
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def percent_correct(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def format(self) -> str:
        width = max(8, *(len(c) for c in self.classes))
        lines = ["predicted \\ actual".ljust(width + 2) + "".join(c.rjust(width + 2) for c in self.classes)]
        for cls, row in zip(self.classes, self.counts):
            lines.append(cls.ljust(width + 2) + "".join(str(int(v)).rjust(width + 2) for v in row))
        lines.append(f"percent correct: {100.0 * self.percent_correct:.2f}%")
        return "\n".join(lines)


def confusion_matrix(model, test) -> ConfusionMatrix:
    if len(test) == 0:
        raise EmptyDataset("empty test set")
    if set(test.classes) - set(model.classes):
        raise ClassMismatch(f"test classes {test.classes} not all known to model {model.classes}")
    lookup = {c: i for i, c in enumerate(model.classes)}
    actual = np.array([lookup[l] for l in test.labels])
    predicted, _ = model.predict(test.X)
    k = len(model.classes)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (predicted, actual), 1)
    return ConfusionMatrix(tuple(model.classes), counts)
