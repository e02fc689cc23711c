"""Versioned JSON persistence of trained models."""
from __future__ import annotations

import json

from ..errors import CorruptModel, SchemaVersionMismatch
from .base import TrainedModel
from .gmm import GMMModel
from .lda import LDAModel
from .mlp import MLPModel
from .svm import SVMModel

SCHEMA_VERSION = 1
MODEL_KINDS = {cls.kind: cls for cls in (GMMModel, SVMModel, MLPModel, LDAModel)}


def model_to_dict(model: TrainedModel) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": model.kind,
            **model.header(), "parameters": model.params()}


def model_from_dict(doc) -> TrainedModel:
    if not isinstance(doc, dict):
        raise CorruptModel("model document is not a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"model schema version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    cls = MODEL_KINDS.get(doc.get("kind"))
    if cls is None:
        raise CorruptModel(f"unknown model kind {doc.get('kind')!r}")
    try:
        header = {
            "classes": tuple(str(c) for c in doc["classes"]),
            "feature_config": dict(doc["feature_config"]),
            "n_features": int(doc["n_features"]),
            "training_seed": int(doc["training_seed"]),
        }
        return cls.from_params(header, doc["parameters"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed {doc.get('kind')} parameters: {exc}") from exc


def save_model(model: TrainedModel, path) -> None:
    # json writes floats with repr(), which round-trips every double exactly
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
