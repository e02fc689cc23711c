"""Labeled datasets, trainable classifiers and model persistence."""
from .base import SingularFeature, Standardizer, TrainedModel, classify
from .confusion import ConfusionMatrix, confusion_matrix
from .dataset import (
    MODE_FIXED,
    MODE_FRAMES,
    LabeledDataset,
    assemble_dataset,
    read_feature_table,
    split_train_test,
    write_feature_table,
)
from .gmm import GMMModel, train_gmm
from .lda import LDAModel, train_lda
from .mlp import MLPModel, train_mlp
from .model_io import MODEL_KINDS, SCHEMA_VERSION, load_model, save_model
from .pca import PCAResult, pca
from .svm import SVMModel, train_svm


def train_model(kind, train, seed=0, **hyper):
    """Dispatch to ``train_<kind>``; unknown hyperparameters are rejected."""
    trainers = {"gmm": train_gmm, "svm": train_svm, "mlp": train_mlp, "lda": train_lda}
    if kind not in trainers:
        raise ValueError(f"unknown model kind {kind!r}; choose from {sorted(trainers)}")
    return trainers[kind](train, seed=seed, **hyper)


__all__ = [
    "ConfusionMatrix", "GMMModel", "LabeledDataset", "LDAModel", "MLPModel", "MODE_FIXED",
    "MODE_FRAMES", "MODEL_KINDS", "PCAResult", "SCHEMA_VERSION", "SVMModel", "SingularFeature",
    "Standardizer", "TrainedModel", "assemble_dataset", "classify", "confusion_matrix",
    "load_model", "pca", "read_feature_table", "save_model", "split_train_test", "train_gmm",
    "train_lda", "train_mlp", "train_model", "train_svm", "write_feature_table",
]
