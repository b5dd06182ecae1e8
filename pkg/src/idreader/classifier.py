"""Nine-class document classifier built on the network engine."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import raster, tensornet as tn
from .errors import EmptyDataset, ShapeMismatch

DEFAULT_N_B = 2
DEFAULT_N_F = 8


class DocumentClass(IntEnum):
    PAPER_ID_FRONT = 0
    PAPER_ID_BACK = 1
    ELECTRONIC_ID_FRONT = 2
    ELECTRONIC_ID_BACK = 3
    DRIVING_LICENSE_FRONT = 4
    DRIVING_LICENSE_BACK = 5
    HEALTH_CARD_FRONT = 6
    HEALTH_CARD_BACK = 7
    PASSPORT = 8

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    DocumentClass.PAPER_ID_FRONT: "paper-id-front",
    DocumentClass.PAPER_ID_BACK: "paper-id-back",
    DocumentClass.ELECTRONIC_ID_FRONT: "electronic-id-front",
    DocumentClass.ELECTRONIC_ID_BACK: "electronic-id-back",
    DocumentClass.DRIVING_LICENSE_FRONT: "driving-license-front",
    DocumentClass.DRIVING_LICENSE_BACK: "driving-license-back",
    DocumentClass.HEALTH_CARD_FRONT: "health-card-front",
    DocumentClass.HEALTH_CARD_BACK: "health-card-back",
    DocumentClass.PASSPORT: "passport",
}


@dataclass
class TrainConfig:
    epochs: int = 239
    batch_size: int = 32
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def preprocess(photo: np.ndarray, quad) -> np.ndarray:
    """Rectify the quad to 200x200 and scale channels to [0, 1]."""
    warped = raster.warp_perspective(photo, quad, tn.INPUT_SIZE, tn.INPUT_SIZE)
    return warped.astype(np.float32) / 255.0


def _stack_dataset(dataset):
    if len(dataset) == 0:
        raise EmptyDataset("no samples")
    xs, ys = [], []
    for tensor, label in dataset:
        arr = np.asarray(tensor)
        if arr.dtype == np.uint8:
            arr = arr.astype(np.float32) / 255.0
        xs.append(arr.astype(np.float32, copy=False))
        code = int(label)
        if not 0 <= code < tn.N_CLASSES:
            raise ValueError(f"class code {code} out of range")
        ys.append(code)
    x = np.stack(xs)
    if x.shape[1:] != (tn.INPUT_SIZE, tn.INPUT_SIZE, tn.INPUT_CHANNELS):
        raise ShapeMismatch(f"expected Nx200x200x3 inputs, got {x.shape}")
    return x, np.asarray(ys, dtype=np.int64)


def train(
    dataset,
    cfg: TrainConfig | None = None,
    n_b: int = DEFAULT_N_B,
    n_f: int = DEFAULT_N_F,
):
    """Minibatch Adam training; returns (params, per-epoch history).

    History rows are (mean_ce, accuracy) measured on the training batches of
    that epoch. Deterministic given cfg.seed (weight init and shuffling).
    """
    cfg = cfg or TrainConfig()
    x, labels = _stack_dataset(dataset)
    n = x.shape[0]
    params = tn.init_params(n_b, n_f, seed=cfg.seed)
    state = tn.init_adam(params)
    rng = np.random.default_rng(cfg.seed)
    y = tn.one_hot(labels)
    history: list[tuple[float, float]] = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        ce_sum = 0.0
        correct = 0
        for s in range(0, n, cfg.batch_size):
            sel = order[s : s + cfg.batch_size]
            xb, yb = x[sel], y[sel]
            probs, cache = tn.model_forward(params, xb)
            ce_sum += float(
                np.sum(-np.sum(yb * np.log(np.maximum(probs, 1e-12)), axis=1))
            )
            correct += int(np.sum(probs.argmax(axis=1) == labels[sel]))
            grads = tn.model_backward(params, cache, yb)
            tn.adam_step(params, grads, state)
        history.append((ce_sum / n, correct / n))
    return params, history


def classify(params: tn.ModelParams, tensor: np.ndarray):
    """Most probable class and the full probability vector.

    Ties break toward the lowest class code (argmax first occurrence).
    """
    x = np.asarray(tensor)
    if x.shape != (tn.INPUT_SIZE, tn.INPUT_SIZE, tn.INPUT_CHANNELS):
        raise ShapeMismatch(f"expected 200x200x3 input, got {x.shape}")
    probs, _ = tn.model_forward(params, x)
    return DocumentClass(int(probs.argmax())), probs


def evaluate_classifier(params: tn.ModelParams, dataset, batch_size: int = 32):
    """(accuracy, mean cross-entropy) over a labeled dataset."""
    x, labels = _stack_dataset(dataset)
    n = x.shape[0]
    correct = 0
    ce_sum = 0.0
    for s in range(0, n, batch_size):
        xb = x[s : s + batch_size]
        lb = labels[s : s + batch_size]
        probs, _ = tn.model_forward(params, xb)
        correct += int(np.sum(probs.argmax(axis=1) == lb))
        picked = probs[np.arange(lb.size), lb]
        ce_sum += float(np.sum(-np.log(np.maximum(picked, 1e-12))))
    return correct / n, ce_sum / n


def history_to_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_ce", "accuracy"])
        for i, (ce, acc) in enumerate(history):
            writer.writerow([i, f"{ce:.6f}", f"{acc:.6f}"])
