"""SGD training loop for desk-scale classification runs.

Momentum SGD with decoupled-from-nothing classic weight decay (decay added
to the gradient), a half-cosine learning rate schedule and cross-entropy
with optional label smoothing. The batch partition is fixed once per run,
so a zero learning rate reproduces the same loss every epoch exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter, Tape, apply, backward
from .data import SyntheticDataset
from .tensor import Prng, Tensor

__all__ = [
    "TrainConfig",
    "TrainingDiverged",
    "SgdMomentum",
    "cosine_lr",
    "LinearClassifier",
    "one_hot",
    "cross_entropy",
    "accuracy",
    "train_classifier",
]


@dataclass
class TrainConfig:
    lr: float = 0.08
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 30
    batch_size: int = 16
    seed: int = 42
    label_smoothing: float = 0.0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


def cosine_lr(lr0: float, epoch: int, total_epochs: int) -> float:
    """Half-cosine decay from lr0 toward zero over the run."""
    return lr0 * (1.0 + math.cos(math.pi * epoch / total_epochs)) / 2.0


class SgdMomentum:
    def __init__(self, params, momentum: float = 0.9, weight_decay: float = 0.0):
        self.params = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity = [np.zeros(p.value.shape) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float):
        mu, wd = self.momentum, self.weight_decay
        for p, v in zip(self.params, self._velocity):
            d = p.grad.data + wd * p.value.data
            v *= mu
            v += d
            p.value = Tensor(p.value.data - lr * v)


class LinearClassifier:
    """Pixel-space baseline: flatten, one affine map to class logits."""

    def __init__(self, in_shape, classes: int, prng: Prng | None = None):
        prng = prng or Prng(0)
        feat = int(np.prod(in_shape))
        self.in_shape = tuple(in_shape)
        self.classes = classes
        self.w = Parameter(prng.tensor_normal((classes, feat), 0.0, math.sqrt(1.0 / feat)),
                           "linear.w")
        self.b = Parameter(Tensor(np.zeros(classes)), "linear.b")

    def parameters(self):
        return [self.w, self.b]

    def train(self):
        return self

    def eval(self):
        return self

    def forward(self, x, tape=None):
        b = (x.value.shape if hasattr(x, "value") else x.shape)[0]
        flat = apply(tape, "reshape", x, dims=(b, int(np.prod(self.in_shape))))
        logits = apply(tape, "matmul", flat, apply(tape, "permute", self.w, order=(1, 0)))
        bias = apply(tape, "expand", self.b, axis=0, n=b)
        return apply(tape, "add", logits, bias)


def one_hot(labels, classes: int, smoothing: float = 0.0) -> Tensor:
    n = len(labels)
    target = np.full((n, classes), smoothing / classes)
    target[np.arange(n), labels] += 1.0 - smoothing
    return Tensor(target)


def cross_entropy(tape: Tape, logits, target: Tensor):
    """Mean negative log-likelihood against a (B, classes) target."""
    b = target.shape[0]
    logp = apply(tape, "log_softmax", logits, axis=1)
    ll = apply(tape, "reduce_sum", apply(tape, "mul", logp, target))
    return apply(tape, "scale", ll, c=-1.0 / b)


def accuracy(model, images: np.ndarray, labels: np.ndarray, batch_size: int = 32) -> float:
    model.eval()
    hits = 0
    for lo in range(0, len(labels), batch_size):
        x = Tensor(images[lo : lo + batch_size])
        logits = model.forward(x, tape=None)
        hits += int((logits.data.argmax(axis=1) == labels[lo : lo + batch_size]).sum())
    return hits / len(labels)


def train_classifier(model, dataset: SyntheticDataset, cfg: TrainConfig, log=None):
    """Train and return per-epoch metrics [{epoch, lr, loss, accuracy}, ...]."""
    opt = SgdMomentum(model.parameters(), cfg.momentum, cfg.weight_decay)
    order = Prng(cfg.seed).fork(17).shuffle(range(len(dataset)))
    batches = [order[lo : lo + cfg.batch_size] for lo in range(0, len(order), cfg.batch_size)]
    smooth_targets = one_hot(dataset.labels, dataset.classes, cfg.label_smoothing).data

    metrics = []
    for epoch in range(cfg.epochs):
        lr = cosine_lr(cfg.lr, epoch, cfg.epochs)
        model.train()
        total_loss = 0.0
        for idx in batches:
            x = Tensor(dataset.images[idx])
            target = Tensor(smooth_targets[idx])
            tape = Tape()
            logits = model.forward(x, tape=tape)
            loss = cross_entropy(tape, logits, target)
            loss_val = loss.value.item()
            if not math.isfinite(loss_val):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            backward(tape, loss)
            opt.step(lr)
            total_loss += loss_val * len(idx)
        epoch_loss = total_loss / len(dataset)
        acc = accuracy(model, dataset.images, dataset.labels)
        metrics.append({"epoch": epoch, "lr": lr, "loss": epoch_loss, "accuracy": acc})
        if log:
            log(f"epoch {epoch:3d}  lr {lr:.5f}  loss {epoch_loss:.4f}  acc {acc:.4f}")
    return metrics
