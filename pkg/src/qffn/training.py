"""Deterministic fine-tuning loop and metric reporting.

Plain Adam (beta1 0.9, beta2 0.999, eps 1e-8, no weight decay) on mean
cross-entropy, fixed-seed shuffling every epoch, no scheduler, no early
stopping, partial final batches included. All randomness (weight init,
dropout, shuffling) derives from the single seed in TrainConfig, so two runs
with identical inputs produce identical reports; an optional separate
shuffle seed isolates the data-order stream for ablation of that choice.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Vocab, build_vocab, encode_dataset, subsample
from .encoder import EncoderModel, ModelConfig, log_softmax, model_backward, model_forward


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 32
    max_epochs: int = 5
    seed: int = 42
    fraction: float = 1.0
    shuffle_seed: int | None = None  # defaults to a stream derived from seed

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    train_acc: float
    val_acc: float


@dataclass
class MetricsReport:
    validation_accuracy: float
    training_accuracy: float
    gap: float
    accuracy_per_param: float
    param_total: int
    epochs: list[EpochStats] = field(default_factory=list)
    wall_clock_s: float = 0.0

    def summary_line(self) -> str:
        return (
            f"val_acc={self.validation_accuracy:.4f} train_acc={self.training_accuracy:.4f} "
            f"gap={self.gap:.4f} acc_per_param={self.accuracy_per_param:.3e} "
            f"params={self.param_total} wall_clock_s={self.wall_clock_s:.1f}"
        )


class AdamOptimizer:
    """Canonical Adam; updates parameter arrays in place."""

    def __init__(self, named_params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(named_params)
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {name: np.zeros_like(p) for name, p in self.params}
        self.v = {name: np.zeros_like(p) for name, p in self.params}
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, p in self.params:
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def _trim_padding(ids, mask):
    """Drop trailing all-pad columns; masked columns carry exactly zero
    attention weight, so this changes nothing but the work done."""
    longest = max(int(mask.sum(axis=1).max()), 2)
    return ids[:, :longest], mask[:, :longest]


def _eval_arrays(model, ids, mask, labels, batch_size=64):
    """Mean cross-entropy and argmax accuracy over pre-encoded arrays."""
    total_nll = 0.0
    correct = 0
    for start in range(0, ids.shape[0], batch_size):
        sl = slice(start, start + batch_size)
        logits = model_forward(model, ids[sl], mask[sl])
        logp = log_softmax(logits, axis=-1)
        batch_labels = labels[sl]
        total_nll -= float(np.sum(logp[np.arange(batch_labels.size), batch_labels]))
        correct += int(np.sum(np.argmax(logits, axis=-1) == batch_labels))
    n = ids.shape[0]
    return total_nll / n, correct / n


def evaluate(model: EncoderModel, dataset: Dataset, vocab: Vocab) -> float:
    """Argmax accuracy on a dataset; no calibration or post-processing."""
    ids, mask, labels = encode_dataset(vocab, dataset, model.config.max_seq_len)
    ids, mask = _trim_padding(ids, mask)
    _, acc = _eval_arrays(model, ids, mask, labels)
    return acc


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    train_set: Dataset,
    val_set: Dataset,
    vocab: Vocab | None = None,
):
    """Run the full fine-tuning loop; returns (model, MetricsReport).

    The report carries final-epoch metrics (no best-epoch selection) and the
    exact identities gap = train_acc - val_acc and
    accuracy_per_param = val_acc / param_total.
    """
    train_config.validate()
    if vocab is None:
        vocab = build_vocab(train_set)
    if model_config.vocab_size != len(vocab):
        raise ValueError(
            f"model_config.vocab_size {model_config.vocab_size} != vocabulary size {len(vocab)}"
        )
    if max(train_set.num_classes, val_set.num_classes) > model_config.num_classes:
        raise ValueError("dataset has more classes than the model")

    start_time = time.perf_counter()
    if train_config.fraction < 1.0:
        train_set = subsample(train_set, train_config.fraction, train_config.seed)

    max_len = model_config.max_seq_len
    train_ids, train_mask, train_labels = encode_dataset(vocab, train_set, max_len)
    val_ids, val_mask, val_labels = encode_dataset(vocab, val_set, max_len)
    train_ids, train_mask = _trim_padding(train_ids, train_mask)
    val_ids, val_mask = _trim_padding(val_ids, val_mask)

    init_ss, dropout_ss, shuffle_ss = np.random.SeedSequence(train_config.seed).spawn(3)
    model = EncoderModel(model_config, np.random.default_rng(init_ss))
    dropout_rng = np.random.default_rng(dropout_ss)
    shuffle_rng = np.random.default_rng(
        shuffle_ss if train_config.shuffle_seed is None else train_config.shuffle_seed
    )
    optimizer = AdamOptimizer(model.named_parameters(), train_config.learning_rate)

    n = train_ids.shape[0]
    epochs: list[EpochStats] = []
    for epoch in range(1, train_config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for batch_start in range(0, n, train_config.batch_size):
            idx = order[batch_start : batch_start + train_config.batch_size]
            loss, grads = model_backward(
                model, train_ids[idx], train_mask[idx], train_labels[idx], rng=dropout_rng
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss} at epoch {epoch}, step {batch_start // train_config.batch_size}"
                )
            optimizer.step(grads)
            batch_losses.append(loss)
        _, train_acc = _eval_arrays(model, train_ids, train_mask, train_labels)
        val_loss, val_acc = _eval_arrays(model, val_ids, val_mask, val_labels)
        epochs.append(
            EpochStats(epoch, float(np.mean(batch_losses)), val_loss, train_acc, val_acc)
        )

    final = epochs[-1]
    param_total = model.param_count()
    report = MetricsReport(
        validation_accuracy=final.val_acc,
        training_accuracy=final.train_acc,
        gap=final.train_acc - final.val_acc,
        accuracy_per_param=final.val_acc / param_total,
        param_total=param_total,
        epochs=epochs,
        wall_clock_s=time.perf_counter() - start_time,
    )
    return model, report
