"""Soft-target construction and cross-entropy losses for the four training
strategies (hard labels, vanilla smoothing, online smoothing, confusion-penalty
smoothing), plus the validation confusion tracker that powers the last one."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError

# Probabilities are floored before taking logs so a zero prediction yields a
# large finite loss instead of an infinite one.
PROB_FLOOR = 1e-12

STRATEGY_KINDS = ("hard", "vanilla", "ols", "cpls")


def floored_log(p: np.ndarray) -> np.ndarray:
    """log(max(p, PROB_FLOOR)); keeps every loss in the package finite."""
    return np.log(np.maximum(p, PROB_FLOOR))


@dataclass(frozen=True)
class TargetStrategy:
    """Tagged selection of a target-construction strategy.

    kind          one of "hard", "vanilla", "ols", "cpls"
    alpha         smoothing weight in [0, 1); vanilla only
    beta          hybrid weight in (0, 1); cpls only
    warmup_epochs hard-label epochs before the strategy activates; cpls and ols
    """

    kind: str
    alpha: float | None = None
    beta: float | None = None
    warmup_epochs: int | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise DomainError(f"unknown strategy kind {self.kind!r}, expected one of {STRATEGY_KINDS}")
        needs_alpha = self.kind == "vanilla"
        needs_beta = self.kind == "cpls"
        needs_warmup = self.kind in ("cpls", "ols")
        if needs_alpha != (self.alpha is not None):
            raise DomainError(f"alpha is {'required' if needs_alpha else 'not allowed'} for kind {self.kind!r}")
        if needs_beta != (self.beta is not None):
            raise DomainError(f"beta is {'required' if needs_beta else 'not allowed'} for kind {self.kind!r}")
        if needs_warmup != (self.warmup_epochs is not None):
            raise DomainError(
                f"warmup_epochs is {'required' if needs_warmup else 'not allowed'} for kind {self.kind!r}"
            )
        if self.alpha is not None and not (0.0 <= self.alpha < 1.0):
            raise DomainError(f"alpha must be in [0, 1), got {self.alpha}")
        if self.beta is not None and not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must be in (0, 1), got {self.beta}")
        if self.warmup_epochs is not None and self.warmup_epochs < 0:
            raise DomainError(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")

    @classmethod
    def hard(cls) -> "TargetStrategy":
        return cls("hard")

    @classmethod
    def vanilla(cls, alpha: float = 0.1) -> "TargetStrategy":
        return cls("vanilla", alpha=alpha)

    @classmethod
    def ols(cls, warmup_epochs: int = 5) -> "TargetStrategy":
        return cls("ols", warmup_epochs=warmup_epochs)

    @classmethod
    def cpls(cls, beta: float = 0.5, warmup_epochs: int = 5) -> "TargetStrategy":
        return cls("cpls", beta=beta, warmup_epochs=warmup_epochs)


def _check_class_id(y: int, num_classes: int) -> int:
    y = int(y)
    if not 0 <= y < num_classes:
        raise DomainError(f"class id {y} out of range [0, {num_classes})")
    return y


def _as_prob_vector(p, name: str) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    return v


def hard_target(y: int, num_classes: int) -> np.ndarray:
    """One-hot target vector for class y."""
    y = _check_class_id(y, num_classes)
    t = np.zeros(num_classes)
    t[y] = 1.0
    return t


def vanilla_ls_target(y: int, alpha: float, num_classes: int) -> np.ndarray:
    """Smoothed target (1 - alpha) * one_hot(y) + alpha / C per entry."""
    if not (0.0 <= alpha < 1.0):
        raise DomainError(f"alpha must be in [0, 1), got {alpha}")
    y = _check_class_id(y, num_classes)
    t = np.full(num_classes, alpha / num_classes)
    t[y] += 1.0 - alpha
    return t


def hard_ce(p, y: int) -> float:
    """-log p[y], the per-sample cross-entropy against a hard label."""
    pv = _as_prob_vector(p, "p")
    y = _check_class_id(y, pv.size)
    return float(-floored_log(pv[y]))


def soft_ce(p, target) -> float:
    """-sum_c target[c] * log p[c] for an arbitrary soft target."""
    pv = _as_prob_vector(p, "p")
    tv = _as_prob_vector(target, "target")
    if pv.size != tv.size:
        raise DimensionError(f"length mismatch: p has {pv.size} entries, target has {tv.size}")
    return float(-(tv @ floored_log(pv)))


class ConfusionTracker:
    """Per-epoch confusion counts over validation data and their row-normalized
    form, which doubles as the soft-target table for confusion-penalty smoothing.

    ``normalized`` starts as the identity so the first epochs behave exactly
    like hard-label training; ``normalize()`` folds the accumulated counts into
    a fresh row-stochastic matrix, resets the counts, and bumps ``epoch_tag``.
    Rows that saw no samples fall back to their identity row.
    """

    def __init__(self, num_classes: int):
        if num_classes < 2:
            raise DomainError(f"num_classes must be >= 2, got {num_classes}")
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        self.normalized = np.eye(num_classes)
        self.epoch_tag = 0

    def accumulate(self, true_class: int, predicted_class: int) -> "ConfusionTracker":
        t = _check_class_id(true_class, self.num_classes)
        p = _check_class_id(predicted_class, self.num_classes)
        self.counts[t, p] += 1
        return self

    def accumulate_counts(self, counts: np.ndarray) -> "ConfusionTracker":
        """Add a whole count matrix (e.g. one validation pass) at once."""
        c = np.asarray(counts)
        if c.shape != self.counts.shape:
            raise DimensionError(f"expected counts of shape {self.counts.shape}, got {c.shape}")
        if np.any(c < 0):
            raise DomainError("confusion counts must be non-negative")
        self.counts += c.astype(np.int64)
        return self

    def normalize(self) -> "ConfusionTracker":
        sums = self.counts.sum(axis=1)
        normalized = np.eye(self.num_classes)
        seen = sums > 0
        if np.any(seen):
            normalized[seen] = self.counts[seen] / sums[seen, None]
        self.normalized = normalized
        self.counts = np.zeros_like(self.counts)
        self.epoch_tag += 1
        return self

    def row(self, y: int) -> np.ndarray:
        y = _check_class_id(y, self.num_classes)
        return self.normalized[y]


def cpls_ce(p, tracker: ConfusionTracker, y: int) -> float:
    """Cross-entropy of p against the tracker's normalized row for class y."""
    y = _check_class_id(y, tracker.num_classes)
    return soft_ce(p, tracker.normalized[y])


def hybrid_loss(p, y: int, tracker: ConfusionTracker, beta: float) -> float:
    """beta * hard_ce + (1 - beta) * cpls_ce.

    beta is nominally in (0, 1); the endpoints are accepted and short-circuit
    to the corresponding pure loss so they are exact.
    """
    if not (0.0 <= beta <= 1.0):
        raise DomainError(f"beta must be in [0, 1], got {beta}")
    if beta == 1.0:
        return hard_ce(p, y)
    if beta == 0.0:
        return cpls_ce(p, tracker, y)
    return beta * hard_ce(p, y) + (1.0 - beta) * cpls_ce(p, tracker, y)


class OnlineLabelSmoother:
    """Baseline that accumulates the model's correct predictions per class.

    During an epoch, every probability vector whose argmax equals its label is
    added to that class's accumulator. ``advance_epoch()`` turns the per-class
    means into the target table used throughout the next epoch; classes with
    no correct predictions keep their identity row.
    """

    def __init__(self, num_classes: int):
        if num_classes < 2:
            raise DomainError(f"num_classes must be >= 2, got {num_classes}")
        self.num_classes = num_classes
        self.targets = np.eye(num_classes)
        self._sums = np.zeros((num_classes, num_classes))
        self._counts = np.zeros(num_classes, dtype=np.int64)

    def update(self, p, y: int) -> None:
        pv = _as_prob_vector(p, "p")
        y = _check_class_id(y, self.num_classes)
        if pv.size != self.num_classes:
            raise DimensionError(f"expected {self.num_classes} probabilities, got {pv.size}")
        if int(np.argmax(pv)) == y:
            self._sums[y] += pv
            self._counts[y] += 1

    def update_batch(self, labels: np.ndarray, probs: np.ndarray) -> None:
        preds = np.argmax(probs, axis=1)
        correct = preds == labels
        if np.any(correct):
            np.add.at(self._sums, labels[correct], probs[correct])
            np.add.at(self._counts, labels[correct], 1)

    def target(self, y: int) -> np.ndarray:
        y = _check_class_id(y, self.num_classes)
        return self.targets[y]

    def advance_epoch(self) -> None:
        targets = np.eye(self.num_classes)
        seen = self._counts > 0
        if np.any(seen):
            targets[seen] = self._sums[seen] / self._counts[seen, None]
        self.targets = targets
        self._sums = np.zeros_like(self._sums)
        self._counts = np.zeros_like(self._counts)


def write_confusion_csv(matrix: np.ndarray, path) -> None:
    """Snapshot a normalized confusion matrix as C rows x C columns, 6 dp."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        for row in m:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
