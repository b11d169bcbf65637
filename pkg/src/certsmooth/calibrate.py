"""Threshold selection on a validation set under an accuracy-loss budget.

The sweep walks equidistant thresholds from least to most restrictive, scoring
each by majority-vote accuracy over a fixed set of noisy draws (one set of n0
draws per sample, reused across the whole sweep so rejections are monotone in
restrictiveness), and stops at the first threshold whose accuracy falls below
(1 - budget) times the rejection-free baseline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import UNCERTAINTY_KINDS, UncertaintyConfig
from .sampling import derive_seed, noise_matrix, sample_under_noise

LabeledDataset = list  # of (x vector, class index) pairs


@dataclass(frozen=True)
class CalibrationConfig:
    kind: str
    sigma: float
    budget: float = 0.01
    steps: int = 1000
    n0: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in UNCERTAINTY_KINDS:
            raise ValueError(f"unknown uncertainty kind {self.kind!r}")
        if not 0.0 < self.budget < 1.0:
            raise ValueError(f"budget must lie in (0, 1), got {self.budget}")
        if self.steps < 2:
            raise ValueError(f"need at least 2 sweep steps, got {self.steps}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class CalibrationResult:
    theta: float
    baseline_accuracy: float
    warned: bool  # the least restrictive threshold already broke the budget
    trace: tuple  # (theta, accuracy) pairs visited, in sweep order


def sweep_grid(kind: str, num_classes: int, steps: int) -> np.ndarray:
    """Equidistant thresholds ordered from least to most restrictive."""
    if kind == "confidence":
        return np.linspace(0.1, 1.0, steps)
    if kind == "margin":
        return np.linspace(0.0, 1.0, steps)
    if kind == "entropy":
        return np.linspace(math.log(num_classes), 0.0, steps)
    raise ValueError(f"unknown uncertainty kind {kind!r}")


def majority_vote_accuracy(classifier, data: LabeledDataset, sigma: float,
                           n0: int, seed: int) -> float:
    """Fraction of samples whose majority label over n0 noisy draws is correct.

    The uncertainty class competes like any label and never matches a true
    class, so predicting it counts as an error. Ties go to the lowest label
    index.
    """
    if not data:
        raise ValueError("dataset must be nonempty")
    num_classes = classifier.num_classes
    correct = 0
    for i, (x, label) in enumerate(data):
        counts = sample_under_noise(classifier, x, sigma, n0,
                                    derive_seed(seed, i), "calibration")
        if int(np.argmax(counts)) == label:
            correct += 1
    return correct / len(data)


def calibrate_threshold(base, cfg: CalibrationConfig, data: LabeledDataset) -> CalibrationResult:
    """Most restrictive threshold keeping accuracy within the budget.

    Evaluates the base classifier once per noisy draw, then replays the
    rejection rule for every threshold on the cached scores; the scan stops at
    the first violating threshold and reports the previous one. If the very
    first (least restrictive) threshold violates, it is returned with a
    warning flag.
    """
    if not data:
        raise ValueError("dataset must be nonempty")
    num_classes = base.num_classes
    grid = sweep_grid(cfg.kind, num_classes, cfg.steps)

    argmaxes = []
    scores = []
    labels = []
    for i, (x, label) in enumerate(data):
        point = np.asarray(x, dtype=np.float64).reshape(1, -1)
        noise = noise_matrix(derive_seed(cfg.seed, i), "calibration", cfg.n0, point.shape[1])
        probs = base.prob_batch(point + cfg.sigma * noise)
        argmaxes.append(np.argmax(probs, axis=1))
        scores.append(_sweep_scores(probs, cfg.kind))
        labels.append(label)

    baseline = np.mean([
        int(np.argmax(np.bincount(am, minlength=num_classes + 1))) == label
        for am, label in zip(argmaxes, labels)])
    floor = (1.0 - cfg.budget) * baseline

    trace = []
    best = None
    for theta in grid:
        acc = _sweep_accuracy(argmaxes, scores, labels, num_classes, cfg.kind, theta)
        trace.append((float(theta), acc))
        if acc < floor:
            if best is None:
                return CalibrationResult(float(grid[0]), float(baseline), True, tuple(trace))
            return CalibrationResult(best, float(baseline), False, tuple(trace))
        best = float(theta)
    return CalibrationResult(best, float(baseline), False, tuple(trace))


def _sweep_scores(probs: np.ndarray, kind: str) -> np.ndarray:
    if kind == "confidence":
        return probs.max(axis=1)
    if kind == "margin":
        part = np.partition(probs, -2, axis=1)
        return part[:, -1] - part[:, -2]
    terms = np.where(probs > 0.0, probs * np.log(np.where(probs > 0.0, probs, 1.0)), 0.0)
    return -terms.sum(axis=1)


def _sweep_accuracy(argmaxes, scores, labels, num_classes, kind, theta) -> float:
    correct = 0
    for am, sc, label in zip(argmaxes, scores, labels):
        rejected = sc >= theta if kind == "entropy" else sc <= theta
        drawn = np.where(rejected, num_classes, am)
        if int(np.argmax(np.bincount(drawn, minlength=num_classes + 1))) == label:
            correct += 1
    return correct / len(labels)


def rejection_rule(cfg: UncertaintyConfig, score: float) -> bool:
    """True when a score fails the confidence rule for its kind."""
    return score >= cfg.theta if cfg.kind == "entropy" else score <= cfg.theta
