"""Base classifiers, uncertainty scoring, and the abstaining wrapper.

Every classifier used by the certification engine exposes the same batch
surface: ``num_classes`` (K), ``input_dim``, and ``label_indices(X)`` mapping
an (N, d) batch to integer labels in ``0..K`` where index K stands for the
uncertainty class. Probabilistic classifiers additionally expose
``classify(x)`` / ``prob_batch(X)`` returning softmax distributions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

UNCERTAINTY_KINDS = ("confidence", "margin", "entropy")


@dataclass(frozen=True)
class ExtendedLabel:
    """A class prediction with confidence, or the uncertainty class (cls=None)."""

    cls: int | None = None

    def __post_init__(self):
        if self.cls is not None and self.cls < 0:
            raise ValueError(f"class index must be nonnegative, got {self.cls}")

    @property
    def is_uncertain(self) -> bool:
        return self.cls is None

    def __str__(self) -> str:
        return "uncertain" if self.cls is None else str(self.cls)

    @staticmethod
    def parse(text: str) -> "ExtendedLabel":
        return UNCERTAIN if text == "uncertain" else ExtendedLabel(int(text))


UNCERTAIN = ExtendedLabel(None)


def label_to_index(label: ExtendedLabel, num_classes: int) -> int:
    return num_classes if label.is_uncertain else label.cls


def index_to_label(index: int, num_classes: int) -> ExtendedLabel:
    return UNCERTAIN if index == num_classes else ExtendedLabel(index)


@dataclass(frozen=True)
class UncertaintyConfig:
    """Rejection rule: kind of score plus threshold theta.

    Scores are oriented naturally: confidence (top probability) and margin
    (top-two gap) are high when the prediction is trustworthy, so a prediction
    is uncertain when score <= theta. Entropy is high when the prediction is
    untrustworthy, so it is uncertain when entropy >= theta. Equality counts
    as uncertain in every kind.
    """

    kind: str
    theta: float

    def __post_init__(self):
        if self.kind not in UNCERTAINTY_KINDS:
            raise ValueError(f"unknown uncertainty kind {self.kind!r}")
        if not math.isfinite(self.theta) or self.theta < 0.0:
            raise ValueError(f"theta must be finite and nonnegative, got {self.theta}")
        if self.kind in ("confidence", "margin") and self.theta > 1.0:
            raise ValueError(f"{self.kind} threshold must lie in [0, 1], got {self.theta}")


def uncertainty_score(dist, kind: str) -> float:
    """Score a class distribution: confidence, margin (top-two gap), or entropy."""
    p = np.asarray(dist, dtype=np.float64)
    if kind == "confidence":
        return float(p.max())
    if kind == "margin":
        if p.size < 2:
            return float(p.max())
        top2 = np.partition(p, -2)[-2:]
        return float(top2[1] - top2[0])
    if kind == "entropy":
        terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        return float(-terms.sum())
    raise ValueError(f"unknown uncertainty kind {kind!r}")


def _uncertain_mask(probs: np.ndarray, cfg: UncertaintyConfig | None) -> np.ndarray:
    """Boolean mask over an (N, K) batch: True where the rejection rule fires."""
    if cfg is None:
        return np.zeros(probs.shape[0], dtype=bool)
    if cfg.kind == "confidence":
        return probs.max(axis=1) <= cfg.theta
    if cfg.kind == "margin":
        part = np.partition(probs, -2, axis=1)
        return part[:, -1] - part[:, -2] <= cfg.theta
    terms = np.where(probs > 0.0, probs * np.log(np.where(probs > 0.0, probs, 1.0)), 0.0)
    return -terms.sum(axis=1) >= cfg.theta


class MlpClassifier:
    """Feed-forward network with relu/linear layers and a softmax head."""

    def __init__(self, layers, input_dim: int, num_classes: int):
        self.layers = []
        d = input_dim
        for w, b, act in layers:
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or w.shape[1] != d or b.shape != (w.shape[0],):
                raise ValueError(f"layer shape mismatch: {w.shape} applied to dim {d}")
            if act not in ("relu", "none"):
                raise ValueError(f"unknown activation {act!r}")
            self.layers.append((w, b, act))
            d = w.shape[0]
        if d != num_classes:
            raise ValueError(f"final layer emits {d} logits, expected {num_classes}")
        self.input_dim = input_dim
        self.num_classes = num_classes

    def prob_batch(self, X: np.ndarray) -> np.ndarray:
        h = np.asarray(X, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ValueError(f"expected (N, {self.input_dim}) input, got {h.shape}")
        for w, b, act in self.layers:
            h = h @ w.T + b
            if act == "relu":
                h = np.maximum(h, 0.0)
        z = h - h.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def classify(self, x) -> np.ndarray:
        return self.prob_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    # bare model acts as an always-confident extended classifier
    def label_indices(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.prob_batch(X), axis=1)

    def classify_extended(self, x) -> ExtendedLabel:
        return ExtendedLabel(int(np.argmax(self.classify(x))))

    def without_threshold(self) -> "MlpClassifier":
        return self

    @staticmethod
    def from_dict(spec: dict) -> "MlpClassifier":
        layers = [(layer["w"], layer["b"], layer.get("activation", "none"))
                  for layer in spec["layers"]]
        return MlpClassifier(layers, int(spec["input_dim"]), int(spec["classes"]))

    @staticmethod
    def load(path) -> "MlpClassifier":
        with open(path, encoding="utf-8") as fh:
            return MlpClassifier.from_dict(json.load(fh))


class LinearBinaryClassifier:
    """Hard halfspace classifier: class 1 iff w.x + b > 0."""

    def __init__(self, w, b: float):
        self.w = np.asarray(w, dtype=np.float64)
        self.b = float(b)
        norm = float(np.linalg.norm(self.w))
        if norm <= 0.0:
            raise ValueError("weight vector must be nonzero")
        self.input_dim = self.w.size
        self.num_classes = 2

    def prob_batch(self, X: np.ndarray) -> np.ndarray:
        side = (np.asarray(X, dtype=np.float64) @ self.w + self.b > 0.0)
        probs = np.zeros((side.size, 2))
        probs[np.arange(side.size), side.astype(np.int64)] = 1.0
        return probs

    def classify(self, x) -> np.ndarray:
        return self.prob_batch(np.asarray(x, dtype=np.float64).reshape(1, -1))[0]

    def label_indices(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) @ self.w + self.b > 0.0).astype(np.int64)

    def classify_extended(self, x) -> ExtendedLabel:
        return ExtendedLabel(int(self.label_indices(np.reshape(x, (1, -1)))[0]))

    def without_threshold(self) -> "LinearBinaryClassifier":
        return self


def _parse_region_label(entry: dict) -> tuple[int, bool]:
    return int(entry["class"]), bool(entry["confident"])


class RegionClassifier1D:
    """Piecewise-constant classifier on the line.

    ``breakpoints`` b_1 < ... < b_m split the line into m+1 intervals
    [b_i, b_{i+1}) labelled left to right; a label is a class index plus a
    confidence flag, and non-confident intervals map to the uncertainty class.
    The uncertainty here is geometric, so thresholds never apply.
    """

    def __init__(self, breakpoints, labels):
        self.breakpoints = np.asarray(breakpoints, dtype=np.float64)
        if np.any(np.diff(self.breakpoints) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(labels) != self.breakpoints.size + 1:
            raise ValueError(
                f"{self.breakpoints.size} breakpoints need {self.breakpoints.size + 1} "
                f"labels, got {len(labels)}")
        self.labels = [(int(c), bool(conf)) for c, conf in labels]
        self.num_classes = 1 + max(c for c, _ in self.labels)
        self.input_dim = 1
        self._label_idx = np.array(
            [c if conf else self.num_classes for c, conf in self.labels], dtype=np.int64)

    def label_indices(self, X: np.ndarray) -> np.ndarray:
        xs = np.asarray(X, dtype=np.float64).reshape(-1)
        return self._label_idx[np.searchsorted(self.breakpoints, xs, side="right")]

    def classify_extended(self, x) -> ExtendedLabel:
        idx = int(self.label_indices(np.reshape(x, (1, 1)))[0])
        return index_to_label(idx, self.num_classes)

    def without_threshold(self) -> "RegionClassifier1D":
        return self

    @staticmethod
    def from_dict(spec: dict) -> "RegionClassifier1D":
        labels = [_parse_region_label(entry) for entry in spec["labels"]]
        return RegionClassifier1D(spec["breakpoints"], labels)

    @staticmethod
    def load(path) -> "RegionClassifier1D":
        with open(path, encoding="utf-8") as fh:
            return RegionClassifier1D.from_dict(json.load(fh))


class RegionClassifier2D:
    """Axis-aligned labelled boxes over a default label; boxes are disjoint.

    Membership uses half-open boxes [lo, hi) so every point has exactly one
    label; box boundaries are measure zero under Gaussian smoothing.
    """

    def __init__(self, default, boxes):
        self.default = (int(default[0]), bool(default[1]))
        self.boxes = []
        for lo, hi, label in boxes:
            lo = np.asarray(lo, dtype=np.float64)
            hi = np.asarray(hi, dtype=np.float64)
            if lo.shape != (2,) or hi.shape != (2,) or np.any(hi <= lo):
                raise ValueError(f"degenerate box lo={lo} hi={hi}")
            self.boxes.append((lo, hi, (int(label[0]), bool(label[1]))))
        for i in range(len(self.boxes)):
            for j in range(i + 1, len(self.boxes)):
                lo_i, hi_i, _ = self.boxes[i]
                lo_j, hi_j, _ = self.boxes[j]
                if np.all(lo_i < hi_j) and np.all(lo_j < hi_i):
                    raise ValueError(f"boxes {i} and {j} overlap")
        classes = [self.default[0]] + [label[0] for _, _, label in self.boxes]
        self.num_classes = 1 + max(classes)
        self.input_dim = 2
        self._default_idx = self._to_index(self.default)
        self._box_idx = [self._to_index(label) for _, _, label in self.boxes]

    def _to_index(self, label: tuple[int, bool]) -> int:
        cls, confident = label
        return cls if confident else self.num_classes

    def label_indices(self, X: np.ndarray) -> np.ndarray:
        pts = np.asarray(X, dtype=np.float64).reshape(-1, 2)
        out = np.full(pts.shape[0], self._default_idx, dtype=np.int64)
        for (lo, hi, _), idx in zip(self.boxes, self._box_idx):
            inside = np.all(pts >= lo, axis=1) & np.all(pts < hi, axis=1)
            out[inside] = idx
        return out

    def classify_extended(self, x) -> ExtendedLabel:
        idx = int(self.label_indices(np.reshape(x, (1, 2)))[0])
        return index_to_label(idx, self.num_classes)

    def without_threshold(self) -> "RegionClassifier2D":
        return self

    @staticmethod
    def from_dict(spec: dict) -> "RegionClassifier2D":
        default = _parse_region_label(spec["default"])
        boxes = [(box["lo"], box["hi"], _parse_region_label(box["label"]))
                 for box in spec.get("boxes", [])]
        return RegionClassifier2D(default, boxes)

    @staticmethod
    def load(path) -> "RegionClassifier2D":
        with open(path, encoding="utf-8") as fh:
            return RegionClassifier2D.from_dict(json.load(fh))


class EquippedClassifier:
    """A probabilistic base classifier extended with an uncertainty class.

    With ``config=None`` the rejection rule is disabled and the wrapper
    reproduces plain argmax classification (ties go to the lowest index).
    """

    def __init__(self, base, config: UncertaintyConfig | None = None):
        self.base = base
        self.config = config
        self.num_classes = base.num_classes
        self.input_dim = base.input_dim

    def label_indices(self, X: np.ndarray) -> np.ndarray:
        probs = self.base.prob_batch(X)
        labels = np.argmax(probs, axis=1)
        mask = _uncertain_mask(probs, self.config)
        labels[mask] = self.num_classes
        return labels

    def classify_extended(self, x) -> ExtendedLabel:
        idx = int(self.label_indices(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])
        return index_to_label(idx, self.num_classes)

    def without_threshold(self) -> "EquippedClassifier":
        return self if self.config is None else EquippedClassifier(self.base, None)


def equipped_classify(base, config: UncertaintyConfig | None, x) -> ExtendedLabel:
    """Classify one input through the uncertainty-equipped wrapper."""
    return EquippedClassifier(base, config).classify_extended(x)


def eval_mlp(model: MlpClassifier, x) -> np.ndarray:
    """Forward pass of an MLP model on a single input; returns the softmax."""
    return model.classify(x)


def eval_region(rc, x) -> ExtendedLabel:
    """Extended label of the region containing x."""
    return rc.classify_extended(x)


CLASSIFIER_KINDS = ("mlp", "region1d", "region2d", "linear")


def load_classifier(kind: str, path, uncertainty: UncertaintyConfig | None = None):
    """Build an extended classifier from a model file.

    Probabilistic kinds (mlp, linear) are wrapped with the rejection rule;
    region classifiers carry geometric uncertainty and ignore it.
    """
    path = Path(path)
    if kind == "mlp":
        return EquippedClassifier(MlpClassifier.load(path), uncertainty)
    if kind == "linear":
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        return EquippedClassifier(LinearBinaryClassifier(spec["w"], spec["b"]), uncertainty)
    if kind == "region1d":
        return RegionClassifier1D.load(path)
    if kind == "region2d":
        return RegionClassifier2D.load(path)
    raise ValueError(f"unknown classifier kind {kind!r} (expected one of {CLASSIFIER_KINDS})")
