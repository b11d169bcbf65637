"""Closed-form smoothed probabilities for analytically tractable classifiers.

Halfspaces, 1D interval partitions, and axis-aligned boxes all have exact
Gaussian measure, giving ground truth against which the Monte Carlo engine is
validated with zero quadrature error.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifiers import RegionClassifier1D, RegionClassifier2D
from .stats import std_normal_cdf


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Halfspace w.x + b > 0; the tight case where the certified radius equals
    the true boundary distance."""

    w: np.ndarray = field()
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=np.float64))
        object.__setattr__(self, "b", float(self.b))
        if not float(np.linalg.norm(self.w)) > 0.0:
            raise ValueError("weight vector must be nonzero")


def linear_smoothed_prob(model: LinearModel, x, sigma: float) -> float:
    """P(w.(x + eps) + b > 0) = Phi((w.x + b) / (sigma * ||w||))."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    margin = float(model.w @ np.asarray(x, dtype=np.float64) + model.b)
    return std_normal_cdf(margin / (sigma * float(np.linalg.norm(model.w))))


def true_boundary_distance(model: LinearModel, x) -> float:
    """Euclidean distance from x to the decision hyperplane."""
    margin = float(model.w @ np.asarray(x, dtype=np.float64) + model.b)
    return abs(margin) / float(np.linalg.norm(model.w))


def piecewise1d_smoothed_probs(rc: RegionClassifier1D, x: float, sigma: float) -> np.ndarray:
    """Exact label masses of the smoothed 1D region classifier at x.

    Returns a vector over the extended label space (uncertainty mass last);
    interval masses are differences of the Gaussian cdf at the breakpoints.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = float(np.reshape(x, -1)[0])
    edges = np.concatenate(([-np.inf], rc.breakpoints, [np.inf]))
    cdf = std_normal_cdf((edges - x) / sigma)
    masses = np.diff(cdf)
    out = np.zeros(rc.num_classes + 1)
    for mass, idx in zip(masses, rc._label_idx):
        out[idx] += mass
    return out


def grid2d_smoothed_probs(rc: RegionClassifier2D, x, sigma: float) -> np.ndarray:
    """Exact label masses of the smoothed 2D box classifier at x.

    Each box mass is the product of per-axis cdf differences; the default
    region receives the complement.
    """
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    pt = np.asarray(x, dtype=np.float64).reshape(2)
    out = np.zeros(rc.num_classes + 1)
    covered = 0.0
    for (lo, hi, _), idx in zip(rc.boxes, rc._box_idx):
        mass = float(np.prod(std_normal_cdf((hi - pt) / sigma)
                             - std_normal_cdf((lo - pt) / sigma)))
        out[idx] += mass
        covered += mass
    out[rc._default_idx] += 1.0 - covered
    return out
