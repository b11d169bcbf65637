"""Deterministic Gaussian noise sampling keyed by (seed, stage, sample index).

Noise is generated in fixed-size blocks from a counter-based bit generator
keyed with (seed, stage code, block index), with uniforms pushed through the
package's own normal quantile. Sample i's perturbation therefore depends only
on (seed, stage_tag, i): counts are reproducible bit-for-bit no matter how the
work is batched or scheduled.
"""
from __future__ import annotations

import numpy as np

from .stats import inv_std_normal_cdf

BLOCK = 8192
STAGE_TAGS = {"selection": 0, "estimation": 1, "calibration": 2}
_U_OFFSET = 2.0 ** -54  # shifts uniforms off 0.0 so the quantile stays finite


def _block_normals(seed: int, stage_code: int, block_idx: int, rows: int, dim: int) -> np.ndarray:
    bitgen = np.random.Philox(np.random.SeedSequence([seed, stage_code, block_idx]))
    u = np.random.Generator(bitgen).random((rows, dim)) + _U_OFFSET
    return inv_std_normal_cdf(u)


def derive_seed(seed: int, index: int) -> int:
    """Stable per-sample seed so dataset entries get independent noise streams."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def noise_matrix(seed: int, stage_tag: str, count: int, dim: int) -> np.ndarray:
    """Materialize the (count, dim) standard-normal noise a stage would use."""
    try:
        code = STAGE_TAGS[stage_tag]
    except KeyError:
        raise ValueError(f"unknown stage tag {stage_tag!r}") from None
    rows = []
    done = 0
    block = 0
    while done < count:
        m = min(BLOCK, count - done)
        rows.append(_block_normals(seed, code, block, m, dim))
        done += m
        block += 1
    return np.concatenate(rows, axis=0)


def sample_under_noise(classifier, x, sigma: float, count: int, seed: int,
                       stage_tag: str) -> np.ndarray:
    """Count extended labels over `count` Gaussian perturbations of x.

    Returns int64 counts of length num_classes + 1; the final slot counts the
    uncertainty class.
    """
    if count < 1:
        raise ValueError(f"need at least one sample, got {count}")
    try:
        code = STAGE_TAGS[stage_tag]
    except KeyError:
        raise ValueError(f"unknown stage tag {stage_tag!r}") from None
    point = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if point.shape[1] != classifier.input_dim:
        raise ValueError(f"input has dimension {point.shape[1]}, "
                         f"classifier expects {classifier.input_dim}")
    counts = np.zeros(classifier.num_classes + 1, dtype=np.int64)
    done = 0
    block = 0
    while done < count:
        m = min(BLOCK, count - done)
        noise = _block_normals(seed, code, block, m, point.shape[1])
        labels = classifier.label_indices(point + sigma * noise)
        counts += np.bincount(labels, minlength=counts.size)
        done += m
        block += 1
    return counts
