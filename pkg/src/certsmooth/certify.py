"""The certification engine: two-stage sampling, radius formulas, exact radii.

The Monte Carlo path follows the classic two-stage scheme: a selection stage
identifies the winning label (and, when statistically separated, a runner-up),
then a fresh estimation stage turns counts into Clopper-Pearson bounds and a
certified radius. Three modes share the machinery:

- ``standard``: certify the plain classifier (rejection rule disabled),
- ``cc``: consistent-and-confident; competitors include the uncertainty class,
- ``ncl``: no-confident-label-change; the uncertainty class is merged into the
  winner for estimation, and the runner-up is the best confident competitor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .classifiers import ExtendedLabel, index_to_label, label_to_index
from .sampling import sample_under_noise
from .stats import (binom_p_value, clopper_pearson_lower, clopper_pearson_upper,
                    inv_std_normal_cdf)

log = logging.getLogger(__name__)

REASON_NO_WINNER = "no-winner"
REASON_UNCERTAIN = "uncertain-prediction"
REASON_NONPOSITIVE = "nonpositive-radius"

_P_CLAMP = 1e-15


class Mode(str, Enum):
    STANDARD = "standard"
    CC = "cc"
    NCL = "ncl"


@dataclass(frozen=True)
class SamplingConfig:
    """Knobs of the statistical procedure. Defaults: n0=1000, n=100000, alpha=0.001."""

    sigma: float
    n0: int = 1000
    n: int = 100_000
    alpha: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.n0 < 2:
            raise ValueError(f"n0 must be at least 2, got {self.n0}")
        if self.n < self.n0:
            raise ValueError(f"n={self.n} must be at least n0={self.n0}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha={self.alpha} outside (0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit nonnegative integer, got {self.seed}")


@dataclass(frozen=True)
class PredictOutcome:
    """Winner/runner-up identified by the selection stage, or an abstention."""

    winner: ExtendedLabel | None
    runner_up: ExtendedLabel | None
    abstain_reason: str | None
    distinct_labels: int


@dataclass(frozen=True)
class CertificationResult:
    mode: Mode
    predicted: ExtendedLabel | None
    abstain_reason: str | None
    runner_up: ExtendedLabel | None
    pa_lower: float | None
    pb_upper: float | None
    radius: float | None
    p_uncertain_hat: float | None
    one_vs_all: bool
    distinct_labels: int

    @property
    def abstained(self) -> bool:
        return self.predicted is None


def select_top_labels(counts, alpha: float, exclude: int | None = None):
    """Identify winner and runner-up from label counts (selection-stage test).

    The winner is the top count (ties to the lowest index) and is returned only
    when a one-sided binomial test separates it from its strongest competitor
    at level alpha; the runner-up is additionally tested against the third
    count. ``exclude`` removes one index from competitor slots (the uncertainty
    class when the runner-up must be a confident label). With no competitor
    observations the runner-up is None rather than tested on zero trials.
    """
    counts = np.asarray(counts, dtype=np.int64)
    order = np.lexsort((np.arange(counts.size), -counts))
    winner = int(order[0])
    cand = [int(j) for j in order[1:] if exclude is None or int(j) != exclude]
    n_a = int(counts[winner])
    n_b = int(counts[cand[0]]) if cand else 0
    if binom_p_value(n_a, n_a + n_b) > alpha:
        return None, None
    n_c = int(counts[cand[1]]) if len(cand) > 1 else 0
    if n_b + n_c == 0:
        return winner, None
    if binom_p_value(n_b, n_b + n_c) <= alpha:
        return winner, cand[0]
    return winner, None


def _selection_outcome(num_classes: int, counts: np.ndarray, alpha: float,
                       mode: Mode) -> PredictOutcome:
    exclude = num_classes if mode is Mode.NCL else None
    winner, runner = select_top_labels(counts, alpha, exclude=exclude)
    distinct = int(np.count_nonzero(counts))
    if winner is None:
        return PredictOutcome(None, None, REASON_NO_WINNER, distinct)
    if winner == num_classes and mode is not Mode.STANDARD:
        return PredictOutcome(None, None, REASON_UNCERTAIN, distinct)
    runner_label = index_to_label(runner, num_classes) if runner is not None else None
    return PredictOutcome(index_to_label(winner, num_classes), runner_label, None, distinct)


def predict_top_two(classifier, x, cfg: SamplingConfig,
                    mode: Mode = Mode.STANDARD) -> PredictOutcome:
    """Selection stage on n0 fresh noisy samples; see ``select_top_labels``."""
    mode = Mode(mode)
    work = classifier.without_threshold() if mode is Mode.STANDARD else classifier
    counts = sample_under_noise(work, x, cfg.sigma, cfg.n0, cfg.seed, "selection")
    return _selection_outcome(work.num_classes, counts, cfg.alpha, mode)


def certified_radius(pa_lower: float, pb_upper: float, sigma: float) -> float:
    """sigma/2 * (quantile(pa_lower) - quantile(pb_upper)); may be <= 0."""
    if not (0.0 < pa_lower < 1.0 and 0.0 < pb_upper < 1.0):
        raise ValueError(f"probability bounds must be strictly inside (0, 1), "
                         f"got pa={pa_lower}, pb={pb_upper}")
    return 0.5 * sigma * (inv_std_normal_cdf(pa_lower) - inv_std_normal_cdf(pb_upper))


def _clamped(p: float) -> float:
    if p < _P_CLAMP or p > 1.0 - _P_CLAMP:
        log.debug("probability bound %s clamped before quantile", p)
        return min(max(p, _P_CLAMP), 1.0 - _P_CLAMP)
    return p


def certify(classifier, x, cfg: SamplingConfig, mode: Mode = Mode.STANDARD) -> CertificationResult:
    """Two-stage certification of one input.

    Selection draws n0 samples and identifies the winner (abstaining when no
    label is statistically separated, or when the winner is the uncertainty
    class in cc/ncl mode). Estimation draws n fresh samples; with a runner-up
    the two bounds use level alpha/2 each, falling back to the one-vs-all
    bound at level alpha when they overlap (pa + pb > 1) or when no runner-up
    was identified. A nonpositive radius is an abstention, not an error.
    """
    mode = Mode(mode)
    work = classifier.without_threshold() if mode is Mode.STANDARD else classifier
    num_classes = work.num_classes
    counts0 = sample_under_noise(work, x, cfg.sigma, cfg.n0, cfg.seed, "selection")
    sel = _selection_outcome(num_classes, counts0, cfg.alpha, mode)
    if sel.winner is None:
        return CertificationResult(
            mode=mode, predicted=None, abstain_reason=sel.abstain_reason, runner_up=None,
            pa_lower=None, pb_upper=None, radius=None, p_uncertain_hat=None,
            one_vs_all=False, distinct_labels=sel.distinct_labels)

    counts1 = sample_under_noise(work, x, cfg.sigma, cfg.n, cfg.seed, "estimation")
    p_uncertain_hat = float(counts1[num_classes]) / cfg.n
    n_a = int(counts1[label_to_index(sel.winner, num_classes)])
    if mode is Mode.NCL:
        n_a += int(counts1[num_classes])

    one_vs_all = sel.runner_up is None
    pa = pb = None
    if sel.runner_up is not None:
        n_b = int(counts1[label_to_index(sel.runner_up, num_classes)])
        pa = clopper_pearson_lower(n_a, cfg.n, cfg.alpha / 2.0)
        pb = clopper_pearson_upper(n_b, cfg.n, cfg.alpha / 2.0)
        if pa + pb > 1.0:
            one_vs_all = True
    if one_vs_all:
        pa = clopper_pearson_lower(n_a, cfg.n, cfg.alpha)
        pb = 1.0 - pa

    radius = certified_radius(_clamped(pa), _clamped(pb), cfg.sigma)
    if radius <= 0.0:
        return CertificationResult(
            mode=mode, predicted=None, abstain_reason=REASON_NONPOSITIVE,
            runner_up=sel.runner_up, pa_lower=pa, pb_upper=pb, radius=None,
            p_uncertain_hat=p_uncertain_hat, one_vs_all=one_vs_all,
            distinct_labels=sel.distinct_labels)
    return CertificationResult(
        mode=mode, predicted=sel.winner, abstain_reason=None, runner_up=sel.runner_up,
        pa_lower=pa, pb_upper=pb, radius=radius, p_uncertain_hat=p_uncertain_hat,
        one_vs_all=one_vs_all, distinct_labels=sel.distinct_labels)


@dataclass(frozen=True)
class ExactRadius:
    """A radius from exact probabilities; negative formula values are floored."""

    raw: float

    @property
    def value(self) -> float:
        return max(self.raw, 0.0)

    @property
    def uncertifiable(self) -> bool:
        return self.raw <= 0.0


@dataclass(frozen=True)
class ExactRadii:
    standard: ExactRadius | None
    cc: ExactRadius
    ncl: ExactRadius
    clamped: bool


def _clip_prob(p: np.ndarray) -> tuple[np.ndarray, bool]:
    clamped = bool(np.any(p < _P_CLAMP) or np.any(p > 1.0 - _P_CLAMP))
    return np.clip(p, _P_CLAMP, 1.0 - _P_CLAMP), clamped


def _check_distribution(p: np.ndarray, name: str) -> None:
    if np.any(p < 0.0) or abs(float(p.sum()) - 1.0) > 1e-6:
        raise ValueError(f"{name} must be a probability vector summing to 1")


def exact_radii_from_probs(extended_probs, sigma: float, base_probs=None) -> ExactRadii:
    """All three radii from exact label probabilities.

    ``extended_probs`` has length K+1 with the uncertainty mass last. The cc
    radius pits the top confident class against the best competitor including
    the uncertainty class; the ncl radius adds the uncertainty mass to the
    winner and competes against the best confident class. The standard radius
    needs the rejection-free class probabilities, which are a separate
    quantity, so it is computed only when ``base_probs`` is supplied.
    Probabilities at 0 or 1 are clamped before the quantile (flagged).
    """
    p_ext = np.asarray(extended_probs, dtype=np.float64)
    _check_distribution(p_ext, "extended_probs")
    num_classes = p_ext.size - 1
    if num_classes < 1:
        raise ValueError("need at least one confident class")
    q_ext, clamped = _clip_prob(p_ext)

    winner = int(np.argmax(p_ext[:num_classes]))
    competitors = np.delete(q_ext, winner)  # keeps the uncertainty slot
    phi_winner = inv_std_normal_cdf(q_ext[winner])
    phi_cc_comp = inv_std_normal_cdf(float(competitors.max()))
    cc_raw = 0.5 * sigma * (phi_winner - phi_cc_comp)

    confident = np.delete(q_ext[:num_classes], winner)
    runner_mass = float(confident.max()) if confident.size else _P_CLAMP
    merged = np.clip(p_ext[winner] + p_ext[num_classes], _P_CLAMP, 1.0 - _P_CLAMP)
    ncl_raw = 0.5 * sigma * (inv_std_normal_cdf(float(merged))
                             - inv_std_normal_cdf(runner_mass))

    standard = None
    if base_probs is not None:
        p_base = np.asarray(base_probs, dtype=np.float64)
        _check_distribution(p_base, "base_probs")
        q_base, clamped_base = _clip_prob(p_base)
        clamped = clamped or clamped_base
        top = int(np.argmax(p_base))
        others = np.delete(q_base, top)
        std_raw = 0.5 * sigma * (inv_std_normal_cdf(q_base[top])
                                 - inv_std_normal_cdf(float(others.max())))
        standard = ExactRadius(std_raw)

    return ExactRadii(standard=standard, cc=ExactRadius(cc_raw),
                      ncl=ExactRadius(ncl_raw), clamped=clamped)


@dataclass(frozen=True)
class Corollary2Result:
    lhs: float  # drop of the competitor quantile when uncertainty is active
    rhs: float  # drop of the winner quantile when uncertainty is active
    predicts_improvement: bool


def corollary2_check(base_probs, extended_probs, sigma: float) -> Corollary2Result:
    """Quantile-drop comparison predicting when the cc radius beats standard.

    With matching winners, the cc radius exceeds the standard radius exactly
    when the competitor's quantile drops more than the winner's. The predicate
    is evaluated through the same arithmetic as ``exact_radii_from_probs`` so
    the two agree on every input.
    """
    p_base = np.asarray(base_probs, dtype=np.float64)
    p_ext = np.asarray(extended_probs, dtype=np.float64)
    _check_distribution(p_base, "base_probs")
    _check_distribution(p_ext, "extended_probs")
    num_classes = p_ext.size - 1
    if p_base.size != num_classes:
        raise ValueError(f"base vector has {p_base.size} classes, extended implies {num_classes}")
    winner_base = int(np.argmax(p_base))
    winner_ext = int(np.argmax(p_ext[:num_classes]))
    if winner_base != winner_ext:
        raise ValueError("winning class must match between the two vectors")

    q_base, _ = _clip_prob(p_base)
    q_ext, _ = _clip_prob(p_ext)
    phi_a_sup = inv_std_normal_cdf(q_base[winner_base])
    phi_b_sup = inv_std_normal_cdf(float(np.delete(q_base, winner_base).max()))
    phi_a_th = inv_std_normal_cdf(q_ext[winner_ext])
    phi_b_th = inv_std_normal_cdf(float(np.delete(q_ext, winner_ext).max()))

    lhs = phi_b_sup - phi_b_th
    rhs = phi_a_sup - phi_a_th
    # same comparison as cc_raw > std_raw (0.5 * sigma scaling preserves order)
    predicts = (phi_a_th - phi_b_th) > (phi_a_sup - phi_b_sup)
    return Corollary2Result(lhs=float(lhs), rhs=float(rhs), predicts_improvement=predicts)
