"""Dataset-level certification runs and report aggregation.

Per-sample certification fans out over a thread pool (capped by the
CERTSMOOTH_THREADS environment variable); each sample derives its own noise
seed from (run seed, sample index), so the records CSV is byte-identical
regardless of worker count. All modes of a sample share the same derived seed
and therefore the same selection-stage draws.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .certify import (REASON_UNCERTAIN, CertificationResult, Mode, SamplingConfig,
                      certify)
from .classifiers import UNCERTAIN, ExtendedLabel, UncertaintyConfig, load_classifier
from .sampling import derive_seed

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("index", "true_label", "mode", "predicted", "abstain_reason",
                  "radius", "pa_lower", "pb_upper", "p_uncertain_hat", "one_vs_all",
                  "distinct_labels", "runner_up")

_MODE_ORDER = (Mode.STANDARD, Mode.CC, Mode.NCL)


@dataclass(frozen=True)
class RunConfig:
    classifier_kind: str
    classifier_path: str
    uncertainty: UncertaintyConfig | None
    sampling: SamplingConfig
    modes: tuple
    dataset_path: str
    stride: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be positive, got {self.stride}")

    @staticmethod
    def from_file(path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        base = path.parent

        def resolve(p):
            p = Path(p)
            return str(p if p.is_absolute() else base / p)

        uncertainty = None
        if raw.get("uncertainty"):
            uncertainty = UncertaintyConfig(kind=raw["uncertainty"]["kind"],
                                            theta=float(raw["uncertainty"]["theta"]))
        sampling = SamplingConfig(**raw["sampling"])
        modes = tuple(Mode(m) for m in raw.get("modes", []))
        output = raw.get("output")
        return RunConfig(
            classifier_kind=raw["classifier"]["kind"],
            classifier_path=resolve(raw["classifier"]["path"]),
            uncertainty=uncertainty,
            sampling=sampling,
            modes=modes,
            dataset_path=resolve(raw["dataset"]),
            stride=int(raw.get("stride", 1)),
            output=resolve(output) if output else None,
        )


@dataclass(frozen=True)
class PerSampleRecord:
    index: int
    true_label: int
    result: CertificationResult


def load_dataset(path) -> list:
    """JSON Lines dataset: one {"x": [...], "label": int} object per line."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                samples.append((np.asarray(obj["x"], dtype=np.float64), int(obj["label"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad dataset line ({exc})") from exc
    if not samples:
        raise ValueError(f"{path}: dataset is empty")
    return samples


def worker_count() -> int:
    env = os.environ.get("CERTSMOOTH_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_certify_dataset(cfg: RunConfig) -> list:
    """Certify every stride-selected sample in every requested mode."""
    if not cfg.modes:
        log.warning("empty mode set: nothing to certify")
        return []
    classifier = load_classifier(cfg.classifier_kind, cfg.classifier_path, cfg.uncertainty)
    data = load_dataset(cfg.dataset_path)
    selected = [(i, x, label) for i, (x, label) in enumerate(data)][::cfg.stride]
    modes = [m for m in _MODE_ORDER if m in cfg.modes]

    def one_sample(entry):
        index, x, label = entry
        sample_cfg = replace(cfg.sampling, seed=derive_seed(cfg.sampling.seed, index))
        return [PerSampleRecord(index, label, certify(classifier, x, sample_cfg, mode))
                for mode in modes]

    workers = worker_count()
    if workers == 1 or len(selected) == 1:
        nested = [one_sample(entry) for entry in selected]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(one_sample, selected))
    return [record for group in nested for record in group]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in records:
        r = rec.result
        writer.writerow([
            rec.index, rec.true_label, r.mode.value,
            _fmt(str(r.predicted) if r.predicted is not None else None),
            _fmt(r.abstain_reason), _fmt(r.radius), _fmt(r.pa_lower), _fmt(r.pb_upper),
            _fmt(r.p_uncertain_hat), _fmt(r.one_vs_all), r.distinct_labels,
            _fmt(str(r.runner_up) if r.runner_up is not None else None),
        ])
    return buf.getvalue()


def write_records_csv(records, path) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8")


def read_records_csv(path) -> list:
    records = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            result = CertificationResult(
                mode=Mode(row["mode"]),
                predicted=ExtendedLabel.parse(row["predicted"]) if row["predicted"] else None,
                abstain_reason=row["abstain_reason"] or None,
                runner_up=ExtendedLabel.parse(row["runner_up"]) if row["runner_up"] else None,
                pa_lower=float(row["pa_lower"]) if row["pa_lower"] else None,
                pb_upper=float(row["pb_upper"]) if row["pb_upper"] else None,
                radius=float(row["radius"]) if row["radius"] else None,
                p_uncertain_hat=float(row["p_uncertain_hat"]) if row["p_uncertain_hat"] else None,
                one_vs_all=row["one_vs_all"] == "true",
                distinct_labels=int(row["distinct_labels"]),
            )
            records.append(PerSampleRecord(int(row["index"]), int(row["true_label"]), result))
    return records


DEFAULT_RADIUS_GRID = (0.0, 0.2, 0.4, 0.6, 0.8)


def build_certified_accuracy_table(records, radii_grid=DEFAULT_RADIUS_GRID) -> list:
    """Certified accuracy per mode and grid radius.

    A sample counts at radius r when it did not abstain, the predicted label
    equals the true label, and the certified radius strictly exceeds r; the
    denominator is every record of the mode.
    """
    rows = []
    for mode in _MODE_ORDER:
        group = [rec for rec in records if rec.result.mode is mode]
        if not group:
            continue
        for r in radii_grid:
            hits = sum(
                1 for rec in group
                if not rec.result.abstained
                and rec.result.predicted == ExtendedLabel(rec.true_label)
                and rec.result.radius > r)
            rows.append((mode.value, float(r), hits / len(group)))
    return rows


def format_accuracy_table(rows) -> str:
    modes = []
    for mode, _, _ in rows:
        if mode not in modes:
            modes.append(mode)
    radii = sorted({r for _, r, _ in rows})
    lookup = {(mode, r): acc for mode, r, acc in rows}
    header = "radius  " + "  ".join(f"{m:>8}" for m in modes)
    lines = [header]
    for r in radii:
        cells = "  ".join(f"{lookup.get((m, r), float('nan')):8.4f}" for m in modes)
        lines.append(f"{r:6.2f}  {cells}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RadiusComparison:
    """Per-sample relative change of the cc/ncl radii against the standard one."""

    mean_rel_cc: float
    mean_rel_ncl: float
    positive: int
    negative: int
    zero: int
    total: int

    @property
    def sign_fractions(self):
        if self.total == 0:
            return (0.0, 0.0, 0.0)
        return (self.positive / self.total, self.negative / self.total, self.zero / self.total)


def compare_radii(records) -> RadiusComparison:
    """Summary over samples that certified in all three modes with one winner
    matching the true label (so the ratios compare like with like)."""
    by_index = {}
    for rec in records:
        by_index.setdefault(rec.index, {})[rec.result.mode] = rec
    rel_cc, rel_ncl = [], []
    pos = neg = zero = 0
    for index, group in sorted(by_index.items()):
        if set(group) != {Mode.STANDARD, Mode.CC, Mode.NCL}:
            continue
        std, cc, ncl = group[Mode.STANDARD], group[Mode.CC], group[Mode.NCL]
        if any(rec.result.abstained for rec in (std, cc, ncl)):
            continue
        winners = {rec.result.predicted for rec in (std, cc, ncl)}
        if winners != {ExtendedLabel(std.true_label)}:
            continue
        r, r_cc, r_ncl = std.result.radius, cc.result.radius, ncl.result.radius
        rel_cc.append((r_cc - r) / r)
        rel_ncl.append((r_ncl - r) / r)
        if r_cc > r:
            pos += 1
        elif r_cc < r:
            neg += 1
        else:
            zero += 1
    total = pos + neg + zero
    return RadiusComparison(
        mean_rel_cc=float(np.mean(rel_cc)) if rel_cc else 0.0,
        mean_rel_ncl=float(np.mean(rel_ncl)) if rel_ncl else 0.0,
        positive=pos, negative=neg, zero=zero, total=total)


OOD_METRICS = ("uncertain_predicted", "runner_up_uncertain", "no_runner_up",
               "uncertain_mass_zero", "abstained")


@dataclass(frozen=True)
class OodFractions:
    uncertain_predicted: float
    runner_up_uncertain: float
    no_runner_up: float
    uncertain_mass_zero: float
    abstained: float

    def as_dict(self):
        return {name: getattr(self, name) for name in OOD_METRICS}


def _cc_fractions(records) -> OodFractions:
    cc = [rec.result for rec in records if rec.result.mode is Mode.CC]
    if not cc:
        raise ValueError("need cc-mode records for the distribution-shift summary")
    n = len(cc)
    return OodFractions(
        uncertain_predicted=sum(r.abstain_reason == REASON_UNCERTAIN for r in cc) / n,
        runner_up_uncertain=sum(r.runner_up == UNCERTAIN for r in cc) / n,
        no_runner_up=sum(r.runner_up is None and r.pa_lower is not None for r in cc) / n,
        uncertain_mass_zero=sum(r.p_uncertain_hat == 0.0 for r in cc) / n,
        abstained=sum(r.abstain_reason is not None for r in cc) / n)


def ood_statistics(records_id, records_ood):
    """Uncertainty-behaviour fractions on in-distribution vs shifted records."""
    return _cc_fractions(records_id), _cc_fractions(records_ood)


def neighboring_class_histogram(records) -> dict:
    """Per mode: histogram of distinct selection-stage labels per sample."""
    out = {}
    for rec in records:
        hist = out.setdefault(rec.result.mode.value, {})
        hist[rec.result.distinct_labels] = hist.get(rec.result.distinct_labels, 0) + 1
    return out
