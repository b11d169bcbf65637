"""Command-line driver: certify datasets, calibrate thresholds, build reports."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from . import figures, harness
from .calibrate import CalibrationConfig, calibrate_threshold
from .certify import Mode, SamplingConfig
from .classifiers import MlpClassifier, UncertaintyConfig


def _add_global_flags(parser):
    parser.add_argument("--sigma", type=float, help="noise standard deviation")
    parser.add_argument("--n0", type=int, help="selection-stage sample count")
    parser.add_argument("--n", type=int, help="estimation-stage sample count")
    parser.add_argument("--alpha", type=float, help="significance level")
    parser.add_argument("--theta", type=float, help="uncertainty threshold")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--out", help="output path (CSV; figures land beside it)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="certsmooth",
        description="Robustness certification for smoothed classifiers with "
                    "uncertainty-based abstention.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cert = sub.add_parser("certify", help="certify a dataset and write records CSV")
    p_cert.add_argument("--config", required=True, help="run configuration JSON")
    p_cert.add_argument("--mode", help="comma-separated subset of standard,cc,ncl")
    p_cert.add_argument("--stride", type=int, help="take every k-th dataset sample")
    _add_global_flags(p_cert)

    p_cal = sub.add_parser("calibrate", help="select an uncertainty threshold")
    p_cal.add_argument("--config", required=True, help="run configuration JSON")
    p_cal.add_argument("--kind", required=True,
                       choices=["confidence", "margin", "entropy"])
    p_cal.add_argument("--budget", type=float, default=0.01,
                       help="tolerated relative accuracy loss (default 0.01)")
    p_cal.add_argument("--steps", type=int, default=1000, help="sweep resolution")
    _add_global_flags(p_cal)

    p_table = sub.add_parser("table", help="certified-accuracy table from records")
    p_table.add_argument("--records", required=True)
    p_table.add_argument("--grid", default="0,0.2,0.4,0.6,0.8",
                         help="comma-separated radius grid")
    _add_global_flags(p_table)

    p_cmp = sub.add_parser("compare", help="cc/ncl radius change relative to standard")
    p_cmp.add_argument("--records", required=True)
    _add_global_flags(p_cmp)

    p_ood = sub.add_parser("ood", help="uncertainty-behaviour fractions, ID vs shifted")
    p_ood.add_argument("--id", dest="id_records", required=True)
    p_ood.add_argument("--ood", dest="ood_records", required=True)
    _add_global_flags(p_ood)

    p_hist = sub.add_parser("hist", help="distinct-label histogram from records")
    p_hist.add_argument("--records", required=True)
    _add_global_flags(p_hist)
    return parser


def _apply_overrides(cfg: harness.RunConfig, args) -> harness.RunConfig:
    sampling = cfg.sampling
    for field in ("sigma", "n0", "n", "alpha", "seed"):
        value = getattr(args, field, None)
        if value is not None:
            sampling = replace(sampling, **{field: value})
    uncertainty = cfg.uncertainty
    if getattr(args, "theta", None) is not None:
        if uncertainty is None:
            raise SystemExit("--theta given but the config has no uncertainty block")
        uncertainty = replace(uncertainty, theta=args.theta)
    modes = cfg.modes
    if getattr(args, "mode", None):
        modes = tuple(Mode(m.strip()) for m in args.mode.split(",") if m.strip())
    stride = cfg.stride
    if getattr(args, "stride", None) is not None:
        stride = args.stride
    output = args.out or cfg.output
    return replace(cfg, sampling=sampling, uncertainty=uncertainty, modes=modes,
                   stride=stride, output=output)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_certify(args) -> int:
    cfg = _apply_overrides(harness.RunConfig.from_file(args.config), args)
    records = harness.run_certify_dataset(cfg)
    if cfg.output is None:
        raise SystemExit("no output path: pass --out or set \"output\" in the config")
    harness.write_records_csv(records, cfg.output)
    certified = sum(1 for r in records if not r.result.abstained)
    print(f"wrote {len(records)} records ({certified} certified) to {cfg.output}")
    return 0


def _cmd_calibrate(args) -> int:
    run_cfg = harness.RunConfig.from_file(args.config)
    if run_cfg.classifier_kind not in ("mlp", "linear"):
        raise SystemExit("calibration needs a probabilistic classifier (mlp or linear)")
    base = MlpClassifier.load(run_cfg.classifier_path) if run_cfg.classifier_kind == "mlp" \
        else harness.load_classifier("linear", run_cfg.classifier_path, None).base
    sampling = run_cfg.sampling
    cal_cfg = CalibrationConfig(
        kind=args.kind,
        sigma=args.sigma if args.sigma is not None else sampling.sigma,
        budget=args.budget,
        steps=args.steps,
        n0=args.n0 if args.n0 is not None else sampling.n0,
        seed=args.seed if args.seed is not None else sampling.seed)
    data = harness.load_dataset(run_cfg.dataset_path)
    result = calibrate_threshold(base, cal_cfg, data)
    flag = " (warning: least restrictive threshold already violates the budget)" \
        if result.warned else ""
    print(f"theta={result.theta!r} baseline_accuracy={result.baseline_accuracy:.4f}{flag}")
    if args.out:
        out = Path(args.out)
        _write_csv(out, ("theta", "accuracy"),
                   [(repr(t), repr(a)) for t, a in result.trace])
        figures.save_calibration_trace(result.trace, result.theta, out.with_suffix(".png"))
        print(f"wrote sweep trace to {out}")
    return 0


def _cmd_table(args) -> int:
    records = harness.read_records_csv(args.records)
    grid = [float(tok) for tok in args.grid.split(",") if tok.strip() != ""]
    rows = harness.build_certified_accuracy_table(records, grid)
    text = harness.format_accuracy_table(rows)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        _write_csv(out, ("mode", "radius", "certified_accuracy"),
                   [(m, repr(r), repr(a)) for m, r, a in rows])
        out.with_suffix(".txt").write_text(text, encoding="utf-8")
        figures.save_accuracy_curves(rows, out.with_suffix(".png"))
        print(f"wrote table to {out}")
    return 0


def _cmd_compare(args) -> int:
    records = harness.read_records_csv(args.records)
    summary = harness.compare_radii(records)
    pos, neg, zero = summary.sign_fractions
    print(f"eligible samples: {summary.total}")
    print(f"mean relative change cc vs standard:  {summary.mean_rel_cc:+.4%}")
    print(f"mean relative change ncl vs standard: {summary.mean_rel_ncl:+.4%}")
    print(f"cc-standard sign split: positive {pos:.2%}, negative {neg:.2%}, zero {zero:.2%}")
    if args.out:
        _write_csv(Path(args.out), ("metric", "value"), [
            ("mean_rel_cc", repr(summary.mean_rel_cc)),
            ("mean_rel_ncl", repr(summary.mean_rel_ncl)),
            ("positive", summary.positive),
            ("negative", summary.negative),
            ("zero", summary.zero),
            ("total", summary.total)])
        print(f"wrote summary to {args.out}")
    return 0


def _cmd_ood(args) -> int:
    frac_id, frac_ood = harness.ood_statistics(
        harness.read_records_csv(args.id_records),
        harness.read_records_csv(args.ood_records))
    for name in harness.OOD_METRICS:
        print(f"{name}: id={getattr(frac_id, name):.4f} ood={getattr(frac_ood, name):.4f}")
    if args.out:
        out = Path(args.out)
        rows = [("id", name, repr(getattr(frac_id, name))) for name in harness.OOD_METRICS]
        rows += [("ood", name, repr(getattr(frac_ood, name))) for name in harness.OOD_METRICS]
        _write_csv(out, ("dataset", "metric", "value"), rows)
        figures.save_ood_scatter(frac_id, frac_ood, out.with_suffix(".png"))
        print(f"wrote fractions to {out}")
    return 0


def _cmd_hist(args) -> int:
    records = harness.read_records_csv(args.records)
    hist = harness.neighboring_class_histogram(records)
    for mode in sorted(hist):
        bins = " ".join(f"{k}:{v}" for k, v in sorted(hist[mode].items()))
        print(f"{mode}: {bins}")
    if args.out:
        out = Path(args.out)
        rows = [(mode, k, v) for mode in sorted(hist)
                for k, v in sorted(hist[mode].items())]
        _write_csv(out, ("mode", "distinct_labels", "count"), rows)
        figures.save_label_histogram(hist, out.with_suffix(".png"))
        print(f"wrote histogram to {out}")
    return 0


_COMMANDS = {
    "certify": _cmd_certify,
    "calibrate": _cmd_calibrate,
    "table": _cmd_table,
    "compare": _cmd_compare,
    "ood": _cmd_ood,
    "hist": _cmd_hist,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
