"""certsmooth: robustness certification for smoothed classifiers that can abstain.

A smoothed classifier predicts the most probable label of a base classifier
under Gaussian input noise. This package certifies l2 radii around inputs for
such classifiers when the base classifier is additionally equipped with an
uncertainty class: the standard consistency radius, the radius of consistent
and confident prediction (cc), and the radius within which no confident label
change can occur (ncl). Monte Carlo estimates carry Clopper-Pearson
guarantees and are validated against exact geometric oracles.
"""
from .calibrate import (CalibrationConfig, CalibrationResult, calibrate_threshold,
                        majority_vote_accuracy, sweep_grid)
from .certify import (REASON_NO_WINNER, REASON_NONPOSITIVE, REASON_UNCERTAIN,
                      CertificationResult, Corollary2Result, ExactRadii, ExactRadius,
                      Mode, PredictOutcome, SamplingConfig, certified_radius, certify,
                      corollary2_check, exact_radii_from_probs, predict_top_two,
                      select_top_labels)
from .classifiers import (UNCERTAIN, EquippedClassifier, ExtendedLabel,
                          LinearBinaryClassifier, MlpClassifier, RegionClassifier1D,
                          RegionClassifier2D, UncertaintyConfig, equipped_classify,
                          eval_mlp, eval_region, load_classifier, uncertainty_score)
from .harness import (OodFractions, PerSampleRecord, RadiusComparison, RunConfig,
                      build_certified_accuracy_table, compare_radii, load_dataset,
                      neighboring_class_histogram, ood_statistics, read_records_csv,
                      run_certify_dataset, write_records_csv)
from .oracle import (LinearModel, grid2d_smoothed_probs, linear_smoothed_prob,
                     piecewise1d_smoothed_probs, true_boundary_distance)
from .sampling import derive_seed, sample_under_noise
from .stats import (binom_p_value, clopper_pearson_lower, clopper_pearson_upper,
                    inv_std_normal_cdf, std_normal_cdf)

__version__ = "0.1.0"

__all__ = [
    "binom_p_value", "build_certified_accuracy_table", "calibrate_threshold",
    "CalibrationConfig", "CalibrationResult", "certified_radius", "certify",
    "CertificationResult", "clopper_pearson_lower", "clopper_pearson_upper",
    "compare_radii", "corollary2_check", "Corollary2Result", "derive_seed",
    "EquippedClassifier", "equipped_classify", "eval_mlp", "eval_region",
    "ExactRadii", "ExactRadius", "ExtendedLabel", "grid2d_smoothed_probs",
    "inv_std_normal_cdf", "LinearBinaryClassifier", "LinearModel",
    "linear_smoothed_prob", "load_classifier", "load_dataset",
    "majority_vote_accuracy", "MlpClassifier", "Mode", "neighboring_class_histogram",
    "ood_statistics", "OodFractions", "PerSampleRecord", "piecewise1d_smoothed_probs",
    "predict_top_two", "PredictOutcome", "RadiusComparison", "read_records_csv",
    "REASON_NO_WINNER", "REASON_NONPOSITIVE", "REASON_UNCERTAIN",
    "RegionClassifier1D", "RegionClassifier2D", "run_certify_dataset", "RunConfig",
    "sample_under_noise", "SamplingConfig", "select_top_labels", "std_normal_cdf",
    "sweep_grid", "true_boundary_distance", "UNCERTAIN", "uncertainty_score",
    "UncertaintyConfig", "write_records_csv",
]
