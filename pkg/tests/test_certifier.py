"""Certification engine: sampling, selection, radii, exact-probability forms."""
import dataclasses

import numpy as np
import pytest

from certsmooth.certify import (REASON_NO_WINNER, REASON_UNCERTAIN, Mode,
                                SamplingConfig, certified_radius, certify,
                                corollary2_check, exact_radii_from_probs,
                                predict_top_two, select_top_labels)
from certsmooth.classifiers import (UNCERTAIN, EquippedClassifier, ExtendedLabel,
                                    MlpClassifier, RegionClassifier1D,
                                    UncertaintyConfig)
from certsmooth.oracle import piecewise1d_smoothed_probs
from certsmooth.sampling import noise_matrix, sample_under_noise
from certsmooth.stats import inv_std_normal_cdf, std_normal_cdf


def constant_classifier(num_classes: int, winner: int) -> EquippedClassifier:
    bias = np.full(num_classes, -5.0)
    bias[winner] = 5.0
    w = np.zeros((num_classes, 2))
    return EquippedClassifier(MlpClassifier([(w, bias, "none")], 2, num_classes), None)


SPLIT_AT_ZERO = RegionClassifier1D([0.0], [(0, True), (1, True)])
SPLIT_AT_HALF = RegionClassifier1D([0.5], [(0, True), (1, True)])
BAND = RegionClassifier1D([0.3, 0.7], [(0, True), (0, False), (1, True)])


class TestSampleUnderNoise:
    def test_constant_classifier(self):
        counts = sample_under_noise(constant_classifier(5, 3), [0.1, -0.4], 1.0,
                                    500, 7, "selection")
        assert counts[3] == 500 and counts.sum() == 500

    def test_split_ratio_within_five_sd(self):
        n = 10_000
        counts = sample_under_noise(SPLIT_AT_ZERO, [0.0], 1.0, n, 123, "selection")
        sd = np.sqrt(n * 0.25)
        assert abs(counts[0] - n / 2) <= 5 * sd

    def test_tiny_sigma_stays_on_own_label(self):
        counts = sample_under_noise(SPLIT_AT_HALF, [-0.2], 1e-8, 2000, 5, "selection")
        assert counts[0] == 2000

    def test_deterministic_across_runs(self):
        a = sample_under_noise(BAND, [0.1], 0.3, 12_345, 99, "estimation")
        b = sample_under_noise(BAND, [0.1], 0.3, 12_345, 99, "estimation")
        assert np.array_equal(a, b)

    def test_stage_tags_give_fresh_draws(self):
        a = sample_under_noise(SPLIT_AT_ZERO, [0.0], 1.0, 1000, 99, "selection")
        b = sample_under_noise(SPLIT_AT_ZERO, [0.0], 1.0, 1000, 99, "estimation")
        assert not np.array_equal(a, b)

    def test_noise_depends_only_on_sample_index(self):
        # prefix property: batching cannot change any sample's perturbation
        full = noise_matrix(31, "selection", 10_000, 3)
        assert np.array_equal(noise_matrix(31, "selection", 500, 3), full[:500])
        assert np.array_equal(noise_matrix(31, "selection", 9000, 3), full[:9000])

    def test_rejects_unknown_stage(self):
        with pytest.raises(ValueError):
            sample_under_noise(SPLIT_AT_ZERO, [0.0], 1.0, 10, 0, "warmup")


class TestSelectTopLabels:
    def test_unanimous_counts(self):
        winner, runner = select_top_labels([1000, 0, 0], 0.001)
        assert winner == 0 and runner is None

    def test_close_race_abstains(self):
        counts = [520, 480, 0]
        winner, runner = select_top_labels(counts, 0.001)
        assert winner is None  # p-value 0.1087 > alpha

    def test_clear_winner_and_runner_up(self):
        winner, runner = select_top_labels([700, 250, 50], 0.001)
        assert winner == 0 and runner == 1

    def test_tie_goes_to_lowest_index(self):
        # tied counts: the lower label index takes the winner slot (its
        # significance test sees p-value 0.516, so alpha must sit above that)
        winner, runner = select_top_labels([0, 300, 300, 0], 0.6)
        assert winner == 1 and runner == 2

    def test_exclusion_removes_competitor_slot(self):
        counts = [700, 0, 60, 240]  # index 3 plays the uncertainty slot
        w_all, r_all = select_top_labels(counts, 0.001)
        assert (w_all, r_all) == (0, 3)
        w_ncl, r_ncl = select_top_labels(counts, 0.001, exclude=3)
        assert (w_ncl, r_ncl) == (0, 2)


class TestPredictTopTwo:
    def test_constant_classifier_no_runner_up(self):
        cfg = SamplingConfig(sigma=0.5, n0=1000, n=1000, alpha=0.001, seed=1)
        outcome = predict_top_two(constant_classifier(4, 2), [0.0, 0.0], cfg)
        assert outcome.winner == ExtendedLabel(2)
        assert outcome.runner_up is None
        assert outcome.distinct_labels == 1

    def test_balanced_split_abstains(self):
        cfg = SamplingConfig(sigma=1.0, n0=1000, n=1000, alpha=0.001, seed=2)
        outcome = predict_top_two(SPLIT_AT_ZERO, [0.0], cfg)
        assert outcome.winner is None
        assert outcome.abstain_reason == REASON_NO_WINNER

    def test_cc_mode_uncertain_winner_abstains(self):
        wide_band = RegionClassifier1D([-5.0, 5.0], [(0, True), (0, False), (1, True)])
        cfg = SamplingConfig(sigma=0.5, n0=500, n=500, alpha=0.001, seed=3)
        outcome = predict_top_two(wide_band, [0.0], cfg, Mode.CC)
        assert outcome.winner is None
        assert outcome.abstain_reason == REASON_UNCERTAIN


class TestCertifiedRadius:
    def test_equal_bounds_give_zero(self):
        assert certified_radius(0.4, 0.4, 1.0) == 0.0

    def test_symmetric_bounds_recover_distance(self):
        pa = std_normal_cdf(2.0)
        assert certified_radius(pa, 1.0 - pa, 0.25) == pytest.approx(0.5, abs=1e-16)
        assert certified_radius(0.977250, 0.022750, 0.25) == pytest.approx(0.5, abs=1e-5)

    def test_one_vs_all_form(self):
        assert certified_radius(0.75, 0.25, 1.0) == pytest.approx(0.674490, abs=1e-6)
        assert certified_radius(0.75, 0.25, 1.0) == pytest.approx(
            inv_std_normal_cdf(0.75), abs=1e-15)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            certified_radius(0.0, 0.5, 1.0)
        with pytest.raises(ValueError):
            certified_radius(0.9, 1.0, 1.0)

    def test_monotone_in_bounds_and_linear_in_sigma(self):
        base = certified_radius(0.9, 0.05, 1.0)
        assert certified_radius(0.95, 0.05, 1.0) > base
        assert certified_radius(0.9, 0.02, 1.0) > base
        assert certified_radius(0.9, 0.05, 2.0) == pytest.approx(2 * base, rel=1e-12)


class TestCertify:
    CFG = SamplingConfig(sigma=0.25, n0=1000, n=10_000, alpha=0.001, seed=20)

    def test_disabled_threshold_collapses_modes(self, fixtures_dir):
        mlp = MlpClassifier.load(fixtures_dir / "mlp_2d.json")
        clf = EquippedClassifier(mlp, None)
        results = [certify(clf, [0.6, -0.1], self.CFG, mode) for mode in Mode]
        stripped = {dataclasses.replace(r, mode=Mode.STANDARD) for r in results}
        assert len(stripped) == 1

    def test_radius_never_exceeds_boundary_distance(self):
        # split at 0.5, x = 0: the exact radius is the boundary distance 0.5
        for seed in range(10):
            cfg = dataclasses.replace(self.CFG, seed=seed)
            res = certify(SPLIT_AT_HALF, [0.0], cfg, Mode.STANDARD)
            assert res.radius is not None
            assert res.radius <= 0.5 + 1e-9

    def test_radius_grows_toward_exact_value_with_n(self):
        small = dataclasses.replace(self.CFG, n=2000)
        large = dataclasses.replace(self.CFG, n=100_000)
        r_small = certify(SPLIT_AT_HALF, [0.0], small, Mode.STANDARD).radius
        r_large = certify(SPLIT_AT_HALF, [0.0], large, Mode.STANDARD).radius
        assert r_small < r_large <= 0.5

    def test_ncl_beats_standard_of_band_free_classifier(self):
        # merging the uncertainty band extends the winner mass to the far
        # breakpoint, so the ncl radius must beat the band-free standard one
        split_at_band_start = RegionClassifier1D([0.3], [(0, True), (1, True)])
        r_ncl = certify(BAND, [0.0], self.CFG, Mode.NCL)
        r_std = certify(split_at_band_start, [0.0], self.CFG, Mode.STANDARD)
        assert r_ncl.radius is not None and r_std.radius is not None
        assert r_ncl.radius > r_std.radius
        # exact radii from the oracle agree on the direction
        exact_ncl = 0.25 * 0.5 * (inv_std_normal_cdf(std_normal_cdf(2.8))
                                  - inv_std_normal_cdf(1 - std_normal_cdf(2.8)))
        exact_std = 0.25 * 0.5 * (inv_std_normal_cdf(std_normal_cdf(1.2))
                                  - inv_std_normal_cdf(1 - std_normal_cdf(1.2)))
        assert exact_ncl > exact_std
        assert r_ncl.radius <= exact_ncl + 1e-9
        assert r_std.radius <= exact_std + 1e-9

    def test_estimation_stage_uncertain_fraction(self):
        res = certify(BAND, [0.0], self.CFG, Mode.NCL)
        exact = piecewise1d_smoothed_probs(BAND, 0.0, 0.25)
        sd = np.sqrt(exact[2] * (1 - exact[2]) / self.CFG.n)
        assert res.p_uncertain_hat == pytest.approx(exact[2], abs=6 * sd)

    def test_one_vs_all_invariants(self):
        # two mirrored competitors draw equal counts, so no runner-up is ever
        # statistically separated and the one-vs-all path must engage
        rc = RegionClassifier1D([-0.5, 0.5], [(2, True), (0, True), (1, True)])
        res = certify(rc, [0.0], self.CFG, Mode.STANDARD)
        assert res.one_vs_all
        assert res.pb_upper == 1.0 - res.pa_lower
        assert res.radius == pytest.approx(
            0.25 * inv_std_normal_cdf(res.pa_lower), abs=1e-15)

    def test_result_invariants_when_certified(self):
        res = certify(SPLIT_AT_HALF, [0.0], self.CFG, Mode.STANDARD)
        assert res.radius > 0.0
        assert res.pa_lower > res.pb_upper
        assert not res.abstained

    def test_bit_identical_across_runs(self):
        a = certify(BAND, [0.05], self.CFG, Mode.CC)
        b = certify(BAND, [0.05], self.CFG, Mode.CC)
        assert a == b


class TestExactRadii:
    def test_no_uncertain_mass_makes_cc_equal_ncl(self):
        radii = exact_radii_from_probs([0.7, 0.3, 0.0], 1.0)
        assert radii.cc.raw == pytest.approx(radii.ncl.raw, abs=1e-15)

    def test_direct_formula_evaluation(self):
        radii = exact_radii_from_probs([0.7, 0.2, 0.1], 1.0)
        expected_cc = 0.5 * (inv_std_normal_cdf(0.7) - inv_std_normal_cdf(0.2))
        expected_ncl = 0.5 * (inv_std_normal_cdf(0.8) - inv_std_normal_cdf(0.2))
        assert radii.cc.raw == pytest.approx(expected_cc, abs=1e-14)
        assert radii.ncl.raw == pytest.approx(expected_ncl, abs=1e-14)
        assert radii.standard is None

    def test_cc_never_exceeds_ncl(self):
        rng = np.random.default_rng(17)
        for _ in range(2000):
            p = rng.dirichlet(np.ones(5))
            radii = exact_radii_from_probs(p, 0.5)
            assert radii.cc.raw <= radii.ncl.raw + 1e-12

    def test_negative_radius_flagged(self):
        radii = exact_radii_from_probs([0.2, 0.5, 0.3], 1.0)
        # winner (confident top) is index 1; cc competitor mass 0.3 < 0.5, fine;
        # force the flag with a dominated winner instead
        radii = exact_radii_from_probs([0.3, 0.3, 0.4], 1.0)
        assert radii.cc.uncertifiable
        assert radii.cc.value == 0.0

    def test_degenerate_mass_clamped(self):
        radii = exact_radii_from_probs([1.0, 0.0, 0.0], 1.0)
        assert radii.clamped
        assert np.isfinite(radii.cc.raw)

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            exact_radii_from_probs([0.7, 0.7, 0.1], 1.0)


class TestCorollary2:
    def test_runner_up_mass_moved_to_uncertain_improves(self):
        check = corollary2_check([0.6, 0.4], [0.6, 0.2, 0.2], 1.0)
        assert check.predicts_improvement
        assert check.lhs > check.rhs
        radii = exact_radii_from_probs([0.6, 0.2, 0.2], 1.0, base_probs=[0.6, 0.4])
        assert radii.cc.raw > radii.standard.raw

    def test_identical_vectors_no_improvement(self):
        check = corollary2_check([0.6, 0.4], [0.6, 0.4, 0.0], 1.0)
        assert check.lhs == pytest.approx(0.0, abs=1e-15)
        assert check.rhs == pytest.approx(0.0, abs=1e-15)
        assert not check.predicts_improvement

    def test_winner_mass_moved_to_uncertain_hurts(self):
        check = corollary2_check([0.9, 0.1], [0.7, 0.1, 0.2], 1.0)
        assert not check.predicts_improvement
        radii = exact_radii_from_probs([0.7, 0.1, 0.2], 1.0, base_probs=[0.9, 0.1])
        assert radii.cc.raw < radii.standard.raw

    def test_equivalence_on_random_pairs(self):
        rng = np.random.default_rng(23)
        checked = 0
        while checked < 500:
            base = rng.dirichlet(np.ones(4))
            move = rng.uniform(0.0, 0.8, size=4)
            ext = np.append(base * (1 - move), (base * move).sum())
            if int(np.argmax(base)) != int(np.argmax(ext[:4])):
                continue
            check = corollary2_check(base, ext, 1.0)
            radii = exact_radii_from_probs(ext, 1.0, base_probs=base)
            assert check.predicts_improvement == (radii.cc.raw > radii.standard.raw)
            checked += 1

    def test_mismatched_winner_rejected(self):
        with pytest.raises(ValueError):
            corollary2_check([0.6, 0.4], [0.1, 0.6, 0.3], 1.0)
