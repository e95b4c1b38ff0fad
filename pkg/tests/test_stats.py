import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.stats.weightstats import DescrStatsW

import oracles
from klm3d.errors import DegenerateRegression, InsufficientData, InsufficientModalities, ZeroVariance
from klm3d.stats import (
    EvalConfig,
    TrialRecord,
    dagger,
    effect_band,
    evaluate,
    fit_hand_model,
    fit_id_crit,
    fit_linear,
    mean_rank_difference,
    pairwise_prediction_accuracy,
    per_trial_percent,
    percent_difference,
    paired_z_test,
    rank_modalities,
    remove_failed_and_outliers,
    tost_equivalence,
)

MENU_PRED = {"ControllerBlink": 0.83, "Controller": 0.84, "GazeController": 0.89,
             "Hand": 1.19, "GazeAirtap": 1.22, "GazeDwell": 1.33}
MENU_ACT = {"ControllerBlink": 1.07, "Controller": 0.76, "GazeController": 1.00,
            "Hand": 0.96, "GazeAirtap": 1.21, "GazeDwell": 1.38}


def records(deltas, modality="M", predicted=1000.0, failed=()):
    return [TrialRecord("P1", modality, str(i), predicted + d, predicted, i in failed)
            for i, d in enumerate(deltas)]


def standardized(n):
    """n values with mean 0 and sample SD exactly 1 (up to rounding)."""
    c = math.sqrt((n - 1) / n)
    return np.array([c if i % 2 == 0 else -c for i in range(n)])


class TestOutliers:
    def test_boundary_is_kept(self):
        kept, removed = remove_failed_and_outliers(records([0, 0, 0, 0, 100]))
        assert len(kept) == 5 and removed == []

    def test_constant_deltas(self):
        kept, removed = remove_failed_and_outliers(records([7.0] * 10))
        assert len(kept) == 10 and removed == []

    def test_single_spike(self):
        kept, removed = remove_failed_and_outliers(records([0] * 99 + [1000]))
        assert [r.trial_id for r in removed] == ["99"]
        assert oracles.kept_mask([0] * 99 + [1000]) == [True] * 99 + [False]

    def test_failed_excluded_before_statistics(self):
        # the failed trial's huge delta must not inflate the SD
        recs = records([0] * 20 + [30, 5000], failed={21})
        kept, removed = remove_failed_and_outliers(recs)
        assert {r.trial_id for r in removed} == {"20", "21"}

    def test_per_modality(self):
        recs = records([0] * 20 + [50], "A") + records([50] * 21, "B")
        kept, removed = remove_failed_and_outliers(recs)
        assert [(r.modality, r.trial_id) for r in removed] == [("A", "20")]

    def test_single_pass_not_idempotent(self):
        kept, removed = remove_failed_and_outliers(records([0] * 10 + [5, 40]))
        assert [r.trial_id for r in removed] == ["11"]
        kept2, removed2 = remove_failed_and_outliers(kept)
        assert [r.trial_id for r in removed2] == ["10"]

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            remove_failed_and_outliers(records([1, 2, 3], failed={0}))

    def test_multiplier(self):
        kept, removed = remove_failed_and_outliers(records([0] * 10 + [5, 40]), sd_multiplier=3.5)
        assert removed == []


class TestPercentDifference:
    def test_equal(self):
        assert percent_difference(1.0, 1.0) == 0.0

    def test_controller_blink(self):
        assert percent_difference(1.07, 0.83) == pytest.approx(0.24 / 0.95, abs=1e-12)
        assert percent_difference(1.07, 0.83) == pytest.approx(0.2526, abs=1e-4)

    def test_gaze_airtap(self):
        assert percent_difference(1.21, 1.22) == pytest.approx(0.0082, abs=1e-4)

    def test_forms(self):
        assert percent_difference(1.07, 0.83, "vs-predicted") == pytest.approx(0.24 / 0.83)
        assert percent_difference(1.07, 0.83, "vs-actual") == pytest.approx(0.24 / 1.07)
        with pytest.raises(ValueError):
            percent_difference(1, 1, "relative")

    def test_per_trial(self):
        np.testing.assert_allclose(per_trial_percent([110, 90], [100, 100]), [0.1, -0.1])
        np.testing.assert_allclose(per_trial_percent([110], [100], "vs-actual"), [10 / 110])


class TestZTest:
    def test_symmetric(self):
        r = paired_z_test([-1, 1, -1, 1], [0, 0, 0, 0])
        assert r.z == 0.0 and r.p == 1.0

    def test_two_sigma(self):
        deltas = 0.1 + 0.5 * standardized(100)
        r = paired_z_test(deltas, np.zeros(100))
        assert r.z == pytest.approx(2.0, abs=1e-9)
        assert r.p == pytest.approx(0.0455002638963584, abs=1e-3)
        assert r.p == pytest.approx(0.0455002638963584, abs=1e-9)
        assert r.d == pytest.approx(0.2)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            paired_z_test([1.3] * 5, [1.0] * 5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            paired_z_test([1, 2], [1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(100, 2000), min_size=3, max_size=40), st.integers(0, 1000))
    def test_sign_convention(self, predicted, seed):
        rng = np.random.default_rng(seed)
        actual = np.asarray(predicted) + rng.normal(0, 50, len(predicted))
        if np.ptp(actual - predicted) == 0:
            return
        r = paired_z_test(actual, predicted)
        assert (r.z > 0) == (np.mean(actual) > np.mean(predicted))

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        a, p = rng.normal(1000, 200, 57), rng.normal(980, 200, 57)
        ref = oracles.paired_z(a, p)
        r = paired_z_test(a, p)
        assert r.z == pytest.approx(float(ref["z"]), rel=1e-12)
        assert r.p == pytest.approx(float(ref["p"]), abs=1e-12)


class TestEffectBands:
    @pytest.mark.parametrize("d,band,marks", [
        (0.0, "negligible", ""), (-0.19, "negligible", ""), (0.2, "small", "†"), (-0.39, "small", "†"),
        (0.5, "medium", "††"), (-0.63, "medium", "††"), (0.8, "large", "†††"), (1.26, "large", "†††"),
    ])
    def test_bands(self, d, band, marks):
        assert effect_band(d) == band
        assert dagger(d) == marks


class TestTost:
    def test_tight_and_centered(self):
        r = tost_equivalence(0.05 * standardized(500))
        assert r.equivalent and r.p < 1e-6

    def test_mean_beyond_bound(self):
        r = tost_equivalence(0.30 + 0.1 * standardized(1000))
        assert not r.equivalent and r.p > 0.5

    def test_wide_interval(self):
        x = 0.19 + 0.5 * standardized(10)
        r = tost_equivalence(x)
        assert not r.equivalent
        # mpmath t-CDF oracle for m=0.19, s=0.5, n=10
        assert r.p == pytest.approx(0.47547668186976401, abs=1e-9)
        assert r.ci_low < -0.2 or r.ci_high > 0.2

    def test_matches_statsmodels(self):
        rng = np.random.default_rng(5)
        x = rng.normal(0.05, 0.3, 80)
        r = tost_equivalence(x)
        p_sm, lower, upper = DescrStatsW(x).ttost_mean(-0.2, 0.2)
        assert r.p == pytest.approx(p_sm, rel=1e-10)
        assert r.t_lower == pytest.approx(lower[0]) and r.t_upper == pytest.approx(upper[0])

    def test_ci_matches_oracle_quantile(self):
        rng = np.random.default_rng(9)
        x = rng.normal(0.0, 0.2, 25)
        r = tost_equivalence(x)
        m, sd = oracles.mean_sd(x)
        half = oracles.t_quantile(0.95, 24) * sd / math.sqrt(25)
        assert r.ci_low == pytest.approx(float(m - half), abs=1e-10)
        assert r.ci_high == pytest.approx(float(m + half), abs=1e-10)

    def test_constant_input(self):
        r = tost_equivalence([0.0] * 10)
        assert r.equivalent and r.p == 0.0 and r.ci_low == r.ci_high == 0.0
        r = tost_equivalence([0.25] * 10)
        assert not r.equivalent and r.p == 1.0

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            tost_equivalence([0.1, 0.2])

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-0.4, 0.4), st.floats(0.001, 1.0), st.integers(3, 300), st.integers(0, 10**6))
    def test_p_and_ci_agree(self, mean, sd, n, seed):
        x = np.random.default_rng(seed).normal(mean, sd, n)
        r = tost_equivalence(x)
        assert r.ci_low <= r.ci_high
        assert r.equivalent == (-0.2 < r.ci_low and r.ci_high < 0.2)


class TestRanking:
    def test_menu_predicted(self):
        assert rank_modalities(MENU_PRED) == {"ControllerBlink": 1, "Controller": 2, "GazeController": 3,
                                              "Hand": 4, "GazeAirtap": 5, "GazeDwell": 6}

    def test_menu_actual(self):
        assert rank_modalities(MENU_ACT) == {"Controller": 1, "Hand": 2, "GazeController": 3,
                                             "ControllerBlink": 4, "GazeAirtap": 5, "GazeDwell": 6}

    def test_ties_share_lower_rank(self):
        assert rank_modalities({"a": 1.0, "b": 1.0, "c": 2.0}) == {"a": 1, "b": 1, "c": 3}

    def test_too_few(self):
        with pytest.raises(InsufficientModalities):
            rank_modalities({"a": 1.0})

    def test_mean_rank_difference(self):
        assert mean_rank_difference(rank_modalities(MENU_PRED), rank_modalities(MENU_ACT)) == 1.0

    @given(st.dictionaries(st.text(min_size=1, max_size=3), st.floats(0, 10), min_size=2, max_size=8))
    def test_consistent_with_sorting(self, avgs):
        ranks = rank_modalities(avgs)
        for m1 in avgs:
            for m2 in avgs:
                if avgs[m1] < avgs[m2]:
                    assert ranks[m1] < ranks[m2]
                elif avgs[m1] == avgs[m2]:
                    assert ranks[m1] == ranks[m2]
        assert min(ranks.values()) == 1


class TestPairwise:
    def test_menu(self):
        r = pairwise_prediction_accuracy(MENU_PRED, MENU_ACT)
        assert (r.correct, r.total) == (11, 15)
        assert r.rate == pytest.approx(0.733, abs=5e-4)

    def test_identical(self):
        r = pairwise_prediction_accuracy(MENU_ACT, MENU_ACT)
        assert r.correct == r.total == 15

    def test_tie_is_incorrect(self):
        r = pairwise_prediction_accuracy({"a": 1, "b": 1}, {"a": 1, "b": 2})
        assert r.correct == 0

    @given(st.floats(0.01, 100), st.floats(-100, 100), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, k1, c1, k2, c2):
        pred = {m: k1 * v + c1 for m, v in MENU_PRED.items()}
        act = {m: k2 * v + c2 for m, v in MENU_ACT.items()}
        base = pairwise_prediction_accuracy(MENU_PRED, MENU_ACT)
        assert pairwise_prediction_accuracy(pred, act).correct == base.correct


class TestFitLinear:
    def test_exact(self):
        x = np.linspace(0, 5, 11)
        f = fit_linear(x, 210 + 160 * x)
        assert f.a == pytest.approx(210, abs=1e-9) and f.b == pytest.approx(160, abs=1e-9)
        assert f.r2 == pytest.approx(1.0, abs=1e-12)

    def test_two_points(self):
        f = fit_linear([1, 3], [5, 2])
        assert f.r2 == 1.0 and f.b == -1.5

    def test_noisy_recovers_generator(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0, 5, 60)
        y = 210 + 160 * x + rng.normal(0, 20, 60)
        f = fit_linear(x, y)
        a_ref, b_ref = oracles.ols(x, y)
        assert f.a == pytest.approx(a_ref, rel=1e-10) and f.b == pytest.approx(b_ref, rel=1e-10)
        assert abs(f.a - 210) < 2 * f.se_a and abs(f.b - 160) < 2 * f.se_b

    def test_degenerate(self):
        with pytest.raises(DegenerateRegression):
            fit_linear([2, 2, 2], [1, 2, 3])
        with pytest.raises(DegenerateRegression):
            fit_linear([1], [1])


def piecewise_gaze(rng, noise=10.0):
    # five repetitions per ID level, as in a blocked pointing experiment
    ids = np.repeat(np.round(np.arange(0.5, 5.01, 0.25), 10), 5)
    mt = np.where(ids < 1.74, 232.0, 100 + 150 * ids) + rng.normal(0, noise, ids.size)
    return ids, mt


class TestFitIdCrit:
    def test_recovers_threshold(self):
        ids, mt = piecewise_gaze(np.random.default_rng(0))
        f = fit_id_crit(ids, mt)
        assert abs(f.id_crit - 1.74) <= 0.2
        assert f.saccade_ms == pytest.approx(232, abs=10)
        assert f.b == pytest.approx(150, rel=0.05)

    def test_linear_data_keeps_everything(self):
        ids = np.arange(1.0, 4.01, 0.25)
        f = fit_id_crit(ids, 100 + 150 * ids)
        assert f.id_crit == 1.0 and f.saccade_ms is None

    def test_too_few_points(self):
        with pytest.raises(DegenerateRegression):
            fit_id_crit([1.0, 2.0], [300, 400])
        with pytest.raises(DegenerateRegression):
            fit_id_crit([1, 1, 1, 2, 2, 2], [1, 2, 3, 4, 5, 6])


class TestFitHand:
    def test_exact(self):
        rng = np.random.default_rng(1)
        ids, ctd = rng.uniform(0.5, 3, 30), rng.uniform(0, 30, 30)
        f = fit_hand_model(ids, ctd, 167.6 + 273.5 * ids + 3.35 * ctd)
        assert (f.a, f.b, f.c) == pytest.approx((167.6, 273.5, 3.35), abs=1e-6)

    def test_constant_ctd(self):
        with pytest.raises(DegenerateRegression):
            fit_hand_model([1, 2, 3, 4], [5, 5, 5, 5], [1, 2, 3, 4])

    def test_noisy(self):
        rng = np.random.default_rng(2)
        ids, ctd = rng.uniform(0.5, 3, 200), rng.uniform(0, 30, 200)
        mt = 167.6 + 273.5 * ids + 3.35 * ctd + rng.normal(0, 25, 200)
        f = fit_hand_model(ids, ctd, mt)
        for est, true, se in zip((f.a, f.b, f.c), (167.6, 273.5, 3.35), f.se):
            assert abs(est - true) < 2 * se
        assert 0.9 < f.r2 < 1.0


class TestEvaluate:
    def _records(self, seed=0):
        rng = np.random.default_rng(seed)
        out = []
        for name, factor in (("Controller", 1.05), ("Hand", 0.9), ("GazeAirtap", 1.3)):
            pred = rng.uniform(600, 1200, 200)
            act = pred * factor * (1 + rng.normal(0, 0.1, 200))
            out += [TrialRecord("P1", name, str(i), a, p) for i, (a, p) in enumerate(zip(act, pred))]
        return out

    def test_report(self):
        rep = evaluate(self._records())
        assert set(rep.modalities) == {"Controller", "Hand", "GazeAirtap"}
        m = rep.modalities["GazeAirtap"]
        assert not m.overall.tost.equivalent and m.overall.z.z > 0
        assert rep.modalities["Controller"].overall.tost.equivalent
        assert rep.pairwise.total == 3
        d = rep.to_dict()
        assert d["modalities"]["Hand"]["effect_band"] in ("negligible", "small", "medium", "large")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            EvalConfig(bound=1.5)
        with pytest.raises(ValueError):
            EvalConfig(outlier_sd=0)

    def test_missing_predictions(self):
        with pytest.raises(InsufficientData):
            evaluate([TrialRecord("P", "M", "1", 100.0)] * 3)
