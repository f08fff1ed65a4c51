"""Tests for the t machinery, trajectory grouping, and the analysis report."""

import math
import random

import numpy as np
import pytest
import scipy.special
import scipy.stats

from mimiclab.core import Emotion, MimicLabError, RoundRecord, au_set_from_codes, utc_now
from mimiclab.stats import (
    DegenerateVariance,
    EmptyInput,
    GameTrajectory,
    LengthMismatch,
    analysis_report,
    improvement_rate,
    paired_t_test,
    regularized_incomplete_beta,
    student_t_two_sided_p,
    trajectories,
)

from oracles import t_two_sided_p_by_quadrature


def make_game(round_idx: int, scores, group="treatment", session="s000000"):
    """One RoundRecord per attempt score, all in the same round."""
    now = utc_now()
    round_id = f"{session}-r{round_idx}"
    return [
        RoundRecord(
            record_id=f"{round_id}-a{i}",
            session_id=session,
            round_id=round_id,
            target_id="target-happiness",
            group=group,
            emotion=Emotion.HAPPINESS,
            attempt_index=i,
            player_aus=au_set_from_codes([6, 12]),
            target_aus=au_set_from_codes([6, 12]),
            score=float(s),
            prescriptions_shown=False,
            frame_ref=None,
            captured_at=now,
            received_at=now,
        )
        for i, s in enumerate(scores, start=1)
    ]


class TestIncompleteBeta:
    def test_endpoints(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    @pytest.mark.parametrize("x", [0.05, 0.2, 0.5, 0.8, 0.95])
    def test_closed_forms(self, x):
        assert math.isclose(regularized_incomplete_beta(1.0, 1.0, x), x, rel_tol=1e-13)
        assert math.isclose(regularized_incomplete_beta(2.0, 1.0, x), x * x, rel_tol=1e-12)
        assert math.isclose(
            regularized_incomplete_beta(1.0, 3.0, x), 1.0 - (1.0 - x) ** 3, rel_tol=1e-12
        )

    def test_symmetry_relation(self):
        for a, b, x in [(0.5, 4.0, 0.3), (3.0, 2.5, 0.7), (10.0, 0.5, 0.11)]:
            lhs = regularized_incomplete_beta(a, b, x)
            rhs = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x)
            assert math.isclose(lhs, rhs, rel_tol=0, abs_tol=1e-14)

    def test_against_scipy_grid(self):
        for a in (0.5, 1.0, 2.5, 7.0, 107.5):
            for b in (0.5, 1.0, 3.0, 50.0):
                for x in (0.001, 0.1, 0.37, 0.5, 0.78, 0.999):
                    ours = regularized_incomplete_beta(a, b, x)
                    ref = float(scipy.special.betainc(a, b, x))
                    assert math.isclose(ours, ref, rel_tol=0, abs_tol=1e-12), (a, b, x)

    def test_rejects_bad_parameters(self):
        with pytest.raises(MimicLabError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with pytest.raises(MimicLabError):
            regularized_incomplete_beta(1.0, -2.0, 0.5)
        with pytest.raises(MimicLabError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)
        with pytest.raises(MimicLabError):
            regularized_incomplete_beta(1.0, 1.0, -0.1)


class TestStudentT:
    def test_t_zero_gives_one(self):
        for df in (1, 4, 215):
            assert student_t_two_sided_p(0.0, df) == 1.0

    def test_even_in_t(self):
        for t in (0.3, 1.7, 5.0):
            assert student_t_two_sided_p(t, 7) == student_t_two_sided_p(-t, 7)

    def test_monotone_decreasing_in_magnitude(self):
        ps = [student_t_two_sided_p(t, 9) for t in (0.0, 0.5, 1.0, 2.0, 4.0, 8.0)]
        for lo, hi in zip(ps[1:], ps):
            assert lo < hi

    def test_cauchy_closed_form(self):
        # df=1 tail has the arctangent closed form.
        for t in (0.25, 1.0, 3.0, 12.0):
            expect = 1.0 - (2.0 / math.pi) * math.atan(t)
            assert math.isclose(student_t_two_sided_p(t, 1), expect, rel_tol=1e-12)

    def test_df2_closed_form(self):
        for t in (0.5, 1.0, 2.0, 6.0):
            expect = 1.0 - t / math.sqrt(2.0 + t * t)
            assert math.isclose(student_t_two_sided_p(t, 2), expect, rel_tol=1e-12)

    def test_large_df_approaches_normal(self):
        p = student_t_two_sided_p(1.959963984540054, 10**6)
        assert abs(p - 0.05) < 1e-4

    def test_quadrature_grid(self):
        for df in (1, 2, 3, 5, 10, 30, 100, 215):
            for t in (0.0, 0.5, 1.0, 2.0, 3.5, 6.0):
                ours = student_t_two_sided_p(t, df)
                ref = t_two_sided_p_by_quadrature(t, df)
                assert abs(ours - ref) < 1e-9, (t, df)

    def test_rejects_bad_input(self):
        with pytest.raises(MimicLabError):
            student_t_two_sided_p(1.0, 0)
        with pytest.raises(MimicLabError):
            student_t_two_sided_p(float("nan"), 5)


class TestPairedT:
    def test_hand_checked_example(self):
        res = paired_t_test([1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 5.0, 4.0])
        # d = [1, 2, 2, 0]: mean 1.25, sample sd sqrt(11/12)
        assert res.n == 4
        assert res.df == 3
        assert math.isclose(res.mean_diff, 1.25, rel_tol=1e-15)
        assert math.isclose(res.sd_diff, math.sqrt(11.0 / 12.0), rel_tol=1e-14)
        assert math.isclose(res.t, 1.25 / (math.sqrt(11.0 / 12.0) / 2.0), rel_tol=1e-14)

    def test_matches_scipy_random_pairs(self):
        rng = random.Random(99)
        for n in (3, 5, 17, 216):
            a = [rng.gauss(0.4, 0.2) for _ in range(n)]
            b = [x + rng.gauss(0.05, 0.15) for x in a]
            res = paired_t_test(a, b)
            ref = scipy.stats.ttest_rel(b, a)
            assert math.isclose(res.t, float(ref.statistic), rel_tol=1e-12)
            assert abs(res.p - float(ref.pvalue)) < 1e-12
            assert res.df == n - 1

    def test_swap_flips_sign_keeps_p(self):
        a, b = [0.2, 0.4, 0.3, 0.9], [0.5, 0.4, 0.8, 1.0]
        fwd = paired_t_test(a, b)
        rev = paired_t_test(b, a)
        assert math.isclose(fwd.t, -rev.t, rel_tol=1e-15)
        assert fwd.p == rev.p

    def test_shared_shift_is_invariant(self):
        a, b = [0.2, 0.4, 0.3, 0.9], [0.5, 0.4, 0.8, 1.0]
        base = paired_t_test(a, b)
        moved = paired_t_test([x + 3.7 for x in a], [y + 3.7 for y in b])
        assert math.isclose(moved.t, base.t, rel_tol=1e-12)
        assert math.isclose(moved.p, base.p, rel_tol=1e-12)

    def test_common_scale_is_invariant(self):
        a, b = [0.2, 0.4, 0.3, 0.9], [0.5, 0.4, 0.8, 1.0]
        base = paired_t_test(a, b)
        scaled = paired_t_test([5.0 * x for x in a], [5.0 * y for y in b])
        assert math.isclose(scaled.t, base.t, rel_tol=1e-12)

    def test_summary_fields(self):
        rng = random.Random(3)
        a = [rng.random() for _ in range(12)]
        b = [rng.random() for _ in range(12)]
        res = paired_t_test(a, b)
        assert math.isclose(res.mean_a, float(np.mean(a)), rel_tol=1e-14)
        assert math.isclose(res.mean_b, float(np.mean(b)), rel_tol=1e-14)
        assert math.isclose(res.sd_a, float(np.std(a, ddof=1)), rel_tol=1e-13)
        assert math.isclose(res.sd_b, float(np.std(b, ddof=1)), rel_tol=1e-13)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            paired_t_test([1.0, 2.0], [1.0])
        with pytest.raises(EmptyInput):
            paired_t_test([1.0], [2.0])
        with pytest.raises(EmptyInput):
            paired_t_test([], [])
        with pytest.raises(DegenerateVariance):
            paired_t_test([1.0, 2.0, 3.0], [1.5, 2.5, 3.5])

    def test_null_effect_calibration(self):
        # Under no true effect the test should reject rarely.
        rng = random.Random(2024)
        rejections = 0
        for _ in range(100):
            a = [rng.gauss(0.5, 0.1) for _ in range(20)]
            b = [rng.gauss(0.5, 0.1) for _ in range(20)]
            if paired_t_test(a, b).p < 0.05:
                rejections += 1
        assert rejections <= 12

    def test_strong_effect_always_detected(self):
        rng = random.Random(7)
        for _ in range(20):
            a = [rng.gauss(0.3, 0.1) for _ in range(30)]
            b = [x + 0.2 + rng.gauss(0.0, 0.05) for x in a]
            assert paired_t_test(a, b).p < 0.05


class TestTrajectories:
    def test_groups_complete_rounds_only(self):
        records = make_game(1, [0.2, 0.4, 0.4, 0.6, 1.0])
        records += make_game(2, [0.1, 0.2, 0.3])  # abandoned round
        ts = trajectories(records, attempts_per_round=5)
        assert len(ts.games) == 1
        assert ts.skipped_incomplete == 1
        game = ts.games[0]
        assert game.scores == (0.2, 0.4, 0.4, 0.6, 1.0)
        assert game.s1 == 0.2
        assert math.isclose(game.m_rest, 0.6)
        assert game.final == 1.0
        assert game.improved

    def test_order_independent(self):
        records = make_game(1, [0.2, 0.4, 0.4, 0.6, 1.0]) + make_game(2, [0.5] * 5)
        shuffled = list(records)
        random.Random(0).shuffle(shuffled)
        assert trajectories(shuffled, 5) == trajectories(records, 5)

    def test_attempts_per_round_parameter(self):
        records = make_game(1, [0.1, 0.2, 0.3]) + make_game(2, [0.4] * 5)
        ts = trajectories(records, attempts_per_round=3)
        assert len(ts.games) == 1
        assert ts.games[0].round_id.endswith("-r1")
        assert ts.skipped_incomplete == 1

    def test_not_improved_when_equal(self):
        game = trajectories(make_game(1, [0.5, 0.6, 0.7, 0.6, 0.5]), 5).games[0]
        assert not game.improved


class TestImprovementRate:
    def test_rates_by_group(self):
        games = [
            GameTrajectory("s", "r1", "control", (0.2, 0.3, 0.4, 0.5, 0.6)),
            GameTrajectory("s", "r2", "control", (0.6, 0.5, 0.4, 0.3, 0.2)),
            GameTrajectory("s", "r3", "treatment", (0.1, 0.5, 0.6, 0.8, 0.9)),
            GameTrajectory("s", "r4", "treatment", (0.3, 0.4, 0.5, 0.6, 0.8)),
        ]
        rates = improvement_rate(games)
        assert rates.overall == 0.75
        assert rates.by_group == {"control": 0.5, "treatment": 1.0}
        assert rates.n_overall == 4
        assert rates.n_by_group == {"control": 2, "treatment": 2}

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            improvement_rate([])


class TestAnalysisReport:
    def test_full_report_sections(self):
        rng = random.Random(11)
        records = []
        for i in range(1, 7):
            start = rng.uniform(0.1, 0.4)
            rest = sorted(rng.uniform(start, 1.0) for _ in range(4))
            records += make_game(i, [start] + rest,
                                 group="control" if i % 2 else "treatment")
        records += make_game(99, [0.5, 0.5])  # incomplete
        report = analysis_report(records, attempts_per_round=5)
        assert "complete games: 6" in report
        assert "skipped incomplete rounds: 1" in report
        assert "all games (n=6):" in report
        assert "control group (n=3):" in report
        assert "treatment group (n=3):" in report
        assert "t(5) =" in report
        assert "p =" in report
        assert "improvement rate (final attempt > first):" in report
        assert "overall: 100.0% (6/6)" in report

    def test_reported_t_matches_direct_computation(self):
        records = make_game(1, [0.2, 0.4, 0.6, 0.8, 1.0])
        records += make_game(2, [0.1, 0.1, 0.4, 0.4, 0.7])
        records += make_game(3, [0.5, 0.4, 0.9, 1.0, 0.6])
        report = analysis_report(records)
        games = trajectories(records).games
        res = paired_t_test([g.s1 for g in games], [g.m_rest for g in games])
        assert f"t({res.df}) = {res.t:.3f}, p = {res.p:.4g}" in report

    def test_absent_group_marked(self):
        records = []
        for i in range(1, 4):
            records += make_game(i, [0.2, 0.3, 0.4, 0.5, 0.6], group="treatment")
        report = analysis_report(records)
        assert "control group: absent (no complete games)" in report
        assert "treatment group (n=3):" in report

    def test_zero_games(self):
        report = analysis_report([])
        assert "zero games; nothing to analyze" in report
        report = analysis_report(make_game(1, [0.5, 0.5]))
        assert "zero games; nothing to analyze" in report
        assert "skipped incomplete rounds: 1" in report

    def test_single_game_skips_t(self):
        report = analysis_report(make_game(1, [0.2, 0.4, 0.6, 0.8, 1.0]))
        assert "t-test: needs at least two games" in report

    def test_degenerate_variance_noted(self):
        # Both games improve by exactly the same amount (exact binary values
        # so the paired differences are bit-identical).
        records = make_game(1, [0.25, 0.75, 0.75, 0.75, 0.75])
        records += make_game(2, [0.5, 1.0, 1.0, 1.0, 1.0])
        report = analysis_report(records)
        assert "t-test: not defined (zero variance in differences)" in report
