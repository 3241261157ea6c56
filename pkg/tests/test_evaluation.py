import numpy as np
import pytest

from vpecg.delineation import AnnotatedBeat, Delineation, WaveMarks
from vpecg.errors import DegenerateInput, EmptyWindow, NoMatchingBeats, TooFewAnchors, ZeroNoise
from vpecg.evaluation import (
    assign_group,
    beat_averaged_kp,
    correlation,
    kp,
    kp_deviation,
    l_operator,
    reference_spline_denoise,
    score_delineation,
    snr_improvement,
    st_window_mask,
)
from vpecg.pipeline import EcgRecord


def marks(p=None, qrs=None, t=None):
    return Delineation(p=p, qrs=qrs, t=t)


def full_marks(shift=0.0):
    return marks(
        p=WaveMarks(-0.2 + shift, -0.14 + shift, -0.08 + shift),
        qrs=WaveMarks(-0.04 + shift, 0.0 + shift, 0.05 + shift),
        t=WaveMarks(0.1 + shift, 0.22 + shift, 0.38 + shift),
    )


class TestSnrImprovement:
    def test_identity_denoiser_gives_zero(self):
        rng = np.random.default_rng(0)
        clean = rng.normal(size=500)
        noisy = clean + rng.normal(size=500)
        assert snr_improvement(clean, noisy, noisy) == pytest.approx(0.0, abs=1e-12)

    def test_halved_error_energy_is_three_db(self):
        rng = np.random.default_rng(1)
        clean = rng.normal(size=500)
        err = rng.normal(size=500)
        noisy = clean + err
        den = clean + err / np.sqrt(2.0)
        assert snr_improvement(clean, noisy, den) == pytest.approx(10 * np.log10(2), abs=1e-9)

    def test_perfect_denoiser_reports_infinity(self):
        clean = np.sin(np.linspace(0, 5, 300))
        noisy = clean + 0.1
        assert snr_improvement(clean, noisy, clean.copy()) == np.inf


class TestCorrelation:
    def test_self_is_one(self):
        x = np.random.default_rng(2).normal(size=400)
        assert correlation(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_negated_is_minus_one(self):
        x = np.random.default_rng(3).normal(size=400)
        assert correlation(x, -x) == pytest.approx(-1.0, abs=1e-12)

    def test_constant_offset_invariant(self):
        x = np.random.default_rng(4).normal(size=400)
        assert correlation(x, x + 5.0) == pytest.approx(1.0, abs=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(DegenerateInput):
            correlation(np.ones(10), np.arange(10.0))


class TestLOperator:
    def test_anchors(self):
        x = np.random.default_rng(5).normal(size=400)
        assert l_operator(x, x) == pytest.approx(1.0, abs=1e-12)
        assert l_operator(x, -x) == pytest.approx(-1.0, abs=1e-12)
        assert l_operator(x, np.zeros_like(x)) == pytest.approx(0.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        x, y = rng.normal(size=300), rng.normal(size=300)
        assert l_operator(x, y) == pytest.approx(l_operator(y, x), abs=1e-14)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateInput):
            l_operator(np.zeros(10), np.zeros(10))


class TestKp:
    def test_single_lead_constant(self):
        leads = np.full((1, 100), 0.1)
        mask = np.zeros(100, dtype=bool)
        mask[40:60] = True
        assert kp(leads, mask) == pytest.approx(0.1)

    def test_envelope_uses_max_abs_across_leads(self):
        leads = np.vstack([np.full(100, 0.2), np.full(100, -0.3)])
        mask = np.ones(100, dtype=bool)
        assert kp(leads, mask) == pytest.approx(0.3)

    def test_filtered_equals_clean_gives_zero_deviation(self):
        assert kp_deviation(0.25, 0.25) == 0.0

    def test_empty_window_rejected(self):
        with pytest.raises(EmptyWindow):
            kp(np.ones((2, 50)), np.zeros(50, dtype=bool))

    def test_st_window_from_delineation(self):
        mask = st_window_mask(1000, 500.0, [300], qrs_end_rel=[0.05])
        on = 300 + int(round(0.06 * 500))
        off = 300 + int(round(0.16 * 500))
        assert mask[on] and mask[off - 1]
        assert not mask[on - 1] and not mask[off]

    def test_st_window_fallback(self):
        mask = st_window_mask(1000, 500.0, [300], qrs_end_rel=None)
        assert mask[300 + 30] and not mask[300 + 29]

    def test_beat_averaged_kp_reduces_noise(self):
        rng = np.random.default_rng(12)
        n_beats, blen = 40, 400
        leads = np.zeros((2, n_beats * blen))
        st = 0.15
        for b in range(n_beats):
            sl = slice(b * blen, (b + 1) * blen)
            leads[:, sl] = st + rng.normal(0.0, 0.02, (2, blen))
        starts = np.arange(n_beats) * blen
        val = beat_averaged_kp(leads, 500.0, starts, blen, r_offset=100)
        assert val == pytest.approx(st, abs=0.01)


class TestAssignGroup:
    @pytest.mark.parametrize(
        "kind,mu,sigma,expected",
        [
            ("p_on", 10.0, 20.0, "I"),
            ("qrs_on", 16.0, 19.0, "II"),
            ("t_end", 41.0, 51.0, "IV"),
            ("p_end", 24.9, 29.9, "I"),
            ("p_end", 25.0, 29.9, "II"),  # equality falls to the over side
            ("p_end", 24.9, 30.0, "III"),
            ("qrs_end", 15.0, 20.0, "IV"),
            ("t_peak", -39.9, 49.9, "I"),  # bias magnitude is what counts
            ("t_peak", -40.1, 49.9, "II"),
        ],
    )
    def test_table_boundaries(self, kind, mu, sigma, expected):
        assert assign_group(kind, mu, sigma) == expected

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            assign_group("u_on", 1.0, 1.0)


class TestScoreDelineation:
    def test_perfect_agreement(self):
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(10)]
        autos = [[AnnotatedBeat(float(i), full_marks()) for i in range(10)]]
        stats = score_delineation(autos, truth)
        for st in stats.values():
            assert st.sensitivity == 100.0
            assert st.bias_ms == 0.0
            assert st.std_ms == 0.0
            assert st.group == "I"

    def test_channel_rule_picks_smaller_error(self):
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(10)]
        good = [AnnotatedBeat(float(i), full_marks()) for i in range(10)]
        biased = [AnnotatedBeat(float(i), full_marks(shift=0.010)) for i in range(10)]
        stats = score_delineation([biased, good], truth)
        for st in stats.values():
            assert st.bias_ms == pytest.approx(0.0, abs=1e-9)

    def test_channel_rule_never_worse_than_single_channel(self):
        rng = np.random.default_rng(21)
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(30)]
        ch1 = [AnnotatedBeat(float(i), full_marks(shift=rng.normal(0, 0.01))) for i in range(30)]
        ch2 = [AnnotatedBeat(float(i), full_marks(shift=rng.normal(0, 0.01))) for i in range(30)]
        both = score_delineation([ch1, ch2], truth)
        only1 = score_delineation([ch1], truth)
        only2 = score_delineation([ch2], truth)
        for kind in both:
            spread = abs(both[kind].bias_ms)
            assert spread <= min(abs(only1[kind].bias_ms), abs(only2[kind].bias_ms)) + 1e-9

    def test_planted_gaussian_errors_recovered(self):
        rng = np.random.default_rng(22)
        n = 400
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(n)]
        autos = [
            [AnnotatedBeat(float(i), full_marks(shift=rng.normal(0.005, 0.015))) for i in range(n)]
        ]
        stats = score_delineation(autos, truth)
        for st in stats.values():
            assert st.bias_ms == pytest.approx(5.0, abs=2.5)
            assert st.std_ms == pytest.approx(15.0, abs=2.5)

    def test_missed_waves_reduce_sensitivity(self):
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(10)]
        partial = [
            AnnotatedBeat(float(i), full_marks() if i % 2 == 0 else marks(qrs=full_marks().qrs))
            for i in range(10)
        ]
        stats = score_delineation([partial], truth)
        assert stats["qrs_on"].sensitivity == 100.0
        assert stats["p_on"].sensitivity == 50.0
        assert stats["t_end"].sensitivity == 50.0

    def test_no_matching_beats_raises(self):
        truth = [AnnotatedBeat(float(i), full_marks()) for i in range(5)]
        autos = [[AnnotatedBeat(1000.0 + i, full_marks()) for i in range(5)]]
        with pytest.raises(NoMatchingBeats):
            score_delineation(autos, truth)


class TestReferenceSplineDenoise:
    def test_flat_record_unchanged(self):
        f_s = 500.0
        n = 8000
        r_peaks = np.arange(400, n - 400, 500)
        record = EcgRecord(leads=np.zeros((2, n)), f_s=f_s, r_peaks=r_peaks)
        out = reference_spline_denoise(record)
        np.testing.assert_allclose(out, record.leads, atol=1e-9)

    def test_slow_sinusoid_baseline_reduced(self):
        f_s = 500.0
        n = 30000
        t = np.arange(n) / f_s
        baseline = 0.4 * np.sin(2.0 * np.pi * 0.12 * t)
        r_peaks = np.arange(400, n - 600, 500)
        record = EcgRecord(leads=baseline[None, :], f_s=f_s, r_peaks=r_peaks)
        out = reference_spline_denoise(record)
        span = slice(int(r_peaks[0]), int(r_peaks[-1]))
        before = np.sum(baseline[span] ** 2)
        after = np.sum(out[0, span] ** 2)
        assert 10.0 * np.log10(before / after) >= 20.0

    def test_too_few_anchors(self):
        record = EcgRecord(leads=np.zeros((1, 2000)), f_s=500.0, r_peaks=[500, 1000])
        with pytest.raises(TooFewAnchors):
            reference_spline_denoise(record)
