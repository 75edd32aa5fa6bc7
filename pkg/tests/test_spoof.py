from fractions import Fraction

import numpy as np
import pytest

from phasor_sentinel.spoof import (
    SUITE_DILATION_RATIOS,
    SpoofKind,
    SpoofSpec,
    apply_spoof,
    nine_spoof_suite,
    spoof_dilate,
    spoof_mirror,
    spoof_polyfit,
)
from phasor_sentinel.synth import MinuteDataset


def synthetic_minute(n=3600, p=3, cubic=False):
    """Hand-built minute with controlled per-field series."""
    t = np.arange(n, dtype=float)
    data = {}
    for k, name in enumerate(MinuteDataset.RAW_FIELDS):
        base = np.empty((p, n))
        for pmu in range(p):
            if cubic:
                c = (k + 1) * 1e-4
                base[pmu] = 1.0 + pmu * 0.1 + c * (t / n) ** 3 + 2e-5 * (k + 1) * t / n
            else:
                base[pmu] = np.sin(2 * np.pi * t / 600 + pmu + k)
        if name.endswith("_ang"):
            base = np.mod(base + np.pi, 2 * np.pi) - np.pi
        data[name] = base
    return MinuteDataset(minute_id=0, **data)


class TestSpoofSpec:
    def test_suite_ratios(self):
        assert SUITE_DILATION_RATIOS == (
            Fraction(2),
            Fraction(3, 2),
            Fraction(4, 3),
            Fraction(5, 4),
            Fraction(6, 5),
            Fraction(8, 7),
            Fraction(9, 8),
        )

    def test_names(self):
        suite = nine_spoof_suite()
        assert [s.name for s in suite] == [
            "S1", "S2", "S3.1", "S3.2", "S3.3", "S3.4", "S3.5", "S3.6", "S3.7",
        ]
        custom = SpoofSpec(SpoofKind.DILATE, dilation_ratio=Fraction(7, 4))
        assert custom.name == "S3[x7/4]"

    def test_dilate_requires_ratio_above_one(self):
        with pytest.raises(ValueError):
            SpoofSpec(SpoofKind.DILATE)
        with pytest.raises(ValueError):
            SpoofSpec(SpoofKind.DILATE, dilation_ratio=Fraction(1))

    def test_start_must_be_positive(self):
        with pytest.raises(ValueError):
            SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=0)

    def test_suite_geometry_propagates(self):
        suite = nine_spoof_suite(target_pmu=3, spoof_start_cycle=900, noise_seed=5)
        assert all(s.target_pmu == 3 and s.spoof_start_cycle == 900 for s in suite)
        assert suite[1].noise_seed == 5


class TestValidation:
    def test_target_out_of_range(self):
        minute = synthetic_minute(p=2)
        with pytest.raises(ValueError):
            spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, target_pmu=5))

    def test_start_beyond_minute(self):
        minute = synthetic_minute()
        with pytest.raises(ValueError):
            spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=3600))

    def test_mirror_needs_enough_history(self):
        minute = synthetic_minute()
        with pytest.raises(ValueError):
            spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=1000))

    def test_kind_mismatch(self):
        minute = synthetic_minute()
        with pytest.raises(ValueError):
            spoof_mirror(minute, SpoofSpec(SpoofKind.POLYFIT))


class TestMirror:
    def test_exact_reversal(self):
        minute = synthetic_minute()
        out = spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, target_pmu=1, spoof_start_cycle=1800))
        for name in MinuteDataset.RAW_FIELDS:
            got = out.dataset.raw(name)[1, 1800:]
            want = minute.raw(name)[1, :1800][::-1]
            np.testing.assert_array_equal(got, want)

    def test_continuity_at_splice(self):
        minute = synthetic_minute()
        out = spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=1800))
        assert out.dataset.freq[0, 1800] == minute.freq[0, 1799]

    def test_other_pmus_untouched(self):
        minute = synthetic_minute()
        out = spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, target_pmu=1, spoof_start_cycle=1800))
        for name in MinuteDataset.RAW_FIELDS:
            np.testing.assert_array_equal(out.dataset.raw(name)[0], minute.raw(name)[0])
            np.testing.assert_array_equal(out.dataset.raw(name)[2], minute.raw(name)[2])

    def test_label_track(self):
        minute = synthetic_minute()
        out = spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=1800))
        assert not out.label_track[:1800].any()
        assert out.label_track[1800:].all()

    def test_input_not_mutated(self):
        minute = synthetic_minute()
        before = minute.freq.copy()
        spoof_mirror(minute, SpoofSpec(SpoofKind.MIRROR, spoof_start_cycle=1800))
        np.testing.assert_array_equal(minute.freq, before)


class TestPolyfit:
    def test_cubic_series_extends_exactly(self):
        # A cubic with zero residuals fits perfectly: no noise is injected
        # and the extrapolation continues the polynomial.
        minute = synthetic_minute(cubic=True)
        out = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, spoof_start_cycle=1800))
        t = np.arange(3600, dtype=float)
        k = MinuteDataset.RAW_FIELDS.index("freq")
        c = (k + 1) * 1e-4
        want = 1.0 + c * (t / 3600) ** 3 + 2e-5 * (k + 1) * t / 3600
        # skip the 30-cycle continuity cross-fade at the splice
        np.testing.assert_allclose(out.dataset.freq[0, 1830:], want[1830:], atol=1e-8)

    def test_deterministic_in_noise_seed(self):
        minute = synthetic_minute()
        a = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, noise_seed=3))
        b = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, noise_seed=3))
        c = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, noise_seed=4))
        np.testing.assert_array_equal(a.dataset.freq, b.dataset.freq)
        assert not np.array_equal(a.dataset.freq, c.dataset.freq)

    def test_crossfade_starts_at_anchor(self):
        minute = synthetic_minute()
        out = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, spoof_start_cycle=1800))
        # ramp weight is 0 at the first spoofed cycle: value equals the last
        # genuine sample
        assert out.dataset.freq[0, 1800] == pytest.approx(minute.freq[0, 1799], abs=1e-12)

    def test_angles_stay_wrapped(self):
        minute = synthetic_minute()
        out = spoof_polyfit(minute, SpoofSpec(SpoofKind.POLYFIT, spoof_start_cycle=1800))
        ang = out.dataset.va_ang[0, 1800:]
        assert np.all((ang > -np.pi) & (ang <= np.pi))


class TestDilate:
    def test_half_speed_alignment(self):
        minute = synthetic_minute()
        spec = SpoofSpec(SpoofKind.DILATE, spoof_start_cycle=1800, dilation_ratio=Fraction(2))
        out = spoof_dilate(minute, spec)
        # at ratio 2, spoofed cycle 1800 + 2k replays genuine cycle 1800 + k
        for k in (0, 100, 899):
            assert out.dataset.freq[0, 1800 + 2 * k] == pytest.approx(
                minute.freq[0, 1800 + k], abs=1e-12
            )

    def test_continuity_at_splice(self):
        minute = synthetic_minute()
        spec = SpoofSpec(SpoofKind.DILATE, spoof_start_cycle=1800, dilation_ratio=Fraction(3, 2))
        out = spoof_dilate(minute, spec)
        assert out.dataset.freq[0, 1800] == pytest.approx(minute.freq[0, 1800], abs=1e-12)

    def test_interpolation_between_cycles(self):
        minute = synthetic_minute()
        spec = SpoofSpec(SpoofKind.DILATE, spoof_start_cycle=1800, dilation_ratio=Fraction(2))
        out = spoof_dilate(minute, spec)
        mid = 0.5 * (minute.freq[0, 1800] + minute.freq[0, 1801])
        assert out.dataset.freq[0, 1801] == pytest.approx(mid, abs=1e-12)

    def test_angle_interpolation_crosses_wrap_cleanly(self):
        minute = synthetic_minute()
        # steep angle ramp wrapping many times
        t = np.arange(3600, dtype=float)
        unwrapped = 0.05 * t
        minute.va_ang[0] = np.mod(unwrapped + np.pi, 2 * np.pi) - np.pi
        spec = SpoofSpec(SpoofKind.DILATE, spoof_start_cycle=1800, dilation_ratio=Fraction(2))
        out = spoof_dilate(minute, spec)
        k = 501  # odd offset: interpolated halfway between two source cycles
        want = 0.05 * (1800 + k / 2)
        got = out.dataset.va_ang[0, 1800 + k]
        assert np.angle(np.exp(1j * (got - want))) == pytest.approx(0.0, abs=1e-9)

    def test_slower_than_real_time(self):
        minute = synthetic_minute()
        spec = SpoofSpec(SpoofKind.DILATE, spoof_start_cycle=1800, dilation_ratio=Fraction(9, 8))
        out = spoof_dilate(minute, spec)
        # the last spoofed cycle replays data from before the true end
        src_last = 1800 + (3599 - 1800) / (9 / 8)
        assert out.dataset.freq[0, -1] == pytest.approx(
            np.interp(src_last, np.arange(3600.0), minute.freq[0]), abs=1e-12
        )


class TestDispatch:
    def test_apply_spoof_routes_by_kind(self):
        minute = synthetic_minute()
        for spec in nine_spoof_suite():
            out = apply_spoof(minute, spec)
            assert out.spec is spec
            assert out.minute_id == minute.minute_id
            assert out.label_track.sum() == 1800
