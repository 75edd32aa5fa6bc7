"""Spoof playback schemes applied to the tail of one PMU's minute.

Three families: mirroring (reverse playback), cubic-polynomial
extrapolation with residual-scale noise, and time dilation (the genuine
tail resampled slower than real time). All three keep the signal
continuous at the splice point.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .synth import MinuteDataset
from .phasors import wrap_angle_array

_ANGLE_FIELDS = {"va_ang", "vb_ang", "vc_ang"}

#: Slower-than-real-time ratios used by the nine-spoof suite (S3.1..S3.7).
SUITE_DILATION_RATIOS = (
    Fraction(2, 1),
    Fraction(3, 2),
    Fraction(4, 3),
    Fraction(5, 4),
    Fraction(6, 5),
    Fraction(8, 7),
    Fraction(9, 8),
)


class SpoofKind(Enum):
    MIRROR = "mirror"
    POLYFIT = "polyfit"
    DILATE = "dilate"


@dataclass(frozen=True)
class SpoofSpec:
    kind: SpoofKind
    target_pmu: int = 0
    spoof_start_cycle: int = 1800
    dilation_ratio: Fraction | None = None
    noise_seed: int = 0
    crossfade_cycles: int = 30

    def __post_init__(self):
        if self.kind is SpoofKind.DILATE:
            if self.dilation_ratio is None or self.dilation_ratio <= 1:
                raise ValueError("dilation requires dilation_ratio > 1")
        if self.spoof_start_cycle < 1:
            raise ValueError("spoof_start_cycle must be positive")

    @property
    def name(self) -> str:
        if self.kind is SpoofKind.MIRROR:
            return "S1"
        if self.kind is SpoofKind.POLYFIT:
            return "S2"
        r = self.dilation_ratio
        if r in SUITE_DILATION_RATIOS:
            return f"S3.{SUITE_DILATION_RATIOS.index(r) + 1}"
        return f"S3[x{r}]"


@dataclass
class SpoofedMinute:
    dataset: MinuteDataset
    spec: SpoofSpec
    label_track: np.ndarray  # per-cycle bool, True from spoof_start_cycle on

    @property
    def minute_id(self) -> int:
        return self.dataset.minute_id


def nine_spoof_suite(target_pmu: int = 0, spoof_start_cycle: int = 1800, noise_seed: int = 0):
    """The standard nine-spoof suite: S1 mirror, S2 polynomial, S3.1-S3.7 dilation."""
    specs = [
        SpoofSpec(SpoofKind.MIRROR, target_pmu, spoof_start_cycle),
        SpoofSpec(SpoofKind.POLYFIT, target_pmu, spoof_start_cycle, noise_seed=noise_seed),
    ]
    specs.extend(
        SpoofSpec(SpoofKind.DILATE, target_pmu, spoof_start_cycle, dilation_ratio=r)
        for r in SUITE_DILATION_RATIOS
    )
    return specs


def _check(minute: MinuteDataset, spec: SpoofSpec, kind: SpoofKind):
    if spec.kind is not kind:
        raise ValueError(f"spec kind {spec.kind} does not match {kind}")
    if not (0 <= spec.target_pmu < minute.pmu_count):
        raise ValueError("target_pmu out of range")
    n = minute.n_cycles
    start = spec.spoof_start_cycle
    if start >= n:
        raise ValueError("spoof_start_cycle beyond end of minute")
    return n, start


def _label_track(n: int, start: int) -> np.ndarray:
    track = np.zeros(n, dtype=bool)
    track[start:] = True
    return track


def spoof_mirror(minute: MinuteDataset, spec: SpoofSpec) -> SpoofedMinute:
    """Play the window before the splice back in reverse."""
    n, start = _check(minute, spec, SpoofKind.MIRROR)
    length = n - start
    if start - length < 0:
        raise ValueError("not enough leading data to mirror")
    out = minute.copy()
    t = spec.target_pmu
    for name in MinuteDataset.RAW_FIELDS:
        arr = out.raw(name)
        arr[t, start:] = arr[t, start - length : start][::-1]
    return SpoofedMinute(out, spec, _label_track(n, start))


def spoof_polyfit(minute: MinuteDataset, spec: SpoofSpec) -> SpoofedMinute:
    """Extrapolate a cubic fit of the leading window, plus residual-scale
    noise, cross-faded in over spec.crossfade_cycles for continuity."""
    n, start = _check(minute, spec, SpoofKind.POLYFIT)
    out = minute.copy()
    t = spec.target_pmu
    rng = np.random.default_rng(np.uint64(spec.noise_seed))
    x_fit = np.arange(start, dtype=float)
    x_out = np.arange(start, n, dtype=float)
    fade = min(spec.crossfade_cycles, n - start)
    ramp = np.ones(n - start)
    if fade > 0:
        ramp[:fade] = np.arange(fade) / fade
    for name in MinuteDataset.RAW_FIELDS:
        arr = out.raw(name)
        series = arr[t]
        is_angle = name in _ANGLE_FIELDS
        y = np.unwrap(series[:start]) if is_angle else series[:start]
        # Polynomial.fit maps the abscissa onto [-1, 1] internally, which
        # keeps the normal equations well conditioned.
        poly = np.polynomial.Polynomial.fit(x_fit, y, deg=3)
        resid_std = float(np.std(y - poly(x_fit)))
        pred = poly(x_out) + resid_std * rng.standard_normal(n - start)
        anchor = y[start - 1] if is_angle else series[start - 1]
        spoofed = (1.0 - ramp) * anchor + ramp * pred
        arr[t, start:] = wrap_angle_array(spoofed) if is_angle else spoofed
    return SpoofedMinute(out, spec, _label_track(n, start))


def spoof_dilate(minute: MinuteDataset, spec: SpoofSpec) -> SpoofedMinute:
    """Resample the genuine tail slower than real time by dilation_ratio,
    with linear interpolation between the two nearest recorded cycles."""
    n, start = _check(minute, spec, SpoofKind.DILATE)
    out = minute.copy()
    t = spec.target_pmu
    r = float(spec.dilation_ratio)
    k = np.arange(n - start, dtype=float)
    src = start + k / r  # always within [start, n-1] since r > 1
    for name in MinuteDataset.RAW_FIELDS:
        arr = out.raw(name)
        series = arr[t]
        if name in _ANGLE_FIELDS:
            tail = np.unwrap(series[start:])
            vals = np.interp(src - start, np.arange(n - start, dtype=float), tail)
            arr[t, start:] = wrap_angle_array(vals)
        else:
            arr[t, start:] = np.interp(src, np.arange(n, dtype=float), series)
    return SpoofedMinute(out, spec, _label_track(n, start))


_DISPATCH = {
    SpoofKind.MIRROR: spoof_mirror,
    SpoofKind.POLYFIT: spoof_polyfit,
    SpoofKind.DILATE: spoof_dilate,
}


def apply_spoof(minute: MinuteDataset, spec: SpoofSpec) -> SpoofedMinute:
    return _DISPATCH[spec.kind](minute, spec)
