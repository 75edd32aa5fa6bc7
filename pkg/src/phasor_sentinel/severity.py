"""Decorrelation severity indices over spoofed vs non-spoofed trajectories.

MCD is the maximum absolute gap between a spoofed correlation trajectory
and the non-spoofed reference; MCOOB counts the cycles the trajectory
spends outside a +-10% band around the reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phasors import ParameterId
from .correlation import CorrelationFeatureTable, correlate_fleet
from .spoof import SpoofedMinute

#: Channels plotted in the severity strips: the five-feature set.
SEVERITY_CHANNELS = (
    ParameterId.FREQ,
    ParameterId.V_POS_MAG,
    ParameterId.V_POS_ANG,
    ParameterId.V_NEG_ANG,
    ParameterId.V_ZERO_ANG,
)


def mcd(nspf, spf) -> float:
    """Maximum correlation deviation: max over cycles of |nspf - spf|."""
    nspf = np.asarray(nspf, dtype=float)
    spf = np.asarray(spf, dtype=float)
    if nspf.shape != spf.shape:
        raise ValueError("series must be equal length")
    return float(np.max(np.abs(nspf - spf)))


def mcoob(nspf, spf, band: float = 0.10) -> int:
    """Cycles the spoofed trajectory spends outside a +-band fraction of
    the reference: |spf - nspf| > band * |nspf|.

    The published inequality (0.9*nspf > spf > 1.1*nspf) is unsatisfiable
    as written; this is the stated +-10% intent, robust to sign.
    """
    nspf = np.asarray(nspf, dtype=float)
    spf = np.asarray(spf, dtype=float)
    if nspf.shape != spf.shape:
        raise ValueError("series must be equal length")
    return int(np.count_nonzero(np.abs(spf - nspf) > band * np.abs(nspf)))


@dataclass
class TrajectoryBundle:
    """Correlation trajectories split by spoof involvement.

    spoofed: (S, N) series for pairs involving the target PMU;
    nonspoofed: (M, N) series for all other pairs.
    """

    spoofed: np.ndarray
    nonspoofed: np.ndarray

    def __post_init__(self):
        self.spoofed = np.atleast_2d(np.asarray(self.spoofed, dtype=float))
        self.nonspoofed = np.atleast_2d(np.asarray(self.nonspoofed, dtype=float))
        if self.spoofed.size == 0 or self.nonspoofed.size == 0:
            raise ValueError("both trajectory groups must be non-empty")
        if self.spoofed.shape[1] != self.nonspoofed.shape[1]:
            raise ValueError("trajectory groups must cover the same cycles")

    @property
    def reference(self) -> np.ndarray:
        """Pointwise median of the non-spoofed group."""
        return np.median(self.nonspoofed, axis=0)


def bundle_from_features(table: CorrelationFeatureTable, target_pmu: int, channel: ParameterId) -> TrajectoryBundle:
    """Split one channel's pair trajectories by target-PMU involvement."""
    ch = table.channels.index(channel)
    spoofed_rows = [k for k, (i, j) in enumerate(table.pairs) if target_pmu in (i, j)]
    normal_rows = [k for k in range(len(table.pairs)) if k not in spoofed_rows]
    return TrajectoryBundle(
        spoofed=table.r[spoofed_rows, :, ch],
        nonspoofed=table.r[normal_rows, :, ch],
    )


@dataclass
class SeverityRow:
    channel: ParameterId
    window: int
    spoofed: bool
    mcd_values: np.ndarray  # one entry per trajectory in the group
    mcoob_values: np.ndarray

    @property
    def mcd_max(self) -> float:
        return float(np.max(self.mcd_values))

    @property
    def mcoob_total(self) -> int:
        return int(np.sum(self.mcoob_values))


def severity_report(bundles: dict[tuple[ParameterId, int], TrajectoryBundle]) -> list[SeverityRow]:
    """One row per (channel, window, group), indices per trajectory.

    Every trajectory is measured against the non-spoofed pointwise median.
    """
    rows = []
    for (channel, window), bundle in bundles.items():
        ref = bundle.reference
        for spoofed_flag, group in ((True, bundle.spoofed), (False, bundle.nonspoofed)):
            rows.append(
                SeverityRow(
                    channel=channel,
                    window=window,
                    spoofed=spoofed_flag,
                    mcd_values=np.array([mcd(ref, t) for t in group]),
                    mcoob_values=np.array([mcoob(ref, t) for t in group]),
                )
            )
    return rows


def severity_from_minute(
    spoofed_minute: SpoofedMinute,
    windows=(60, 120, 300, 600),
    channels=SEVERITY_CHANNELS,
) -> list[SeverityRow]:
    """Full severity table for one spoofed minute."""
    bundles = {}
    target = spoofed_minute.spec.target_pmu
    for window in windows:
        table = correlate_fleet(spoofed_minute, window, tuple(channels))
        for channel in channels:
            bundles[(channel, window)] = bundle_from_features(table, target, channel)
    return severity_report(bundles)
