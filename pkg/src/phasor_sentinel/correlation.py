"""Sliding-window Pearson correlation over PMU pairs and channels.

Two equivalent paths: an O(1)-per-sample streaming correlator
(PairChannelState) for live use, and a vectorized batch path
(correlate_fleet) for archived minutes. Equality of the two is a core
property test.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .phasors import ParameterId
from .synth import MinuteDataset
from .spoof import SpoofedMinute

STANDARD_WINDOWS = (60, 120, 300, 600)

#: Streaming sums are rebuilt from the ring buffer this often to bound drift.
REFRESH_INTERVAL = 4096

_DEGENERATE_REL_TOL = 1e-13


def pearson(x, y) -> float:
    """Sample Pearson correlation; 0 for zero-variance input."""
    r, _ = pearson_with_flag(x, y)
    return r


def pearson_with_flag(x, y) -> tuple[float, bool]:
    """Pearson r plus a flag marking degenerate (zero-variance) input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and equal length")
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(xc @ xc)
    vy = float(yc @ yc)
    tol_x = _DEGENERATE_REL_TOL * n * float(np.max(np.abs(xc)) ** 2) if n else 0.0
    tol_y = _DEGENERATE_REL_TOL * n * float(np.max(np.abs(yc)) ** 2) if n else 0.0
    if vx <= tol_x or vy <= tol_y:
        return 0.0, True
    r = float(xc @ yc) / math.sqrt(vx * vy)
    return max(-1.0, min(1.0, r)), False


class PairChannelState:
    """Streaming windowed correlation of one (pair, channel) series.

    Keeps ring buffers of the last W samples and running sums; returns the
    window correlation once primed. Samples are stored relative to the
    first pushed value so the sums stay well conditioned for signals with
    large offsets (e.g. 60 Hz frequency).
    """

    def __init__(self, window: int, refresh_interval: int = REFRESH_INTERVAL):
        if window < 2:
            raise ValueError("window must be >= 2")
        self.window = window
        self.refresh_interval = refresh_interval
        self._x = np.zeros(window)
        self._y = np.zeros(window)
        self._idx = 0
        self._count = 0
        self._pushes = 0
        self._offset_x = 0.0
        self._offset_y = 0.0
        self.sx = self.sy = self.sxx = self.syy = self.sxy = 0.0
        self.degenerate = False

    def push(self, x: float, y: float) -> float | None:
        """Add one sample pair; returns windowed r once >= W samples seen."""
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError("non-finite sample pushed into correlator")
        if self._count == 0 and self._pushes == 0:
            self._offset_x = x
            self._offset_y = y
        dx = x - self._offset_x
        dy = y - self._offset_y
        if self._count == self.window:
            ox, oy = self._x[self._idx], self._y[self._idx]
            self.sx -= ox
            self.sy -= oy
            self.sxx -= ox * ox
            self.syy -= oy * oy
            self.sxy -= ox * oy
        else:
            self._count += 1
        self._x[self._idx] = dx
        self._y[self._idx] = dy
        self._idx = (self._idx + 1) % self.window
        self.sx += dx
        self.sy += dy
        self.sxx += dx * dx
        self.syy += dy * dy
        self.sxy += dx * dy
        self._pushes += 1
        if self._pushes % self.refresh_interval == 0:
            self._recompute()
        if self._count < self.window:
            return None
        return self._correlation()

    def _recompute(self):
        # Re-baseline to the current buffer means: keeps the stored values
        # small even when the signal drifts far from the first sample.
        xs = self._x[: self._count]
        ys = self._y[: self._count]
        mx = float(xs.mean())
        my = float(ys.mean())
        xs -= mx
        ys -= my
        self._offset_x += mx
        self._offset_y += my
        self.sx = float(xs.sum())
        self.sy = float(ys.sum())
        self.sxx = float(xs @ xs)
        self.syy = float(ys @ ys)
        self.sxy = float(xs @ ys)

    def _correlation(self) -> float:
        w = self.window
        vx = self.sxx - self.sx * self.sx / w
        vy = self.syy - self.sy * self.sy / w
        cov = self.sxy - self.sx * self.sy / w
        scale_x = float(np.max(np.abs(self._x))) ** 2
        scale_y = float(np.max(np.abs(self._y))) ** 2
        if vx <= _DEGENERATE_REL_TOL * w * scale_x or vy <= _DEGENERATE_REL_TOL * w * scale_y:
            self.degenerate = True
            return 0.0
        self.degenerate = False
        r = cov / math.sqrt(vx * vy)
        return max(-1.0, min(1.0, r))


def rolling_correlation(x: np.ndarray, y: np.ndarray, window: int) -> np.ndarray:
    """Windowed Pearson r for every trailing window; length N - W + 1."""
    out = rolling_correlation_pairs(x[None, :], y[None, :], window)
    return out[0]


#: Rolling correlations are computed in blocks this long so cumulative-sum
#: rounding cannot accumulate over arbitrarily long series.
_BLOCK = 8192


def rolling_correlation_pairs(x: np.ndarray, y: np.ndarray, window: int) -> np.ndarray:
    """Vectorized rolling correlation over rows of (K, N) series pairs."""
    if x.shape != y.shape:
        raise ValueError("series must have equal shape")
    w = window
    if w < 2:
        raise ValueError("window must be >= 2")
    n = x.shape[1]
    if n < w:
        raise ValueError("series shorter than window")
    n_valid = n - w + 1
    out = np.empty((x.shape[0], n_valid))
    for lo in range(0, n_valid, _BLOCK):
        hi = min(lo + _BLOCK, n_valid)
        out[:, lo:hi] = _rolling_block(x[:, lo : hi + w - 1], y[:, lo : hi + w - 1], w)
    return out


def _rolling_block(x: np.ndarray, y: np.ndarray, w: int) -> np.ndarray:
    # Centering per block keeps the cumulative sums well conditioned;
    # Pearson is shift invariant so the result is unchanged.
    xc = x - x.mean(axis=1, keepdims=True)
    yc = y - y.mean(axis=1, keepdims=True)

    def wsum(a):
        c = np.concatenate([np.zeros((a.shape[0], 1)), np.cumsum(a, axis=1)], axis=1)
        return c[:, w:] - c[:, :-w]

    sx, sy = wsum(xc), wsum(yc)
    sxx, syy, sxy = wsum(xc * xc), wsum(yc * yc), wsum(xc * yc)
    vx = sxx - sx * sx / w
    vy = syy - sy * sy / w
    cov = sxy - sx * sy / w
    tol_x = _DEGENERATE_REL_TOL * w * np.max(np.abs(xc), axis=1, keepdims=True) ** 2
    tol_y = _DEGENERATE_REL_TOL * w * np.max(np.abs(yc), axis=1, keepdims=True) ** 2
    bad = (vx <= tol_x) | (vy <= tol_y)
    den = np.sqrt(np.where(bad, 1.0, vx * vy))
    r = np.where(bad, 0.0, cov / den)
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class CorrelationFeatureRow:
    cycle: int
    pmu_i: int
    pmu_j: int
    r: dict


@dataclass
class CorrelationFeatureTable:
    """Windowed inter-PMU correlations for one minute.

    ``r`` has shape (n_pairs, n_valid_cycles, n_channels); cycle c of row k
    lives at [:, c - first_cycle, :].
    """

    window: int
    channels: tuple[ParameterId, ...]
    pairs: list[tuple[int, int]]
    first_cycle: int
    r: np.ndarray

    @property
    def n_valid_cycles(self) -> int:
        return self.r.shape[1]

    @property
    def row_count(self) -> int:
        return self.r.shape[0] * self.r.shape[1]

    def iter_rows(self):
        for c in range(self.n_valid_cycles):
            for k, (i, j) in enumerate(self.pairs):
                yield CorrelationFeatureRow(
                    cycle=self.first_cycle + c,
                    pmu_i=i,
                    pmu_j=j,
                    r={ch: float(self.r[k, c, m]) for m, ch in enumerate(self.channels)},
                )


def unwrapped_channels(minute: MinuteDataset) -> np.ndarray:
    """(P, 8, N) channel matrix with angle channels unwrapped per PMU."""
    chan = minute.channel_matrix()
    for pid in ParameterId:
        if pid.is_angle:
            chan[:, pid, :] = np.unwrap(chan[:, pid, :], axis=1)
    return chan


def correlate_fleet(
    dataset: MinuteDataset | SpoofedMinute,
    window: int,
    channels: tuple[ParameterId, ...] = tuple(ParameterId),
) -> CorrelationFeatureTable:
    """Windowed correlations for every PMU pair i < j and channel.

    Angle channels are unwrapped before correlating. Output matches a
    per-window batch recomputation exactly.
    """
    minute = dataset.dataset if isinstance(dataset, SpoofedMinute) else dataset
    chan = unwrapped_channels(minute)
    p, _, n = chan.shape
    if n < window:
        raise ValueError("minute shorter than correlation window")
    pairs = list(itertools.combinations(range(p), 2))
    idx_i = np.array([i for i, _ in pairs])
    idx_j = np.array([j for _, j in pairs])
    n_valid = n - window + 1
    r = np.empty((len(pairs), n_valid, len(channels)))
    for m, ch in enumerate(channels):
        x = chan[idx_i, ch, :]
        y = chan[idx_j, ch, :]
        r[:, :, m] = rolling_correlation_pairs(x, y, window)
    return CorrelationFeatureTable(
        window=window,
        channels=tuple(channels),
        pairs=pairs,
        first_cycle=minute.start_cycle + window - 1,
        r=r,
    )


@dataclass
class IntraPmuStats:
    """Mean and std of sliding-window correlation between channel pairs."""

    window: int
    mean: np.ndarray  # (8, 8), upper triangle populated
    std: np.ndarray

    def entry(self, a: ParameterId, b: ParameterId) -> tuple[float, float]:
        i, j = min(a, b), max(a, b)
        return float(self.mean[i, j]), float(self.std[i, j])


def intra_pmu_stats(minute: MinuteDataset, pmu: int, window: int = 60) -> IntraPmuStats:
    """Table of per-parameter-pair correlation statistics for one PMU."""
    chan = unwrapped_channels(minute)[pmu]
    n = chan.shape[1]
    if n < 60 * 60:
        raise ValueError("need at least 60 seconds of data")
    k = len(ParameterId)
    mean = np.full((k, k), np.nan)
    std = np.full((k, k), np.nan)
    pairs = list(itertools.combinations(range(k), 2))
    x = np.stack([chan[i] for i, _ in pairs])
    y = np.stack([chan[j] for _, j in pairs])
    r = rolling_correlation_pairs(x, y, window)
    for k_idx, (i, j) in enumerate(pairs):
        mean[i, j] = r[k_idx].mean()
        std[i, j] = r[k_idx].std()
    for i in range(k):
        mean[i, i] = 1.0
        std[i, i] = 0.0
    return IntraPmuStats(window=window, mean=mean, std=std)
