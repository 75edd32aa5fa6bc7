"""Example assembly, spoof-specific evaluation, and the voting ensemble.

Labels follow the timing rules: training windows are Spoofed only once a
majority of their cycles are spoofed (late timing); test windows are
Spoofed from the first spoofed cycle (early timing).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .phasors import ParameterId
from .correlation import correlate_fleet
from .spoof import SpoofedMinute
from .svm import NORMAL, SPOOFED, SvmModel

#: Consecutive Spoofed cycles required to call a detection.
DETECTION_RUN = 30


class FeatureSetId(Enum):
    THREE = "three"
    FIVE = "five"

    @property
    def channels(self) -> tuple[ParameterId, ...]:
        return _FEATURE_CHANNELS[self]


_FEATURE_CHANNELS = {
    FeatureSetId.THREE: (
        ParameterId.V_POS_MAG,
        ParameterId.V_POS_ANG,
        ParameterId.FREQ,
    ),
    FeatureSetId.FIVE: (
        ParameterId.V_POS_MAG,
        ParameterId.V_POS_ANG,
        ParameterId.V_NEG_ANG,
        ParameterId.V_ZERO_ANG,
        ParameterId.FREQ,
    ),
}


class TimingRule(Enum):
    EARLY = "early"  # Spoofed iff window holds >= 1 spoofed cycle
    LATE = "late"  # Spoofed iff window holds a strict majority


@dataclass
class ExampleSet:
    """Flat labeled examples plus the bookkeeping needed for latency."""

    X: np.ndarray  # (n, d) correlation features
    y: np.ndarray  # (n,) labels in {-1, +1}
    cycle: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    minute_ids: np.ndarray
    feature_set: FeatureSetId
    window: int
    timing: TimingRule
    spoof_start: int
    target_pmu: int

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def spoofed_pair_mask(self) -> np.ndarray:
        return (self.pair_i == self.target_pmu) | (self.pair_j == self.target_pmu)


def _window_label(track: np.ndarray, window: int, timing: TimingRule) -> np.ndarray:
    """Per-valid-cycle labels from a per-cycle spoof track."""
    c = np.concatenate([[0], np.cumsum(track.astype(int))])
    counts = c[window:] - c[:-window]
    if timing is TimingRule.EARLY:
        return counts >= 1
    return counts > window // 2


def build_examples(
    minutes: list[SpoofedMinute],
    features: FeatureSetId = FeatureSetId.FIVE,
    window: int = 300,
    timing: TimingRule = TimingRule.EARLY,
    cycle_stride: int = 1,
) -> ExampleSet:
    """Correlation-feature examples for a set of spoofed minutes.

    One example per (minute, pair i<j, valid cycle); Spoofed only for
    pairs involving the target PMU, per the timing rule on the trailing
    window. cycle_stride subsamples cycles (training-size knob).
    """
    if not minutes:
        raise ValueError("no minutes supplied")
    pmu_counts = {m.dataset.pmu_count for m in minutes}
    if len(pmu_counts) != 1:
        raise ValueError("minutes disagree on PMU count")
    targets = {m.spec.target_pmu for m in minutes}
    starts = {m.spec.spoof_start_cycle for m in minutes}
    if len(targets) != 1 or len(starts) != 1:
        raise ValueError("minutes disagree on spoof geometry")
    target = targets.pop()
    channels = features.channels

    xs, ys, cycles, pis, pjs, mids = [], [], [], [], [], []
    for m in minutes:
        table = correlate_fleet(m, window, channels)
        if table.window != window:
            raise ValueError("correlator window mismatch")
        n_pairs, n_valid, _ = table.r.shape
        sel = np.arange(0, n_valid, cycle_stride)
        window_spoofed = _window_label(m.label_track, window, timing)[sel]
        cyc = table.first_cycle + sel
        for k, (i, j) in enumerate(table.pairs):
            xs.append(table.r[k, sel, :])
            if target in (i, j):
                ys.append(np.where(window_spoofed, SPOOFED, NORMAL))
            else:
                ys.append(np.full(len(sel), NORMAL))
            cycles.append(cyc)
            pis.append(np.full(len(sel), i))
            pjs.append(np.full(len(sel), j))
            mids.append(np.full(len(sel), m.minute_id))
    return ExampleSet(
        X=np.concatenate(xs, axis=0),
        y=np.concatenate(ys).astype(int),
        cycle=np.concatenate(cycles),
        pair_i=np.concatenate(pis),
        pair_j=np.concatenate(pjs),
        minute_ids=np.concatenate(mids),
        feature_set=features,
        window=window,
        timing=timing,
        spoof_start=starts.pop(),
        target_pmu=target,
    )


@dataclass(frozen=True)
class EvalCounts:
    true_pos: int
    false_pos: int
    false_neg: int
    true_neg: int

    @property
    def total(self) -> int:
        return self.true_pos + self.false_pos + self.false_neg + self.true_neg

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(
            self.true_pos + other.true_pos,
            self.false_pos + other.false_pos,
            self.false_neg + other.false_neg,
            self.true_neg + other.true_neg,
        )


@dataclass(frozen=True)
class MetricSummary:
    sensitivity: float
    fdr: float
    f1: float
    degenerate: bool = False


def metrics(counts: EvalCounts) -> MetricSummary:
    """Sensitivity, false discovery rate and F1 from confusion counts.

    Zero denominators yield 0 for the affected metric with the degenerate
    flag set.
    """
    tp, fp, fn = counts.true_pos, counts.false_pos, counts.false_neg
    degenerate = False
    if tp + fn == 0:
        sens, degenerate = 0.0, True
    else:
        sens = tp / (tp + fn)
    if tp + fp == 0:
        fdr, degenerate = 0.0, True
    else:
        fdr = fp / (tp + fp)
    precision = 1.0 - fdr
    if sens + precision == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2.0 * sens * precision / (sens + precision)
    return MetricSummary(sensitivity=sens, fdr=fdr, f1=f1, degenerate=degenerate)


def counts_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> EvalCounts:
    return EvalCounts(
        true_pos=int(np.count_nonzero((y_true == SPOOFED) & (y_pred == SPOOFED))),
        false_pos=int(np.count_nonzero((y_true == NORMAL) & (y_pred == SPOOFED))),
        false_neg=int(np.count_nonzero((y_true == SPOOFED) & (y_pred == NORMAL))),
        true_neg=int(np.count_nonzero((y_true == NORMAL) & (y_pred == NORMAL))),
    )


NOT_DETECTED = None


def latency(spoofed_flags: np.ndarray, cycles: np.ndarray, spoof_start: int) -> int | None:
    """Cycles from spoof onset until a DETECTION_RUN-cycle string of
    Spoofed predictions completes; None if no such run.

    Immediate perfect detection scores DETECTION_RUN (the run must finish).
    """
    order = np.argsort(cycles)
    cycles = cycles[order]
    flags = np.asarray(spoofed_flags)[order]
    run = 0
    for cyc, flag in zip(cycles, flags):
        if cyc < spoof_start:
            continue
        run = run + 1 if flag else 0
        if run >= DETECTION_RUN:
            return int(cyc) - spoof_start + 1
    return NOT_DETECTED


@dataclass
class DetectionReport:
    spoof_name: str
    counts: EvalCounts
    summary: MetricSummary
    latencies: dict  # (minute_id, (i, j)) -> cycles or None

    @property
    def detected_latencies(self) -> list[int]:
        return [v for v in self.latencies.values() if v is not None]

    @property
    def latency_range(self) -> tuple[int, int] | None:
        det = self.detected_latencies
        if not det:
            return None
        return min(det), max(det)

    @property
    def max_latency(self) -> int | None:
        rng = self.latency_range
        return rng[1] if rng else None


def _pair_latencies(examples: ExampleSet, preds: np.ndarray) -> dict:
    out = {}
    spoofed_flags = preds == SPOOFED
    for mid in np.unique(examples.minute_ids):
        m_mask = examples.minute_ids == mid
        pair_mask = examples.spoofed_pair_mask & m_mask
        pairs = set(zip(examples.pair_i[pair_mask].tolist(), examples.pair_j[pair_mask].tolist()))
        for i, j in sorted(pairs):
            sel = m_mask & (examples.pair_i == i) & (examples.pair_j == j)
            out[(int(mid), (i, j))] = latency(
                spoofed_flags[sel], examples.cycle[sel], examples.spoof_start
            )
    return out


def evaluate_examples(examples: ExampleSet, preds: np.ndarray, spoof_name: str) -> DetectionReport:
    counts = counts_from_predictions(examples.y, preds)
    return DetectionReport(
        spoof_name=spoof_name,
        counts=counts,
        summary=metrics(counts),
        latencies=_pair_latencies(examples, preds),
    )


def evaluate_spoof_specific(model: SvmModel, examples: ExampleSet, spoof_name: str = "") -> DetectionReport:
    """Early-timing evaluation of one spoof-specific model."""
    if examples.timing is not TimingRule.EARLY:
        raise ValueError("test examples must use early timing")
    train_minutes = set(model.metadata.get("train_minutes", []))
    overlap = train_minutes & set(np.unique(examples.minute_ids).tolist())
    if overlap:
        raise ValueError(f"test minutes overlap training minutes: {sorted(overlap)}")
    if model.metadata.get("feature_set") not in (None, examples.feature_set.value):
        raise ValueError("model feature set does not match examples")
    preds = np.where(model.margins(examples.X) > 0, SPOOFED, NORMAL)
    return evaluate_examples(examples, preds, spoof_name or model.metadata.get("spoof_kind", ""))


def ensemble_vote(models: list[SvmModel], x, threshold: int) -> int:
    """Spoofed iff at least `threshold` constituent models vote Spoofed."""
    if not 1 <= threshold <= len(models):
        raise ValueError("threshold out of range")
    feature_sets = {m.metadata.get("feature_set") for m in models}
    if len(feature_sets) > 1:
        raise ValueError("ensemble models use mixed feature sets")
    votes = sum(1 for m in models if m.margins(np.atleast_2d(x))[0] > 0)
    return SPOOFED if votes >= threshold else NORMAL


@dataclass
class EnsembleRow:
    threshold: int
    counts: EvalCounts
    summary: MetricSummary
    per_kind: dict  # spoof name -> MetricSummary
    latencies: dict  # spoof name -> {(minute, pair): latency or None}

    def pooled_latencies(self, prefix: str) -> list[int]:
        vals = []
        for name, lat in self.latencies.items():
            if name.startswith(prefix):
                vals.extend(v for v in lat.values() if v is not None)
        return vals


def evaluate_ensemble_loo(
    models: dict[str, SvmModel],
    test_examples: dict[str, ExampleSet],
    thresholds=range(1, 9),
) -> list[EnsembleRow]:
    """Leave-one-out ensemble: for each spoof kind, the other models vote
    on that kind's test examples; metrics aggregated per threshold."""
    if len(models) < 9:
        raise ValueError("need all nine spoof-specific models")
    if set(models) != set(test_examples):
        raise ValueError("models and test sets must cover the same spoof kinds")
    feature_sets = {m.metadata.get("feature_set") for m in models.values()}
    if len(feature_sets) > 1:
        raise ValueError("ensemble models use mixed feature sets")

    vote_counts = {}
    for held_out, examples in test_examples.items():
        voters = [m for name, m in sorted(models.items()) if name != held_out]
        votes = np.zeros(len(examples), dtype=int)
        for m in voters:
            votes += (m.margins(examples.X) > 0).astype(int)
        vote_counts[held_out] = votes

    rows = []
    for t in thresholds:
        total = EvalCounts(0, 0, 0, 0)
        per_kind = {}
        latencies = {}
        for held_out, examples in test_examples.items():
            preds = np.where(vote_counts[held_out] >= t, SPOOFED, NORMAL)
            counts = counts_from_predictions(examples.y, preds)
            total = total + counts
            per_kind[held_out] = metrics(counts)
            latencies[held_out] = _pair_latencies(examples, preds)
        rows.append(
            EnsembleRow(
                threshold=t,
                counts=total,
                summary=metrics(total),
                per_kind=per_kind,
                latencies=latencies,
            )
        )
    return rows
