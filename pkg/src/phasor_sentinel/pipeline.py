"""End-to-end experiment driver: synthesize, spoof, featurize, train,
evaluate, ensemble. Everything is deterministic given the config, so two
runs from one manifest produce byte-identical reports."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .detect import (
    DetectionReport,
    EnsembleRow,
    ExampleSet,
    FeatureSetId,
    TimingRule,
    build_examples,
    evaluate_ensemble_loo,
    evaluate_spoof_specific,
)
from .spoof import SpoofSpec, apply_spoof, nine_spoof_suite
from .svm import SvmModel, train_svm
from .synth import FleetConfig, MinuteDataset, generate_fleet


@dataclass
class ExperimentConfig:
    pmu_count: int = 10
    minutes: int = 14
    seed: int = 7
    target_pmu: int = 0
    spoof_start: int = 1800
    window: int = 300
    feature_set: FeatureSetId = FeatureSetId.FIVE
    train_minute_count: int = 11
    train_stride: int = 300
    test_stride: int = 1
    C: float = 1.0
    gamma: float = 0.2
    tol: float = 1e-3
    spoof_class_weight: float = 2.0
    thresholds: tuple[int, ...] = tuple(range(1, 9))

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["feature_set"] = self.feature_set.value
        d["thresholds"] = list(self.thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["feature_set"] = FeatureSetId(d["feature_set"])
        d["thresholds"] = tuple(d["thresholds"])
        return cls(**d)


def split_minutes(config: ExperimentConfig) -> tuple[list[int], list[int]]:
    """Deterministic train/test partition of minute ids (11/3 by default)."""
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(config.minutes)
    train = sorted(int(m) for m in order[: config.train_minute_count])
    test = sorted(int(m) for m in order[config.train_minute_count :])
    if not test:
        raise ValueError("no test minutes left; reduce train_minute_count")
    return train, test


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    train_minutes: list[int]
    test_minutes: list[int]
    models: dict[str, SvmModel]
    reports: dict[str, DetectionReport]
    ensemble: list[EnsembleRow]
    test_examples: dict[str, ExampleSet] = field(repr=False, default_factory=dict)


def _log(progress, msg):
    if progress:
        progress(msg)


def train_one_spoof(
    config: ExperimentConfig,
    spec: SpoofSpec,
    base_minutes: list[MinuteDataset],
    train_ids: list[int],
) -> SvmModel:
    spoofed = [apply_spoof(base_minutes[m], spec) for m in train_ids]
    train_examples = build_examples(
        spoofed,
        features=config.feature_set,
        window=config.window,
        timing=TimingRule.LATE,
        cycle_stride=config.train_stride,
    )
    return train_svm(
        train_examples.X,
        train_examples.y,
        C=config.C,
        gamma=config.gamma,
        tol=config.tol,
        class_weight={1: config.spoof_class_weight} if config.spoof_class_weight != 1.0 else None,
        metadata={
            "spoof_kind": spec.name,
            "feature_set": config.feature_set.value,
            "window": config.window,
            "train_stride": config.train_stride,
            "train_minutes": train_ids,
            "timing": TimingRule.LATE.value,
        },
    )


def run_experiment(
    config: ExperimentConfig,
    base_minutes: list[MinuteDataset] | None = None,
    progress=None,
) -> ExperimentResult:
    t0 = time.time()
    if base_minutes is None:
        fleet = FleetConfig(pmu_count=config.pmu_count, minutes=config.minutes, seed=config.seed)
        base_minutes = generate_fleet(fleet)
        _log(progress, f"generated {len(base_minutes)} minutes ({time.time() - t0:.1f}s)")
    train_ids, test_ids = split_minutes(config)
    specs = nine_spoof_suite(config.target_pmu, config.spoof_start, noise_seed=config.seed)

    models: dict[str, SvmModel] = {}
    reports: dict[str, DetectionReport] = {}
    test_examples: dict[str, ExampleSet] = {}
    for spec in specs:
        name = spec.name
        models[name] = train_one_spoof(config, spec, base_minutes, train_ids)
        _log(progress, f"{name}: trained ({models[name].n_support} SVs, {time.time() - t0:.1f}s)")
        spoofed_test = [apply_spoof(base_minutes[m], spec) for m in test_ids]
        test_examples[name] = build_examples(
            spoofed_test,
            features=config.feature_set,
            window=config.window,
            timing=TimingRule.EARLY,
            cycle_stride=config.test_stride,
        )
        reports[name] = evaluate_spoof_specific(models[name], test_examples[name], name)
        s = reports[name].summary
        _log(
            progress,
            f"{name}: sens={s.sensitivity:.3f} fdr={s.fdr:.4f} f1={s.f1:.3f} "
            f"latency={reports[name].latency_range} ({time.time() - t0:.1f}s)",
        )

    ensemble = evaluate_ensemble_loo(models, test_examples, thresholds=config.thresholds)
    _log(progress, f"ensemble evaluated ({time.time() - t0:.1f}s)")
    return ExperimentResult(
        config=config,
        train_minutes=train_ids,
        test_minutes=test_ids,
        models=models,
        reports=reports,
        ensemble=ensemble,
        test_examples=test_examples,
    )


def _latency_str(rng) -> str:
    return f"[{rng[0]}, {rng[1]}]" if rng else "not detected"


def render_spoof_table(reports: dict[str, DetectionReport]) -> str:
    lines = ["spoof       true+   false+  false-  latency      sens     fdr      f1"]
    for name in sorted(reports):
        r = reports[name]
        s = r.summary
        lines.append(
            f"{name:<10}{r.counts.true_pos:>8}{r.counts.false_pos:>9}{r.counts.false_neg:>8}"
            f"  {_latency_str(r.latency_range):<12}"
            f"{100 * s.sensitivity:>7.2f}% {100 * s.fdr:>6.2f}% {s.f1:>7.3f}"
        )
    return "\n".join(lines) + "\n"


def render_ensemble_table(rows: list[EnsembleRow]) -> str:
    lines = ["T   sens     fdr      f1      S1 latency    S2 latency    S3 latency (mean)"]
    for row in rows:
        s = row.summary

        def rng_str(prefix):
            vals = row.pooled_latencies(prefix)
            if not vals:
                return "n/a"
            base = f"[{min(vals)}, {max(vals)}]"
            if prefix == "S3":
                base += f" {int(round(np.mean(vals)))}"
            return base

        lines.append(
            f"{row.threshold:<3}{100 * s.sensitivity:>6.2f}% {100 * s.fdr:>6.2f}% {s.f1:>7.3f}"
            f"   {rng_str('S1'):<13} {rng_str('S2'):<13} {rng_str('S3')}"
        )
    return "\n".join(lines) + "\n"


def spoof_report_csv(reports: dict[str, DetectionReport]) -> str:
    lines = ["spoof,true_pos,false_pos,false_neg,true_neg,latency_min,latency_max,sensitivity,fdr,f1"]
    for name in sorted(reports):
        r = reports[name]
        rng = r.latency_range or ("", "")
        s = r.summary
        lines.append(
            f"{name},{r.counts.true_pos},{r.counts.false_pos},{r.counts.false_neg},"
            f"{r.counts.true_neg},{rng[0]},{rng[1]},{s.sensitivity!r},{s.fdr!r},{s.f1!r}"
        )
    return "\n".join(lines) + "\n"


def ensemble_csv(rows: list[EnsembleRow]) -> str:
    lines = ["threshold,true_pos,false_pos,false_neg,true_neg,sensitivity,fdr,f1"]
    for row in rows:
        s = row.summary
        lines.append(
            f"{row.threshold},{row.counts.true_pos},{row.counts.false_pos},"
            f"{row.counts.false_neg},{row.counts.true_neg},{s.sensitivity!r},{s.fdr!r},{s.f1!r}"
        )
    return "\n".join(lines) + "\n"
