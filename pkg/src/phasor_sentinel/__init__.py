"""Spoof detection for synchrophasor fleets via inter-PMU correlation."""

from .phasors import ParameterId, Phasor, PhasorFrame, SequenceSet, extract_channel, fortescue
from .synth import FleetConfig, MinuteDataset, generate_fleet, generate_minute
from .spoof import SpoofKind, SpoofSpec, SpoofedMinute, apply_spoof, nine_spoof_suite
from .correlation import (
    CorrelationFeatureRow,
    CorrelationFeatureTable,
    PairChannelState,
    correlate_fleet,
    intra_pmu_stats,
    pearson,
)
from .severity import TrajectoryBundle, mcd, mcoob, severity_report
from .svm import Standardizer, SvmModel, decide, grid_search, rbf_kernel, train_svm
from .detect import (
    EvalCounts,
    FeatureSetId,
    TimingRule,
    build_examples,
    ensemble_vote,
    evaluate_ensemble_loo,
    evaluate_spoof_specific,
    latency,
    metrics,
)
from .pipeline import ExperimentConfig, run_experiment

__version__ = "0.1.0"
