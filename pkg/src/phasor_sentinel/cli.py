"""Command-line pipeline: synth -> spoof -> features -> train -> eval ->
ensemble -> report, plus a streaming detect mode reading frames CSV from
stdin.

Exit codes: 0 success, 1 validation/usage error, 2 runtime or convergence
error.
"""

from __future__ import annotations

import itertools
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import click
import numpy as np

from . import storage
from .correlation import PairChannelState, correlate_fleet
from .detect import FeatureSetId, TimingRule, build_examples, evaluate_spoof_specific
from .phasors import ParameterId, fortescue_arrays
from .pipeline import (
    ExperimentConfig,
    ensemble_csv,
    render_ensemble_table,
    render_spoof_table,
    run_experiment,
    spoof_report_csv,
    split_minutes,
    train_one_spoof,
)
from .severity import severity_from_minute
from .spoof import (
    SUITE_DILATION_RATIOS,
    SpoofKind,
    SpoofSpec,
    apply_spoof,
    nine_spoof_suite,
)
from .svm import ConvergenceError, SvmModel, grid_search
from .synth import FleetConfig, generate_fleet


def _jobs_default():
    return int(os.environ.get("PHASOR_SENTINEL_JOBS", "1"))


@click.group()
def cli():
    """Spoof detection toolkit for synchrophasor fleets."""


def _ensure_out(path: Path, force: bool):
    if path.exists() and any(path.iterdir()) and not force:
        raise click.UsageError(f"output {path} exists; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)


def _load_minutes(frames_dir: Path):
    files = sorted(Path(frames_dir).glob("minute_*.csv"))
    if not files:
        raise click.UsageError(f"no minute_*.csv files in {frames_dir}")
    minutes = [storage.read_frames_csv(f) for f in files]
    return {m.minute_id: m for m in minutes}


def _parse_minutes(text: str) -> list[int]:
    try:
        return sorted({int(tok) for tok in text.split(",") if tok.strip() != ""})
    except ValueError:
        raise click.UsageError(f"bad minute list {text!r}")


def _spec_from_flags(kind: str, ratio: str | None, pmu: int, start: int, noise_seed: int) -> SpoofSpec:
    try:
        k = SpoofKind(kind)
    except ValueError:
        raise click.UsageError(f"unknown spoof kind {kind!r}")
    dilation = None
    if k is SpoofKind.DILATE:
        if not ratio:
            raise click.UsageError("dilate requires --ratio, e.g. 3/2")
        try:
            dilation = Fraction(ratio)
        except (ValueError, ZeroDivisionError):
            raise click.UsageError(f"bad ratio {ratio!r}")
        if dilation <= 1:
            raise click.UsageError("dilation ratio must exceed 1")
    return SpoofSpec(k, target_pmu=pmu, spoof_start_cycle=start, dilation_ratio=dilation, noise_seed=noise_seed)


@cli.command()
@click.option("--pmus", default=10, show_default=True)
@click.option("--minutes", default=14, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--force", is_flag=True)
def synth(pmus, minutes, seed, out, force):
    """Generate synthetic fleet minutes as frames CSV files."""
    if pmus < 2:
        raise click.UsageError("need at least 2 PMUs")
    _ensure_out(out, force)
    config = FleetConfig(pmu_count=pmus, minutes=minutes, seed=seed)
    for minute in generate_fleet(config):
        storage.write_frames_csv(minute, out / f"minute_{minute.minute_id:02d}.csv")
    storage.write_manifest(
        out / "manifest.json",
        {"command": "synth", "pmus": pmus, "minutes": minutes, "seed": seed},
    )
    click.echo(f"wrote {minutes} minutes to {out}")


@cli.command("spoof")
@click.option("--in", "in_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--kind", type=click.Choice([k.value for k in SpoofKind]), default=None)
@click.option("--ratio", default=None, help="dilation ratio, e.g. 3/2")
@click.option("--pmu", default=0, show_default=True)
@click.option("--start", default=1800, show_default=True)
@click.option("--noise-seed", default=0, show_default=True)
@click.option("--suite", type=click.Choice(["nine"]), default=None, help="emit the full nine-spoof suite")
@click.option("--force", is_flag=True)
def spoof_cmd(in_dir, out, kind, ratio, pmu, start, noise_seed, suite, force):
    """Apply spoof playback to every input minute; writes frames + labels."""
    minutes = _load_minutes(in_dir)
    if suite:
        specs = nine_spoof_suite(pmu, start, noise_seed)
    elif kind:
        specs = [_spec_from_flags(kind, ratio, pmu, start, noise_seed)]
    else:
        raise click.UsageError("pass --kind or --suite")
    _ensure_out(out, force)
    for spec in specs:
        dest = out / spec.name if suite else out
        dest.mkdir(parents=True, exist_ok=True)
        for mid, minute in sorted(minutes.items()):
            spoofed = apply_spoof(minute, spec)
            storage.write_frames_csv(spoofed.dataset, dest / f"minute_{mid:02d}.csv")
            storage.write_labels_csv(spoofed, dest / f"labels_{mid:02d}.csv")
    storage.write_manifest(
        out / "manifest.json",
        {
            "command": "spoof",
            "spoofs": [s.name for s in specs],
            "target_pmu": pmu,
            "spoof_start": start,
            "noise_seed": noise_seed,
        },
    )
    click.echo(f"wrote {len(specs)} spoof variant(s) to {out}")


@cli.command()
@click.option("--in", "in_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--window", default=300, show_default=True)
@click.option(
    "--channels",
    default="five",
    show_default=True,
    help="'three', 'five', 'all', or comma-separated channel names",
)
@click.option("--force", is_flag=True)
def features(in_dir, out, window, channels, force):
    """Windowed inter-PMU correlation features for each input minute."""
    chan = _parse_channels(channels)
    minutes = _load_minutes(in_dir)
    _ensure_out(out, force)
    for mid, minute in sorted(minutes.items()):
        table = correlate_fleet(minute, window, chan)
        storage.write_features_csv(table, out / f"features_{mid:02d}.csv", minute_id=mid)
    click.echo(f"wrote features for {len(minutes)} minute(s) to {out}")


def _parse_channels(text: str):
    if text == "three":
        return FeatureSetId.THREE.channels
    if text == "five":
        return FeatureSetId.FIVE.channels
    if text == "all":
        return tuple(ParameterId)
    from .phasors import PARAM_BY_NAME

    out = []
    for tok in text.split(","):
        if tok not in PARAM_BY_NAME:
            raise click.UsageError(f"unknown channel {tok!r}")
        out.append(PARAM_BY_NAME[tok])
    return tuple(out)


def _experiment_config_from_flags(pmus, minutes, seed, features_name, window, c_value, gamma, stride):
    return ExperimentConfig(
        pmu_count=pmus,
        minutes=minutes,
        seed=seed,
        feature_set=FeatureSetId(features_name),
        window=window,
        C=c_value,
        gamma=gamma,
        train_stride=stride,
    )


@cli.command()
@click.option("--frames", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--spoof", "spoof_name", required=True, help="S1, S2, or S3.1..S3.7")
@click.option("--train-minutes", required=True, help="comma-separated minute ids")
@click.option("--features", "features_name", type=click.Choice(["three", "five"]), default="five", show_default=True)
@click.option("--window", default=300, show_default=True)
@click.option("--c", "c_value", default=1.0, show_default=True)
@click.option("--gamma", default=0.2, show_default=True)
@click.option("--stride", default=300, show_default=True, help="training cycle subsampling stride")
@click.option("--pmu", default=0, show_default=True)
@click.option("--start", default=1800, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def train(frames, spoof_name, train_minutes, features_name, window, c_value, gamma, stride, pmu, start, out):
    """Train one spoof-specific SVM from base frames (late-timing labels)."""
    minutes = _load_minutes(frames)
    train_ids = _parse_minutes(train_minutes)
    missing = [m for m in train_ids if m not in minutes]
    if missing:
        raise click.UsageError(f"minutes not found in frames dir: {missing}")
    spec = _find_suite_spec(spoof_name, pmu, start)
    config = _experiment_config_from_flags(
        len(next(iter(minutes.values())).freq), len(minutes), 0, features_name, window, c_value, gamma, stride
    )
    model = train_one_spoof(config, spec, _as_minute_list(minutes), train_ids)
    model.save(out)
    click.echo(f"trained {spoof_name}: {model.n_support} support vectors -> {out}")


def _find_suite_spec(name: str, pmu: int, start: int) -> SpoofSpec:
    for spec in nine_spoof_suite(pmu, start):
        if spec.name == name:
            return spec
    raise click.UsageError(f"unknown spoof name {name!r} (expected S1, S2, S3.1..S3.7)")


def _as_minute_list(minutes: dict):
    top = max(minutes) + 1
    out = [None] * top
    for mid, m in minutes.items():
        out[mid] = m
    return out


@cli.command("eval")
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--frames", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--test-minutes", required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
def eval_cmd(model_path, frames, test_minutes, out):
    """Early-timing evaluation of a trained model on held-out minutes."""
    model = SvmModel.load(model_path)
    minutes = _load_minutes(frames)
    test_ids = _parse_minutes(test_minutes)
    overlap = set(test_ids) & set(model.metadata.get("train_minutes", []))
    if overlap:
        raise click.UsageError(f"test minutes overlap training minutes: {sorted(overlap)}")
    spec = _find_suite_spec(
        model.metadata.get("spoof_kind", "S1"), 0, 1800
    )
    spoofed = [apply_spoof(minutes[m], spec) for m in test_ids]
    examples = build_examples(
        spoofed,
        features=FeatureSetId(model.metadata.get("feature_set", "five")),
        window=int(model.metadata.get("window", 300)),
        timing=TimingRule.EARLY,
    )
    report = evaluate_spoof_specific(model, examples)
    text = render_spoof_table({report.spoof_name: report})
    click.echo(text, nl=False)
    if out:
        Path(out).write_text(spoof_report_csv({report.spoof_name: report}))


@cli.command()
@click.option("--frames", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--spoof", "spoof_name", default="S1", show_default=True)
@click.option("--train-minutes", required=True)
@click.option("--validate-minutes", required=True)
@click.option("--c-grid", default="0.1,1,10", show_default=True)
@click.option("--gamma-grid", default="0.05,0.2,1", show_default=True)
@click.option("--features", "features_name", type=click.Choice(["three", "five"]), default="five", show_default=True)
@click.option("--stride", default=300, show_default=True)
def grid(frames, spoof_name, train_minutes, validate_minutes, c_grid, gamma_grid, features_name, stride):
    """Grid search C and gamma on a train/validate minute split."""
    minutes = _load_minutes(frames)
    train_ids = _parse_minutes(train_minutes)
    val_ids = _parse_minutes(validate_minutes)
    spec = _find_suite_spec(spoof_name, 0, 1800)
    fs = FeatureSetId(features_name)
    spoofed_train = [apply_spoof(minutes[m], spec) for m in train_ids]
    spoofed_val = [apply_spoof(minutes[m], spec) for m in val_ids]
    train_ex = build_examples(spoofed_train, features=fs, timing=TimingRule.LATE, cycle_stride=stride)
    val_ex = build_examples(spoofed_val, features=fs, timing=TimingRule.LATE, cycle_stride=stride)
    cells = grid_search(
        train_ex,
        val_ex,
        C_grid=[float(v) for v in c_grid.split(",")],
        gamma_grid=[float(v) for v in gamma_grid.split(",")],
    )
    click.echo("C        gamma    f1")
    for cell in cells:
        click.echo(f"{cell.C:<8} {cell.gamma:<8} {cell.f1:.4f}")


@cli.command()
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--pmus", default=10, show_default=True)
@click.option("--minutes", default=14, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--features", "features_name", type=click.Choice(["three", "five"]), default="five", show_default=True)
@click.option("--window", default=300, show_default=True)
@click.option("--c", "c_value", default=1.0, show_default=True)
@click.option("--gamma", default=0.2, show_default=True)
@click.option("--stride", default=300, show_default=True)
@click.option("--manifest", type=click.Path(exists=True, path_type=Path), default=None, help="rerun a previous report from its manifest")
@click.option("--emit", type=click.Choice(["csv", "svg"]), multiple=True, default=("csv",))
@click.option("--jobs", type=int, default=_jobs_default, show_default="PHASOR_SENTINEL_JOBS or 1")
@click.option("--force", is_flag=True)
def report(out, pmus, minutes, seed, features_name, window, c_value, gamma, stride, manifest, emit, jobs, force):
    """Run the full nine-spoof experiment and emit reports."""
    if jobs < 1:
        raise click.UsageError("--jobs must be >= 1")
    if manifest:
        config = ExperimentConfig.from_dict(storage.read_manifest(manifest)["experiment"])
    else:
        config = _experiment_config_from_flags(pmus, minutes, seed, features_name, window, c_value, gamma, stride)
    _ensure_out(out, force)
    result = run_experiment(config, progress=lambda m: click.echo(m, err=True))
    (out / "spoof_metrics.csv").write_text(spoof_report_csv(result.reports))
    (out / "ensemble_metrics.csv").write_text(ensemble_csv(result.ensemble))
    (out / "spoof_table.txt").write_text(render_spoof_table(result.reports))
    (out / "ensemble_table.txt").write_text(render_ensemble_table(result.ensemble))
    for name, model in result.models.items():
        model.save(out / f"model_{name.replace('.', '_')}.json")
    if "svg" in emit:
        _emit_svgs(out, config)
    storage.write_manifest(
        out / "manifest.json",
        {
            "command": "report",
            "experiment": config.to_dict(),
            "train_minutes": result.train_minutes,
            "test_minutes": result.test_minutes,
        },
    )
    click.echo(render_spoof_table(result.reports), nl=False)
    click.echo(render_ensemble_table(result.ensemble), nl=False)


def _emit_svgs(out: Path, config: ExperimentConfig):
    from .plot import severity_svg, trajectory_svg

    fleet = FleetConfig(pmu_count=config.pmu_count, minutes=config.minutes, seed=config.seed)
    minute = generate_fleet(fleet)[0]
    spec = nine_spoof_suite(config.target_pmu, config.spoof_start, config.seed)[0]
    spoofed = apply_spoof(minute, spec)
    table = correlate_fleet(spoofed, config.window, (ParameterId.FREQ,))
    (out / "trajectory_s1_freq.svg").write_text(
        trajectory_svg(table, config.target_pmu, ParameterId.FREQ)
    )
    (out / "severity_s1.svg").write_text(severity_svg(severity_from_minute(spoofed)))


@cli.command()
@click.option("--models", "models_dir", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--threshold", default=5, show_default=True)
@click.option("--follow", is_flag=True, help="read frames CSV from stdin, emit per-cycle verdicts")
@click.option("--window", default=300, show_default=True)
def detect(models_dir, threshold, follow, window):
    """Streaming ensemble detection over frames CSV on stdin."""
    if not follow:
        raise click.UsageError("only --follow mode is supported")
    model_files = sorted(Path(models_dir).glob("model_*.json"))
    if not model_files:
        raise click.UsageError(f"no model_*.json files in {models_dir}")
    models = [SvmModel.load(f) for f in model_files]
    if not 1 <= threshold <= len(models):
        raise click.UsageError("threshold out of range for model count")
    fs_names = {m.metadata.get("feature_set", "five") for m in models}
    if len(fs_names) > 1:
        raise click.UsageError("models use mixed feature sets")
    channels = FeatureSetId(fs_names.pop()).channels
    _stream_detect(sys.stdin, sys.stdout, models, channels, threshold, window)


def _stream_detect(stream, out, models, channels, threshold, window):
    header = stream.readline()
    storage._parse_header(header, "frames")
    columns = stream.readline().strip()
    if columns != storage.FRAME_COLUMNS:
        raise click.UsageError("unexpected frames column layout on stdin")

    states: dict = {}
    prev_angles: dict = {}
    unwrapped: dict = {}
    pending: dict = {}
    expected_pmus: set = set()
    current_cycle = None

    def process_cycle(cycle, rows):
        nonlocal states
        values = {}
        for pmu, rec in rows.items():
            pm, pa, nm, na, zm, za = (
                float(v[0]) for v in fortescue_arrays(*(np.array([rec[i]]) for i in range(6)))
            )
            chan_vals = [pm, pa, nm, na, zm, za, rec[6], rec[7]]
            for pid in ParameterId:
                if pid.is_angle:
                    key = (pmu, pid)
                    ang = chan_vals[pid]
                    if key in prev_angles:
                        delta = ang - prev_angles[key]
                        delta -= 2 * np.pi * round(delta / (2 * np.pi))
                        unwrapped[key] += delta
                    else:
                        unwrapped[key] = ang
                    prev_angles[key] = ang
                    chan_vals[pid] = unwrapped[key]
            values[pmu] = chan_vals
        pmus = sorted(values)
        verdict = None
        feats = {}
        ready = True
        for i, j in itertools.combinations(pmus, 2):
            vec = []
            for ch in channels:
                key = (i, j, ch)
                if key not in states:
                    states[key] = PairChannelState(window)
                r = states[key].push(values[i][ch], values[j][ch])
                vec.append(r)
            if any(v is None for v in vec):
                ready = False
            else:
                feats[(i, j)] = vec
        if ready and feats:
            x = np.array(list(feats.values()))
            votes = np.zeros(x.shape[0], dtype=int)
            for m in models:
                votes += (m.margins(x) > 0).astype(int)
            verdict = "spoofed" if np.any(votes >= threshold) else "normal"
        out.write(f"{cycle},{verdict or 'priming'}\n")
        out.flush()

    for line in stream:
        if not line.strip():
            continue
        parts = line.strip().split(",")
        cycle, pmu = int(parts[0]), int(parts[1])
        rec = [np.radians(float(parts[k])) if k in (3, 5, 7) else float(parts[k]) for k in range(2, 10)]
        if current_cycle is None:
            current_cycle = cycle
        if cycle != current_cycle:
            process_cycle(current_cycle, pending)
            expected_pmus.update(pending)
            pending = {}
            current_cycle = cycle
        pending[pmu] = rec
    if pending:
        process_cycle(current_cycle, pending)


def main():
    try:
        cli.main(standalone_mode=False)
    except (click.UsageError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except ConvergenceError as exc:
        click.echo(f"convergence error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # runtime failures
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
