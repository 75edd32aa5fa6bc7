import io
import subprocess

import numpy as np
import pytest
from click.testing import CliRunner

from phasor_sentinel import storage
from phasor_sentinel.cli import _stream_detect, cli
from phasor_sentinel.detect import FeatureSetId
from phasor_sentinel.svm import Standardizer, SvmModel
from phasor_sentinel.synth import FleetConfig, MinuteDataset, generate_minute


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def frames_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("frames")
    config = FleetConfig(pmu_count=3, minutes=2, seed=3)
    for m in range(2):
        minute = generate_minute(config, m)
        storage.write_frames_csv(minute, out / f"minute_{m:02d}.csv")
    return out


class TestSynth:
    def test_writes_minutes_and_manifest(self, runner, tmp_path):
        out = tmp_path / "data"
        result = runner.invoke(
            cli, ["synth", "--pmus", "3", "--minutes", "2", "--seed", "3", "--out", str(out)]
        )
        assert result.exit_code == 0, result.output
        files = sorted(f.name for f in out.glob("minute_*.csv"))
        assert files == ["minute_00.csv", "minute_01.csv"]
        manifest = storage.read_manifest(out / "manifest.json")
        assert manifest["seed"] == 3

    def test_rerun_is_byte_identical(self, runner, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            result = runner.invoke(
                cli, ["synth", "--pmus", "2", "--minutes", "1", "--seed", "9", "--out", str(out)]
            )
            assert result.exit_code == 0
        assert (a / "minute_00.csv").read_bytes() == (b / "minute_00.csv").read_bytes()

    def test_refuses_overwrite_without_force(self, runner, tmp_path):
        out = tmp_path / "data"
        out.mkdir()
        (out / "existing.csv").write_text("x")
        result = runner.invoke(cli, ["synth", "--pmus", "2", "--minutes", "1", "--out", str(out)])
        assert result.exit_code != 0

    def test_single_pmu_rejected_with_exit_code_1(self, tmp_path):
        proc = subprocess.run(
            ["phasor-sentinel", "synth", "--pmus", "1", "--out", str(tmp_path / "x")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 1
        assert "error" in proc.stderr


class TestSpoof:
    def test_single_kind(self, runner, frames_dir, tmp_path):
        out = tmp_path / "spoofed"
        result = runner.invoke(
            cli,
            ["spoof", "--in", str(frames_dir), "--out", str(out), "--kind", "mirror"],
        )
        assert result.exit_code == 0, result.output
        assert (out / "minute_00.csv").exists()
        target, track = storage.read_labels_csv(out / "labels_00.csv")
        assert target == 0 and track[1800:].all() and not track[:1800].any()

    def test_non_target_pmus_pass_through(self, runner, frames_dir, tmp_path):
        out = tmp_path / "spoofed"
        runner.invoke(cli, ["spoof", "--in", str(frames_dir), "--out", str(out), "--kind", "mirror"])
        orig = storage.read_frames_csv(frames_dir / "minute_00.csv")
        spoofed = storage.read_frames_csv(out / "minute_00.csv")
        np.testing.assert_array_equal(orig.freq[1:], spoofed.freq[1:])
        assert not np.array_equal(orig.freq[0, 1800:], spoofed.freq[0, 1800:])

    def test_suite_emits_nine_directories(self, runner, frames_dir, tmp_path):
        out = tmp_path / "suite"
        result = runner.invoke(
            cli, ["spoof", "--in", str(frames_dir), "--out", str(out), "--suite", "nine"]
        )
        assert result.exit_code == 0, result.output
        names = sorted(d.name for d in out.iterdir() if d.is_dir())
        assert names == ["S1", "S2", "S3.1", "S3.2", "S3.3", "S3.4", "S3.5", "S3.6", "S3.7"]

    def test_dilate_needs_ratio(self, runner, frames_dir, tmp_path):
        result = runner.invoke(
            cli,
            ["spoof", "--in", str(frames_dir), "--out", str(tmp_path / "x"), "--kind", "dilate"],
        )
        assert result.exit_code != 0

    def test_bad_ratio_rejected(self, runner, frames_dir, tmp_path):
        result = runner.invoke(
            cli,
            [
                "spoof", "--in", str(frames_dir), "--out", str(tmp_path / "x"),
                "--kind", "dilate", "--ratio", "1/2",
            ],
        )
        assert result.exit_code != 0


class TestFeatures:
    def test_writes_feature_tables(self, runner, frames_dir, tmp_path):
        out = tmp_path / "features"
        result = runner.invoke(
            cli,
            [
                "features", "--in", str(frames_dir), "--out", str(out),
                "--window", "3500", "--channels", "freq,v_pos_ang",
            ],
        )
        assert result.exit_code == 0, result.output
        table = storage.read_features_csv(out / "features_00.csv")
        assert table.window == 3500
        assert len(table.channels) == 2

    def test_unknown_channel_rejected(self, runner, frames_dir, tmp_path):
        result = runner.invoke(
            cli,
            [
                "features", "--in", str(frames_dir), "--out", str(tmp_path / "x"),
                "--channels", "bogus",
            ],
        )
        assert result.exit_code != 0


class TestTrainEval:
    def test_train_then_eval_guard(self, runner, frames_dir, tmp_path):
        model_path = tmp_path / "model.json"
        result = runner.invoke(
            cli,
            [
                "train", "--frames", str(frames_dir), "--spoof", "S1",
                "--train-minutes", "0", "--stride", "120", "--out", str(model_path),
            ],
        )
        assert result.exit_code == 0, result.output
        model = SvmModel.load(model_path)
        assert model.metadata["spoof_kind"] == "S1"
        assert model.metadata["train_minutes"] == [0]
        # evaluating on the training minute must be refused
        result = runner.invoke(
            cli,
            ["eval", "--model", str(model_path), "--frames", str(frames_dir), "--test-minutes", "0"],
        )
        assert result.exit_code != 0
        # held-out minute evaluates cleanly
        result = runner.invoke(
            cli,
            ["eval", "--model", str(model_path), "--frames", str(frames_dir), "--test-minutes", "1"],
        )
        assert result.exit_code == 0, result.output
        assert "S1" in result.output

    def test_unknown_spoof_name(self, runner, frames_dir, tmp_path):
        result = runner.invoke(
            cli,
            [
                "train", "--frames", str(frames_dir), "--spoof", "S9",
                "--train-minutes", "0", "--out", str(tmp_path / "m.json"),
            ],
        )
        assert result.exit_code != 0


def _tiny_minute(n=140, p=2):
    t = np.arange(n, dtype=float)
    rng = np.random.default_rng(0)
    shared = np.cumsum(rng.standard_normal(n)) * 0.001
    data = {}
    for name in MinuteDataset.RAW_FIELDS:
        base = np.tile(shared, (p, 1)) + 1e-5 * rng.standard_normal((p, n))
        if name.endswith("_mag"):
            base = base + 1.0
        if name == "freq":
            base = base + 60.0
        data[name] = base
    return MinuteDataset(minute_id=0, **data)


def _identity_model():
    # margin = k(x, 0)*0 + bias: always Normal; enough to exercise plumbing
    return SvmModel(
        standardizer=Standardizer(mean=np.zeros(5), scale=np.ones(5)),
        gamma=0.2,
        C=1.0,
        support_vectors=np.zeros((1, 5)),
        dual_coef=np.zeros(1),
        bias=-1.0,
        metadata={"feature_set": "five"},
    )


class TestStreamingDetect:
    def test_emits_priming_then_verdicts(self, tmp_path):
        minute = _tiny_minute(n=140)
        frames_path = tmp_path / "stream.csv"
        storage.write_frames_csv(minute, frames_path)
        out = io.StringIO()
        with frames_path.open() as stream:
            _stream_detect(stream, out, [_identity_model()], FeatureSetId.FIVE.channels, 1, 60)
        lines = out.getvalue().strip().splitlines()
        assert len(lines) == 140
        assert lines[0] == "0,priming"
        assert lines[58] == "58,priming"
        assert all(line.endswith(",normal") for line in lines[59:])

    def test_detect_requires_models(self, runner, tmp_path):
        result = runner.invoke(
            cli, ["detect", "--models", str(tmp_path), "--follow"], input=""
        )
        assert result.exit_code != 0


class TestReport:
    def test_report_smoke_and_manifest_rerun(self, runner, tmp_path):
        # minimal geometry: 3 minutes, train 2 / test 1
        from phasor_sentinel.pipeline import ExperimentConfig

        config = ExperimentConfig(
            pmu_count=4, minutes=3, seed=3, train_minute_count=2, train_stride=450, test_stride=10
        )
        manifest_path = tmp_path / "request.json"
        storage.write_manifest(manifest_path, {"command": "report", "experiment": config.to_dict()})
        out = tmp_path / "report"
        result = runner.invoke(
            cli, ["report", "--manifest", str(manifest_path), "--out", str(out), "--emit", "svg"]
        )
        assert result.exit_code == 0, result.output
        assert (out / "spoof_metrics.csv").exists()
        assert (out / "ensemble_metrics.csv").exists()
        assert len(list(out.glob("model_*.json"))) == 9
        assert (out / "trajectory_s1_freq.svg").read_text().startswith("<svg")
        rerun_manifest = storage.read_manifest(out / "manifest.json")
        assert rerun_manifest["experiment"] == config.to_dict()
