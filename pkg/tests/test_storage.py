import numpy as np
import pytest

from phasor_sentinel import storage
from phasor_sentinel.correlation import correlate_fleet
from phasor_sentinel.phasors import ParameterId
from phasor_sentinel.spoof import SpoofKind, SpoofSpec, apply_spoof
from phasor_sentinel.storage import SchemaError


class TestHeader:
    def test_round_trip(self):
        line = storage._header_line("frames", minute=3)
        attrs = storage._parse_header(line, "frames")
        assert attrs == {"minute": "3"}

    def test_wrong_kind_rejected(self):
        line = storage._header_line("frames")
        with pytest.raises(SchemaError):
            storage._parse_header(line, "labels")

    def test_unknown_major_rejected(self):
        with pytest.raises(SchemaError):
            storage._parse_header("# phasor-sentinel frames 9.0", "frames")

    def test_minor_version_accepted(self):
        storage._parse_header("# phasor-sentinel frames 1.7 a=b", "frames")

    def test_garbage_rejected(self):
        with pytest.raises(SchemaError):
            storage._parse_header("cycle,pmu,freq", "frames")


class TestFramesCsv:
    def test_round_trip_is_exact(self, one_minute, tmp_path):
        path = tmp_path / "minute_00.csv"
        storage.write_frames_csv(one_minute, path)
        back = storage.read_frames_csv(path)
        assert back.minute_id == one_minute.minute_id
        assert back.start_cycle == one_minute.start_cycle
        for name in one_minute.RAW_FIELDS:
            np.testing.assert_allclose(back.raw(name), one_minute.raw(name), atol=1e-12)
        # non-angle fields round-trip bit exactly (repr floats)
        np.testing.assert_array_equal(back.freq, one_minute.freq)
        np.testing.assert_array_equal(back.rocof, one_minute.rocof)

    def test_write_is_deterministic(self, one_minute, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        storage.write_frames_csv(one_minute, a)
        storage.write_frames_csv(one_minute, b)
        assert a.read_bytes() == b.read_bytes()

    def test_angles_in_degrees_at_boundary(self, one_minute, tmp_path):
        path = tmp_path / "m.csv"
        storage.write_frames_csv(one_minute, path)
        with path.open() as fh:
            fh.readline()
            header = fh.readline().strip()
            first = fh.readline().strip().split(",")
        assert header == storage.FRAME_COLUMNS
        va_ang_deg = float(first[3])
        assert va_ang_deg == pytest.approx(np.degrees(one_minute.va_ang[0, 0]))

    def test_gap_detection(self, one_minute, tmp_path):
        path = tmp_path / "m.csv"
        storage.write_frames_csv(one_minute, path)
        lines = path.read_text().splitlines()
        del lines[10]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError):
            storage.read_frames_csv(path)

    def test_wrong_columns_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# phasor-sentinel frames 1.0 minute=0\ncycle,pmu,extra\n")
        with pytest.raises(SchemaError):
            storage.read_frames_csv(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(f"# phasor-sentinel frames 1.0 minute=0\n{storage.FRAME_COLUMNS}\n")
        with pytest.raises(SchemaError):
            storage.read_frames_csv(path)


class TestLabelsCsv:
    def test_round_trip(self, one_minute, tmp_path):
        spoofed = apply_spoof(one_minute, SpoofSpec(SpoofKind.MIRROR, 1, 1800))
        path = tmp_path / "labels.csv"
        storage.write_labels_csv(spoofed, path)
        target, track = storage.read_labels_csv(path)
        assert target == 1
        np.testing.assert_array_equal(track, spoofed.label_track)

    def test_all_normal_rejected(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text(
            "# phasor-sentinel labels 1.0\ncycle,pmu_id,is_spoofed\n0,0,0\n0,1,0\n"
        )
        with pytest.raises(SchemaError):
            storage.read_labels_csv(path)


class TestFeaturesCsv:
    def test_round_trip_bit_exact(self, one_minute, tmp_path):
        table = correlate_fleet(one_minute, 3500, (ParameterId.FREQ, ParameterId.V_POS_ANG))
        path = tmp_path / "features.csv"
        storage.write_features_csv(table, path, minute_id=0)
        back = storage.read_features_csv(path)
        assert back.window == table.window
        assert back.channels == table.channels
        assert back.pairs == table.pairs
        assert back.first_cycle == table.first_cycle
        np.testing.assert_array_equal(back.r, table.r)

    def test_unknown_channel_column_rejected(self, tmp_path):
        path = tmp_path / "f.csv"
        path.write_text(
            "# phasor-sentinel features 1.0 window=60 minute=0\n"
            "cycle,pmu_i,pmu_j,r_bogus\n59,0,1,0.5\n"
        )
        with pytest.raises(SchemaError):
            storage.read_features_csv(path)


class TestManifest:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "manifest.json"
        storage.write_manifest(path, {"command": "synth", "seed": 7})
        doc = storage.read_manifest(path)
        assert doc["command"] == "synth" and doc["seed"] == 7
        assert doc["schema_version"] == "1.0"

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"schema_version": "3.0"}')
        with pytest.raises(SchemaError):
            storage.read_manifest(path)

    def test_write_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        storage.write_manifest(a, {"z": 1, "a": 2})
        storage.write_manifest(b, {"a": 2, "z": 1})
        assert a.read_bytes() == b.read_bytes()
