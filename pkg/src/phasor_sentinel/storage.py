"""Persistent file formats: frames/labels/features CSV and run manifests.

Every artifact starts with a `# phasor-sentinel <kind> <version> ...`
header line; readers reject unknown major versions. Angles are degrees at
the CSV boundary, radians internally. Floats are written with repr so
write/read round-trips are exact and reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .correlation import CorrelationFeatureTable
from .phasors import ParameterId
from .spoof import SpoofedMinute
from .synth import MinuteDataset

FORMAT_VERSIONS = {
    "frames": "1.0",
    "labels": "1.0",
    "features": "1.0",
    "manifest": "1.0",
}


class SchemaError(ValueError):
    pass


def _header_line(kind: str, **attrs) -> str:
    parts = [f"# phasor-sentinel {kind} {FORMAT_VERSIONS[kind]}"]
    parts.extend(f"{k}={v}" for k, v in attrs.items())
    return " ".join(parts)


def _parse_header(line: str, kind: str) -> dict:
    tokens = line.strip().split()
    if len(tokens) < 4 or tokens[:2] != ["#", "phasor-sentinel"] or tokens[2] != kind:
        raise SchemaError(f"not a phasor-sentinel {kind} file")
    version = tokens[3]
    if version.split(".")[0] != FORMAT_VERSIONS[kind].split(".")[0]:
        raise SchemaError(f"unsupported {kind} schema version {version}")
    attrs = {}
    for tok in tokens[4:]:
        if "=" in tok:
            k, v = tok.split("=", 1)
            attrs[k] = v
    return attrs


FRAME_COLUMNS = "cycle,pmu,va_mag,va_ang_deg,vb_mag,vb_ang_deg,vc_mag,vc_ang_deg,freq_hz,rocof_hzps"

_DEG_FIELDS = {"va_ang", "vb_ang", "vc_ang"}


def write_frames_csv(minute: MinuteDataset, path):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(_header_line("frames", minute=minute.minute_id) + "\n")
        fh.write(FRAME_COLUMNS + "\n")
        p, n = minute.pmu_count, minute.n_cycles
        cols = [minute.raw(f) for f in MinuteDataset.RAW_FIELDS]
        deg = [f in _DEG_FIELDS for f in MinuteDataset.RAW_FIELDS]
        for c in range(n):
            cycle = minute.start_cycle + c
            for pmu in range(p):
                vals = [
                    repr(math.degrees(col[pmu, c]) if to_deg else float(col[pmu, c]))
                    for col, to_deg in zip(cols, deg)
                ]
                fh.write(f"{cycle},{pmu}," + ",".join(vals) + "\n")


def read_frames_csv(path) -> MinuteDataset:
    path = Path(path)
    with path.open() as fh:
        attrs = _parse_header(fh.readline(), "frames")
        columns = fh.readline().strip()
        if columns != FRAME_COLUMNS:
            raise SchemaError("unexpected frames column layout")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise SchemaError("empty frames file")
    cycles = np.array([int(r[0]) for r in rows])
    pmus = np.array([int(r[1]) for r in rows])
    p = pmus.max() + 1
    start = int(cycles.min())
    n = int(cycles.max()) - start + 1
    if len(rows) != p * n:
        raise SchemaError("frames file has gaps")
    data = {f: np.empty((p, n)) for f in MinuteDataset.RAW_FIELDS}
    for r, cycle, pmu in zip(rows, cycles, pmus):
        c = cycle - start
        for k, name in enumerate(MinuteDataset.RAW_FIELDS):
            v = float(r[2 + k])
            data[name][pmu, c] = math.radians(v) if name in _DEG_FIELDS else v
    for pmu in range(p):
        seen = np.sort(cycles[pmus == pmu])
        if not np.array_equal(seen, np.arange(start, start + n)):
            raise SchemaError(f"cycle indices for pmu {pmu} are not contiguous")
    return MinuteDataset(minute_id=int(attrs.get("minute", 0)), **data, start_cycle=start)


def write_labels_csv(spoofed: SpoofedMinute, path):
    path = Path(path)
    minute = spoofed.dataset
    with path.open("w") as fh:
        fh.write(_header_line("labels", minute=minute.minute_id, spoof=spoofed.spec.name) + "\n")
        fh.write("cycle,pmu_id,is_spoofed\n")
        for c in range(minute.n_cycles):
            cycle = minute.start_cycle + c
            for pmu in range(minute.pmu_count):
                flag = int(pmu == spoofed.spec.target_pmu and bool(spoofed.label_track[c]))
                fh.write(f"{cycle},{pmu},{flag}\n")


def read_labels_csv(path) -> tuple[int, np.ndarray]:
    """Returns (target_pmu, per-cycle bool track)."""
    path = Path(path)
    with path.open() as fh:
        _parse_header(fh.readline(), "labels")
        if fh.readline().strip() != "cycle,pmu_id,is_spoofed":
            raise SchemaError("unexpected labels column layout")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    spoofed_rows = [(int(c), int(p)) for c, p, flag in rows if flag == "1"]
    if not spoofed_rows:
        raise SchemaError("labels file marks no spoofed cycles")
    targets = {p for _, p in spoofed_rows}
    if len(targets) != 1:
        raise SchemaError("multiple spoofed PMUs in labels file")
    n = max(int(c) for c, _, _ in rows) + 1
    track = np.zeros(n, dtype=bool)
    for c, _ in spoofed_rows:
        track[c] = True
    return targets.pop(), track


def write_features_csv(table: CorrelationFeatureTable, path, minute_id: int = 0):
    path = Path(path)
    names = [ch.short_name for ch in table.channels]
    with path.open("w") as fh:
        fh.write(_header_line("features", window=table.window, minute=minute_id) + "\n")
        fh.write("cycle,pmu_i,pmu_j," + ",".join(f"r_{n}" for n in names) + "\n")
        for row in table.iter_rows():
            vals = ",".join(repr(row.r[ch]) for ch in table.channels)
            fh.write(f"{row.cycle},{row.pmu_i},{row.pmu_j},{vals}\n")


def read_features_csv(path) -> CorrelationFeatureTable:
    path = Path(path)
    with path.open() as fh:
        attrs = _parse_header(fh.readline(), "features")
        cols = fh.readline().strip().split(",")
        channels = tuple(_param_from_csv(name) for name in cols[3:])
        rows = [line.strip().split(",") for line in fh if line.strip()]
    window = int(attrs["window"])
    cycles = sorted({int(r[0]) for r in rows})
    pairs = sorted({(int(r[1]), int(r[2])) for r in rows})
    pair_index = {pr: k for k, pr in enumerate(pairs)}
    first = cycles[0]
    r = np.empty((len(pairs), len(cycles), len(channels)))
    for row in rows:
        c = int(row[0]) - first
        k = pair_index[(int(row[1]), int(row[2]))]
        r[k, c, :] = [float(v) for v in row[3:]]
    return CorrelationFeatureTable(
        window=window, channels=channels, pairs=pairs, first_cycle=first, r=r
    )


def _param_from_csv(name: str) -> ParameterId:
    from .phasors import PARAM_BY_NAME

    key = name[2:] if name.startswith("r_") else name
    if key not in PARAM_BY_NAME:
        raise SchemaError(f"unknown channel column {name!r}")
    return PARAM_BY_NAME[key]


def write_manifest(path, payload: dict):
    doc = {"schema_version": FORMAT_VERSIONS["manifest"], **payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    doc = json.loads(Path(path).read_text())
    major = str(doc.get("schema_version", "")).split(".")[0]
    if major != FORMAT_VERSIONS["manifest"].split(".")[0]:
        raise SchemaError(f"unsupported manifest version {doc.get('schema_version')!r}")
    return doc
