"""Snapshot container files: self-describing JSON plus a CSV interop variant.

The JSON container stores the complex observations as row-major [re, im]
pairs together with the dimensions, an optional true noise-std matrix,
optional true source amplitudes, and the seed that produced them. The CSV
variant carries only the observations as (sensor, snapshot, re, im) rows.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .synthesis import NoiseCase, NoiseStdMatrix, SnapshotMatrix

SNAPSHOT_FORMAT = "hetdoa-snapshots-v1"
CSV_SCHEMA = "# hetdoa snapshots schema v1"


def _pairs(z: np.ndarray) -> list:
    flat = z.reshape(-1)
    return [[float(v.real), float(v.imag)] for v in flat]


def _from_pairs(pairs, shape, what: str) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] != shape[0] * shape[1]:
        raise SnapshotFormatError(f"{what} must hold {shape[0] * shape[1]} [re, im] pairs")
    return (arr[:, 0] + 1j * arr[:, 1]).reshape(shape)


def write_snapshots(path, snapshots: SnapshotMatrix):
    """Write a snapshot container; format chosen by the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _write_csv(path, snapshots)
        return
    doc = {
        "format": SNAPSHOT_FORMAT,
        "n_sensors": snapshots.n_sensors,
        "n_snapshots": snapshots.n_snapshots,
        "data": _pairs(snapshots.data),
    }
    if snapshots.seed is not None:
        doc["seed"] = int(snapshots.seed)
    if snapshots.noise_std is not None:
        doc["noise_std"] = [float(v) for v in snapshots.noise_std.values.reshape(-1)]
        doc["noise_case"] = snapshots.noise_std.case.value
    if snapshots.amplitudes is not None:
        doc["n_grid"] = int(snapshots.amplitudes.shape[0])
        doc["amplitudes"] = _pairs(snapshots.amplitudes)
    path.write_text(json.dumps(doc))


def read_snapshots(path) -> SnapshotMatrix:
    """Read a snapshot container written by write_snapshots."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotFormatError(
            f"{path}: invalid JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(doc, dict) or doc.get("format") != SNAPSHOT_FORMAT:
        raise SnapshotFormatError(f"{path}: not a {SNAPSHOT_FORMAT} container")
    try:
        n = int(doc["n_sensors"])
        l = int(doc["n_snapshots"])
        data = _from_pairs(doc["data"], (n, l), "data")
    except KeyError as exc:
        raise SnapshotFormatError(f"{path}: missing field {exc}") from exc
    noise_std = None
    if "noise_std" in doc:
        vals = np.asarray(doc["noise_std"], dtype=float)
        if vals.size != n * l:
            raise SnapshotFormatError(f"{path}: noise_std must hold {n * l} values")
        case = NoiseCase.parse(doc.get("noise_case", "III"))
        noise_std = NoiseStdMatrix(values=vals.reshape(n, l), case=case)
    amplitudes = None
    if "amplitudes" in doc:
        m = int(doc.get("n_grid", 0))
        if m < 1:
            raise SnapshotFormatError(f"{path}: amplitudes present but n_grid missing")
        amplitudes = _from_pairs(doc["amplitudes"], (m, l), "amplitudes")
    return SnapshotMatrix(data=data, amplitudes=amplitudes, noise_std=noise_std,
                          seed=doc.get("seed"))


def _write_csv(path: Path, snapshots: SnapshotMatrix):
    with open(path, "w", newline="") as f:
        f.write(CSV_SCHEMA + "\n")
        writer = csv.writer(f)
        writer.writerow(["sensor", "snapshot", "re", "im"])
        Y = snapshots.data
        for n in range(Y.shape[0]):
            for l in range(Y.shape[1]):
                writer.writerow([n, l, repr(Y[n, l].real), repr(Y[n, l].imag)])


def _read_csv(path: Path) -> SnapshotMatrix:
    raw = path.read_bytes()
    entries = {}
    offset = 0
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        text = line.decode("utf-8", errors="replace").strip()
        if text and not text.startswith("#"):
            fields = next(csv.reader(io.StringIO(text)))
            if [f.strip().lower() for f in fields] == ["sensor", "snapshot", "re", "im"]:
                offset += len(line) + 1
                continue
            try:
                n, l = int(fields[0]), int(fields[1])
                z = complex(float(fields[2]), float(fields[3]))
            except (ValueError, IndexError):
                raise SnapshotFormatError(
                    f"{path}: malformed row at byte offset {offset} (line {lineno})") from None
            entries[(n, l)] = z
        offset += len(line) + 1
    if not entries:
        raise SnapshotFormatError(f"{path}: no data rows found")
    n_sensors = max(k[0] for k in entries) + 1
    n_snapshots = max(k[1] for k in entries) + 1
    if len(entries) != n_sensors * n_snapshots:
        raise SnapshotFormatError(
            f"{path}: expected {n_sensors * n_snapshots} rows, found {len(entries)}")
    data = np.zeros((n_sensors, n_snapshots), dtype=np.complex128)
    for (n, l), z in entries.items():
        data[n, l] = z
    return SnapshotMatrix(data=data)
