"""CSV dataset ingestion and emission.

Files are plain comma-separated text. Metadata lines start with '#'
(`# key: value`), followed by a mandatory header row whose column names
carry unit declarations (`time:s,freq:Hz,err:Hz`). Values are normalized
to SI on load. Writes are atomic (temp file + rename) and floats are
serialized with repr so a write/read round trip is lossless.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beam import RabiPositionScan
from .charging import FrequencySeries
from .heating import HeatingSeries
from .thermometry import SidebandObservation
from .units import TWO_PI

DATASET_KINDS = ("heating", "charging", "sideband-scan", "position-scan")


class DatasetError(ValueError):
    """Schema, unit, or monotonicity violation in a dataset file."""


# unit -> SI multiplier, per column role
_UNIT_TABLES = {
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "freq": {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6},
    "pos": {"m": 1.0, "mm": 1e-3, "um": 1e-6},
    "rabi": {"rad/s": 1.0, "Hz": TWO_PI, "kHz": TWO_PI * 1e3},
    "plain": {"": 1.0, "1": 1.0},
}

# kind -> ordered list of (column, role, required)
_SCHEMAS = {
    "heating": (("time", "time", True), ("nbar", "plain", True), ("nbar_err", "plain", False)),
    "charging": (("time", "time", True), ("freq", "freq", True), ("err", "freq", False)),
    "sideband-scan": (
        ("wait", "time", True),
        ("p_red", "plain", True),
        ("p_blue", "plain", True),
        ("shots", "plain", False),
    ),
    "position-scan": (("pos", "pos", True), ("rabi", "rabi", True), ("err", "rabi", False)),
}


@dataclass
class Dataset:
    kind: str
    columns: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise DatasetError(f"unknown dataset kind {self.kind!r}")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))


def _parse_header(header: str, kind: str) -> list[tuple[str, float]]:
    schema = {name: role for name, role, _ in _SCHEMAS[kind]}
    cols = []
    for i, raw in enumerate(header.split(",")):
        raw = raw.strip()
        name, _, unit = raw.partition(":")
        name = name.strip()
        unit = unit.strip()
        if name not in schema:
            raise DatasetError(
                f"column {i + 1}: unexpected column {name!r} for kind {kind!r}"
            )
        table = _UNIT_TABLES[schema[name]]
        if unit not in table:
            raise DatasetError(
                f"column {i + 1} ({name!r}): cannot parse unit {unit!r}; "
                f"expected one of {sorted(u for u in table if u)}"
            )
        cols.append((name, table[unit]))
    required = [name for name, _, req in _SCHEMAS[kind] if req]
    present = {name for name, _ in cols}
    missing = [name for name in required if name not in present]
    if missing:
        raise DatasetError(f"missing required column(s) {missing} for kind {kind!r}")
    return cols


_TIME_LIKE = {"heating": "time", "charging": "time", "position-scan": "pos"}


def load_dataset(path, kind: str) -> Dataset:
    """Load and validate a dataset file; converts all columns to SI."""
    if kind not in DATASET_KINDS:
        raise DatasetError(f"unknown dataset kind {kind!r}")
    path = Path(path)
    metadata: dict[str, str] = {}
    header = None
    rows: list[list[float]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("#").partition(":")
                metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = _parse_header(line, kind)
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise DatasetError(
                    f"line {lineno}: expected {len(header)} fields, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DatasetError(f"line {lineno}: {exc}") from None
    if header is None:
        raise DatasetError(f"{path}: no header row found")
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    columns = {
        name: data[:, i] * scale for i, (name, scale) in enumerate(header)
    }
    axis = _TIME_LIKE.get(kind)
    if axis is not None and axis in columns:
        diffs = np.diff(columns[axis])
        bad = np.nonzero(diffs <= 0)[0]
        if bad.size:
            raise DatasetError(
                f"column {axis!r} not strictly increasing at data row {int(bad[0]) + 2}"
            )
    return Dataset(kind=kind, columns=columns, metadata=metadata)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_dataset(path, dataset: Dataset) -> None:
    """Write a dataset in SI units, atomically."""
    names = [name for name, _, _ in _SCHEMAS[dataset.kind] if name in dataset.columns]
    roles = {name: role for name, role, _ in _SCHEMAS[dataset.kind]}
    si_unit = {"time": "s", "freq": "Hz", "pos": "m", "rabi": "rad/s", "plain": ""}
    lines = [f"# kind: {dataset.kind}"]
    for key in sorted(dataset.metadata):
        lines.append(f"# {key}: {dataset.metadata[key]}")
    header = []
    for name in names:
        unit = si_unit[roles[name]]
        header.append(f"{name}:{unit}" if unit else name)
    lines.append(",".join(header))
    cols = [np.asarray(dataset.columns[name], dtype=float) for name in names]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# dataset <-> domain object adapters


def to_heating_series(ds: Dataset, context=None) -> HeatingSeries:
    if ds.kind != "heating":
        raise DatasetError(f"expected heating dataset, got {ds.kind!r}")
    err = ds.columns.get("nbar_err")
    return HeatingSeries(
        wait_times=tuple(ds.columns["time"].tolist()),
        nbar=tuple(ds.columns["nbar"].tolist()),
        nbar_err=tuple(err.tolist()) if err is not None else None,
        context=context,
    )


def from_heating_series(series: HeatingSeries, metadata=None) -> Dataset:
    cols = {
        "time": np.asarray(series.wait_times),
        "nbar": np.asarray(series.nbar),
    }
    if series.nbar_err is not None:
        cols["nbar_err"] = np.asarray(series.nbar_err)
    return Dataset("heating", cols, dict(metadata or {}))


def _parse_intervals(text: str):
    intervals = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            start, end = (float(v) for v in chunk.split(","))
        except ValueError:
            raise DatasetError(f"cannot parse light_on interval {chunk!r}") from None
        intervals.append((start, end))
    return tuple(intervals)


def to_frequency_series(ds: Dataset) -> FrequencySeries:
    if ds.kind != "charging":
        raise DatasetError(f"expected charging dataset, got {ds.kind!r}")
    err = ds.columns.get("err")
    intervals = ()
    if "light_on" in ds.metadata:
        intervals = _parse_intervals(ds.metadata["light_on"])
    return FrequencySeries(
        times=tuple(ds.columns["time"].tolist()),
        freqs=tuple(ds.columns["freq"].tolist()),
        freq_errs=tuple(err.tolist()) if err is not None else None,
        light_on_intervals=intervals,
    )


def from_frequency_series(series: FrequencySeries, metadata=None) -> Dataset:
    cols = {"time": np.asarray(series.times), "freq": np.asarray(series.freqs)}
    if series.freq_errs is not None:
        cols["err"] = np.asarray(series.freq_errs)
    meta = dict(metadata or {})
    if series.light_on_intervals:
        meta["light_on"] = ";".join(
            f"{repr(float(a))},{repr(float(b))}" for a, b in series.light_on_intervals
        )
    return Dataset("charging", cols, meta)


def to_position_scan(ds: Dataset) -> RabiPositionScan:
    if ds.kind != "position-scan":
        raise DatasetError(f"expected position-scan dataset, got {ds.kind!r}")
    if "origin" not in ds.metadata:
        raise DatasetError(
            "position-scan datasets must declare '# origin: loading_hole|grating'"
        )
    if ds.metadata["origin"] not in ("loading_hole", "grating"):
        raise DatasetError(f"unknown origin {ds.metadata['origin']!r}")
    err = ds.columns.get("err")
    return RabiPositionScan(
        positions=tuple(ds.columns["pos"].tolist()),
        rabi=tuple(ds.columns["rabi"].tolist()),
        rabi_err=tuple(err.tolist()) if err is not None else None,
    )


def from_position_scan(scan: RabiPositionScan, origin: str, metadata=None) -> Dataset:
    if origin not in ("loading_hole", "grating"):
        raise DatasetError(f"origin must be 'loading_hole' or 'grating', got {origin!r}")
    cols = {"pos": np.asarray(scan.positions), "rabi": np.asarray(scan.rabi)}
    if scan.rabi_err is not None:
        cols["err"] = np.asarray(scan.rabi_err)
    meta = dict(metadata or {})
    meta["origin"] = origin
    return Dataset("position-scan", cols, meta)


def from_sideband_observations(observations) -> Dataset:
    observations = list(observations)
    cols = {
        "wait": np.asarray([o[0] for o in observations]),
        "p_red": np.asarray([o[1].p_red for o in observations]),
        "p_blue": np.asarray([o[1].p_blue for o in observations]),
        "shots": np.asarray(
            [float(o[1].shots) if o[1].shots is not None else np.inf for o in observations]
        ),
    }
    return Dataset("sideband-scan", cols, {})


def to_sideband_observations(ds: Dataset):
    if ds.kind != "sideband-scan":
        raise DatasetError(f"expected sideband-scan dataset, got {ds.kind!r}")
    out = []
    shots = ds.columns.get("shots")
    for i in range(ds.n_rows):
        s = None
        if shots is not None and np.isfinite(shots[i]):
            s = int(shots[i])
        out.append(
            (
                float(ds.columns["wait"][i]),
                SidebandObservation(
                    probe_time=0.0,
                    p_red=float(ds.columns["p_red"][i]),
                    p_blue=float(ds.columns["p_blue"][i]),
                    shots=s,
                ),
            )
        )
    return out
