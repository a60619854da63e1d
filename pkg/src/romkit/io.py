"""File formats: landmark-stream JSONL, mocap CSV export, cohort
manifests, the append-only results store, and the long-format
measurement table.

JSONL framing: the first line is {"header": {...}}, each following line
one frame {"t": seconds, "lm": {"NAME": [x, y, z, visibility], ...}}.
Mocap sources may omit the visibility element (defaults to 1.0). The
writer is canonical (sorted landmark keys, shortest round-trip floats),
so write(read(f)) is byte-identical for files the writer produced.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError, ParseError, SchemaError
from .landmarks import (
    SOURCE_MOCAP,
    SOURCE_TOPOLOGY,
    TOPOLOGIES,
    LandmarkFrame,
    Recording,
)

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Landmark-stream JSONL
# ---------------------------------------------------------------------------

def _parse_frame_obj(obj: dict, source: str, path: str, line_no: int) -> LandmarkFrame:
    if "t" not in obj or "lm" not in obj:
        raise ParseError("frame line needs 't' and 'lm'", path, line_no)
    t = obj["t"]
    if not isinstance(t, (int, float)) or not math.isfinite(t) or t < 0:
        raise ParseError(f"bad timestamp {t!r}", path, line_no)
    topology = SOURCE_TOPOLOGY[source]
    known = TOPOLOGIES[topology]
    positions = {}
    visibility = {}
    for name, arr in obj["lm"].items():
        if name not in known:
            raise ParseError(
                f"unknown landmark {name!r} for topology {topology}", path, line_no)
        if not isinstance(arr, list) or len(arr) not in (3, 4):
            raise ParseError(
                f"landmark {name!r} must be [x,y,z] or [x,y,z,visibility]",
                path, line_no)
        xyz = arr[:3]
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in xyz):
            raise ParseError(f"non-finite position for {name!r}", path, line_no)
        vis = arr[3] if len(arr) == 4 else 1.0
        if not isinstance(vis, (int, float)) or not 0.0 <= vis <= 1.0:
            raise ParseError(
                f"visibility for {name!r} must be in [0,1], got {vis!r}",
                path, line_no)
        positions[name] = tuple(float(c) for c in xyz)
        visibility[name] = float(vis)
    if not positions:
        raise ParseError("frame carries no landmarks", path, line_no)
    return LandmarkFrame(t=float(t), positions=positions, visibility=visibility)


def read_frames_jsonl(path: str | Path) -> Recording:
    """Parse a landmark-stream file into a Recording."""
    path = Path(path)
    frames: list[LandmarkFrame] = []
    header: dict | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", str(path),
                                 line_no) from exc
            if line_no == 1:
                if not isinstance(obj, dict) or "header" not in obj:
                    raise ParseError("first line must be a header record",
                                     str(path), 1)
                header = obj["header"]
                continue
            frames.append(_parse_frame_obj(obj, header["source"], str(path), line_no))
    if header is None:
        raise ParseError("empty file: missing header", str(path), 1)
    source = header.get("source")
    if source not in SOURCE_TOPOLOGY:
        raise ParseError(f"unknown source {source!r}", str(path), 1)
    declared = header.get("topology")
    if declared is not None and declared != SOURCE_TOPOLOGY[source]:
        raise ParseError(
            f"topology {declared!r} inconsistent with source {source!r}",
            str(path), 1)
    version = header.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format_version {version}", str(path), 1)
    for i in range(1, len(frames)):
        if frames[i].t <= frames[i - 1].t:
            raise ParseError(
                f"timestamps must be strictly increasing "
                f"(t={frames[i].t} after t={frames[i - 1].t})",
                str(path), i + 2)
    try:
        return Recording(
            frames=tuple(frames),
            source=source,
            nominal_rate=float(header.get("nominal_rate", 0.0)),
            movement=header.get("movement", ""),
            subject=header.get("subject", ""),
            repetition=int(header.get("repetition", 1)),
            side=header.get("side"),
            phase=header.get("phase"),
        )
    except ValueError as exc:
        raise ParseError(str(exc), str(path)) from exc


def header_dict(recording: Recording) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "source": recording.source,
        "topology": recording.topology,
        "movement": recording.movement,
        "side": recording.side,
        "phase": recording.phase,
        "subject": recording.subject,
        "repetition": recording.repetition,
        "nominal_rate": recording.nominal_rate,
    }


def frame_line(frame: LandmarkFrame) -> str:
    lm = {
        name: [*frame.positions[name], frame.visibility.get(name, 1.0)]
        for name in sorted(frame.positions)
    }
    return json.dumps({"t": frame.t, "lm": lm}, separators=(",", ":"))


def write_frames_jsonl(recording: Recording, path: str | Path) -> None:
    """Write a Recording in canonical form."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"header": header_dict(recording)},
                            separators=(",", ":")) + "\n")
        for frame in recording.frames:
            fh.write(frame_line(frame) + "\n")


# ---------------------------------------------------------------------------
# Mocap CSV export
# ---------------------------------------------------------------------------

def read_mocap_csv(
    path: str | Path,
    marker_name_map: dict[str, str] | None = None,
    nominal_rate: float = 120.0,
    movement: str = "",
    subject: str = "",
    repetition: int = 1,
    side: str | None = None,
    phase: str | None = None,
) -> Recording:
    """Parse an exported mocap trajectory CSV.

    Expected: a header row with a ``time`` or ``frame`` column followed by
    ``<marker>_X``, ``<marker>_Y``, ``<marker>_Z`` triplets; one row per
    frame. ``marker_name_map`` translates vendor marker names to canonical
    ids and doubles as the required-marker list. Blank cells encode
    dropouts (visibility 0).
    """
    path = Path(path)
    known = TOPOLOGIES[SOURCE_TOPOLOGY[SOURCE_MOCAP]]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() not in ("time", "frame"):
            raise SchemaError(
                f"{path}: first column must be 'time' or 'frame', got "
                f"{header[0] if header else '<none>'!r}")
        time_is_index = header[0].lower() == "frame"
        # group marker columns by base name
        columns: dict[str, dict[str, int]] = {}
        for idx, col in enumerate(header[1:], start=1):
            if "_" not in col:
                continue
            base, axis = col.rsplit("_", 1)
            if axis.upper() in ("X", "Y", "Z"):
                columns.setdefault(base, {})[axis.upper()] = idx
        if marker_name_map is None:
            marker_name_map = {base: base for base in columns if base in known}
        mapping = {}
        for raw, canonical in marker_name_map.items():
            if canonical not in known:
                raise SchemaError(
                    f"{path}: mapped marker {canonical!r} is not a mocap landmark")
            if raw not in columns or set(columns[raw]) != {"X", "Y", "Z"}:
                raise SchemaError(
                    f"{path}: marker {raw!r} missing X/Y/Z columns in header")
            mapping[raw] = canonical
        if not mapping:
            raise SchemaError(f"{path}: no usable marker columns found")
        frames = []
        for row_no, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            if time_is_index:
                t = float(row[0]) / nominal_rate
            else:
                t = float(row[0])
            positions = {}
            visibility = {}
            for raw, canonical in mapping.items():
                cells = [row[columns[raw][axis]].strip() for axis in ("X", "Y", "Z")]
                if any(not c for c in cells):
                    positions[canonical] = (0.0, 0.0, 0.0)
                    visibility[canonical] = 0.0
                else:
                    positions[canonical] = tuple(float(c) for c in cells)
                    visibility[canonical] = 1.0
            frames.append(LandmarkFrame(t=t, positions=positions,
                                        visibility=visibility))
    try:
        return Recording(frames=tuple(frames), source=SOURCE_MOCAP,
                         nominal_rate=nominal_rate, movement=movement,
                         subject=subject, repetition=repetition, side=side,
                         phase=phase)
    except ValueError as exc:
        raise ParseError(str(exc), str(path)) from exc


def read_recording(path: str | Path, **mocap_kwargs) -> Recording:
    """Dispatch on extension: .jsonl landmark streams, .csv mocap exports."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_mocap_csv(path, **mocap_kwargs)
    return read_frames_jsonl(path)


# ---------------------------------------------------------------------------
# Results store
# ---------------------------------------------------------------------------

RESULT_FIELDS = ("subject", "movement", "side", "phase", "rater", "repetition",
                 "rom_deg", "peak_t", "needs_review", "anomaly_count",
                 "config_fingerprint")


def result_record(
    *,
    subject: str,
    movement: str,
    rater: str,
    repetition: int,
    rom_deg: float,
    peak_t: float | None,
    needs_review: bool,
    anomaly_count: int,
    config_fingerprint: str,
    side: str | None = None,
    phase: str | None = None,
    **extra,
) -> dict:
    rec = {
        "subject": subject,
        "movement": movement,
        "side": side,
        "phase": phase,
        "rater": rater,
        "repetition": repetition,
        "rom_deg": rom_deg,
        "peak_t": peak_t,
        "needs_review": needs_review,
        "anomaly_count": anomaly_count,
        "config_fingerprint": config_fingerprint,
    }
    rec.update(extra)
    return rec


def write_result(record: dict, path: str | Path) -> None:
    """Append one result record (single flushed write; crash-safe lines)."""
    for key in RESULT_FIELDS:
        if key not in record:
            raise ValueError(f"result record missing field {key!r}")
    line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()


def read_results(path: str | Path) -> list[dict]:
    """Read the store; a trailing partial line (no newline) is ignored."""
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    lines = content.split("\n")
    incomplete_tail = lines[-1] != ""
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            if incomplete_tail and line_no == len(lines):
                continue  # concurrent append in progress
            raise ParseError(f"malformed result line ({exc.msg})",
                             str(path), line_no) from exc
    return records


# ---------------------------------------------------------------------------
# Long-format measurement CSV
# ---------------------------------------------------------------------------

MEASUREMENT_COLUMNS = ("subject", "movement", "rater", "repetition", "rom_deg")


def read_measurements_csv(path: str | Path) -> list[dict]:
    """Rows of subject, movement, rater, repetition, rom_deg (phase optional)."""
    path = Path(path)
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in MEASUREMENT_COLUMNS
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        for row_no, row in enumerate(reader, start=2):
            try:
                records.append({
                    "subject": row["subject"].strip(),
                    "movement": row["movement"].strip(),
                    "rater": row["rater"].strip(),
                    "repetition": int(row["repetition"]),
                    "rom_deg": float(row["rom_deg"]),
                    "phase": (row.get("phase") or "").strip() or None,
                })
            except (ValueError, AttributeError) as exc:
                raise ParseError(f"bad measurement row: {exc}", str(path),
                                 row_no) from exc
    return records


# ---------------------------------------------------------------------------
# Cohort manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    subject: str
    movement: str
    rater: str
    repetition: int
    side: str | None = None
    phase: str | None = None
    path: Path | None = None
    rom_deg: float | None = None


MANIFEST_COLUMNS = ("subject", "movement", "rater", "repetition")


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Load a cohort manifest CSV.

    Columns: subject, movement, rater, repetition, then either ``path``
    (recording file, relative to the manifest) or ``rom_deg``
    (precomputed angle). Optional: side, phase. The
    (subject, movement, phase, rater, repetition) key must be unique and
    referenced files must exist.
    """
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in fields]
        if missing:
            raise ManifestError(f"{path}: missing columns {missing}")
        if "path" not in fields and "rom_deg" not in fields:
            raise ManifestError(f"{path}: need a 'path' or 'rom_deg' column")
        for row_no, row in enumerate(reader, start=2):
            try:
                entry = ManifestEntry(
                    subject=row["subject"].strip(),
                    movement=row["movement"].strip(),
                    rater=row["rater"].strip(),
                    repetition=int(row["repetition"]),
                    side=(row.get("side") or "").strip() or None,
                    phase=(row.get("phase") or "").strip() or None,
                    path=(path.parent / row["path"].strip()
                          if (row.get("path") or "").strip() else None),
                    rom_deg=(float(row["rom_deg"])
                             if (row.get("rom_deg") or "").strip() else None),
                )
            except ValueError as exc:
                raise ManifestError(f"{path}:{row_no}: {exc}") from exc
            if (entry.path is None) == (entry.rom_deg is None):
                raise ManifestError(
                    f"{path}:{row_no}: exactly one of path/rom_deg required")
            key = (entry.subject, entry.movement, entry.phase, entry.rater,
                   entry.repetition)
            if key in seen:
                raise ManifestError(f"{path}:{row_no}: duplicate entry {key}")
            seen.add(key)
            if entry.path is not None and not entry.path.exists():
                raise ManifestError(
                    f"{path}:{row_no}: recording file not found: {entry.path}")
            entries.append(entry)
    if not entries:
        raise ManifestError(f"{path}: manifest is empty")
    return entries
