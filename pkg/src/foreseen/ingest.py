"""Parse levelXdata-style CSV recording triples into Recording values.

A recording is three files sharing a prefix: `<prefix>_tracks.csv` (per-frame
rows), `<prefix>_tracksMeta.csv` (per-track class and footprint), and
`<prefix>_recordingMeta.csv` (frame rate and location metadata). Dialect:
comma separated, '.' decimal, header row required, UTF-8.

Validation is track-granular: a bad class label or a frame gap rejects that
track (recorded in the IngestReport) while the rest of the file loads. A
missing file is fatal.

When lonVelocity/latVelocity (and the matching acceleration) columns exist
they are ignored: body-frame components are always recomputed downstream
from (xVelocity, yVelocity, heading) so that dataset and synthetic inputs
exercise identical code.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .model import (
    DEFAULT_MIN_TRACK_FRAMES,
    ModelError,
    Recording,
    Track,
    resolve_class,
)

REQUIRED_TRACK_COLUMNS = [
    "trackId",
    "frame",
    "xCenter",
    "yCenter",
    "heading",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
]

# Columns that belong to the dataset family but that this tool deliberately
# does not consume; their presence is expected and not warned about.
KNOWN_UNUSED_COLUMNS = {
    "recordingId",
    "trackLifetime",
    "width",
    "length",
    "lonVelocity",
    "latVelocity",
    "lonAcceleration",
    "latAcceleration",
    "laneId",
    "leftAlongsideId",
    "rightAlongsideId",
}


class IngestError(ValueError):
    pass


class IngestReport:
    """Bookkeeping for one load: row counts, rejections, and warnings."""

    def __init__(self):
        self.rows_read = 0
        self.rows_accepted = 0
        self.rows_rejected = 0
        self.tracks_built = 0
        self.rejections: Dict[str, int] = {}
        self.rejected_tracks: List[Tuple[int, str]] = []
        self.warnings: List[str] = []

    def reject_track(self, track_id: int, n_rows: int, reason: str) -> None:
        self.rows_rejected += n_rows
        self.rejections[reason] = self.rejections.get(reason, 0) + n_rows
        self.rejected_tracks.append((track_id, reason))
        self.warnings.append(f"track {track_id} rejected ({reason}, {n_rows} rows)")

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "tracks_built": self.tracks_built,
            "rejections": dict(self.rejections),
            "rejected_tracks": list(self.rejected_tracks),
            "warnings": list(self.warnings),
        }


def _require_file(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise IngestError(f"missing input file: {p}")
    return p


def _read_csv(path: Path, what: str) -> pd.DataFrame:
    try:
        # round_trip parsing: values written with repr precision load back
        # bit-identical, which the bound audit relies on.
        df = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise IngestError(f"cannot parse {what} file {path}: {exc}") from exc
    if df.empty and df.columns.empty:
        raise IngestError(f"{what} file {path} has no header row")
    return df


def _read_recording_meta(path: Path) -> Tuple[int, float, Optional[float]]:
    df = _read_csv(path, "recording-meta")
    if "frameRate" not in df.columns or df.shape[0] < 1:
        raise IngestError(f"recording-meta file {path} lacks a frameRate value")
    row = df.iloc[0]
    recording_id = int(row["recordingId"]) if "recordingId" in df.columns else 0
    frame_rate = float(row["frameRate"])
    if not (math.isfinite(frame_rate) and frame_rate > 0):
        raise IngestError(f"recording-meta file {path}: bad frameRate {frame_rate}")
    speed_limit = None
    if "speedLimit" in df.columns:
        raw = float(row["speedLimit"])
        if math.isfinite(raw) and raw > 0:
            speed_limit = raw
    return recording_id, frame_rate, speed_limit


def _read_tracks_meta(path: Path) -> pd.DataFrame:
    df = _read_csv(path, "tracks-meta")
    for col in ("trackId", "class"):
        if col not in df.columns:
            raise IngestError(f"tracks-meta file {path} lacks column {col!r}")
    return df.set_index("trackId", drop=False)


def load_recording(
    tracks_path,
    tracks_meta_path,
    recording_meta_path,
    heading_unit: str = "degrees",
    min_track_frames: int = DEFAULT_MIN_TRACK_FRAMES,
) -> Tuple[Recording, IngestReport]:
    """Load one recording triple.

    heading_unit can be "radians" for foreign data; the dataset family
    stores degrees. Tracks shorter than `min_track_frames` are rejected
    (too short for stable derivatives).
    """
    if heading_unit not in ("degrees", "radians"):
        raise IngestError(f"heading_unit must be 'degrees' or 'radians', got {heading_unit!r}")
    tracks_file = _require_file(tracks_path)
    meta_file = _require_file(tracks_meta_path)
    rec_file = _require_file(recording_meta_path)

    report = IngestReport()
    recording_id, frame_rate, speed_limit = _read_recording_meta(rec_file)
    meta = _read_tracks_meta(meta_file)
    df = _read_csv(tracks_file, "tracks")

    missing = [c for c in REQUIRED_TRACK_COLUMNS if c not in df.columns]
    if missing:
        raise IngestError(f"tracks file {tracks_file} lacks columns: {missing}")
    extra = [
        c
        for c in df.columns
        if c not in REQUIRED_TRACK_COLUMNS and c not in KNOWN_UNUSED_COLUMNS
    ]
    if extra:
        report.warn(f"ignoring unrecognized columns: {sorted(extra)}")

    report.rows_read = int(df.shape[0])
    df = df.sort_values(["trackId", "frame"], kind="mergesort")

    tracks: Dict[int, Track] = {}
    for track_id, rows in df.groupby("trackId", sort=True):
        track_id = int(track_id)
        n_rows = int(rows.shape[0])

        if track_id not in meta.index:
            report.reject_track(track_id, n_rows, "no tracks-meta entry")
            continue
        meta_row = meta.loc[track_id]
        try:
            group = resolve_class(str(meta_row["class"]))
        except ModelError:
            report.reject_track(
                track_id, n_rows, f"unknown class {meta_row['class']!r}"
            )
            continue

        numeric = rows[REQUIRED_TRACK_COLUMNS[1:]].to_numpy(dtype=np.float64)
        if not np.all(np.isfinite(numeric)):
            report.reject_track(track_id, n_rows, "non-finite values")
            continue

        frames = rows["frame"].to_numpy(dtype=np.int64)
        if frames.size > 1 and not np.all(np.diff(frames) == 1):
            report.reject_track(track_id, n_rows, "non-contiguous frames")
            continue
        if frames.size < min_track_frames:
            report.reject_track(
                track_id, n_rows, f"shorter than {min_track_frames} frames"
            )
            continue

        headings = rows["heading"].to_numpy(dtype=np.float64)
        if heading_unit == "radians":
            headings = np.degrees(headings)

        length, width = _footprint(meta_row, rows, report, track_id)
        try:
            track = Track(
                track_id=track_id,
                class_group=group,
                raw_class=str(meta_row["class"]).strip().lower(),
                length=length,
                width=width,
                frames=frames,
                positions=rows[["xCenter", "yCenter"]].to_numpy(dtype=np.float64),
                velocities=rows[["xVelocity", "yVelocity"]].to_numpy(dtype=np.float64),
                accelerations=rows[["xAcceleration", "yAcceleration"]].to_numpy(
                    dtype=np.float64
                ),
                headings=headings,
            )
        except ModelError as exc:
            report.reject_track(track_id, n_rows, str(exc))
            continue
        tracks[track_id] = track
        report.rows_accepted += n_rows

    report.tracks_built = len(tracks)
    recording = Recording(
        recording_id=recording_id,
        frame_rate=frame_rate,
        tracks=tracks,
        speed_limit=speed_limit,
    )
    return recording, report


def _footprint(meta_row, rows, report, track_id) -> Tuple[float, float]:
    """Track footprint from tracks-meta, falling back to per-row columns."""
    length = width = None
    if "length" in meta_row.index and math.isfinite(float(meta_row["length"])):
        length = float(meta_row["length"])
    if "width" in meta_row.index and math.isfinite(float(meta_row["width"])):
        width = float(meta_row["width"])
    if length is None and "length" in rows.columns:
        length = float(rows["length"].iloc[0])
    if width is None and "width" in rows.columns:
        width = float(rows["width"].iloc[0])
    if length is None or width is None:
        report.warn(f"track {track_id}: missing footprint, assuming point")
        return 0.0, 0.0
    return length, width


def dataset_prefixes(dataset_dir) -> Dict[int, Path]:
    """Recording id -> triple prefix path for every triple in a directory."""
    root = Path(dataset_dir)
    out: Dict[int, Path] = {}
    if not root.is_dir():
        return out
    for meta in sorted(root.glob("*_recordingMeta.csv")):
        stem = meta.name[: -len("_recordingMeta.csv")]
        if not (root / f"{stem}_tracks.csv").exists():
            continue
        if not (root / f"{stem}_tracksMeta.csv").exists():
            continue
        try:
            rec_id = int(stem)
        except ValueError:
            continue
        out[rec_id] = root / stem
    return out


def triple_paths(prefix: Path) -> Tuple[Path, Path, Path]:
    p = str(prefix)
    return (
        Path(p + "_tracks.csv"),
        Path(p + "_tracksMeta.csv"),
        Path(p + "_recordingMeta.csv"),
    )


def write_levelx(recording: Recording, out_dir, prefix: Optional[str] = None) -> Path:
    """Write a Recording as a levelXdata-style CSV triple.

    Floats are written with repr precision so values round-trip exactly.
    Returns the triple prefix path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = prefix if prefix is not None else f"{recording.recording_id:02d}"
    tracks_path, meta_path, rec_path = triple_paths(out / stem)

    with open(tracks_path, "w", encoding="utf-8") as fh:
        fh.write(
            "recordingId,trackId,frame,xCenter,yCenter,heading,width,length,"
            "xVelocity,yVelocity,xAcceleration,yAcceleration\n"
        )
        for tid in recording.track_ids():
            tr = recording.tracks[tid]
            for i, frame in enumerate(tr.frames):
                values = (
                    tr.positions[i, 0],
                    tr.positions[i, 1],
                    tr.headings[i],
                    tr.width,
                    tr.length,
                    tr.velocities[i, 0],
                    tr.velocities[i, 1],
                    tr.accelerations[i, 0],
                    tr.accelerations[i, 1],
                )
                cells = ",".join(repr(float(v)) for v in values)
                fh.write(f"{recording.recording_id},{tid},{int(frame)},{cells}\n")

    with open(meta_path, "w", encoding="utf-8") as fh:
        fh.write(
            "recordingId,trackId,initialFrame,finalFrame,numFrames,class,"
            "width,length\n"
        )
        for tid in recording.track_ids():
            tr = recording.tracks[tid]
            fh.write(
                f"{recording.recording_id},{tid},{tr.first_frame},"
                f"{tr.last_frame},{len(tr)},{tr.raw_class},"
                f"{float(tr.width)!r},{float(tr.length)!r}\n"
            )

    with open(rec_path, "w", encoding="utf-8") as fh:
        fh.write("recordingId,frameRate,speedLimit,numTracks\n")
        limit = -1.0 if recording.speed_limit is None else float(recording.speed_limit)
        fh.write(
            f"{recording.recording_id},{float(recording.frame_rate)!r},{limit!r},"
            f"{len(recording.tracks)}\n"
        )
    return out / stem
