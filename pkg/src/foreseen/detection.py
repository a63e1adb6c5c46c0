"""Scenario detectors: find frame intervals where an ego vehicle and another
road user satisfy one of the four mined scenario definitions.

    S1  ego driving next to another road user on a parallel course
    S2  ego driving behind a leading road user, nobody behind the ego
    S3  ego between a leading road user and a trailing road user
    S4  pedestrian or cyclist crossing the ego's path without a crosswalk

"Next to", "behind", and "crossing" are formalized as corridor/band geometry
relative to the ego's heading line. Every threshold lives in DetectorConfig
and is echoed into reports, because reproducibility of mined bounds is only
as good as the thresholds that produced them.

When several road users qualify simultaneously (e.g. a group of pedestrians
walking together), each is reported as its own independent occurrence.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .kinematics import fold_heading_difference
from .model import ClassGroup, Recording, Track


class DetectionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class Scenario(Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


@dataclass(frozen=True)
class DetectorConfig:
    """All detector and kinematics thresholds, JSON-loadable.

    s2_corridor_half_width = None means "ego width / 2 + 0.5 m", resolved per
    ego. S3 reuses the S2 corridor parameters fore and aft. Crosswalk zones
    are polygons in recording coordinates; an S4 occurrence whose corridor
    entry point lies inside any of them is discarded.
    """

    s1_lateral_band: Tuple[float, float] = (0.5, 6.0)
    s1_heading_tol: float = 15.0  # degrees
    s1_min_duration: float = 0.5  # seconds
    s1_vehicle_left_opposite_only: bool = True
    s2_corridor_half_width: Optional[float] = None
    s2_max_gap: float = 30.0  # m
    s2_behind_clear: float = 20.0  # m
    s4_corridor_length: float = 25.0  # m ahead of the ego
    s4_crossing_heading: Tuple[float, float] = (45.0, 135.0)  # deg, rel. ego
    s4_prepare_margin: float = 2.0  # m outside the corridor edge
    s4_crosswalk_zones: Tuple[Tuple[Tuple[float, float], ...], ...] = ()
    merge_gap_tol: int = 12  # frames
    min_speed_ego: float = 0.5  # m/s
    stationary_speed: float = 0.3  # m/s; below this a subject is "stationary"
    smoothing_window: int = 5  # frames; 1 disables acceleration smoothing
    v_eps: float = 0.1  # m/s; moving-vs-standstill gate for braking
    a_eps: float = 1e-6  # m/s^2; numeric deadband for braking classification
    lambda_v_min: float = 0.5  # m/s; "moving forward" gate for fluctuation
    beta_min_per_occurrence: bool = False
    percentile: Optional[float] = None  # None = raw extremes
    ego_raw_classes: Tuple[str, ...] = ("car",)
    min_track_frames: int = 13

    def __post_init__(self):
        if self.s1_lateral_band[0] < 0 or self.s1_lateral_band[1] < self.s1_lateral_band[0]:
            raise ConfigError(f"bad s1_lateral_band {self.s1_lateral_band}")
        for name in ("s2_max_gap", "s2_behind_clear", "s4_corridor_length",
                     "s4_prepare_margin"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        lo, hi = self.s4_crossing_heading
        if not (0 <= lo <= hi <= 180):
            raise ConfigError(f"s4_crossing_heading must lie within [0, 180]")
        if not (0 <= self.s1_heading_tol <= 180):
            raise ConfigError("s1_heading_tol must lie within [0, 180]")
        if self.merge_gap_tol < 0 or self.min_track_frames < 1:
            raise ConfigError("bad merge_gap_tol / min_track_frames")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError("smoothing_window must be odd and >= 1")
        if self.percentile is not None and not (0 < self.percentile <= 100):
            raise ConfigError("percentile must be in (0, 100]")

    def half_width(self, ego: Track) -> float:
        if self.s2_corridor_half_width is not None:
            return self.s2_corridor_half_width
        return ego.width / 2.0 + 0.5

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = _tuple_to_list(value)
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("s1_lateral_band", "s4_crossing_heading"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        if "s4_crosswalk_zones" in kwargs:
            kwargs["s4_crosswalk_zones"] = tuple(
                tuple(tuple(pt) for pt in poly) for poly in kwargs["s4_crosswalk_zones"]
            )
        if "ego_raw_classes" in kwargs:
            kwargs["ego_raw_classes"] = tuple(kwargs["ego_raw_classes"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "DetectorConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
        return cls.from_dict(data)


def _tuple_to_list(value):
    if isinstance(value, tuple):
        return [_tuple_to_list(v) for v in value]
    return value


@dataclass(frozen=True)
class ScenarioOccurrence:
    """One (scenario, ego, subject) detection over an inclusive frame span.

    context_id is the leading road user for S3 (the trailing user is the
    subject). reference_heading is the ego heading at frame_start, flipped by
    180 degrees for subjects traveling opposite, so that h measures deviation
    from parallel travel.
    """

    scenario: Scenario
    recording_id: int
    ego_id: int
    subject_id: int
    frame_start: int
    frame_end: int
    subject_class: ClassGroup
    reference_heading: float
    context_id: Optional[int] = None

    def __post_init__(self):
        if self.frame_end < self.frame_start:
            raise DetectionError("frame_end < frame_start")

    @property
    def n_frames(self) -> int:
        return self.frame_end - self.frame_start + 1


def merge_intervals(
    raw_frames: Sequence[int], gap_tol: int, min_len: int = 1
) -> List[Tuple[int, int]]:
    """Merge sorted unique frame numbers into maximal (start, end) runs.

    Consecutive frames whose gap (count of missing frames between them) is
    <= gap_tol stay in one run; runs covering fewer than min_len frames are
    dropped.
    """
    frames = np.asarray(raw_frames, dtype=np.int64)
    if frames.size == 0:
        return []
    runs = []
    start = prev = int(frames[0])
    for f in frames[1:]:
        f = int(f)
        if f - prev - 1 > gap_tol:
            runs.append((start, prev))
            start = f
        prev = f
    runs.append((start, prev))
    return [(s, e) for s, e in runs if e - s + 1 >= min_len]


def _merge_with_barriers(
    frames: np.ndarray, gap_tol: int, min_len: int, barriers: np.ndarray
) -> List[Tuple[int, int]]:
    """merge_intervals that never bridges a gap containing a barrier frame.

    Used for S2, whose behind-clear condition must hold on every frame of an
    interval, including gap frames the merge would otherwise paper over.
    """
    if frames.size == 0:
        return []
    runs = []
    start = prev = int(frames[0])
    for f in frames[1:]:
        f = int(f)
        blocked = False
        if f - prev - 1 > gap_tol:
            blocked = True
        elif barriers.size:
            i = np.searchsorted(barriers, prev, side="right")
            blocked = i < barriers.size and barriers[i] < f
        if blocked:
            runs.append((start, prev))
            start = f
        prev = f
    runs.append((start, prev))
    return [(s, e) for s, e in runs if e - s + 1 >= min_len]


def point_in_polygon(point: Tuple[float, float], polygon) -> bool:
    """Even-odd ray casting; boundary points count as inside."""
    x, y = point
    inside = False
    pts = list(polygon)
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            xi = x1 + t * (x2 - x1)
            if x < xi:
                inside = not inside
            elif x == xi:
                return True
    return inside


class _PairGeometry:
    """Ego-relative geometry of one other track over their common frames."""

    __slots__ = ("frames", "lon", "lat", "rel_fold", "speed", "extent_along_ego")

    def __init__(self, ego: Track, other: Track, ei: slice, oi: slice, f0: int, n: int):
        self.frames = np.arange(f0, f0 + n, dtype=np.int64)
        rel = other.positions[oi] - ego.positions[ei]
        hdg = np.radians(ego.headings[ei])
        c, s = np.cos(hdg), np.sin(hdg)
        self.lon = rel[:, 0] * c + rel[:, 1] * s
        self.lat = -rel[:, 0] * s + rel[:, 1] * c
        self.rel_fold = fold_heading_difference(
            other.headings[oi] - ego.headings[ei], 0.0
        )
        self.speed = np.hypot(other.velocities[oi, 0], other.velocities[oi, 1])
        # Half-extent of the other user's oriented rectangle projected onto
        # the ego heading axis; pedestrians are points.
        delta = np.radians(self.rel_fold)
        self.extent_along_ego = 0.5 * (
            other.length * np.abs(np.cos(delta)) + other.width * np.abs(np.sin(delta))
        )


def _pair_geometry(ego: Track, other: Track) -> Optional[_PairGeometry]:
    f0 = max(ego.first_frame, other.first_frame)
    f1 = min(ego.last_frame, other.last_frame)
    if f0 > f1:
        return None
    n = f1 - f0 + 1
    ei = slice(f0 - ego.first_frame, f0 - ego.first_frame + n)
    oi = slice(f0 - other.first_frame, f0 - other.first_frame + n)
    return _PairGeometry(ego, other, ei, oi, f0, n)


def _require_ego(recording: Recording, ego_id: int) -> Track:
    try:
        ego = recording.tracks[ego_id]
    except KeyError:
        raise DetectionError(
            f"recording {recording.recording_id}: no track {ego_id}"
        ) from None
    if ego.class_group is not ClassGroup.VEHICLE:
        raise DetectionError(
            f"track {ego_id} is a {ego.class_group.value}, egos must be Vehicles"
        )
    return ego


def _ego_speed_series(ego: Track) -> np.ndarray:
    return ego.speeds()


def _reference_heading(ego: Track, subject: Track, frame_start: int) -> float:
    """Ego heading at occurrence start, flipped for opposite-direction subjects."""
    ego_h = float(ego.headings[ego.index_of(frame_start)])
    subj_h = float(subject.headings[subject.index_of(frame_start)])
    if float(fold_heading_difference(subj_h - ego_h, 0.0)) > 90.0:
        return (ego_h + 180.0) % 360.0
    return ego_h


def _emit(
    scenario: Scenario,
    recording: Recording,
    ego: Track,
    subject: Track,
    intervals: List[Tuple[int, int]],
    context_for: Optional[Dict[Tuple[int, int], int]] = None,
) -> List[ScenarioOccurrence]:
    out = []
    for start, end in intervals:
        out.append(
            ScenarioOccurrence(
                scenario=scenario,
                recording_id=recording.recording_id,
                ego_id=ego.track_id,
                subject_id=subject.track_id,
                frame_start=start,
                frame_end=end,
                subject_class=subject.class_group,
                reference_heading=_reference_heading(ego, subject, start),
                context_id=None if context_for is None else context_for.get((start, end)),
            )
        )
    return out


# --- S1: driving next to another road user ---------------------------------

def _s1_mask(geom: _PairGeometry, subject: Track, ego: Track, config: DetectorConfig) -> np.ndarray:
    band_lo, band_hi = config.s1_lateral_band
    abs_lat = np.abs(geom.lat)
    in_band = (abs_lat >= band_lo) & (abs_lat <= band_hi)
    overlap = np.abs(geom.lon) <= ego.length / 2.0 + geom.extent_along_ego
    parallel_same = geom.rel_fold <= config.s1_heading_tol
    antiparallel = geom.rel_fold >= 180.0 - config.s1_heading_tol
    stationary = geom.speed <= config.stationary_speed
    if (
        subject.class_group is ClassGroup.VEHICLE
        and config.s1_vehicle_left_opposite_only
    ):
        # Dataset limitation mirrored by default: vehicle subjects appear
        # only on the ego's left, oncoming (or parked there).
        direction_ok = (geom.lat > 0) & (antiparallel | stationary)
    else:
        direction_ok = parallel_same | antiparallel | stationary
    return in_band & overlap & direction_ok


def detect_s1(
    recording: Recording, ego_id: int, config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Subjects on a parallel course within the lateral band beside the ego."""
    ego = _require_ego(recording, ego_id)
    min_len = max(1, math.ceil(config.s1_min_duration * recording.frame_rate))
    out: List[ScenarioOccurrence] = []
    for tid in recording.track_ids():
        if tid == ego_id:
            continue
        subject = recording.tracks[tid]
        geom = _pair_geometry(ego, subject)
        if geom is None:
            continue
        mask = _s1_mask(geom, subject, ego, config)
        intervals = merge_intervals(
            geom.frames[mask], config.merge_gap_tol, min_len
        )
        out.extend(_emit(Scenario.S1, recording, ego, subject, intervals))
    return out


# --- S2: following a leading road user, nobody behind ----------------------

def _s2_subject_mask(geom: _PairGeometry, config: DetectorConfig, half_width: float) -> np.ndarray:
    return (
        (geom.lon > 0)
        & (geom.lon <= config.s2_max_gap)
        & (np.abs(geom.lat) <= half_width)
        & (geom.rel_fold <= config.s1_heading_tol)
    )


def _behind_occupied_frames(
    recording: Recording, ego: Track, config: DetectorConfig, half_width: float
) -> np.ndarray:
    """Frames where any road user sits in the corridor behind the ego."""
    occupied = np.zeros(len(ego), dtype=bool)
    for tid in recording.track_ids():
        if tid == ego.track_id:
            continue
        geom = _pair_geometry(ego, recording.tracks[tid])
        if geom is None:
            continue
        behind = (
            (geom.lon < 0)
            & (geom.lon >= -config.s2_behind_clear)
            & (np.abs(geom.lat) <= half_width)
        )
        offset = int(geom.frames[0]) - ego.first_frame
        occupied[offset : offset + behind.size] |= behind
    return ego.frames[occupied]


def detect_s2(
    recording: Recording, ego_id: int, config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Leading road users ahead in the ego corridor while the corridor behind
    the ego stays clear for the whole interval."""
    ego = _require_ego(recording, ego_id)
    half_width = config.half_width(ego)
    ego_speed = _ego_speed_series(ego)
    behind_frames = _behind_occupied_frames(recording, ego, config, half_width)
    out: List[ScenarioOccurrence] = []
    for tid in recording.track_ids():
        if tid == ego_id:
            continue
        subject = recording.tracks[tid]
        geom = _pair_geometry(ego, subject)
        if geom is None:
            continue
        mask = _s2_subject_mask(geom, config, half_width)
        offset = int(geom.frames[0]) - ego.first_frame
        mask &= ego_speed[offset : offset + mask.size] >= config.min_speed_ego
        if behind_frames.size:
            mask &= ~np.isin(geom.frames, behind_frames)
        intervals = _merge_with_barriers(
            geom.frames[mask], config.merge_gap_tol, 1, behind_frames
        )
        out.extend(_emit(Scenario.S2, recording, ego, subject, intervals))
    return out


# --- S3: between a leading and a trailing road user -------------------------

def _leader_present_frames(
    recording: Recording, ego: Track, config: DetectorConfig, half_width: float
) -> np.ndarray:
    """Boolean per ego frame: some road user qualifies as an S2-style leader."""
    present = np.zeros(len(ego), dtype=bool)
    for tid in recording.track_ids():
        if tid == ego.track_id:
            continue
        geom = _pair_geometry(ego, recording.tracks[tid])
        if geom is None:
            continue
        mask = _s2_subject_mask(geom, config, half_width)
        offset = int(geom.frames[0]) - ego.first_frame
        present[offset : offset + mask.size] |= mask
    return present


def _nearest_leader(
    recording: Recording, ego: Track, config: DetectorConfig, half_width: float, frame: int
) -> Optional[int]:
    best: Optional[Tuple[float, int]] = None
    for tid in recording.track_ids():
        if tid == ego.track_id:
            continue
        other = recording.tracks[tid]
        if not (other.first_frame <= frame <= other.last_frame):
            continue
        geom = _pair_geometry(ego, other)
        i = int(frame - geom.frames[0])
        if _s2_subject_mask(geom, config, half_width)[i]:
            key = (float(geom.lon[i]), tid)
            if best is None or key < best:
                best = key
    return None if best is None else best[1]


def detect_s3(
    recording: Recording, ego_id: int, config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Trailing road users behind the ego while a leader is present ahead.

    The trailing user is the occurrence subject (its longitudinal behavior
    is what this scenario bounds); the leading user is recorded as
    context_id. The leader's own kinematics enter the following-scenario
    statistics via leader_companions().
    """
    ego = _require_ego(recording, ego_id)
    half_width = config.half_width(ego)
    ego_speed = _ego_speed_series(ego)
    leader_present = _leader_present_frames(recording, ego, config, half_width)
    out: List[ScenarioOccurrence] = []
    for tid in recording.track_ids():
        if tid == ego_id:
            continue
        subject = recording.tracks[tid]
        geom = _pair_geometry(ego, subject)
        if geom is None:
            continue
        offset = int(geom.frames[0]) - ego.first_frame
        mask = (
            (geom.lon < 0)
            & (geom.lon >= -config.s2_max_gap)
            & (np.abs(geom.lat) <= half_width)
            & (geom.rel_fold <= config.s1_heading_tol)
            & (ego_speed[offset : offset + geom.frames.size] >= config.min_speed_ego)
            & leader_present[offset : offset + geom.frames.size]
        )
        intervals = merge_intervals(geom.frames[mask], config.merge_gap_tol, 1)
        context = {
            (s, e): _nearest_leader(recording, ego, config, half_width, s)
            for s, e in intervals
        }
        out.extend(
            _emit(Scenario.S3, recording, ego, subject, intervals, context)
        )
    return out


def leader_companions(
    recording: Recording, s3_occurrences: Sequence[ScenarioOccurrence], config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Following-scenario occurrences for the leaders of S3 occurrences.

    A leader in S3 is being followed exactly like an S2 subject, but plain S2
    detection skips those frames because the corridor behind the ego is
    occupied by the trailing user. This derives the leader's contribution
    for precisely the frames where the behind-corridor was occupied, so it
    can never overlap a plain S2 occurrence of the same (ego, leader) pair.
    Runs are kept contiguous (no gap bridging) for the same reason, and the
    spans of all S3 occurrences sharing one leader are pooled first so the
    leader is never counted twice for one frame.
    """
    spans: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for occ in s3_occurrences:
        if occ.context_id is not None:
            spans.setdefault((occ.ego_id, occ.context_id), []).append(
                (occ.frame_start, occ.frame_end)
            )

    out: List[ScenarioOccurrence] = []
    behind_by_ego: Dict[int, np.ndarray] = {}
    for (ego_id, leader_id), intervals_in in sorted(spans.items()):
        ego = recording.tracks[ego_id]
        leader = recording.tracks[leader_id]
        half_width = config.half_width(ego)
        geom = _pair_geometry(ego, leader)
        if geom is None:
            continue
        mask = _s2_subject_mask(geom, config, half_width)
        if ego_id not in behind_by_ego:
            behind_by_ego[ego_id] = _behind_occupied_frames(
                recording, ego, config, half_width
            )
        in_span = np.zeros(geom.frames.size, dtype=bool)
        for start, end in intervals_in:
            in_span |= (geom.frames >= start) & (geom.frames <= end)
        occupied = np.isin(geom.frames, behind_by_ego[ego_id])
        frames = geom.frames[mask & in_span & occupied]
        intervals = merge_intervals(frames, 0, 1)
        out.extend(_emit(Scenario.S2, recording, ego, leader, intervals))
    return out


# --- S4: VRU crossing ahead of the ego --------------------------------------

_S4_CLASSES = (ClassGroup.PEDESTRIAN, ClassGroup.CYCLIST)


def _s4_masks(geom: _PairGeometry, config: DetectorConfig, half_width: float):
    band_lo, band_hi = config.s4_crossing_heading
    ahead = (geom.lon > 0) & (geom.lon <= config.s4_corridor_length)
    abs_lat = np.abs(geom.lat)
    heading_ok = (geom.rel_fold >= band_lo) & (geom.rel_fold <= band_hi)
    core = ahead & (abs_lat <= half_width) & heading_ok
    near_edge = (
        ahead
        & (abs_lat > half_width)
        & (abs_lat <= half_width + config.s4_prepare_margin)
        & (heading_ok | (geom.speed <= config.stationary_speed))
    )
    return core, near_edge


def detect_s4(
    recording: Recording, ego_id: int, config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Pedestrians/cyclists crossing (or about to cross) the ego's forward
    corridor away from any configured crosswalk zone.

    An occurrence spans the approach (walking toward or waiting within
    s4_prepare_margin of the corridor edge) plus the traversal; it must
    contain at least one in-corridor frame, and it ends at the last
    in-corridor frame.
    """
    ego = _require_ego(recording, ego_id)
    half_width = config.half_width(ego)
    out: List[ScenarioOccurrence] = []
    for tid in recording.track_ids():
        if tid == ego_id:
            continue
        subject = recording.tracks[tid]
        if subject.class_group not in _S4_CLASSES:
            continue
        geom = _pair_geometry(ego, subject)
        if geom is None:
            continue
        core, near_edge = _s4_masks(geom, config, half_width)
        combined = core | near_edge
        core_frames = set(int(f) for f in geom.frames[core])
        if not core_frames:
            continue
        intervals = []
        for start, end in merge_intervals(
            geom.frames[combined], config.merge_gap_tol, 1
        ):
            inside = sorted(f for f in core_frames if start <= f <= end)
            if not inside:
                continue
            entry = subject.state_at(inside[0]).position
            if any(
                point_in_polygon(entry, poly) for poly in config.s4_crosswalk_zones
            ):
                continue
            intervals.append((start, inside[-1]))
        out.extend(_emit(Scenario.S4, recording, ego, subject, intervals))
    return out


# --- shared helpers ----------------------------------------------------------

def detect_all(
    recording: Recording, ego_id: int, config: DetectorConfig
) -> List[ScenarioOccurrence]:
    """Run all four detectors for one ego; one pass per scenario so a single
    frame can participate in several scenarios at once."""
    occurrences = []
    occurrences.extend(detect_s1(recording, ego_id, config))
    s3 = detect_s3(recording, ego_id, config)
    occurrences.extend(detect_s2(recording, ego_id, config))
    occurrences.extend(s3)
    occurrences.extend(leader_companions(recording, s3, config))
    occurrences.extend(detect_s4(recording, ego_id, config))
    occurrences.sort(
        key=lambda o: (o.scenario.value, o.subject_id, o.frame_start, o.frame_end)
    )
    return occurrences


def eligible_egos(recording: Recording, config: DetectorConfig) -> List[int]:
    """Car (by default) tracks that actually move at some point; parked
    vehicles are never egos."""
    egos = []
    for tid in recording.track_ids():
        track = recording.tracks[tid]
        if track.raw_class not in config.ego_raw_classes:
            continue
        if float(np.max(track.speeds())) < config.min_speed_ego:
            continue
        egos.append(tid)
    return egos


def hit_frames(
    scenario: Scenario,
    recording: Recording,
    ego_id: int,
    subject_id: int,
    config: DetectorConfig,
) -> np.ndarray:
    """Frames where the raw per-frame predicate of `scenario` holds for the
    (ego, subject) pair. Used by audits: every reported occurrence starts and
    ends on a predicate frame, and with merge_gap_tol = 0 every frame of an
    occurrence is a predicate frame.

    For S2 the predicate is "subject is the leading road user being
    followed": the behind-corridor state does not change the subject's
    kinematic situation, it only decides whether the frames surface as a
    plain S2 occurrence or as the leader side of an S3 occurrence."""
    ego = _require_ego(recording, ego_id)
    subject = recording.tracks[subject_id]
    geom = _pair_geometry(ego, subject)
    if geom is None:
        return np.empty(0, dtype=np.int64)
    half_width = config.half_width(ego)
    ego_speed = _ego_speed_series(ego)
    offset = int(geom.frames[0]) - ego.first_frame
    speed_ok = ego_speed[offset : offset + geom.frames.size] >= config.min_speed_ego
    if scenario is Scenario.S1:
        mask = _s1_mask(geom, subject, ego, config)
    elif scenario is Scenario.S2:
        mask = _s2_subject_mask(geom, config, half_width) & speed_ok
    elif scenario is Scenario.S3:
        leader = _leader_present_frames(recording, ego, config, half_width)
        mask = (
            (geom.lon < 0)
            & (geom.lon >= -config.s2_max_gap)
            & (np.abs(geom.lat) <= half_width)
            & (geom.rel_fold <= config.s1_heading_tol)
            & speed_ok
            & leader[offset : offset + geom.frames.size]
        )
    else:
        core, near_edge = _s4_masks(geom, config, half_width)
        mask = core | near_edge
    return geom.frames[mask]
