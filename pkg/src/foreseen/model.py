"""In-memory trajectory model: recordings, tracks, per-frame states.

Positions live in the recording's local metric frame (meters); headings are
degrees counterclockwise from the recording x-axis, normalized to [0, 360).
Positions are bounding-box centers (the xCenter/yCenter convention of the
drone dataset family). Pedestrians are treated as points (zero footprint);
every other road user is an oriented rectangle with its length along the
heading.

All types are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

# Tracks shorter than this are too short for stable derivatives and are
# dropped when building recordings from data (0.52 s at 25 fps).
DEFAULT_MIN_TRACK_FRAMES = 13


class ModelError(ValueError):
    """Raised when a trajectory-model invariant is violated."""


class ClassGroup(Enum):
    PEDESTRIAN = "Pedestrian"
    CYCLIST = "Cyclist"
    MOTORCYCLIST = "Motorcyclist"
    VEHICLE = "Vehicle"


# Raw annotation label -> class group. "truck_bus" is the combined label some
# recordings in the dataset family use. Anything not listed here is rejected
# at ingestion.
RAW_CLASS_MAP: Dict[str, ClassGroup] = {
    "pedestrian": ClassGroup.PEDESTRIAN,
    "bicycle": ClassGroup.CYCLIST,
    "motorcycle": ClassGroup.MOTORCYCLIST,
    "car": ClassGroup.VEHICLE,
    "van": ClassGroup.VEHICLE,
    "bus": ClassGroup.VEHICLE,
    "truck": ClassGroup.VEHICLE,
    "truck_bus": ClassGroup.VEHICLE,
}


def resolve_class(raw_label: str) -> ClassGroup:
    """Map a raw annotation label to its class group.

    Raises ModelError for unknown labels; callers doing bulk ingestion catch
    this per track and record a rejection instead of failing the file.
    """
    key = raw_label.strip().lower()
    try:
        return RAW_CLASS_MAP[key]
    except KeyError:
        raise ModelError(f"unknown road-user class label: {raw_label!r}") from None


def normalize_heading(deg: float) -> float:
    """Fold an angle in degrees into [0, 360)."""
    h = float(deg) % 360.0
    return h if h < 360.0 else 0.0


@dataclass(frozen=True)
class TrackState:
    """One road user's state at one frame."""

    frame: int
    position: Tuple[float, float]
    velocity: Tuple[float, float]
    acceleration: Tuple[float, float]
    heading: float  # degrees, [0, 360), ccw from recording x-axis


class Track:
    """One road user's gap-free trajectory, backed by per-frame arrays.

    Frames are strictly increasing with step 1; a gap is an ingestion error.
    """

    __slots__ = (
        "track_id",
        "class_group",
        "raw_class",
        "length",
        "width",
        "frames",
        "positions",
        "velocities",
        "accelerations",
        "headings",
    )

    def __init__(
        self,
        track_id: int,
        class_group: ClassGroup,
        raw_class: str,
        length: float,
        width: float,
        frames: np.ndarray,
        positions: np.ndarray,
        velocities: np.ndarray,
        accelerations: np.ndarray,
        headings: np.ndarray,
    ):
        frames = np.asarray(frames, dtype=np.int64)
        if frames.size == 0:
            raise ModelError(f"track {track_id}: empty state sequence")
        if frames.size > 1 and not np.all(np.diff(frames) == 1):
            raise ModelError(f"track {track_id}: frames are not gap-free")
        if class_group is not ClassGroup.PEDESTRIAN and (length <= 0 or width <= 0):
            raise ModelError(
                f"track {track_id}: {class_group.value} footprint must be positive"
            )
        if length < 0 or width < 0:
            raise ModelError(f"track {track_id}: negative footprint")

        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
        velocities = np.asarray(velocities, dtype=np.float64).reshape(-1, 2)
        accelerations = np.asarray(accelerations, dtype=np.float64).reshape(-1, 2)
        headings = np.asarray(headings, dtype=np.float64).reshape(-1)
        n = frames.size
        for name, arr in (
            ("positions", positions),
            ("velocities", velocities),
            ("accelerations", accelerations),
            ("headings", headings),
        ):
            if arr.shape[0] != n:
                raise ModelError(f"track {track_id}: {name} length != frame count")
        if not (
            np.all(np.isfinite(positions))
            and np.all(np.isfinite(velocities))
            and np.all(np.isfinite(accelerations))
            and np.all(np.isfinite(headings))
        ):
            raise ModelError(f"track {track_id}: non-finite state values")

        headings = np.mod(headings, 360.0)
        headings[headings >= 360.0] = 0.0

        object.__setattr__(self, "track_id", int(track_id))
        object.__setattr__(self, "class_group", class_group)
        object.__setattr__(self, "raw_class", str(raw_class))
        object.__setattr__(self, "length", float(length))
        object.__setattr__(self, "width", float(width))
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "velocities", velocities)
        object.__setattr__(self, "accelerations", accelerations)
        object.__setattr__(self, "headings", headings)
        for arr in (frames, positions, velocities, accelerations, headings):
            arr.setflags(write=False)

    def __setattr__(self, name, value):
        raise AttributeError("Track is immutable")

    @property
    def first_frame(self) -> int:
        return int(self.frames[0])

    @property
    def last_frame(self) -> int:
        return int(self.frames[-1])

    def __len__(self) -> int:
        return self.frames.size

    def index_of(self, frame: int) -> int:
        """Array index of a frame (O(1) thanks to gap-freeness)."""
        i = frame - self.first_frame
        if i < 0 or i >= len(self):
            raise ModelError(f"track {self.track_id}: frame {frame} out of range")
        return i

    def state_at(self, frame: int) -> TrackState:
        i = self.index_of(frame)
        return TrackState(
            frame=frame,
            position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
            velocity=(float(self.velocities[i, 0]), float(self.velocities[i, 1])),
            acceleration=(
                float(self.accelerations[i, 0]),
                float(self.accelerations[i, 1]),
            ),
            heading=float(self.headings[i]),
        )

    @property
    def states(self) -> List[TrackState]:
        return [self.state_at(int(f)) for f in self.frames]

    def speeds(self) -> np.ndarray:
        return np.hypot(self.velocities[:, 0], self.velocities[:, 1])


@dataclass(frozen=True)
class Recording:
    """One drone recording: frame rate, tracks keyed by id, metadata."""

    recording_id: int
    frame_rate: float  # Hz
    tracks: Dict[int, Track]
    speed_limit: Optional[float] = None  # m/s

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ModelError("frame_rate must be positive")
        for tid, track in self.tracks.items():
            if tid != track.track_id:
                raise ModelError(f"track key {tid} != track_id {track.track_id}")

    def track_ids(self) -> List[int]:
        return sorted(self.tracks)


class FrameIndex:
    """Frame number -> active (track_id, state) lookups for one recording.

    Construction is single-threaded per recording; the built index is
    immutable and safe for concurrent readers.
    """

    def __init__(self, recording: Recording):
        self._recording = recording
        by_frame: Dict[int, List[int]] = {}
        for tid in recording.track_ids():
            track = recording.tracks[tid]
            for f in range(track.first_frame, track.last_frame + 1):
                by_frame.setdefault(f, []).append(tid)
        self._by_frame = by_frame

    @property
    def recording(self) -> Recording:
        return self._recording

    def frame_numbers(self) -> List[int]:
        return sorted(self._by_frame)

    def __len__(self) -> int:
        return len(self._by_frame)

    def active(self, frame: int) -> List[Tuple[int, TrackState]]:
        """All (track_id, state) pairs alive at `frame`, ordered by track_id."""
        tids = self._by_frame.get(frame, [])
        return [(tid, self._recording.tracks[tid].state_at(frame)) for tid in tids]

    def items(self) -> Iterator[Tuple[int, TrackState]]:
        """Every (track_id, state) pair of the recording, exactly once."""
        for frame in self.frame_numbers():
            yield from self.active(frame)


def frame_index(recording: Recording) -> FrameIndex:
    """Build the frame -> active-states index for a recording."""
    return FrameIndex(recording)


def states_in_radius(
    index: FrameIndex,
    frame: int,
    center: Tuple[float, float],
    radius: float,
) -> List[Tuple[int, TrackState]]:
    """Active states within Euclidean `radius` of `center` at `frame`.

    Distance is inclusive (<= radius). Frames outside the recording range
    yield an empty list. Result is ordered by track_id.
    """
    if radius < 0:
        raise ModelError("radius must be >= 0")
    cx, cy = float(center[0]), float(center[1])
    out = []
    for tid, state in index.active(frame):
        dx = state.position[0] - cx
        dy = state.position[1] - cy
        if dx * dx + dy * dy <= radius * radius:
            out.append((tid, state))
    return out


def drop_short_tracks(
    tracks: Dict[int, Track], min_frames: int = DEFAULT_MIN_TRACK_FRAMES
) -> Tuple[Dict[int, Track], List[int]]:
    """Split tracks into (kept, dropped ids) by a minimum frame count."""
    kept, dropped = {}, []
    for tid, track in tracks.items():
        if len(track) >= min_frames:
            kept[tid] = track
        else:
            dropped.append(tid)
    return kept, sorted(dropped)
