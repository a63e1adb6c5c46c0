"""Scenario mining and kinematic bound extraction for road-user trajectories.

Mines four ego-relative driving scenarios (alongside, following, leading +
trailing, VRU crossing) out of drone-recorded track data and accumulates
per-scenario, per-class extremal kinematic values ("reasonably foreseeable
behavior" bounds in the sense of IEEE 2846-2022).
"""

__version__ = "0.1.0"

from .model import (
    ClassGroup,
    FrameIndex,
    Recording,
    Track,
    TrackState,
    frame_index,
    states_in_radius,
)
from .kinematics import (
    KinematicSample,
    LateralFluctuation,
    body_frame_decompose,
    compute_samples,
    lateral_fluctuation,
)
from .detection import (
    DetectorConfig,
    Scenario,
    ScenarioOccurrence,
    detect_s1,
    detect_s2,
    detect_s3,
    detect_s4,
    merge_intervals,
)
from .bounds import (
    BoundAccumulator,
    BoundsReport,
    VariableId,
    accumulate_occurrence,
    merge_accumulators,
    finalize,
)
from .ingest import IngestError, IngestReport, load_recording, write_levelx
from .synthetic import SceneError, generate_synthetic, load_scene

__all__ = [
    "BoundAccumulator",
    "BoundsReport",
    "ClassGroup",
    "DetectorConfig",
    "FrameIndex",
    "IngestError",
    "IngestReport",
    "KinematicSample",
    "LateralFluctuation",
    "Recording",
    "Scenario",
    "ScenarioOccurrence",
    "Track",
    "TrackState",
    "VariableId",
    "accumulate_occurrence",
    "body_frame_decompose",
    "compute_samples",
    "detect_s1",
    "detect_s2",
    "detect_s3",
    "detect_s4",
    "finalize",
    "frame_index",
    "generate_synthetic",
    "lateral_fluctuation",
    "load_recording",
    "load_scene",
    "merge_accumulators",
    "merge_intervals",
    "SceneError",
    "states_in_radius",
    "write_levelx",
    "__version__",
]
