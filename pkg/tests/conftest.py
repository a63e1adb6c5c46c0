"""Shared fixtures: hand-built tracks, the golden synthetic scene, and the
independent analytic oracle for its expected bounds.

The golden scene plants exactly one occurrence of each scenario, with every
planted extreme attained on an exact frame so closed-form expectations hold
to float precision:

  strip y=0    E1 (car 1) cruises at 10 m/s; L1 (car 2) leads by 20 m and
               brakes at 2 m/s^2 after 4 s   -> S2 with L1 as subject.
               P4 (ped 8) waits right of the road, then crosses the corridor
               at (0.12, 1.6) m/s under a fixed 90 deg heading -> S4.
  strip y=20   E3 (car 6) crawls at 1.5 m/s; P1 (ped 3) walks alongside
               2.2-2.8 m to the right, swaying sinusoidally, heading pinned
               at 5 deg -> S1.
  strip y=40   E2 (car 4) at 8 m/s between leader M2 (motorcycle 5) and
               trailer B2 (bicycle 7, accelerates 1.5 then brakes 1.0)
               -> S3 (B2 subject) plus the leader's S2 contribution (M2).
"""

import copy
import math

import numpy as np
import pytest

from foreseen import ClassGroup, Recording, Scenario, Track, VariableId

FPS = 25.0
OMEGA = math.pi / 2  # sway frequency; peaks land exactly on frames

S1, S2, S3, S4 = Scenario.S1, Scenario.S2, Scenario.S3, Scenario.S4
PED, CYC, MOT, VEH = (
    ClassGroup.PEDESTRIAN,
    ClassGroup.CYCLIST,
    ClassGroup.MOTORCYCLIST,
    ClassGroup.VEHICLE,
)


def make_track(
    track_id,
    raw_class="car",
    start=(0.0, 0.0),
    velocity=(1.0, 0.0),
    n_frames=20,
    start_frame=0,
    heading=None,
    length=None,
    width=None,
    acceleration=(0.0, 0.0),
):
    """Straight constant-acceleration track with annotation-style heading."""
    group = {
        "car": VEH,
        "van": VEH,
        "bus": VEH,
        "truck": VEH,
        "pedestrian": PED,
        "bicycle": CYC,
        "motorcycle": MOT,
    }[raw_class]
    defaults = {
        VEH: (4.5, 1.8),
        PED: (0.0, 0.0),
        CYC: (1.8, 0.65),
        MOT: (2.2, 0.8),
    }[group]
    length = defaults[0] if length is None else length
    width = defaults[1] if width is None else width
    t = np.arange(n_frames) / FPS
    v0 = np.asarray(velocity, dtype=float)
    a = np.asarray(acceleration, dtype=float)
    pos = np.asarray(start, dtype=float) + np.outer(t, v0) + 0.5 * np.outer(t**2, a)
    vel = v0 + np.outer(t, a)
    acc = np.tile(a, (n_frames, 1))
    if heading is None:
        hdg = np.degrees(np.arctan2(vel[:, 1], vel[:, 0])) % 360.0
        if np.all(np.hypot(vel[:, 0], vel[:, 1]) < 1e-12):
            hdg = np.zeros(n_frames)
    else:
        hdg = np.full(n_frames, float(heading) % 360.0)
    return Track(
        track_id=track_id,
        class_group=group,
        raw_class=raw_class,
        length=length,
        width=width,
        frames=np.arange(start_frame, start_frame + n_frames, dtype=np.int64),
        positions=pos,
        velocities=vel,
        accelerations=acc,
        headings=hdg,
    )


def make_recording(tracks, recording_id=1, frame_rate=FPS, speed_limit=None):
    return Recording(
        recording_id=recording_id,
        frame_rate=frame_rate,
        tracks={t.track_id: t for t in tracks},
        speed_limit=speed_limit,
    )


def rigid_transform(recording, angle_deg, offset):
    """Rotate+translate a whole recording (geometry must be invariant)."""
    th = math.radians(angle_deg)
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    off = np.asarray(offset, dtype=float)
    tracks = []
    for track in recording.tracks.values():
        tracks.append(
            Track(
                track_id=track.track_id,
                class_group=track.class_group,
                raw_class=track.raw_class,
                length=track.length,
                width=track.width,
                frames=track.frames.copy(),
                positions=track.positions @ rot.T + off,
                velocities=track.velocities @ rot.T,
                accelerations=track.accelerations @ rot.T,
                headings=(track.headings + angle_deg) % 360.0,
            )
        )
    return make_recording(
        tracks,
        recording_id=recording.recording_id,
        frame_rate=recording.frame_rate,
        speed_limit=recording.speed_limit,
    )


GOLDEN_SCENE = {
    "recording_id": 900,
    "frame_rate": 25,
    "speed_limit": 13.9,
    "agents": [
        {
            "id": 1,
            "class": "car",
            "start": [0.0, 0.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 8.0, "velocity": [10.0, 0.0]}
            ],
        },
        {
            "id": 2,
            "class": "car",
            "start": [20.0, 0.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 4.0, "velocity": [10.0, 0.0]},
                {
                    "type": "constant_acceleration",
                    "duration": 4.0,
                    "velocity": [10.0, 0.0],
                    "acceleration": [-2.0, 0.0],
                },
            ],
        },
        {
            "id": 3,
            "class": "pedestrian",
            "start": [2.0, 17.5],
            "heading_mode": "fixed",
            "heading": 5.0,
            "primitives": [
                {
                    "type": "sinusoidal_sway",
                    "duration": 8.0,
                    "direction": [1.0, 0.0],
                    "speed": 1.5,
                    "amplitude": 0.3,
                    "omega": OMEGA,
                }
            ],
        },
        {
            "id": 4,
            "class": "car",
            "start": [30.0, 40.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 8.0, "velocity": [8.0, 0.0]}
            ],
        },
        {
            "id": 5,
            "class": "motorcycle",
            "start": [45.0, 40.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 8.0, "velocity": [8.0, 0.0]}
            ],
        },
        {
            "id": 6,
            "class": "car",
            "start": [0.0, 20.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 8.0, "velocity": [1.5, 0.0]}
            ],
        },
        {
            "id": 7,
            "class": "bicycle",
            "start": [18.0, 40.0],
            "primitives": [
                {"type": "constant_velocity", "duration": 2.0, "velocity": [8.0, 0.0]},
                {
                    "type": "constant_acceleration",
                    "duration": 2.0,
                    "velocity": [8.0, 0.0],
                    "acceleration": [1.5, 0.0],
                },
                {
                    "type": "constant_acceleration",
                    "duration": 4.0,
                    "velocity": [11.0, 0.0],
                    "acceleration": [-1.0, 0.0],
                },
            ],
        },
        {
            "id": 8,
            "class": "pedestrian",
            "start": [40.0, -3.5],
            "heading_mode": "fixed",
            "heading": 90.0,
            "primitives": [
                {"type": "stationary", "duration": 0.8},
                {
                    "type": "constant_velocity",
                    "duration": 7.2,
                    "velocity": [0.12, 1.6],
                },
            ],
        },
    ],
}


def golden_scene():
    return copy.deepcopy(GOLDEN_SCENE)


def tls_residual_max(points):
    """Independent TLS residual oracle (eigen-decomposition, not the
    package's SVD path)."""
    pts = np.asarray(points, dtype=float)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    direction = vecs[:, -1]
    res = np.abs(centered[:, 0] * direction[1] - centered[:, 1] * direction[0])
    return float(res.max())


def golden_expected():
    """Closed-form expected bounds of the golden scene, computed without the
    package's kinematics code. None means the bound must be absent (n/a)."""
    t = np.arange(200) / FPS
    out = {}

    # S1 pedestrian: forward 1.5 m/s + 0.3 m sway at OMEGA, heading pinned 5 deg.
    amp, speed = 0.3, 1.5
    sin5, cos5 = math.sin(math.radians(5.0)), math.cos(math.radians(5.0))
    vx = np.full(t.size, speed)
    vy = amp * OMEGA * np.cos(OMEGA * t)
    ay = -amp * OMEGA**2 * np.sin(OMEGA * t)
    v_lat = -vx * sin5 + vy * cos5
    a_lat = ay * cos5
    spd = np.hypot(vx, vy)
    braking = (a_lat * v_lat < 0) & (spd > 0.1)
    out[(S1, PED, VariableId.V_LAT_MAX)] = float(np.abs(v_lat).max())
    out[(S1, PED, VariableId.A_LAT_MAX)] = float(np.abs(a_lat).max())
    out[(S1, PED, VariableId.B_LAT_MIN)] = float(np.abs(a_lat[braking]).min())
    out[(S1, PED, VariableId.H_MAX)] = 5.0
    path = np.column_stack([2.0 + speed * t, 17.5 + amp * np.sin(OMEGA * t)])
    out[(S1, PED, VariableId.LAMBDA_MAX)] = tls_residual_max(path)

    # S2: the braking lead car; the motorcycle leader never brakes.
    out[(S2, VEH, VariableId.B_LON_MAX)] = 2.0
    out[(S2, MOT, VariableId.B_LON_MAX)] = 0.0

    # S3 trailing cyclist: 1.5 m/s^2 propulsion, then steady 1.0 m/s^2 braking.
    out[(S3, CYC, VariableId.A_LON_MAX)] = 1.5
    out[(S3, CYC, VariableId.B_LON_MIN)] = 1.0

    # S4 crossing pedestrian: fixed 90 deg heading, velocity (0.12, 1.6).
    out[(S4, PED, VariableId.V_LON_MAX)] = 1.6
    out[(S4, PED, VariableId.V_LAT_MAX)] = 0.12
    out[(S4, PED, VariableId.A_LON_MAX)] = 0.0
    out[(S4, PED, VariableId.A_LAT_MAX)] = 0.0
    out[(S4, PED, VariableId.B_LON_MAX)] = 0.0
    out[(S4, PED, VariableId.B_LON_MIN)] = None
    out[(S4, PED, VariableId.B_LAT_MIN)] = None
    out[(S4, PED, VariableId.H_RATE_MAX)] = 0.0
    out[(S4, PED, VariableId.LAMBDA_MAX)] = 0.0
    return out


GOLDEN_N_CASES = {
    (S1, PED): 1,
    (S2, VEH): 1,
    (S2, MOT): 1,
    (S3, CYC): 1,
    (S4, PED): 1,
}


def many_ego_scene(n_strips=10):
    """Synthetic recording with 20 car egos for determinism tests."""
    agents = []
    for i in range(n_strips):
        y = 10.0 * i
        brake = 1.0 + 0.1 * i
        agents.append(
            {
                "id": 100 + 3 * i,
                "class": "car",
                "start": [0.0, y],
                "primitives": [
                    {"type": "constant_velocity", "duration": 8.0, "velocity": [5.0, 0.0]}
                ],
            }
        )
        agents.append(
            {
                "id": 101 + 3 * i,
                "class": "car",
                "start": [15.0, y],
                "primitives": [
                    {"type": "constant_velocity", "duration": 4.0, "velocity": [5.0, 0.0]},
                    {
                        "type": "constant_acceleration",
                        "duration": 2.0,
                        "velocity": [5.0, 0.0],
                        "acceleration": [-brake, 0.0],
                    },
                    {
                        "type": "constant_velocity",
                        "duration": 2.0,
                        "velocity": [5.0 - 2.0 * brake, 0.0],
                    },
                ],
            }
        )
        agents.append(
            {
                "id": 102 + 3 * i,
                "class": "pedestrian",
                "start": [2.0, y - 2.5],
                "primitives": [
                    {"type": "constant_velocity", "duration": 8.0, "velocity": [1.4, 0.0]}
                ],
            }
        )
    return {
        "recording_id": 901,
        "frame_rate": 25,
        "speed_limit": 13.9,
        "agents": agents,
    }


@pytest.fixture
def golden_recording():
    from foreseen import generate_synthetic

    return generate_synthetic(golden_scene())
