"""Analytic synthetic-scene generator used as a verification oracle.

A scene file (JSON) lists parametric agents, each built from piecewise
motion primitives. Per-frame states are exact closed-form evaluations of the
primitives at t = frame / frame_rate, including analytic velocity,
acceleration, and heading. The alternative "finite_difference" mode keeps
the exact positions but replaces velocity/acceleration with central
finite differences of the positions, emulating a dataset whose derivative
channels were produced numerically. Heading stays the analytic annotation in
both modes (drone datasets annotate heading from box orientation, not by
differentiating positions).

Scene schema (see README for the full field list):

    {
      "recording_id": 900,
      "frame_rate": 25,
      "speed_limit": 13.9,
      "derivatives": "analytic",
      "agents": [
        {
          "id": 1, "class": "car", "length": 4.5, "width": 1.8,
          "start": [0.0, 0.0], "start_frame": 0,
          "heading_mode": "velocity",
          "primitives": [
            {"type": "constant_velocity", "duration": 4.0,
             "velocity": [10.0, 0.0]},
            {"type": "constant_acceleration", "duration": 4.0,
             "velocity": [10.0, 0.0], "acceleration": [-2.0, 0.0]}
          ]
        }
      ]
    }

Primitive types: constant_velocity, constant_acceleration, sinusoidal_sway
(straight motion plus a sinusoidal lateral offset), circular_arc, stationary.
Each primitive starts at the position where the previous one ended.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import (
    DEFAULT_MIN_TRACK_FRAMES,
    Recording,
    Track,
    resolve_class,
)


class SceneError(ValueError):
    pass


# Default footprints (length, width) in meters by raw class.
DEFAULT_FOOTPRINTS: Dict[str, Tuple[float, float]] = {
    "pedestrian": (0.0, 0.0),
    "bicycle": (1.8, 0.65),
    "motorcycle": (2.2, 0.8),
    "car": (4.5, 1.8),
    "van": (5.2, 2.0),
    "bus": (11.0, 2.9),
    "truck": (8.0, 2.5),
    "truck_bus": (10.0, 2.8),
}

_PRIMITIVE_TYPES = (
    "constant_velocity",
    "constant_acceleration",
    "sinusoidal_sway",
    "circular_arc",
    "stationary",
)


def load_scene(path) -> dict:
    """Read and structurally validate a scene JSON file."""
    p = Path(path)
    if not p.exists():
        raise SceneError(f"scene file not found: {p}")
    with open(p, "r", encoding="utf-8") as fh:
        try:
            scene = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneError(f"scene file {p} is not valid JSON: {exc}") from exc
    validate_scene(scene)
    return scene


def validate_scene(scene: dict) -> None:
    if not isinstance(scene, dict):
        raise SceneError("scene must be a JSON object")
    if "agents" not in scene or not isinstance(scene["agents"], list):
        raise SceneError("scene must list agents")
    if not scene["agents"]:
        raise SceneError("scene has no agents")
    fps = scene.get("frame_rate", 25.0)
    if not (isinstance(fps, (int, float)) and fps > 0):
        raise SceneError("frame_rate must be a positive number")
    for i, agent in enumerate(scene["agents"]):
        label = f"agent[{i}]"
        if "class" not in agent:
            raise SceneError(f"{label}: missing class")
        resolve_class(agent["class"])
        start = agent.get("start")
        if not (isinstance(start, (list, tuple)) and len(start) == 2):
            raise SceneError(f"{label}: start must be [x, y]")
        prims = agent.get("primitives")
        if not isinstance(prims, list) or not prims:
            raise SceneError(f"{label}: needs at least one primitive")
        elapsed = 0.0
        for j, prim in enumerate(prims):
            ptype = prim.get("type")
            if ptype not in _PRIMITIVE_TYPES:
                raise SceneError(f"{label}.primitives[{j}]: unknown type {ptype!r}")
            dur = prim.get("duration")
            if not (isinstance(dur, (int, float)) and dur > 0):
                raise SceneError(f"{label}.primitives[{j}]: duration must be > 0")
            declared = prim.get("start")
            if declared is not None:
                if declared < elapsed - 1e-9:
                    raise SceneError(
                        f"{label}.primitives[{j}]: interval overlaps the "
                        f"previous primitive (starts at {declared}s, previous "
                        f"ends at {elapsed}s)"
                    )
                if declared > elapsed + 1e-9:
                    raise SceneError(
                        f"{label}.primitives[{j}]: gap before interval "
                        f"(starts at {declared}s, previous ends at {elapsed}s)"
                    )
            elapsed += float(dur)


def _unit(vec, what: str) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise SceneError(f"{what}: zero direction vector")
    return v / n


class _Primitive:
    """One motion primitive owning a contiguous run of frames."""

    def __init__(self, spec: dict, p0: np.ndarray, fps: float, what: str):
        self.type = spec["type"]
        self.p0 = p0
        self.n_frames = int(round(float(spec["duration"]) * fps))
        if self.n_frames < 1:
            raise SceneError(f"{what}: duration shorter than one frame")
        self.span_seconds = self.n_frames / fps
        t = spec
        if self.type == "constant_velocity":
            self.v = np.asarray(t["velocity"], dtype=np.float64)
        elif self.type == "constant_acceleration":
            self.v0 = np.asarray(t["velocity"], dtype=np.float64)
            self.a = np.asarray(t["acceleration"], dtype=np.float64)
        elif self.type == "sinusoidal_sway":
            self.u = _unit(t["direction"], what)
            self.normal = np.array([-self.u[1], self.u[0]])
            self.speed = float(t["speed"])
            self.amplitude = float(t["amplitude"])
            self.omega = float(t["omega"])
            self.phase = float(t.get("phase", 0.0))
        elif self.type == "circular_arc":
            self.radius = float(t["radius"])
            if self.radius <= 0:
                raise SceneError(f"{what}: radius must be > 0")
            self.speed = float(t["speed"])
            self.start_angle = math.radians(float(t.get("start_angle", 0.0)))
            self.angular = (1.0 if t.get("ccw", True) else -1.0) * (
                self.speed / self.radius
            )
            radial = np.array(
                [math.cos(self.start_angle), math.sin(self.start_angle)]
            )
            self.center = self.p0 - self.radius * radial
        elif self.type == "stationary":
            self.heading = t.get("heading")

    def evaluate(self, tau: np.ndarray):
        """Positions, velocities, accelerations at local times tau (s)."""
        n = tau.size
        if self.type == "constant_velocity":
            pos = self.p0 + np.outer(tau, self.v)
            vel = np.tile(self.v, (n, 1))
            acc = np.zeros((n, 2))
        elif self.type == "constant_acceleration":
            pos = self.p0 + np.outer(tau, self.v0) + 0.5 * np.outer(tau**2, self.a)
            vel = self.v0 + np.outer(tau, self.a)
            acc = np.tile(self.a, (n, 1))
        elif self.type == "sinusoidal_sway":
            ph = self.omega * tau + self.phase
            offset = self.amplitude * (np.sin(ph) - math.sin(self.phase))
            pos = (
                self.p0
                + np.outer(self.speed * tau, self.u)
                + np.outer(offset, self.normal)
            )
            vel = np.tile(self.speed * self.u, (n, 1)) + np.outer(
                self.amplitude * self.omega * np.cos(ph), self.normal
            )
            acc = np.outer(
                -self.amplitude * self.omega**2 * np.sin(ph), self.normal
            )
        elif self.type == "circular_arc":
            ang = self.start_angle + self.angular * tau
            radial = np.column_stack([np.cos(ang), np.sin(ang)])
            tangent = np.column_stack([-np.sin(ang), np.cos(ang)])
            pos = self.center + self.radius * radial
            vel = self.radius * self.angular * tangent
            acc = -self.radius * self.angular**2 * radial
        else:  # stationary
            pos = np.tile(self.p0, (n, 1))
            vel = np.zeros((n, 2))
            acc = np.zeros((n, 2))
        return pos, vel, acc

    def end_position(self) -> np.ndarray:
        # Position where the next primitive picks up: the analytic end of
        # this primitive's time span.
        pos, _, _ = self.evaluate(np.array([self.span_seconds]))
        return pos[0]


def _heading_from_velocity(
    vel: np.ndarray, fallback: float, stationary_prims: List[Tuple[int, int, Optional[float]]]
) -> np.ndarray:
    """Heading series (deg, [0,360)) from velocity direction.

    Frames with (near-)zero speed hold the last defined heading; leading
    zero-speed frames use `fallback`. Stationary primitives with an explicit
    heading override their frame range.
    """
    speed = np.hypot(vel[:, 0], vel[:, 1])
    heading = np.degrees(np.arctan2(vel[:, 1], vel[:, 0])) % 360.0
    defined = speed > 1e-9
    out = np.empty(vel.shape[0])
    last = fallback % 360.0
    for i in range(vel.shape[0]):
        if defined[i]:
            last = heading[i]
        out[i] = last
    for start, stop, hdg in stationary_prims:
        if hdg is not None:
            out[start:stop] = hdg % 360.0
    return out


def _finite_difference(pos: np.ndarray, fps: float):
    """Central-difference velocity/acceleration from positions.

    Edge frames replicate their interior neighbor, so piecewise
    constant-acceleration segments stay exact (up to float cancellation)
    everywhere except the one frame at each segment junction.
    """
    n = pos.shape[0]
    vel = np.empty_like(pos)
    acc = np.empty_like(pos)
    if n < 3:
        vel[:] = (pos[-1] - pos[0]) * fps if n == 2 else 0.0
        acc[:] = 0.0
        return vel, acc
    vel[1:-1] = (pos[2:] - pos[:-2]) * fps / 2.0
    vel[0] = vel[1]
    vel[-1] = vel[-2]
    acc[1:-1] = (pos[2:] - 2.0 * pos[1:-1] + pos[:-2]) * fps * fps
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return vel, acc


def _build_agent_track(
    agent: dict,
    index: int,
    fps: float,
    derivatives: str,
) -> Track:
    what = f"agent[{index}]"
    raw_class = str(agent["class"]).strip().lower()
    group = resolve_class(raw_class)
    default_len, default_wid = DEFAULT_FOOTPRINTS[raw_class]
    length = float(agent.get("length", default_len))
    width = float(agent.get("width", default_wid))
    track_id = int(agent.get("id", index + 1))
    start_frame = int(agent.get("start_frame", 0))
    heading_mode = agent.get("heading_mode", "velocity")
    if heading_mode not in ("velocity", "fixed"):
        raise SceneError(f"{what}: heading_mode must be 'velocity' or 'fixed'")
    fallback_heading = float(agent.get("heading", 0.0))

    p0 = np.asarray(agent["start"], dtype=np.float64)
    prims: List[_Primitive] = []
    for j, spec in enumerate(agent["primitives"]):
        prim = _Primitive(spec, p0, fps, f"{what}.primitives[{j}]")
        prims.append(prim)
        p0 = prim.end_position()

    pos_parts, vel_parts, acc_parts = [], [], []
    stationary_spans: List[Tuple[int, int, Optional[float]]] = []
    offset = 0
    for prim in prims:
        tau = np.arange(prim.n_frames, dtype=np.float64) / fps
        p, v, a = prim.evaluate(tau)
        pos_parts.append(p)
        vel_parts.append(v)
        acc_parts.append(a)
        if prim.type == "stationary":
            stationary_spans.append(
                (offset, offset + prim.n_frames, prim.heading)
            )
        offset += prim.n_frames

    pos = np.vstack(pos_parts)
    vel = np.vstack(vel_parts)
    acc = np.vstack(acc_parts)

    if heading_mode == "fixed":
        headings = np.full(pos.shape[0], fallback_heading % 360.0)
    else:
        headings = _heading_from_velocity(vel, fallback_heading, stationary_spans)

    if derivatives == "finite_difference":
        vel, acc = _finite_difference(pos, fps)

    frames = np.arange(start_frame, start_frame + pos.shape[0], dtype=np.int64)
    return Track(
        track_id=track_id,
        class_group=group,
        raw_class=raw_class,
        length=length,
        width=width,
        frames=frames,
        positions=pos,
        velocities=vel,
        accelerations=acc,
        headings=headings,
    )


def generate_synthetic(
    scene: dict,
    frame_rate: Optional[float] = None,
    derivatives: Optional[str] = None,
    min_track_frames: int = DEFAULT_MIN_TRACK_FRAMES,
) -> Recording:
    """Build a Recording from a scene description.

    `frame_rate` and `derivatives` override the scene's own fields (useful
    for sampling the same scene at several rates). Agents whose primitives
    yield fewer than `min_track_frames` frames are an authoring error.
    """
    validate_scene(scene)
    fps = float(frame_rate if frame_rate is not None else scene.get("frame_rate", 25.0))
    mode = derivatives if derivatives is not None else scene.get("derivatives", "analytic")
    if mode not in ("analytic", "finite_difference"):
        raise SceneError(f"unknown derivatives mode: {mode!r}")

    tracks: Dict[int, Track] = {}
    for i, agent in enumerate(scene["agents"]):
        track = _build_agent_track(agent, i, fps, mode)
        if track.track_id in tracks:
            raise SceneError(f"duplicate agent id {track.track_id}")
        if len(track) < min_track_frames:
            raise SceneError(
                f"agent[{i}] (id {track.track_id}): {len(track)} frames is "
                f"below the {min_track_frames}-frame minimum"
            )
        tracks[track.track_id] = track

    return Recording(
        recording_id=int(scene.get("recording_id", 0)),
        frame_rate=fps,
        tracks=tracks,
        speed_limit=scene.get("speed_limit"),
    )
