"""Per-frame kinematic attributes in each road user's own body frame.

The body frame is the road user's OWN heading frame (not the ego frame and
not a lane frame): longitudinal = along the user's annotated heading,
lateral = 90 degrees counterclockwise from it. Headings stay in degrees end
to end.

Deceleration is a classified magnitude, not merely negative acceleration: a
sample counts as braking only while the (smoothed) longitudinal acceleration
opposes the longitudinal velocity and the user is actually moving
(speed > v_eps). This keeps sensor noise at standstill out of the braking
statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import Track

# Below this speed a user counts as not moving for braking classification.
V_EPS = 0.1  # m/s

# Acceleration magnitudes below this are numerical residue (finite-difference
# cancellation is ~1e-11 m/s^2), not deceleration; without the deadband the
# braking minima collapse to float noise.
A_EPS = 1e-6  # m/s^2

DEFAULT_SMOOTHING_WINDOW = 5  # frames; 0.2 s at 25 fps


class KinematicsError(ValueError):
    pass


@dataclass(frozen=True)
class KinematicSample:
    """Derived kinematic attributes of one road user at one frame.

    v_lon/v_lat are signed body-frame velocity components (+ = forward /
    left). a_lon/a_lat are the signed body-frame components of the smoothed
    acceleration. beta_lon/beta_lat are braking magnitudes (>= 0, zero when
    not braking). h is the absolute angular difference to a scenario
    reference direction, folded into [0, 180]. h_rate is the signed heading
    rate from unwrapped headings, degrees/s.
    """

    frame: int
    v_lon: float
    v_lat: float
    a_lon: float
    a_lat: float
    beta_lon: float
    beta_lat: float
    h: float
    h_rate: float
    speed: float


@dataclass(frozen=True)
class LateralFluctuation:
    """Max perpendicular deviation from a straight reference line.

    reference_line is (point, unit direction) of the total-least-squares fit
    through the gated positions; max_index is the index (into the gated
    subset) of the worst residual.
    """

    lambda_max: float
    reference_line: Tuple[Tuple[float, float], Tuple[float, float]]
    max_index: int


def body_frame_decompose(vector, heading: float):
    """Rotate a world-frame 2-vector into the body frame of `heading` (deg).

    lon = vx*cos(h) + vy*sin(h); lat = -vx*sin(h) + vy*cos(h). The rotation
    preserves the norm. Accepts a single vector or an (N, 2) array together
    with a matching heading array.
    """
    v = np.asarray(vector, dtype=np.float64)
    h = np.radians(np.asarray(heading, dtype=np.float64))
    c, s = np.cos(h), np.sin(h)
    if v.ndim == 1:
        lon = v[0] * c + v[1] * s
        lat = -v[0] * s + v[1] * c
        return float(lon), float(lat)
    lon = v[:, 0] * c + v[:, 1] * s
    lat = -v[:, 0] * s + v[:, 1] * c
    return lon, lat


def unwrap_degrees(headings: np.ndarray) -> np.ndarray:
    """Remove 360-degree jumps from a heading series (degrees)."""
    h = np.asarray(headings, dtype=np.float64)
    if h.size == 0:
        return h.copy()
    steps = np.diff(h)
    # Fold every step into (-180, 180] before cumulative reconstruction.
    folded = (steps + 180.0) % 360.0 - 180.0
    out = np.empty_like(h)
    out[0] = h[0]
    out[1:] = h[0] + np.cumsum(folded)
    return out


def fold_heading_difference(heading, reference: float):
    """Absolute angular difference in degrees, folded into [0, 180]."""
    d = np.abs(np.asarray(heading, dtype=np.float64) - reference) % 360.0
    return np.where(d > 180.0, 360.0 - d, d)


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; the window truncates at the series edges."""
    if window == 1:
        return np.asarray(values, dtype=np.float64).copy()
    v = np.asarray(values, dtype=np.float64)
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(v)))
    n = v.size
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi - lo + 1)


def central_rate(values: np.ndarray, frame_rate: float) -> np.ndarray:
    """d/dt by central differences, one-sided at the series ends.

    Multiplies by frame_rate instead of dividing by the timestep so that
    integer frame rates stay exact in floating point.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    out = np.empty(n, dtype=np.float64)
    if n == 1:
        out[0] = 0.0
        return out
    out[1:-1] = (v[2:] - v[:-2]) * frame_rate / 2.0
    out[0] = (v[1] - v[0]) * frame_rate
    out[-1] = (v[-1] - v[-2]) * frame_rate
    return out


def _validate_window(window: int) -> None:
    if window < 1 or window % 2 == 0:
        raise KinematicsError(f"smoothing window must be odd and >= 1, got {window}")


def track_arrays(
    track: Track,
    frame_rate: float,
    window: int = DEFAULT_SMOOTHING_WINDOW,
    v_eps: float = V_EPS,
    a_eps: float = A_EPS,
) -> dict:
    """Reference-independent kinematic arrays for a whole track.

    Returns a dict of per-frame arrays: v_lon, v_lat, a_lon, a_lat, beta_lon,
    beta_lat, h_rate, speed. Acceleration components are smoothed with a
    centered moving average of `window` frames before the braking
    classification, and the smoothed values are what the samples report so
    the sign rule (beta > 0 implies a opposes v) holds on the reported
    fields. window = 1 disables smoothing.
    """
    _validate_window(window)
    if len(track) < window:
        raise KinematicsError(
            f"track {track.track_id}: {len(track)} frames < window {window}"
        )
    v_lon, v_lat = body_frame_decompose(track.velocities, track.headings)
    ax = moving_average(track.accelerations[:, 0], window)
    ay = moving_average(track.accelerations[:, 1], window)
    a_lon, a_lat = body_frame_decompose(np.column_stack([ax, ay]), track.headings)
    speed = track.speeds()

    moving = speed > v_eps
    braking_lon = moving & (a_lon * v_lon < 0.0) & (np.abs(a_lon) > a_eps)
    braking_lat = moving & (a_lat * v_lat < 0.0) & (np.abs(a_lat) > a_eps)
    beta_lon = np.where(braking_lon, np.abs(a_lon), 0.0)
    beta_lat = np.where(braking_lat, np.abs(a_lat), 0.0)

    h_rate = central_rate(unwrap_degrees(track.headings), frame_rate)
    return {
        "v_lon": v_lon,
        "v_lat": v_lat,
        "a_lon": a_lon,
        "a_lat": a_lat,
        "beta_lon": beta_lon,
        "beta_lat": beta_lat,
        "h_rate": h_rate,
        "speed": speed,
    }


def compute_samples(
    track: Track,
    frame_rate: float,
    window: int = DEFAULT_SMOOTHING_WINDOW,
    reference_heading: float = 0.0,
    v_eps: float = V_EPS,
    a_eps: float = A_EPS,
) -> List[KinematicSample]:
    """Per-frame kinematic samples for a track.

    `reference_heading` (degrees) is the scenario reference direction; h is
    the track heading's absolute angular difference to it, folded into
    [0, 180]. Scenario detectors supply the ego heading at occurrence start
    here (flipped by 180 degrees for opposite-direction subjects) so that
    parallel travel reads as h close to 0.
    """
    arrays = track_arrays(track, frame_rate, window, v_eps, a_eps)
    h = fold_heading_difference(track.headings, reference_heading)
    samples = []
    for i, frame in enumerate(track.frames):
        samples.append(
            KinematicSample(
                frame=int(frame),
                v_lon=float(arrays["v_lon"][i]),
                v_lat=float(arrays["v_lat"][i]),
                a_lon=float(arrays["a_lon"][i]),
                a_lat=float(arrays["a_lat"][i]),
                beta_lon=float(arrays["beta_lon"][i]),
                beta_lat=float(arrays["beta_lat"][i]),
                h=float(h[i]),
                h_rate=float(arrays["h_rate"][i]),
                speed=float(arrays["speed"][i]),
            )
        )
    return samples


def lateral_fluctuation(
    positions: Sequence, speeds: Sequence, v_min: float
) -> Optional[LateralFluctuation]:
    """Max perpendicular deviation from the TLS line of the moving positions.

    Positions with speed < v_min are excluded ("moving forward" gate). With
    fewer than 2 gated positions there is no meaningful reference line and
    None is returned (the occurrence then contributes no fluctuation value).

    The straight-line reference is an approximation that holds on straight
    road stretches; no lane geometry is used.
    """
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    spd = np.asarray(speeds, dtype=np.float64).reshape(-1)
    if pos.shape[0] != spd.shape[0]:
        raise KinematicsError("positions and speeds must have equal length")
    gated = pos[spd >= v_min]
    if gated.shape[0] < 2:
        return None
    centroid = gated.mean(axis=0)
    centered = gated - centroid
    # Principal direction of the centered cloud = total-least-squares line.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    residuals = np.abs(centered[:, 0] * direction[1] - centered[:, 1] * direction[0])
    worst = int(np.argmax(residuals))
    return LateralFluctuation(
        lambda_max=float(residuals[worst]),
        reference_line=(
            (float(centroid[0]), float(centroid[1])),
            (float(direction[0]), float(direction[1])),
        ),
        max_index=worst,
    )


def heading_rate_reference(speed: float, radius: float) -> float:
    """Heading rate of steady circular motion, degrees per second."""
    return math.degrees(speed / radius)
