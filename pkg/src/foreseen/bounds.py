"""Extremal kinematic bound accumulation and report rendering.

For every (scenario, road-user class) cell the accumulator keeps the number
of occurrences plus, per applicable variable, the running extreme (max for
*_max variables, min over strictly positive braking samples for *_min
variables) together with the provenance of the frame that produced it.
Provenance matters: extremal statistics are only as credible as the single
frame they come from, and the audit command re-derives every bound from it.

Merging accumulators is associative and commutative (value ties are broken
by lexicographic provenance), so sharded parallel extraction is
deterministic under any partitioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from .detection import Scenario, ScenarioOccurrence
from .kinematics import KinematicSample
from .model import ClassGroup


class AccumulationError(ValueError):
    pass


class VariableId(Enum):
    V_LON_MAX = "v_lon_max"
    V_LAT_MAX = "v_lat_max"
    A_LON_MAX = "alpha_lon_max"
    A_LAT_MAX = "alpha_lat_max"
    B_LON_MAX = "beta_lon_max"
    B_LON_MIN = "beta_lon_min"
    B_LAT_MIN = "beta_lat_min"
    H_MAX = "h_max"
    H_RATE_MAX = "h_rate_max"
    LAMBDA_MAX = "lambda_max"


UNITS: Dict[VariableId, str] = {
    VariableId.V_LON_MAX: "m/s",
    VariableId.V_LAT_MAX: "m/s",
    VariableId.A_LON_MAX: "m/s^2",
    VariableId.A_LAT_MAX: "m/s^2",
    VariableId.B_LON_MAX: "m/s^2",
    VariableId.B_LON_MIN: "m/s^2",
    VariableId.B_LAT_MIN: "m/s^2",
    VariableId.H_MAX: "deg",
    VariableId.H_RATE_MAX: "deg/s",
    VariableId.LAMBDA_MAX: "m",
}

_MIN_VARIABLES = {VariableId.B_LON_MIN, VariableId.B_LAT_MIN}

# Minimum applicable assumption set per scenario. Only safety-relevant
# attributes (those that can move the subject toward the ego) are bounded.
APPLICABLE: Dict[Scenario, Tuple[VariableId, ...]] = {
    Scenario.S1: (
        VariableId.V_LAT_MAX,
        VariableId.A_LAT_MAX,
        VariableId.B_LAT_MIN,
        VariableId.H_MAX,
        VariableId.LAMBDA_MAX,
    ),
    Scenario.S2: (VariableId.B_LON_MAX,),
    Scenario.S3: (VariableId.A_LON_MAX, VariableId.B_LON_MIN),
    Scenario.S4: (
        VariableId.V_LON_MAX,
        VariableId.V_LAT_MAX,
        VariableId.A_LON_MAX,
        VariableId.A_LAT_MAX,
        VariableId.B_LON_MAX,
        VariableId.B_LON_MIN,
        VariableId.B_LAT_MIN,
        VariableId.H_RATE_MAX,
        VariableId.LAMBDA_MAX,
    ),
}

CLASS_ORDER = (
    ClassGroup.PEDESTRIAN,
    ClassGroup.CYCLIST,
    ClassGroup.MOTORCYCLIST,
    ClassGroup.VEHICLE,
)

# Only pedestrians and cyclists can be crossing-scenario subjects.
SCENARIO_CLASSES: Dict[Scenario, Tuple[ClassGroup, ...]] = {
    Scenario.S1: CLASS_ORDER,
    Scenario.S2: CLASS_ORDER,
    Scenario.S3: CLASS_ORDER,
    Scenario.S4: (ClassGroup.PEDESTRIAN, ClassGroup.CYCLIST),
}

SCENARIO_TITLES: Dict[Scenario, str] = {
    Scenario.S1: "S1 - ego vehicle driving next to other road users",
    Scenario.S2: "S2 - ego vehicle driving behind another road user",
    Scenario.S3: "S3 - ego vehicle between leading and trailing road users",
    Scenario.S4: "S4 - VRU crossing in front of the ego vehicle, no crosswalk",
}


@dataclass(frozen=True, order=True)
class Provenance:
    """Where an extreme came from; orderable for deterministic tie-breaks."""

    recording_id: int
    ego_id: int
    subject_id: int
    frame: int
    frame_start: int = 0
    frame_end: int = 0
    reference_heading: float = 0.0

    def sort_key(self) -> Tuple[int, int, int, int]:
        return (self.recording_id, self.ego_id, self.subject_id, self.frame)

    def as_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "ego_id": self.ego_id,
            "subject_id": self.subject_id,
            "frame": self.frame,
            "frame_start": self.frame_start,
            "frame_end": self.frame_end,
            "reference_heading": self.reference_heading,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Provenance":
        return cls(
            recording_id=int(data["recording_id"]),
            ego_id=int(data["ego_id"]),
            subject_id=int(data["subject_id"]),
            frame=int(data["frame"]),
            frame_start=int(data["frame_start"]),
            frame_end=int(data["frame_end"]),
            reference_heading=float(data["reference_heading"]),
        )


@dataclass
class Extreme:
    value: float
    provenance: Optional[Provenance]


def _better(var: VariableId, challenger: Extreme, incumbent: Extreme) -> bool:
    """True when challenger should replace incumbent (ties broken by
    provenance so accumulation order never matters)."""
    if var in _MIN_VARIABLES:
        if challenger.value != incumbent.value:
            return challenger.value < incumbent.value
    else:
        if challenger.value != incumbent.value:
            return challenger.value > incumbent.value
    if challenger.provenance is None:
        return False
    if incumbent.provenance is None:
        return True
    return challenger.provenance.sort_key() < incumbent.provenance.sort_key()


class _Cell:
    __slots__ = ("n_cases", "extremes", "samples")

    def __init__(self):
        self.n_cases = 0
        self.extremes: Dict[VariableId, Extreme] = {}
        # percentile mode only: per-variable (value, provenance) pools
        self.samples: Dict[VariableId, List[Tuple[float, Provenance]]] = {}


class BoundAccumulator:
    """Running per-(scenario, class) extremes over scenario occurrences.

    percentile = None keeps raw extremes (the default). A percentile (e.g.
    99.9) switches to nearest-rank percentile bounds over the pooled
    per-occurrence extremes, a robustness mode that discounts outlier
    occurrences; the reported value is then still an attained sample with
    provenance.
    """

    def __init__(
        self,
        percentile: Optional[float] = None,
        beta_min_per_occurrence: bool = False,
        v_eps: float = 0.1,
    ):
        self.percentile = percentile
        self.beta_min_per_occurrence = beta_min_per_occurrence
        self.v_eps = v_eps
        self.cells: Dict[Tuple[Scenario, ClassGroup], _Cell] = {}

    def _cell(self, scenario: Scenario, group: ClassGroup) -> _Cell:
        key = (scenario, group)
        if key not in self.cells:
            self.cells[key] = _Cell()
        return self.cells[key]

    def params(self) -> tuple:
        return (self.percentile, self.beta_min_per_occurrence, self.v_eps)

    def n_cases(self, scenario: Scenario, group: ClassGroup) -> int:
        cell = self.cells.get((scenario, group))
        return 0 if cell is None else cell.n_cases

    def total_cases(self) -> Dict[str, int]:
        out = {s.value: 0 for s in Scenario}
        for (scenario, _), cell in self.cells.items():
            out[scenario.value] += cell.n_cases
        return out

    # -- manual injection (tests, golden tables) --

    def add_case(self, scenario: Scenario, group: ClassGroup, n: int = 1) -> None:
        self._cell(scenario, group).n_cases += n

    def record_value(
        self,
        scenario: Scenario,
        group: ClassGroup,
        var: VariableId,
        value: float,
        provenance: Optional[Provenance] = None,
    ) -> None:
        if var not in APPLICABLE[scenario]:
            raise AccumulationError(f"{var.value} not applicable to {scenario.value}")
        cell = self._cell(scenario, group)
        challenger = Extreme(float(value), provenance)
        incumbent = cell.extremes.get(var)
        if incumbent is None or _better(var, challenger, incumbent):
            cell.extremes[var] = challenger
        if self.percentile is not None and provenance is not None:
            cell.samples.setdefault(var, []).append((float(value), provenance))


def _occurrence_series(
    var: VariableId,
    samples: Sequence[KinematicSample],
    v_eps: float,
) -> List[Tuple[float, int]]:
    """(value, frame) candidates of one occurrence for one variable.

    Magnitudes are used for accelerations and for lateral speed. The
    longitudinal acceleration bound covers propulsive samples only (braking
    magnitudes belong to the deceleration bounds; mixing them would let hard
    braking masquerade as acceleration capability).
    """
    out = []
    for s in samples:
        if var is VariableId.V_LON_MAX:
            out.append((s.v_lon, s.frame))
        elif var is VariableId.V_LAT_MAX:
            out.append((abs(s.v_lat), s.frame))
        elif var is VariableId.A_LON_MAX:
            if s.a_lon * s.v_lon > 0 and s.speed > v_eps:
                out.append((abs(s.a_lon), s.frame))
        elif var is VariableId.A_LAT_MAX:
            out.append((abs(s.a_lat), s.frame))
        elif var is VariableId.B_LON_MAX:
            out.append((s.beta_lon, s.frame))
        elif var in (VariableId.B_LON_MIN, VariableId.B_LAT_MIN):
            beta = s.beta_lon if var is VariableId.B_LON_MIN else s.beta_lat
            if beta > 0:
                out.append((beta, s.frame))
        elif var is VariableId.H_MAX:
            out.append((s.h, s.frame))
        elif var is VariableId.H_RATE_MAX:
            out.append((abs(s.h_rate), s.frame))
    return out


def accumulate_occurrence(
    acc: BoundAccumulator,
    occ: ScenarioOccurrence,
    samples: Sequence[KinematicSample],
    lambda_value: Optional[Tuple[float, int]] = None,
) -> BoundAccumulator:
    """Fold one occurrence's subject samples into the accumulator.

    `samples` must cover exactly the occurrence's frame interval.
    `lambda_value` is the occurrence's lateral fluctuation as
    (value, frame of worst residual), or None when the subject never moved
    enough to define a reference line.
    """
    if (
        not samples
        or samples[0].frame != occ.frame_start
        or samples[-1].frame != occ.frame_end
        or len(samples) != occ.n_frames
    ):
        raise AccumulationError(
            f"samples do not cover occurrence frames "
            f"[{occ.frame_start}, {occ.frame_end}]"
        )
    cell_group = occ.subject_class
    acc.add_case(occ.scenario, cell_group)

    def prov(frame: int) -> Provenance:
        return Provenance(
            recording_id=occ.recording_id,
            ego_id=occ.ego_id,
            subject_id=occ.subject_id,
            frame=frame,
            frame_start=occ.frame_start,
            frame_end=occ.frame_end,
            reference_heading=occ.reference_heading,
        )

    for var in APPLICABLE[occ.scenario]:
        if var is VariableId.LAMBDA_MAX:
            if lambda_value is not None:
                value, frame = lambda_value
                acc.record_value(occ.scenario, cell_group, var, value, prov(frame))
            continue
        series = _occurrence_series(var, samples, acc.v_eps)
        if var in _MIN_VARIABLES:
            if not series:
                continue  # no braking sample: the minimum stays absent
            if acc.beta_min_per_occurrence:
                value, frame = max(series, key=lambda vf: (vf[0], -vf[1]))
            else:
                value, frame = min(series, key=lambda vf: (vf[0], vf[1]))
            acc.record_value(occ.scenario, cell_group, var, value, prov(frame))
        else:
            if not series:
                continue
            value, frame = max(series, key=lambda vf: (vf[0], -vf[1]))
            if value > 0:
                acc.record_value(occ.scenario, cell_group, var, value, prov(frame))
            # all-zero occurrences leave maxima at their implicit 0
    return acc


def merge_accumulators(a: BoundAccumulator, b: BoundAccumulator) -> BoundAccumulator:
    """Commutative, associative merge of two accumulators."""
    if a.params() != b.params():
        raise AccumulationError("cannot merge accumulators with different settings")
    out = BoundAccumulator(
        percentile=a.percentile,
        beta_min_per_occurrence=a.beta_min_per_occurrence,
        v_eps=a.v_eps,
    )
    for src in (a, b):
        for key, cell in src.cells.items():
            dst = out._cell(*key)
            dst.n_cases += cell.n_cases
            for var, extreme in cell.extremes.items():
                incumbent = dst.extremes.get(var)
                if incumbent is None or _better(var, extreme, incumbent):
                    dst.extremes[var] = Extreme(extreme.value, extreme.provenance)
            for var, pool in cell.samples.items():
                dst.samples.setdefault(var, []).extend(pool)
    return out


# --- report -----------------------------------------------------------------

@dataclass
class Bound:
    value: float
    provenance: Optional[Provenance]


@dataclass
class BoundsReport:
    """Finalized per-scenario tables: n_cases and bounds per class.

    bounds[scenario][group][var] is a Bound, or None when the variable has
    no value (a minimum with no braking sample observed).
    """

    n_cases: Dict[Scenario, Dict[ClassGroup, int]]
    bounds: Dict[Scenario, Dict[ClassGroup, Dict[VariableId, Optional[Bound]]]]
    footnotes: List[str] = field(default_factory=list)


def _nearest_rank(pool: List[Tuple[float, Provenance]], percentile: float, minimum: bool):
    ordered = sorted(pool, key=lambda vp: (vp[0], vp[1].sort_key()))
    n = len(ordered)
    rank = max(1, math.ceil(percentile / 100.0 * n))
    idx = (n - rank) if minimum else (rank - 1)
    value, provenance = ordered[idx]
    return value, provenance


def finalize(acc: BoundAccumulator) -> BoundsReport:
    """Freeze the accumulator into report tables.

    Classes with zero occurrences get no bound values; minima that never saw
    a braking sample stay absent (rendered as n/a). Internally surprising
    combinations (zero lateral speed next to nonzero lateral acceleration)
    are flagged in a footnote rather than reconciled.
    """
    n_cases: Dict[Scenario, Dict[ClassGroup, int]] = {}
    bounds: Dict[Scenario, Dict[ClassGroup, Dict[VariableId, Optional[Bound]]]] = {}
    footnotes: List[str] = []
    for scenario in Scenario:
        n_cases[scenario] = {}
        bounds[scenario] = {}
        for group in SCENARIO_CLASSES[scenario]:
            cell = acc.cells.get((scenario, group))
            count = 0 if cell is None else cell.n_cases
            n_cases[scenario][group] = count
            per_var: Dict[VariableId, Optional[Bound]] = {}
            for var in APPLICABLE[scenario]:
                if count == 0:
                    per_var[var] = None
                    continue
                if acc.percentile is not None and cell is not None:
                    pool = cell.samples.get(var, [])
                    if pool:
                        value, provenance = _nearest_rank(
                            pool, acc.percentile, var in _MIN_VARIABLES
                        )
                        per_var[var] = Bound(value, provenance)
                        continue
                extreme = None if cell is None else cell.extremes.get(var)
                if extreme is not None:
                    per_var[var] = Bound(extreme.value, extreme.provenance)
                elif var in _MIN_VARIABLES or var is VariableId.LAMBDA_MAX:
                    per_var[var] = None  # nothing observed: absent, not zero
                else:
                    per_var[var] = Bound(0.0, None)  # maxima default to 0
            bounds[scenario][group] = per_var

            v_lat = per_var.get(VariableId.V_LAT_MAX)
            a_lat = per_var.get(VariableId.A_LAT_MAX)
            if (
                v_lat is not None
                and a_lat is not None
                and v_lat.value == 0.0
                and a_lat.value > 0.0
            ):
                footnotes.append(
                    f"{scenario.value}/{group.value}: v_lat_max = 0 alongside "
                    f"nonzero alpha_lat_max ({_fmt(a_lat.value)}); values "
                    f"recorded as computed"
                )
    return BoundsReport(n_cases=n_cases, bounds=bounds, footnotes=footnotes)


def _fmt(value: float) -> str:
    return str(float(value))


def render_table(report: BoundsReport, config_dict: Optional[dict] = None) -> str:
    """Human-readable aligned tables, one block per scenario."""
    lines: List[str] = []
    for scenario in Scenario:
        groups = SCENARIO_CLASSES[scenario]
        header = ["Variable", "Units"] + [g.value for g in groups]
        rows = [header]
        n_row = ["N_cases", ""]
        for g in groups:
            n_row.append(str(report.n_cases[scenario][g]))
        rows.append(n_row)
        for var in APPLICABLE[scenario]:
            row = [var.value, UNITS[var]]
            for g in groups:
                if report.n_cases[scenario][g] == 0:
                    row.append("")
                    continue
                bound = report.bounds[scenario][g][var]
                row.append("n/a" if bound is None else _fmt(bound.value))
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines.append(SCENARIO_TITLES[scenario])
        for r in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        lines.append("")
    if report.footnotes:
        lines.append("Notes:")
        for note in report.footnotes:
            lines.append(f"  - {note}")
        lines.append("")
    if config_dict is not None:
        lines.append("Config:")
        for key in sorted(config_dict):
            lines.append(f"  {key} = {config_dict[key]!r}")
        lines.append("")
    return "\n".join(lines)


def render_csv(report: BoundsReport) -> str:
    """One row per scenario/class/variable, plus n_cases rows."""
    lines = [
        "scenario,class,variable,units,value,recording_id,ego_id,subject_id,"
        "frame,frame_start,frame_end,reference_heading"
    ]
    for scenario in Scenario:
        for g in SCENARIO_CLASSES[scenario]:
            lines.append(
                f"{scenario.value},{g.value},n_cases,,"
                f"{report.n_cases[scenario][g]},,,,,,,"
            )
            if report.n_cases[scenario][g] == 0:
                continue
            for var in APPLICABLE[scenario]:
                bound = report.bounds[scenario][g][var]
                if bound is None:
                    lines.append(
                        f"{scenario.value},{g.value},{var.value},{UNITS[var]},n/a,,,,,,,"
                    )
                    continue
                p = bound.provenance
                prov_cells = (
                    f"{p.recording_id},{p.ego_id},{p.subject_id},{p.frame},"
                    f"{p.frame_start},{p.frame_end},{p.reference_heading!r}"
                    if p is not None
                    else ",,,,,,"
                )
                lines.append(
                    f"{scenario.value},{g.value},{var.value},{UNITS[var]},"
                    f"{_fmt(bound.value)},{prov_cells}"
                )
    return "\n".join(lines) + "\n"


def report_to_dict(report: BoundsReport) -> dict:
    """JSON-ready structure; floats survive a round-trip exactly."""
    out: dict = {"scenarios": {}, "footnotes": list(report.footnotes)}
    for scenario in Scenario:
        sc: dict = {}
        for g in SCENARIO_CLASSES[scenario]:
            entry: dict = {"n_cases": report.n_cases[scenario][g], "bounds": {}}
            for var in APPLICABLE[scenario]:
                bound = report.bounds[scenario][g][var]
                if bound is None:
                    entry["bounds"][var.value] = None
                else:
                    entry["bounds"][var.value] = {
                        "value": bound.value,
                        "units": UNITS[var],
                        "provenance": (
                            bound.provenance.as_dict()
                            if bound.provenance is not None
                            else None
                        ),
                    }
            sc[g.value] = entry
        out["scenarios"][scenario.value] = sc
    return out
