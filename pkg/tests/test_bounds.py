import itertools
import random
from pathlib import Path

import pytest

from foreseen import (
    ClassGroup,
    KinematicSample,
    Scenario,
    ScenarioOccurrence,
    VariableId,
    accumulate_occurrence,
    finalize,
    merge_accumulators,
)
from foreseen.bounds import (
    AccumulationError,
    BoundAccumulator,
    Provenance,
    render_csv,
    render_table,
    report_to_dict,
)

from published_values import published_accumulator

GOLDEN_RENDER = Path(__file__).parent / "golden" / "published_tables.txt"


def sample(frame, v_lon=0.0, v_lat=0.0, a_lon=0.0, a_lat=0.0, beta_lon=0.0,
           beta_lat=0.0, h=0.0, h_rate=0.0, speed=None):
    if speed is None:
        speed = (v_lon**2 + v_lat**2) ** 0.5
    return KinematicSample(
        frame=frame, v_lon=v_lon, v_lat=v_lat, a_lon=a_lon, a_lat=a_lat,
        beta_lon=beta_lon, beta_lat=beta_lat, h=h, h_rate=h_rate, speed=speed,
    )


def occurrence(scenario=Scenario.S2, subject_class=ClassGroup.VEHICLE,
               frame_start=0, frame_end=4, ego=1, subject=2, recording=0):
    return ScenarioOccurrence(
        scenario=scenario,
        recording_id=recording,
        ego_id=ego,
        subject_id=subject,
        frame_start=frame_start,
        frame_end=frame_end,
        subject_class=subject_class,
        reference_heading=0.0,
    )


def braking_samples(frames, betas, v_lon=8.0):
    return [
        sample(f, v_lon=v_lon, a_lon=-b if b else 0.0, beta_lon=b)
        for f, b in zip(frames, betas)
    ]


class TestAccumulateOccurrence:
    def test_published_peak_braking(self):
        acc = BoundAccumulator()
        occ = occurrence()
        samples = braking_samples(range(5), [0.0, 1.2, 2.0145, 0.7, 0.0])
        accumulate_occurrence(acc, occ, samples)
        report = finalize(acc)
        bound = report.bounds[Scenario.S2][ClassGroup.VEHICLE][VariableId.B_LON_MAX]
        assert bound.value == 2.0145
        assert bound.provenance.frame == 2
        assert report.n_cases[Scenario.S2][ClassGroup.VEHICLE] == 1

    def test_all_zero_kinematics(self):
        acc = BoundAccumulator()
        occ = occurrence(scenario=Scenario.S4, subject_class=ClassGroup.PEDESTRIAN)
        samples = [sample(f) for f in range(5)]
        accumulate_occurrence(acc, occ, samples)
        report = finalize(acc)
        cell = report.bounds[Scenario.S4][ClassGroup.PEDESTRIAN]
        assert report.n_cases[Scenario.S4][ClassGroup.PEDESTRIAN] == 1
        assert cell[VariableId.V_LON_MAX].value == 0.0
        assert cell[VariableId.V_LON_MAX].provenance is None
        assert cell[VariableId.B_LON_MIN] is None  # absent, not zero

    def test_two_occurrences_keep_first_peak_provenance(self):
        acc = BoundAccumulator()
        accumulate_occurrence(
            acc, occurrence(frame_start=0, frame_end=2, subject=2),
            braking_samples(range(3), [0.0, 1.2, 0.0]),
        )
        accumulate_occurrence(
            acc, occurrence(frame_start=10, frame_end=12, subject=3),
            braking_samples(range(10, 13), [0.0, 0.8, 0.0]),
        )
        bound = finalize(acc).bounds[Scenario.S2][ClassGroup.VEHICLE][VariableId.B_LON_MAX]
        assert bound.value == 1.2
        assert bound.provenance.subject_id == 2

    def test_equal_peaks_lexicographic_provenance(self):
        for order in ([2, 3], [3, 2]):
            acc = BoundAccumulator()
            for subject in order:
                accumulate_occurrence(
                    acc, occurrence(subject=subject, frame_start=0, frame_end=2),
                    braking_samples(range(3), [0.0, 1.5, 0.0]),
                )
            bound = finalize(acc).bounds[Scenario.S2][ClassGroup.VEHICLE][VariableId.B_LON_MAX]
            assert bound.provenance.subject_id == 2  # lowest wins either way

    def test_sample_interval_mismatch_rejected(self):
        acc = BoundAccumulator()
        with pytest.raises(AccumulationError, match="cover"):
            accumulate_occurrence(
                acc, occurrence(frame_start=0, frame_end=4),
                braking_samples(range(3), [0.0, 1.0, 0.0]),
            )

    def test_alpha_lon_counts_propulsion_not_braking(self):
        acc = BoundAccumulator()
        occ = occurrence(scenario=Scenario.S3, subject_class=ClassGroup.CYCLIST)
        samples = [
            sample(0, v_lon=5.0, a_lon=1.5),            # propulsive
            sample(1, v_lon=5.0, a_lon=-4.0, beta_lon=4.0),  # hard braking
            sample(2, v_lon=5.0, a_lon=0.5),
            sample(3, v_lon=5.0, a_lon=-2.0, beta_lon=2.0),
            sample(4, v_lon=5.0),
        ]
        accumulate_occurrence(acc, occ, samples)
        cell = finalize(acc).bounds[Scenario.S3][ClassGroup.CYCLIST]
        assert cell[VariableId.A_LON_MAX].value == 1.5  # not 4.0
        assert cell[VariableId.B_LON_MIN].value == 2.0

    def test_beta_min_per_occurrence_toggle(self):
        # occurrence A brakes at {0.5, 3.0}, occurrence B at {1.0, 2.0}
        def filled(acc):
            accumulate_occurrence(
                acc, occurrence(frame_start=0, frame_end=1, subject=2),
                braking_samples([0, 1], [0.5, 3.0]),
            )
            accumulate_occurrence(
                acc, occurrence(frame_start=5, frame_end=6, subject=3),
                braking_samples([5, 6], [1.0, 2.0]),
            )
            return acc

        plain = filled(BoundAccumulator())
        # S2 has no beta_lon_min; use S3 occurrences instead
        acc = BoundAccumulator()
        acc2 = BoundAccumulator(beta_min_per_occurrence=True)
        for target in (acc, acc2):
            accumulate_occurrence(
                target,
                occurrence(scenario=Scenario.S3, subject_class=ClassGroup.VEHICLE,
                           frame_start=0, frame_end=1, subject=2),
                braking_samples([0, 1], [0.5, 3.0]),
            )
            accumulate_occurrence(
                target,
                occurrence(scenario=Scenario.S3, subject_class=ClassGroup.VEHICLE,
                           frame_start=5, frame_end=6, subject=3),
                braking_samples([5, 6], [1.0, 2.0]),
            )
        v_global = finalize(acc).bounds[Scenario.S3][ClassGroup.VEHICLE][VariableId.B_LON_MIN]
        v_peroc = finalize(acc2).bounds[Scenario.S3][ClassGroup.VEHICLE][VariableId.B_LON_MIN]
        assert v_global.value == 0.5   # min over every braking sample
        assert v_peroc.value == 2.0    # min over per-occurrence maxima

    def test_not_applicable_variable_rejected(self):
        acc = BoundAccumulator()
        with pytest.raises(AccumulationError, match="not applicable"):
            acc.record_value(Scenario.S2, ClassGroup.VEHICLE, VariableId.H_MAX, 1.0)


def random_accumulator(rng):
    acc = BoundAccumulator()
    scenarios = list(Scenario)
    for _ in range(rng.randrange(1, 6)):
        scenario = rng.choice(scenarios)
        from foreseen.bounds import APPLICABLE, SCENARIO_CLASSES

        group = rng.choice(SCENARIO_CLASSES[scenario])
        acc.add_case(scenario, group)
        for var in APPLICABLE[scenario]:
            if rng.random() < 0.3:
                continue
            value = round(rng.uniform(0.001, 5.0), 4)
            prov = Provenance(
                recording_id=rng.randrange(3),
                ego_id=rng.randrange(5),
                subject_id=rng.randrange(9),
                frame=rng.randrange(200),
            )
            acc.record_value(scenario, group, var, value, prov)
    return acc


def reports_equal(a, b):
    da, db = report_to_dict(a), report_to_dict(b)
    return da == db


class TestMerge:
    def test_identity(self):
        acc = random_accumulator(random.Random(1))
        merged = merge_accumulators(acc, BoundAccumulator())
        assert reports_equal(finalize(acc), finalize(merged))

    def test_max_semantics(self):
        a, b = BoundAccumulator(), BoundAccumulator()
        a.add_case(Scenario.S2, ClassGroup.VEHICLE)
        b.add_case(Scenario.S2, ClassGroup.VEHICLE)
        a.record_value(Scenario.S2, ClassGroup.VEHICLE, VariableId.B_LON_MAX, 1.0,
                       Provenance(0, 1, 2, 3))
        b.record_value(Scenario.S2, ClassGroup.VEHICLE, VariableId.B_LON_MAX, 2.0,
                       Provenance(0, 1, 5, 9))
        merged = merge_accumulators(a, b)
        bound = finalize(merged).bounds[Scenario.S2][ClassGroup.VEHICLE][VariableId.B_LON_MAX]
        assert bound.value == 2.0
        assert finalize(merged).n_cases[Scenario.S2][ClassGroup.VEHICLE] == 2

    def test_commutative_100_trials(self):
        for seed in range(100):
            rng = random.Random(seed)
            a, b = random_accumulator(rng), random_accumulator(rng)
            ab = merge_accumulators(a, b)
            ba = merge_accumulators(b, a)
            assert reports_equal(finalize(ab), finalize(ba))

    def test_associative(self):
        rng = random.Random(7)
        a, b, c = (random_accumulator(rng) for _ in range(3))
        left = merge_accumulators(merge_accumulators(a, b), c)
        right = merge_accumulators(a, merge_accumulators(b, c))
        assert reports_equal(finalize(left), finalize(right))

    def test_sharded_equals_single_pass(self):
        rng = random.Random(13)
        occurrences = []
        for i in range(10):
            frames = [10 * i, 10 * i + 1, 10 * i + 2]
            betas = [round(rng.uniform(0, 3), 3) for _ in frames]
            occurrences.append(
                (
                    occurrence(frame_start=frames[0], frame_end=frames[-1],
                               subject=2 + i),
                    braking_samples(frames, betas),
                )
            )
        single = BoundAccumulator()
        for occ, samples in occurrences:
            accumulate_occurrence(single, occ, samples)
        shards = [BoundAccumulator() for _ in range(3)]
        for i, (occ, samples) in enumerate(occurrences):
            accumulate_occurrence(shards[i % 3], occ, samples)
        merged = BoundAccumulator()
        for shard in (shards[2], shards[0], shards[1]):
            merged = merge_accumulators(merged, shard)
        assert reports_equal(finalize(single), finalize(merged))

    def test_mismatched_settings_rejected(self):
        with pytest.raises(AccumulationError, match="settings"):
            merge_accumulators(BoundAccumulator(), BoundAccumulator(percentile=99.0))


class TestOrderInvariance:
    def test_permutations_identical(self):
        rng = random.Random(23)
        occurrences = []
        for i in range(6):
            frames = [5 * i, 5 * i + 1]
            betas = [rng.choice([0.0, 0.5, 1.5, 1.5]), rng.choice([0.7, 2.5])]
            occurrences.append(
                (occurrence(frame_start=frames[0], frame_end=frames[-1],
                            subject=2 + (i % 3), ego=1 + (i % 2)),
                 braking_samples(frames, betas))
            )
        reference = None
        for perm in itertools.islice(itertools.permutations(occurrences), 24):
            acc = BoundAccumulator()
            for occ, samples in perm:
                accumulate_occurrence(acc, occ, samples)
            snapshot = report_to_dict(finalize(acc))
            if reference is None:
                reference = snapshot
            assert snapshot == reference

    def test_monotone_updates(self):
        acc = BoundAccumulator()
        maxima, minima = [], []
        rng = random.Random(5)
        for i in range(20):
            beta = round(rng.uniform(0.1, 4.0), 3)
            accumulate_occurrence(
                acc,
                occurrence(scenario=Scenario.S3, subject_class=ClassGroup.VEHICLE,
                           frame_start=3 * i, frame_end=3 * i + 1, subject=2 + i),
                braking_samples([3 * i, 3 * i + 1], [beta, 0.0]),
            )
            cell = finalize(acc).bounds[Scenario.S3][ClassGroup.VEHICLE]
            minima.append(cell[VariableId.B_LON_MIN].value)
        assert minima == sorted(minima, reverse=True)  # never increases


class TestFinalizeAndRender:
    def test_empty_accumulator_all_zero(self):
        report = finalize(BoundAccumulator())
        for scenario in Scenario:
            for group, n in report.n_cases[scenario].items():
                assert n == 0
        text = render_table(report)
        assert text.count("N_cases") == 4

    def test_s4_columns_are_vru_only(self):
        report = finalize(BoundAccumulator())
        assert list(report.n_cases[Scenario.S4]) == [
            ClassGroup.PEDESTRIAN,
            ClassGroup.CYCLIST,
        ]
        text = render_table(report)
        s4_block = text.split("S4 - ")[1]
        assert "Motorcyclist" not in s4_block
        assert "Vehicle" not in s4_block

    def test_published_tables_golden_render(self):
        report = finalize(published_accumulator())
        assert render_table(report) == GOLDEN_RENDER.read_text()

    def test_absent_minimum_renders_na(self):
        acc = BoundAccumulator()
        accumulate_occurrence(
            acc,
            occurrence(scenario=Scenario.S3, subject_class=ClassGroup.VEHICLE,
                       frame_start=0, frame_end=1),
            [sample(0, v_lon=5.0, a_lon=1.0), sample(1, v_lon=5.0)],
        )
        text = render_table(finalize(acc))
        s3_block = text.split("S3 - ")[1].split("S4 - ")[0]
        assert "n/a" in s3_block

    def test_csv_row_per_cell(self):
        report = finalize(published_accumulator())
        lines = render_csv(report).strip().splitlines()
        assert lines[0].startswith("scenario,class,variable")
        assert any(line.startswith("S2,Vehicle,beta_lon_max,m/s^2,2.0145") for line in lines)
        # n_cases rows present for every scenario/class combination
        assert sum(",n_cases," in line for line in lines) == 14

    def test_report_dict_round_trips_floats(self):
        import json

        report = finalize(published_accumulator())
        doc = json.loads(json.dumps(report_to_dict(report)))
        value = doc["scenarios"]["S2"]["Vehicle"]["bounds"]["beta_lon_max"]["value"]
        assert value == 2.0145


class TestPercentileMode:
    def test_nearest_rank(self):
        acc = BoundAccumulator(percentile=90.0)
        for i in range(1, 101):
            acc.add_case(Scenario.S2, ClassGroup.VEHICLE, 0)
            acc.record_value(
                Scenario.S2, ClassGroup.VEHICLE, VariableId.B_LON_MAX, float(i),
                Provenance(0, 1, 2, i),
            )
        acc.add_case(Scenario.S2, ClassGroup.VEHICLE, 1)
        bound = finalize(acc).bounds[Scenario.S2][ClassGroup.VEHICLE][VariableId.B_LON_MAX]
        assert bound.value == 90.0
        assert bound.provenance.frame == 90

    def test_minima_use_opposite_tail(self):
        acc = BoundAccumulator(percentile=90.0)
        acc.add_case(Scenario.S3, ClassGroup.VEHICLE, 1)
        for i in range(1, 101):
            acc.record_value(
                Scenario.S3, ClassGroup.VEHICLE, VariableId.B_LON_MIN, float(i),
                Provenance(0, 1, 2, i),
            )
        bound = finalize(acc).bounds[Scenario.S3][ClassGroup.VEHICLE][VariableId.B_LON_MIN]
        assert bound.value == 11.0  # 90th percentile from the small end
