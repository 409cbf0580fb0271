import datetime
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipgate.dataset import (
    AbnormalityRule,
    DuplicateAssignment,
    MissingAssignment,
    Modality,
    ParseError,
    Split,
    SplitAssignment,
    StrictPair,
    StudyRecord,
    assign_splits,
    build_strict_pairs,
    ensure_labels,
    label_abnormality,
    load_records,
    load_splits,
    ossific_flag_of,
    record_to_dict,
    write_records_csv,
    write_records_json,
    write_splits_csv,
)
from hipgate.geometry import IhdiGrade, Measurements, Side
from hipgate.synthetic import annotate_from_truth

DATE = datetime.date(2024, 3, 1)


def us_record(record_id="S1-US", subject="S1", side=Side.LEFT, date=DATE,
              alpha=65.0, cov=60.0, pred_alpha=63.0, pred_cov=55.0, ossific=False,
              with_annotation=False):
    labels = Measurements(alpha=alpha, beta=55.0, coverage=cov, ossific_flag=ossific)
    return StudyRecord(
        record_id=record_id,
        subject_id=subject,
        study_date=date,
        side=side,
        modality=Modality.US,
        annotation=annotate_from_truth(labels, side) if with_annotation else None,
        labels=labels,
        predictions=Measurements(alpha=pred_alpha, coverage=pred_cov, ossific_flag=ossific),
    )


def xr_record(record_id="S1-XR", subject="S1", side=Side.LEFT, date=DATE,
              ai=20.0, ce=30.0, ihdi=IhdiGrade.I, labels=True):
    return StudyRecord(
        record_id=record_id,
        subject_id=subject,
        study_date=date,
        side=side,
        modality=Modality.XR,
        labels=Measurements(ai=ai, ce=ce, ihdi=ihdi) if labels else None,
        predictions=None if labels else Measurements(ai=25.0),
    )


# ---------------------------------------------------------------------------
# loading


def test_load_well_formed_json(tmp_path):
    records = [us_record(), xr_record(), us_record(record_id="S2-US", subject="S2")]
    path = tmp_path / "records.json"
    write_records_json(records, path)
    result = load_records(path)
    assert len(result.records) == 3
    assert result.rejections == ()
    assert list(result.records) == records


def test_invalid_row_collected_not_dropped(tmp_path):
    rows = [record_to_dict(us_record()), record_to_dict(us_record(record_id="S2-US", subject="S2"))]
    bad = record_to_dict(us_record(record_id="S3-US", subject="S3", with_annotation=True))
    bad["annotation"]["exposed_len"] = 999.0  # exceeds total_len
    rows.append(bad)
    path = tmp_path / "records.json"
    path.write_text(json.dumps(rows), encoding="utf-8")
    result = load_records(path)
    assert len(result.records) == 2
    assert len(result.rejections) == 1
    assert result.rejections[0]["index"] == 2
    assert "exceeds total_len" in result.rejections[0]["error"]


def test_csv_and_json_encodings_agree(tmp_path):
    records = [
        us_record(with_annotation=True, ossific=True),
        xr_record(),
        us_record(record_id="S2-US", subject="S2", side=Side.RIGHT, alpha=48.5),
    ]
    write_records_json(records, tmp_path / "r.json")
    write_records_csv(records, tmp_path / "r.csv")
    from_json = load_records(tmp_path / "r.json")
    from_csv = load_records(tmp_path / "r.csv")
    assert from_json.rejections == () and from_csv.rejections == ()
    assert list(from_json.records) == list(from_csv.records)


def test_parse_error_on_garbage(tmp_path):
    path = tmp_path / "records.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_records(path)


# ---------------------------------------------------------------------------
# splits


def test_singleton_splits():
    records = [us_record(), us_record(record_id="S2-US", subject="S2"),
               us_record(record_id="S3-US", subject="S3")]
    assignments = [
        SplitAssignment("S1", Split.POST_TRAIN),
        SplitAssignment("S2", Split.CALIBRATION),
        SplitAssignment("S3", Split.EVALUATION),
    ]
    split = assign_splits(records, assignments)
    assert [r.subject_id for r in split.post_train] == ["S1"]
    assert [r.subject_id for r in split.calibration] == ["S2"]
    assert [r.subject_id for r in split.evaluation] == ["S3"]


def test_duplicate_assignment_rejected():
    records = [us_record()]
    assignments = [SplitAssignment("S1", Split.POST_TRAIN), SplitAssignment("S1", Split.EVALUATION)]
    with pytest.raises(DuplicateAssignment):
        assign_splits(records, assignments)


def test_missing_assignment_rejected():
    with pytest.raises(MissingAssignment):
        assign_splits([us_record()], [])


def test_partition_sizes_match_counting_oracle():
    # Mimics the published cohort proportions: 30/7/38 subjects with a few
    # records each; partition sizes must equal per-subject multiplicities.
    counts = {Split.POST_TRAIN: 30, Split.CALIBRATION: 7, Split.EVALUATION: 38}
    records, assignments, expected = [], [], {s: 0 for s in Split}
    idx = 0
    for split, n_subjects in counts.items():
        for _ in range(n_subjects):
            idx += 1
            subject = f"P{idx:03d}"
            assignments.append(SplitAssignment(subject, split))
            n_records = 1 + idx % 3
            expected[split] += n_records
            for k in range(n_records):
                records.append(us_record(record_id=f"{subject}-US{k}", subject=subject))
    random.Random(5).shuffle(records)
    split = assign_splits(records, assignments)
    assert len(split.post_train) == expected[Split.POST_TRAIN]
    assert len(split.calibration) == expected[Split.CALIBRATION]
    assert len(split.evaluation) == expected[Split.EVALUATION]

    # No subject spans two splits.
    subjects = [
        {r.subject_id for r in split.post_train},
        {r.subject_id for r in split.calibration},
        {r.subject_id for r in split.evaluation},
    ]
    assert not (subjects[0] & subjects[1]) and not (subjects[1] & subjects[2])


def test_splits_csv_roundtrip(tmp_path):
    assignments = [SplitAssignment("S1", Split.POST_TRAIN), SplitAssignment("S2", Split.EVALUATION)]
    write_splits_csv(assignments, tmp_path / "splits.csv")
    assert load_splits(tmp_path / "splits.csv") == assignments


# ---------------------------------------------------------------------------
# strict pairing


def test_simple_pair():
    result = build_strict_pairs([us_record(), xr_record()])
    assert len(result.pairs) == 1
    assert result.pairs[0].pair_id == "S1:2024-03-01:L"
    assert result.leftovers == ()


def test_side_mismatch_is_no_pair():
    result = build_strict_pairs([us_record(side=Side.LEFT), xr_record(side=Side.RIGHT)])
    assert result.pairs == ()
    assert set(result.leftovers) == {"S1-US", "S1-XR"}


def test_duplicate_us_uses_smallest_id_and_warns():
    result = build_strict_pairs(
        [us_record(record_id="S1-USb"), us_record(record_id="S1-USa"), xr_record()]
    )
    assert len(result.pairs) == 1
    assert result.pairs[0].us_record.record_id == "S1-USa"
    assert result.leftovers == ("S1-USb",)
    assert len(result.warnings) == 1


def test_pairing_is_order_invariant():
    records = [
        us_record(),
        xr_record(),
        us_record(record_id="S2-US", subject="S2", side=Side.RIGHT),
        xr_record(record_id="S2-XR", subject="S2", side=Side.RIGHT, ai=40.0),
        us_record(record_id="S3-US", subject="S3"),
    ]
    baseline = build_strict_pairs(records)
    for seed in range(5):
        shuffled = records[:]
        random.Random(seed).shuffle(shuffled)
        result = build_strict_pairs(shuffled)
        assert result.pairs == baseline.pairs
        assert [p.z for p in result.pairs] == [p.z for p in baseline.pairs]


def test_labeled_pair_count_bounds():
    records = [
        us_record(),
        xr_record(labels=False),  # XR prediction only: z unknown
        us_record(record_id="S2-US", subject="S2"),
        xr_record(record_id="S2-XR", subject="S2"),
    ]
    result = build_strict_pairs(records)
    labeled = [p for p in result.pairs if p.z is not None]
    assert len(labeled) <= len(result.pairs) <= 2
    assert len(labeled) == 1


# ---------------------------------------------------------------------------
# abnormality labeling


def make_pair(ai=None, ce=None, ihdi=None, with_labels=True):
    xr = StudyRecord(
        record_id="S1-XR",
        subject_id="S1",
        study_date=DATE,
        side=Side.LEFT,
        modality=Modality.XR,
        labels=Measurements(ai=ai, ce=ce, ihdi=ihdi) if with_labels else None,
        predictions=None if with_labels else Measurements(ai=1.0),
    )
    return StrictPair(pair_id="p", us_record=us_record(), xr_record=xr, z=None)


def test_abnormal_ai():
    assert label_abnormality(make_pair(ai=35.0), AbnormalityRule()) == 1


def test_unknown_without_labels():
    assert label_abnormality(make_pair(with_labels=False), AbnormalityRule()) is None


def test_all_benign():
    pair = make_pair(ai=20.0, ce=30.0, ihdi=IhdiGrade.I)
    assert label_abnormality(pair, AbnormalityRule()) == 0


def test_ce_low_is_abnormal():
    assert label_abnormality(make_pair(ce=15.0), AbnormalityRule()) == 1


def test_ihdi_grade_threshold():
    assert label_abnormality(make_pair(ihdi=IhdiGrade.II), AbnormalityRule()) == 1
    rule = AbnormalityRule(ihdi_min_abnormal=IhdiGrade.III)
    assert label_abnormality(make_pair(ihdi=IhdiGrade.II), rule) == 0


@given(
    ai=st.floats(0.0, 60.0),
    threshold_high=st.floats(10.0, 50.0),
    drop=st.floats(0.0, 10.0),
)
@settings(max_examples=100)
def test_abnormality_monotone_in_ai_threshold(ai, threshold_high, drop):
    pair = make_pair(ai=ai)
    high = label_abnormality(pair, AbnormalityRule(ai_threshold=threshold_high))
    low = label_abnormality(pair, AbnormalityRule(ai_threshold=threshold_high - drop))
    if high == 1:
        assert low == 1


def test_invalid_rule_rejected():
    with pytest.raises(ValueError):
        AbnormalityRule(ihdi_min_abnormal=IhdiGrade.I)


# ---------------------------------------------------------------------------
# label derivation and flags


def test_ensure_labels_derives_from_annotation():
    ann = annotate_from_truth(
        Measurements(alpha=61.0, beta=52.0, coverage=58.0, ossific_flag=True), Side.LEFT
    )
    record = StudyRecord(
        record_id="S9-US",
        subject_id="S9",
        study_date=DATE,
        side=Side.LEFT,
        modality=Modality.US,
        annotation=ann,
    )
    (filled,) = ensure_labels([record])
    assert filled.labels.alpha == pytest.approx(61.0, abs=1e-9)
    assert filled.labels.coverage == pytest.approx(58.0, abs=1e-9)
    assert filled.labels.ossific_flag is True


def test_ensure_labels_keeps_explicit_labels():
    record = us_record()
    assert ensure_labels([record])[0] is record


def test_ossific_flag_resolution_order():
    with_ann = us_record(with_annotation=True, ossific=True)
    assert ossific_flag_of(with_ann) == 1
    labels_only = us_record(ossific=True)
    assert ossific_flag_of(labels_only) == 1
    assert ossific_flag_of(us_record(ossific=False)) == 0
