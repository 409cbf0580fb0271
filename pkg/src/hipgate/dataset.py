"""Record ingestion, subject-level splits and strict US-XR pairing.

Owns the on-disk schemas:

records.json
    A JSON array of record objects::

        {
          "record_id": "S0001-US",
          "subject_id": "S0001",
          "study_date": "2024-03-01",        # ISO-8601
          "side": "L" | "R",
          "modality": "US" | "XR",
          "annotation": {...} | null,
          "labels": {...} | null,
          "predictions": {...} | null
        }

    US annotations: ``{"baseline": [[x,y],[x,y]], "alpha_line": ...,
    "beta_line": ..., "exposed_len": f, "total_len": f,
    "ossific_point": [x,y] | null}``. XR annotations: ``{"h_line": ...,
    "p_line": ..., "diag45_line": ..., "h_point": [x,y], "ai_line": ...,
    "ce_ray": ...}``. Measurements: ``{"alpha": f|null, "beta": f|null,
    "coverage": f|null, "ai": f|null, "ce": f|null,
    "ihdi": "I".."IV"|null, "ossific_flag": bool}``.

records.csv
    One row per record with flat measurement columns
    (``label_alpha``, ``pred_coverage``, ...) and the annotation object
    embedded as a JSON string in the ``annotation_json`` column.

splits.csv
    ``subject_id,split`` rows with split in
    {post_train, calibration, evaluation}.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

from .geometry import (
    IhdiGrade,
    Line2D,
    Measurements,
    Side,
    UsAnnotation,
    XrAnnotation,
    derive_us,
    derive_xr,
)

__all__ = [
    "Modality",
    "Split",
    "StudyRecord",
    "SplitAssignment",
    "SplitDataset",
    "AbnormalityRule",
    "StrictPair",
    "ParseError",
    "ValidationError",
    "MissingAssignment",
    "DuplicateAssignment",
    "LoadResult",
    "PairResult",
    "load_records",
    "write_records_json",
    "write_records_csv",
    "write_splits_csv",
    "load_splits",
    "assign_splits",
    "build_strict_pairs",
    "label_abnormality",
    "ensure_labels",
    "ossific_flag_of",
    "record_to_dict",
    "record_from_dict",
    "measurements_to_dict",
    "measurements_from_dict",
]


class Modality(Enum):
    US = "US"
    XR = "XR"


class Split(Enum):
    POST_TRAIN = "post_train"
    CALIBRATION = "calibration"
    EVALUATION = "evaluation"


class ParseError(ValueError):
    """The records or splits file could not be parsed at all."""


class ValidationError(ValueError):
    """A single record violated a type invariant."""


class MissingAssignment(ValueError):
    """A subject in the records has no split assignment."""


class DuplicateAssignment(ValueError):
    """A subject was assigned to more than one split."""


@dataclass(frozen=True)
class StudyRecord:
    """One imaging study for one hip on one date."""

    record_id: str
    subject_id: str
    study_date: datetime.date
    side: Side
    modality: Modality
    annotation: UsAnnotation | XrAnnotation | None = None
    labels: Measurements | None = None
    predictions: Measurements | None = None

    def __post_init__(self) -> None:
        if self.annotation is None and self.labels is None and self.predictions is None:
            raise ValidationError(
                f"{self.record_id}: needs at least one of annotation/labels/predictions"
            )
        if self.annotation is not None:
            expected = UsAnnotation if self.modality is Modality.US else XrAnnotation
            if not isinstance(self.annotation, expected):
                raise ValidationError(
                    f"{self.record_id}: {self.modality.value} record with "
                    f"{type(self.annotation).__name__}"
                )
            if self.annotation.side is not self.side:
                raise ValidationError(
                    f"{self.record_id}: annotation side {self.annotation.side.value} "
                    f"!= record side {self.side.value}"
                )

    @property
    def pair_key(self) -> tuple[str, datetime.date, Side]:
        return (self.subject_id, self.study_date, self.side)


@dataclass(frozen=True)
class SplitAssignment:
    subject_id: str
    split: Split


@dataclass(frozen=True)
class SplitDataset:
    """Records partitioned subject-wise into the three splits."""

    post_train: tuple[StudyRecord, ...]
    calibration: tuple[StudyRecord, ...]
    evaluation: tuple[StudyRecord, ...]


@dataclass(frozen=True)
class AbnormalityRule:
    """Thresholds that turn radiographic ground truth into the z indicator.

    AI is abnormal when high, CE when low, IHDI from grade II upward.
    These are configuration, not constants; every report echoes them.
    """

    ai_threshold: float = 30.0
    ce_threshold: float = 20.0
    ihdi_min_abnormal: IhdiGrade = IhdiGrade.II

    def __post_init__(self) -> None:
        import math

        if not (math.isfinite(self.ai_threshold) and math.isfinite(self.ce_threshold)):
            raise ValueError("abnormality thresholds must be finite")
        if self.ihdi_min_abnormal is IhdiGrade.I:
            raise ValueError("ihdi_min_abnormal must be II, III or IV")

    def to_dict(self) -> dict[str, Any]:
        return {
            "ai_threshold": self.ai_threshold,
            "ce_threshold": self.ce_threshold,
            "ihdi_min_abnormal": self.ihdi_min_abnormal.name,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "AbnormalityRule":
        return AbnormalityRule(
            ai_threshold=float(d["ai_threshold"]),
            ce_threshold=float(d["ce_threshold"]),
            ihdi_min_abnormal=IhdiGrade[d["ihdi_min_abnormal"]],
        )


@dataclass(frozen=True)
class StrictPair:
    """US and XR records matched on (subject, date, side).

    ``z`` is the radiographic abnormality indicator: 1 abnormal,
    0 confirmed normal, None when the XR record carries no AI/CE/IHDI
    ground truth.
    """

    pair_id: str
    us_record: StudyRecord
    xr_record: StudyRecord
    z: int | None

    def __post_init__(self) -> None:
        if self.us_record.pair_key != self.xr_record.pair_key:
            raise ValidationError(f"{self.pair_id}: records disagree on (subject, date, side)")


@dataclass(frozen=True)
class LoadResult:
    records: tuple[StudyRecord, ...]
    rejections: tuple[dict[str, Any], ...]

    def report_dict(self) -> dict[str, Any]:
        return {
            "n_loaded": len(self.records),
            "n_rejected": len(self.rejections),
            "rejections": list(self.rejections),
        }


@dataclass(frozen=True)
class PairResult:
    pairs: tuple[StrictPair, ...]
    leftovers: tuple[str, ...]
    warnings: tuple[str, ...] = field(default=())

    def report_dict(self) -> dict[str, Any]:
        return {
            "n_pairs": len(self.pairs),
            "n_labeled": sum(1 for p in self.pairs if p.z is not None),
            "leftover_record_ids": list(self.leftovers),
            "warnings": list(self.warnings),
        }


# --------------------------------------------------------------------------
# Serialization


def _point_to_list(p: tuple[float, float]) -> list[float]:
    return [float(p[0]), float(p[1])]


def _line_to_list(line: Line2D) -> list[list[float]]:
    return [_point_to_list(line.p0), _point_to_list(line.p1)]


def _line_from_list(v: Sequence[Sequence[float]]) -> Line2D:
    return Line2D((float(v[0][0]), float(v[0][1])), (float(v[1][0]), float(v[1][1])))


def measurements_to_dict(m: Measurements) -> dict[str, Any]:
    return {
        "alpha": m.alpha,
        "beta": m.beta,
        "coverage": m.coverage,
        "ai": m.ai,
        "ce": m.ce,
        "ihdi": m.ihdi.name if m.ihdi is not None else None,
        "ossific_flag": m.ossific_flag,
    }


def measurements_from_dict(d: dict[str, Any]) -> Measurements:
    def num(key: str) -> float | None:
        v = d.get(key)
        return None if v is None else float(v)

    ihdi = d.get("ihdi")
    return Measurements(
        alpha=num("alpha"),
        beta=num("beta"),
        coverage=num("coverage"),
        ai=num("ai"),
        ce=num("ce"),
        ihdi=IhdiGrade[ihdi] if ihdi is not None else None,
        ossific_flag=bool(d.get("ossific_flag", False)),
    )


def _annotation_to_dict(ann: UsAnnotation | XrAnnotation) -> dict[str, Any]:
    if isinstance(ann, UsAnnotation):
        return {
            "baseline": _line_to_list(ann.baseline),
            "alpha_line": _line_to_list(ann.alpha_line),
            "beta_line": _line_to_list(ann.beta_line),
            "exposed_len": float(ann.exposed_len),
            "total_len": float(ann.total_len),
            "ossific_point": None
            if ann.ossific_point is None
            else _point_to_list(ann.ossific_point),
        }
    return {
        "h_line": _line_to_list(ann.h_line),
        "p_line": _line_to_list(ann.p_line),
        "diag45_line": _line_to_list(ann.diag45_line),
        "h_point": _point_to_list(ann.h_point),
        "ai_line": _line_to_list(ann.ai_line),
        "ce_ray": _line_to_list(ann.ce_ray),
    }


def _annotation_from_dict(
    d: dict[str, Any], modality: Modality, side: Side
) -> UsAnnotation | XrAnnotation:
    if modality is Modality.US:
        ossific = d.get("ossific_point")
        return UsAnnotation(
            baseline=_line_from_list(d["baseline"]),
            alpha_line=_line_from_list(d["alpha_line"]),
            beta_line=_line_from_list(d["beta_line"]),
            exposed_len=float(d["exposed_len"]),
            total_len=float(d["total_len"]),
            ossific_point=None if ossific is None else (float(ossific[0]), float(ossific[1])),
            side=side,
        )
    return XrAnnotation(
        h_line=_line_from_list(d["h_line"]),
        p_line=_line_from_list(d["p_line"]),
        diag45_line=_line_from_list(d["diag45_line"]),
        h_point=(float(d["h_point"][0]), float(d["h_point"][1])),
        ai_line=_line_from_list(d["ai_line"]),
        ce_ray=_line_from_list(d["ce_ray"]),
        side=side,
    )


def record_to_dict(record: StudyRecord) -> dict[str, Any]:
    return {
        "record_id": record.record_id,
        "subject_id": record.subject_id,
        "study_date": record.study_date.isoformat(),
        "side": record.side.value,
        "modality": record.modality.value,
        "annotation": None
        if record.annotation is None
        else _annotation_to_dict(record.annotation),
        "labels": None if record.labels is None else measurements_to_dict(record.labels),
        "predictions": None
        if record.predictions is None
        else measurements_to_dict(record.predictions),
    }


def record_from_dict(d: dict[str, Any]) -> StudyRecord:
    modality = Modality(d["modality"])
    side = Side(d["side"])
    annotation = d.get("annotation")
    labels = d.get("labels")
    predictions = d.get("predictions")
    return StudyRecord(
        record_id=str(d["record_id"]),
        subject_id=str(d["subject_id"]),
        study_date=datetime.date.fromisoformat(d["study_date"]),
        side=side,
        modality=modality,
        annotation=None
        if annotation is None
        else _annotation_from_dict(annotation, modality, side),
        labels=None if labels is None else measurements_from_dict(labels),
        predictions=None if predictions is None else measurements_from_dict(predictions),
    )


_MEASUREMENT_KEYS = ("alpha", "beta", "coverage", "ai", "ce", "ihdi", "ossific_flag")
_CSV_COLUMNS = (
    ["record_id", "subject_id", "study_date", "side", "modality"]
    + [f"label_{k}" for k in _MEASUREMENT_KEYS]
    + [f"pred_{k}" for k in _MEASUREMENT_KEYS]
    + ["annotation_json"]
)


def _record_to_csv_row(record: StudyRecord) -> dict[str, str]:
    row = {
        "record_id": record.record_id,
        "subject_id": record.subject_id,
        "study_date": record.study_date.isoformat(),
        "side": record.side.value,
        "modality": record.modality.value,
        "annotation_json": ""
        if record.annotation is None
        else json.dumps(_annotation_to_dict(record.annotation), sort_keys=True),
    }
    for prefix, meas in (("label", record.labels), ("pred", record.predictions)):
        d = measurements_to_dict(meas) if meas is not None else {}
        for key in _MEASUREMENT_KEYS:
            value = d.get(key)
            if value is None:
                text = ""
            elif key == "ossific_flag":
                text = "1" if value else "0"
            else:
                text = str(value)
            row[f"{prefix}_{key}"] = text
    return row


def _measurements_dict_from_csv_row(row: dict[str, str], prefix: str) -> dict[str, Any] | None:
    values: dict[str, Any] = {}
    any_present = False
    for key in _MEASUREMENT_KEYS:
        text = (row.get(f"{prefix}_{key}") or "").strip()
        if not text:
            continue
        any_present = True
        if key == "ihdi":
            values[key] = text
        elif key == "ossific_flag":
            values[key] = text not in ("0", "false", "False")
        else:
            values[key] = float(text)
    return values if any_present else None


def _record_from_csv_row(row: dict[str, str]) -> StudyRecord:
    annotation_json = (row.get("annotation_json") or "").strip()
    return record_from_dict(
        {
            "record_id": row["record_id"],
            "subject_id": row["subject_id"],
            "study_date": row["study_date"],
            "side": row["side"],
            "modality": row["modality"],
            "annotation": json.loads(annotation_json) if annotation_json else None,
            "labels": _measurements_dict_from_csv_row(row, "label"),
            "predictions": _measurements_dict_from_csv_row(row, "pred"),
        }
    )


def load_records(path: str | Path, schema: str | None = None) -> LoadResult:
    """Load study records from a JSON or CSV file.

    Invalid rows are collected into the rejection report with their index
    and error message, never silently dropped. Raises ParseError when the
    file itself cannot be read.
    """
    path = Path(path)
    if schema is None:
        schema = "csv" if path.suffix.lower() == ".csv" else "json"
    if schema not in ("json", "csv"):
        raise ParseError(f"unknown schema {schema!r}")

    rows: list[Any]
    try:
        if schema == "json":
            with open(path, encoding="utf-8") as fh:
                rows = json.load(fh)
            if not isinstance(rows, list):
                raise ParseError(f"{path}: expected a JSON array of records")
        else:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
    except (OSError, json.JSONDecodeError, csv.Error) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    records: list[StudyRecord] = []
    rejections: list[dict[str, Any]] = []
    for index, row in enumerate(rows):
        try:
            if schema == "json":
                record = record_from_dict(row)
            else:
                record = _record_from_csv_row(row)
            records.append(record)
        except (ValueError, KeyError, TypeError) as exc:
            record_id = row.get("record_id") if isinstance(row, dict) else None
            rejections.append(
                {"index": index, "record_id": record_id, "error": str(exc)}
            )
    return LoadResult(records=tuple(records), rejections=tuple(rejections))


def write_records_json(records: Iterable[StudyRecord], path: str | Path) -> None:
    payload = [record_to_dict(r) for r in records]
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_records_csv(records: Iterable[StudyRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow(_record_to_csv_row(record))


def write_splits_csv(assignments: Iterable[SplitAssignment], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["subject_id", "split"])
        for a in assignments:
            writer.writerow([a.subject_id, a.split.value])


def load_splits(path: str | Path) -> list[SplitAssignment]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, csv.Error) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    assignments = []
    for row in rows:
        try:
            assignments.append(
                SplitAssignment(subject_id=row["subject_id"], split=Split(row["split"]))
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}: bad split row {row!r}: {exc}") from exc
    return assignments


# --------------------------------------------------------------------------
# Splits and pairing


def assign_splits(
    records: Sequence[StudyRecord], assignments: Sequence[SplitAssignment]
) -> SplitDataset:
    """Partition records subject-wise into post-train/calibration/evaluation.

    Every subject must appear in exactly one assignment; a subject never
    spans two splits.
    """
    by_subject: dict[str, Split] = {}
    for a in assignments:
        if a.subject_id in by_subject and by_subject[a.subject_id] != a.split:
            raise DuplicateAssignment(f"subject {a.subject_id} assigned to two splits")
        if a.subject_id in by_subject:
            raise DuplicateAssignment(f"subject {a.subject_id} assigned twice")
        by_subject[a.subject_id] = a.split

    buckets: dict[Split, list[StudyRecord]] = {s: [] for s in Split}
    for record in records:
        split = by_subject.get(record.subject_id)
        if split is None:
            raise MissingAssignment(f"subject {record.subject_id} has no split assignment")
        buckets[split].append(record)
    return SplitDataset(
        post_train=tuple(buckets[Split.POST_TRAIN]),
        calibration=tuple(buckets[Split.CALIBRATION]),
        evaluation=tuple(buckets[Split.EVALUATION]),
    )


def label_abnormality(pair: StrictPair, rule: AbnormalityRule) -> int | None:
    """z = 1 if any available XR measurement is abnormal under the rule,
    0 if at least one is available and none is abnormal, None otherwise."""
    labels = pair.xr_record.labels
    if labels is None:
        return None
    available = [v for v in (labels.ai, labels.ce, labels.ihdi) if v is not None]
    if not available:
        return None
    if labels.ai is not None and labels.ai >= rule.ai_threshold:
        return 1
    if labels.ce is not None and labels.ce <= rule.ce_threshold:
        return 1
    if labels.ihdi is not None and labels.ihdi >= rule.ihdi_min_abnormal:
        return 1
    return 0


def build_strict_pairs(
    eval_records: Sequence[StudyRecord],
    rule: AbnormalityRule | None = None,
) -> PairResult:
    """Build one strict pair per (subject, date, side) key with >=1 US and
    >=1 XR record.

    When a key has multiple records on one side, the lexicographically
    smallest record_id is used and a multiplicity warning is emitted.
    Unpairable records are listed in the leftover report. The result is a
    function of the key set only: input order never matters.
    """
    rule = rule or AbnormalityRule()
    groups: dict[tuple[str, datetime.date, Side], dict[Modality, list[StudyRecord]]] = {}
    for record in eval_records:
        groups.setdefault(record.pair_key, {m: [] for m in Modality})[
            record.modality
        ].append(record)

    pairs: list[StrictPair] = []
    leftovers: list[str] = []
    warnings: list[str] = []
    for key in sorted(groups, key=lambda k: (k[0], k[1].isoformat(), k[2].value)):
        us_candidates = sorted(groups[key][Modality.US], key=lambda r: r.record_id)
        xr_candidates = sorted(groups[key][Modality.XR], key=lambda r: r.record_id)
        if not us_candidates or not xr_candidates:
            leftovers.extend(r.record_id for r in us_candidates + xr_candidates)
            continue
        if len(us_candidates) > 1 or len(xr_candidates) > 1:
            warnings.append(
                f"key {key[0]}/{key[1].isoformat()}/{key[2].value}: "
                f"{len(us_candidates)} US x {len(xr_candidates)} XR records; "
                "pairing smallest record ids"
            )
            leftovers.extend(r.record_id for r in us_candidates[1:] + xr_candidates[1:])
        us, xr = us_candidates[0], xr_candidates[0]
        pair = StrictPair(
            pair_id=f"{key[0]}:{key[1].isoformat()}:{key[2].value}",
            us_record=us,
            xr_record=xr,
            z=None,
        )
        pairs.append(replace(pair, z=label_abnormality(pair, rule)))
    return PairResult(pairs=tuple(pairs), leftovers=tuple(leftovers), warnings=tuple(warnings))


def ensure_labels(records: Sequence[StudyRecord]) -> list[StudyRecord]:
    """Fill missing labels by deriving them from annotations.

    Explicit labels win over derived ones. Records without labels or
    annotation pass through unchanged.
    """
    out = []
    for record in records:
        if record.labels is None and record.annotation is not None:
            derived = (
                derive_us(record.annotation)
                if record.modality is Modality.US
                else derive_xr(record.annotation)
            )
            record = replace(record, labels=derived)
        out.append(record)
    return out


def ossific_flag_of(record: StudyRecord) -> int:
    """Ossific-nucleus flag for a US record.

    The flag is an annotation fact; it falls back to labels, then
    predictions, then 0.
    """
    if isinstance(record.annotation, UsAnnotation):
        return 1 if record.annotation.ossific_point is not None else 0
    if record.labels is not None:
        return 1 if record.labels.ossific_flag else 0
    if record.predictions is not None:
        return 1 if record.predictions.ossific_flag else 0
    return 0
