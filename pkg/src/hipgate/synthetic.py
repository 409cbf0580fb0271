"""Seeded synthetic cohorts with known ground truth and noisy predictors.

Cohorts are exchangeable by construction (every hip is an i.i.d. draw),
so conformal coverage claims can be verified empirically. Annotations
are constructed to re-derive the true measurements exactly through the
geometry module, and radiographic ground truth is generated consistent
with the abnormality indicator so policy and utility outputs have known
answers.
"""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .dataset import (
    Modality,
    Split,
    SplitAssignment,
    StudyRecord,
    write_records_json,
    write_splits_csv,
)
from .geometry import (
    IhdiGrade,
    Line2D,
    Measurements,
    Side,
    UsAnnotation,
    XrAnnotation,
)

__all__ = [
    "InvalidSpec",
    "OutOfRange",
    "CohortSpec",
    "Cohort",
    "generate",
    "annotate_from_truth",
    "abnormality_probability",
    "write_cohort",
    "ABNORMALITY_SLOPE",
]


class InvalidSpec(ValueError):
    """The cohort spec violates its own constraints."""


class OutOfRange(ValueError):
    """A measurement cannot be realized as a valid annotation."""


# Logistic slope (per degree) linking low true alpha to XR abnormality:
# P(z=1) = sigmoid(logit(abnormal_fraction) + SLOPE * (60 - alpha_true)).
ABNORMALITY_SLOPE = 0.15

_BASE_DATE = datetime.date(2024, 1, 1)

# Canonical XR construction frame: a right hip as displayed, with the
# H/P intersection at _XR_ORIGIN, lateral = image-left, superior = image-up.
_XR_ORIGIN = (256.0, 256.0)
# (lateral, inferior) H-point offsets in px realizing each IHDI grade;
# negative lateral means medial, negative inferior means superior.
_IHDI_OFFSETS: dict[IhdiGrade, tuple[float, float]] = {
    IhdiGrade.I: (-40.0, 30.0),
    IhdiGrade.II: (20.0, 44.0),
    IhdiGrade.III: (56.0, 14.0),
    IhdiGrade.IV: (56.0, -30.0),
}


@dataclass(frozen=True)
class CohortSpec:
    """Generator settings; identical seed means identical cohort."""

    n_subjects: int = 100
    pair_fraction: float = 0.8
    alpha_dist: tuple[float, float] = (62.0, 8.0)
    cov_dist: tuple[float, float] = (55.0, 12.0)
    pred_noise_alpha: tuple[float, float] = (0.0, 4.0)
    pred_noise_cov: tuple[float, float] = (0.0, 8.0)
    abnormal_fraction: float = 0.25
    seed: int = 0
    split_fractions: tuple[float, float, float] = (0.2, 0.4, 0.4)

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise InvalidSpec("n_subjects must be >= 1")
        if not (0.0 <= self.pair_fraction <= 1.0):
            raise InvalidSpec("pair_fraction must be in [0, 1]")
        if not (0.0 <= self.abnormal_fraction <= 1.0):
            raise InvalidSpec("abnormal_fraction must be in [0, 1]")
        for name in ("alpha_dist", "cov_dist", "pred_noise_alpha", "pred_noise_cov"):
            pair = getattr(self, name)
            if len(pair) != 2 or pair[1] < 0:
                raise InvalidSpec(f"{name} must be (mean_or_bias, sd >= 0)")
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions):
            raise InvalidSpec("split_fractions must be three non-negative values")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise InvalidSpec("split_fractions must sum to 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_subjects": self.n_subjects,
            "pair_fraction": self.pair_fraction,
            "alpha_dist": list(self.alpha_dist),
            "cov_dist": list(self.cov_dist),
            "pred_noise_alpha": list(self.pred_noise_alpha),
            "pred_noise_cov": list(self.pred_noise_cov),
            "abnormal_fraction": self.abnormal_fraction,
            "seed": self.seed,
            "split_fractions": list(self.split_fractions),
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "CohortSpec":
        return CohortSpec(
            n_subjects=int(d["n_subjects"]),
            pair_fraction=float(d["pair_fraction"]),
            alpha_dist=tuple(d["alpha_dist"]),
            cov_dist=tuple(d["cov_dist"]),
            pred_noise_alpha=tuple(d["pred_noise_alpha"]),
            pred_noise_cov=tuple(d["pred_noise_cov"]),
            abnormal_fraction=float(d["abnormal_fraction"]),
            seed=int(d["seed"]),
            split_fractions=tuple(d["split_fractions"]),
        )


@dataclass(frozen=True)
class Cohort:
    records: tuple[StudyRecord, ...]
    splits: tuple[SplitAssignment, ...]
    spec: CohortSpec = field(repr=False, default=CohortSpec())

    @property
    def truth(self) -> dict[str, Measurements]:
        """Ground-truth measurements by record id (labels are the truth)."""
        return {r.record_id: r.labels for r in self.records if r.labels is not None}


def abnormality_probability(alpha_true: float, abnormal_fraction: float) -> float:
    """P(z=1) as a logistic link on how far true alpha sits below 60 degrees."""
    if abnormal_fraction <= 0.0:
        return 0.0
    if abnormal_fraction >= 1.0:
        return 1.0
    logit = math.log(abnormal_fraction / (1.0 - abnormal_fraction))
    return 1.0 / (1.0 + math.exp(-(logit + ABNORMALITY_SLOPE * (60.0 - alpha_true))))


def _mirror_x(p: tuple[float, float], cx: float) -> tuple[float, float]:
    return (2.0 * cx - p[0], p[1])


def _mirror_line(line: Line2D, cx: float) -> Line2D:
    return Line2D(_mirror_x(line.p0, cx), _mirror_x(line.p1, cx))


def _us_annotation(m: Measurements, side: Side) -> UsAnnotation:
    for name in ("alpha", "beta"):
        v = getattr(m, name)
        if v is None or not (0.0 <= v <= 90.0):
            raise OutOfRange(f"{name}={v} not realizable in [0, 90]")
    if m.coverage is None or not (0.0 <= m.coverage <= 100.0):
        raise OutOfRange(f"coverage={m.coverage} not realizable in [0, 100]")

    baseline = Line2D((100.0, 300.0), (300.0, 300.0))

    def angled(origin: tuple[float, float], degrees: float) -> Line2D:
        rad = math.radians(degrees)
        return Line2D(
            origin, (origin[0] + 100.0 * math.cos(rad), origin[1] + 100.0 * math.sin(rad))
        )

    return UsAnnotation(
        baseline=baseline,
        alpha_line=angled((150.0, 250.0), m.alpha),
        beta_line=angled((180.0, 260.0), m.beta),
        exposed_len=2.0 * m.coverage,
        total_len=200.0,
        ossific_point=(200.0, 280.0) if m.ossific_flag else None,
        side=side,
    )


def _xr_annotation(m: Measurements, side: Side) -> XrAnnotation:
    for name in ("ai", "ce"):
        v = getattr(m, name)
        if v is None or not (0.0 <= v <= 90.0):
            raise OutOfRange(f"{name}={v} not realizable in [0, 90]")
    if m.ihdi is None:
        raise OutOfRange("ihdi grade is required for an XR annotation")

    ox, oy = _XR_ORIGIN
    h_line = Line2D((ox - 100.0, oy), (ox + 100.0, oy))
    p_line = Line2D((ox, oy - 100.0), (ox, oy + 100.0))
    diag45 = Line2D((ox, oy), (ox - 100.0, oy + 100.0))

    ai_rad = math.radians(m.ai)
    ai_line = Line2D(
        (ox + 44.0, oy - 56.0),
        (ox + 44.0 + 120.0 * math.cos(ai_rad), oy - 56.0 + 120.0 * math.sin(ai_rad)),
    )
    ce_rad = math.radians(m.ce)
    ce_ray = Line2D(
        (ox - 26.0, oy + 44.0),
        (ox - 26.0 + 120.0 * math.sin(ce_rad), oy + 44.0 - 120.0 * math.cos(ce_rad)),
    )
    lat, inf = _IHDI_OFFSETS[m.ihdi]
    h_point = (ox - lat, oy + inf)

    if side is Side.LEFT:
        return XrAnnotation(
            h_line=_mirror_line(h_line, ox),
            p_line=_mirror_line(p_line, ox),
            diag45_line=_mirror_line(diag45, ox),
            h_point=_mirror_x(h_point, ox),
            ai_line=_mirror_line(ai_line, ox),
            ce_ray=_mirror_line(ce_ray, ox),
            side=side,
        )
    return XrAnnotation(
        h_line=h_line,
        p_line=p_line,
        diag45_line=diag45,
        h_point=h_point,
        ai_line=ai_line,
        ce_ray=ce_ray,
        side=side,
    )


def annotate_from_truth(m: Measurements, side: Side) -> UsAnnotation | XrAnnotation:
    """Construct an annotation whose derived measurements equal m exactly.

    Dispatches on which measurement fields are present: alpha/beta/coverage
    build an ultrasound annotation, ai/ce/ihdi a radiograph annotation.
    """
    has_us = m.alpha is not None or m.beta is not None or m.coverage is not None
    has_xr = m.ai is not None or m.ce is not None or m.ihdi is not None
    if has_us and has_xr:
        raise OutOfRange("measurements mix US and XR fields; annotate one modality at a time")
    if has_us:
        return _us_annotation(m, side)
    if has_xr:
        return _xr_annotation(m, side)
    raise OutOfRange("no measurement fields present")


def generate(spec: CohortSpec) -> Cohort:
    """Generate records, splits and annotations for one cohort.

    Each subject contributes one hip: a US record with ground-truth
    labels, a matching annotation, and noisy predictions
    (truth + bias + truncated Gaussian noise); with probability
    pair_fraction the hip also has an XR record on the same (subject,
    date, side) whose ground truth is drawn consistent with the
    abnormality indicator.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_subjects
    n_post = round(spec.split_fractions[0] * n)
    n_cal = round(spec.split_fractions[1] * n)
    n_eval = n - n_post - n_cal
    if n_eval < 0:
        raise InvalidSpec("split fractions allocate more subjects than exist")

    width = max(4, len(str(n)))
    records: list[StudyRecord] = []
    splits: list[SplitAssignment] = []
    for i in range(n):
        subject_id = f"S{i + 1:0{width}d}"
        if i < n_post:
            split = Split.POST_TRAIN
        elif i < n_post + n_cal:
            split = Split.CALIBRATION
        else:
            split = Split.EVALUATION
        splits.append(SplitAssignment(subject_id=subject_id, split=split))

        side = Side.LEFT if rng.random() < 0.5 else Side.RIGHT
        date = _BASE_DATE + datetime.timedelta(days=int(i % 365))

        alpha_true = float(np.clip(rng.normal(*spec.alpha_dist), 5.0, 88.0))
        beta_true = float(np.clip(rng.normal(55.0, 8.0), 5.0, 88.0))
        cov_true = float(np.clip(rng.normal(*spec.cov_dist), 2.0, 98.0))
        ossific = bool(rng.random() < 0.5)

        us_truth = Measurements(
            alpha=alpha_true, beta=beta_true, coverage=cov_true, ossific_flag=ossific
        )
        alpha_pred = float(
            np.clip(
                alpha_true + spec.pred_noise_alpha[0] + spec.pred_noise_alpha[1] * rng.normal(),
                0.0,
                179.0,
            )
        )
        cov_pred = float(
            np.clip(
                cov_true + spec.pred_noise_cov[0] + spec.pred_noise_cov[1] * rng.normal(),
                0.0,
                100.0,
            )
        )
        records.append(
            StudyRecord(
                record_id=f"{subject_id}-US",
                subject_id=subject_id,
                study_date=date,
                side=side,
                modality=Modality.US,
                annotation=annotate_from_truth(us_truth, side),
                labels=us_truth,
                predictions=Measurements(
                    alpha=alpha_pred, coverage=cov_pred, ossific_flag=ossific
                ),
            )
        )

        has_xr = rng.random() < spec.pair_fraction
        abnormal = rng.random() < abnormality_probability(alpha_true, spec.abnormal_fraction)
        if has_xr:
            if abnormal:
                xr_truth = Measurements(
                    ai=float(rng.uniform(32.0, 44.0)),
                    ce=float(rng.uniform(5.0, 18.0)),
                    ihdi=IhdiGrade(int(rng.integers(2, 5))),
                )
            else:
                xr_truth = Measurements(
                    ai=float(rng.uniform(14.0, 27.0)),
                    ce=float(rng.uniform(24.0, 40.0)),
                    ihdi=IhdiGrade.I,
                )
            records.append(
                StudyRecord(
                    record_id=f"{subject_id}-XR",
                    subject_id=subject_id,
                    study_date=date,
                    side=side,
                    modality=Modality.XR,
                    annotation=annotate_from_truth(xr_truth, side),
                    labels=xr_truth,
                )
            )
    return Cohort(records=tuple(records), splits=tuple(splits), spec=spec)


def write_cohort(cohort: Cohort, outdir: str | Path) -> None:
    """Emit records.json / splits.csv (the dataset module's schemas) plus
    the generating spec. Same seed, same bytes."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_records_json(cohort.records, outdir / "records.json")
    write_splits_csv(cohort.splits, outdir / "splits.csv")
    (outdir / "cohort_spec.json").write_text(
        json.dumps(cohort.spec.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
