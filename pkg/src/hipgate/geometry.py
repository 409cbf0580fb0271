"""Derive named hip measurements from raw line/point annotations.

Coordinates are image pixels with y increasing downward. Angles are
returned in degrees. Ultrasound annotations yield the Graf alpha/beta
angles and femoral head coverage; radiograph annotations yield the
acetabular index (AI), center-edge (CE) angle and the ordinal IHDI
dislocation grade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

__all__ = [
    "MIN_LINE_LENGTH",
    "MIN_REFERENCE_ANGLE",
    "GeometryError",
    "DegenerateLine",
    "ParallelReferenceLines",
    "InvalidRatio",
    "Side",
    "IhdiGrade",
    "Line2D",
    "UsAnnotation",
    "XrAnnotation",
    "Measurements",
    "acute_angle_between",
    "derive_us",
    "derive_xr",
    "ihdi_grade",
]

Point = tuple[float, float]

# Lines shorter than this (px) are rejected as degenerate.
MIN_LINE_LENGTH = 1e-6
# Reference lines closer than this (degrees) are treated as parallel.
MIN_REFERENCE_ANGLE = 0.1


class GeometryError(ValueError):
    """Base class for annotation geometry failures."""


class DegenerateLine(GeometryError):
    """A line annotation has (near-)zero length."""


class ParallelReferenceLines(GeometryError):
    """Reference lines that must intersect are (near-)parallel."""


class InvalidRatio(GeometryError):
    """Exposed/total femoral-head lengths do not form a valid ratio."""


class Side(Enum):
    LEFT = "L"
    RIGHT = "R"


class IhdiGrade(IntEnum):
    """Ordinal dislocation grade; higher is more severe."""

    I = 1
    II = 2
    III = 3
    IV = 4


@dataclass(frozen=True)
class Line2D:
    """Directed segment between two pixel coordinates."""

    p0: Point
    p1: Point

    def __post_init__(self) -> None:
        if self.length < MIN_LINE_LENGTH:
            raise DegenerateLine(f"line endpoints coincide: {self.p0} -> {self.p1}")

    @property
    def direction(self) -> Point:
        return (self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    @property
    def length(self) -> float:
        dx = self.p1[0] - self.p0[0]
        dy = self.p1[1] - self.p0[1]
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class UsAnnotation:
    """Trainee ultrasound annotation: baseline, alpha/beta lines, head lengths."""

    baseline: Line2D
    alpha_line: Line2D
    beta_line: Line2D
    exposed_len: float
    total_len: float
    ossific_point: Point | None
    side: Side

    def __post_init__(self) -> None:
        if self.total_len <= 0:
            raise InvalidRatio(f"total_len must be positive, got {self.total_len}")
        if self.exposed_len < 0:
            raise InvalidRatio(f"exposed_len must be >= 0, got {self.exposed_len}")
        if self.exposed_len > self.total_len:
            raise InvalidRatio(
                f"exposed_len {self.exposed_len} exceeds total_len {self.total_len}"
            )


@dataclass(frozen=True)
class XrAnnotation:
    """Trainee radiograph annotation: H/P reference lines, 45-degree line,
    H-point, AI line and CE ray."""

    h_line: Line2D
    p_line: Line2D
    diag45_line: Line2D
    h_point: Point
    ai_line: Line2D
    ce_ray: Line2D
    side: Side

    def __post_init__(self) -> None:
        if acute_angle_between(self.h_line, self.p_line) < MIN_REFERENCE_ANGLE:
            raise ParallelReferenceLines("H-line and P-line are parallel")


@dataclass(frozen=True)
class Measurements:
    """Named measurements for one image, from labels or predictions.

    Angles are degrees in [0, 180); coverage is percent in [0, 100].
    `ossific_flag` records whether an ossific-nucleus point was present.
    """

    alpha: float | None = None
    beta: float | None = None
    coverage: float | None = None
    ai: float | None = None
    ce: float | None = None
    ihdi: IhdiGrade | None = None
    ossific_flag: bool = False

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "ai", "ce"):
            value = getattr(self, name)
            if value is not None and not (0.0 <= value < 180.0):
                raise ValueError(f"{name}={value} outside [0, 180)")
        if self.coverage is not None and not (0.0 <= self.coverage <= 100.0):
            raise ValueError(f"coverage={self.coverage} outside [0, 100]")
        if all(
            getattr(self, name) is None
            for name in ("alpha", "beta", "coverage", "ai", "ce", "ihdi")
        ):
            raise ValueError("at least one measurement field must be present")


def _unit(v: Point) -> Point:
    norm = math.hypot(v[0], v[1])
    if norm < MIN_LINE_LENGTH:
        raise DegenerateLine(f"zero-length direction {v}")
    return (v[0] / norm, v[1] / norm)


def acute_angle_between(l1: Line2D, l2: Line2D) -> float:
    """Acute angle between two lines in degrees, in [0, 90].

    Symmetric in its arguments and invariant to endpoint order. Computed
    from atan2(|cross|, |dot|), which stays well-conditioned near 0 and 90
    degrees (an arccos of the normalized dot product does not).
    """
    ux, uy = l1.direction
    vx, vy = l2.direction
    cross = ux * vy - uy * vx
    dot = ux * vx + uy * vy
    return math.degrees(math.atan2(abs(cross), abs(dot)))


def derive_us(ann: UsAnnotation) -> Measurements:
    """Graf alpha/beta against the shared baseline, coverage = exposed/total."""
    return Measurements(
        alpha=acute_angle_between(ann.baseline, ann.alpha_line),
        beta=acute_angle_between(ann.baseline, ann.beta_line),
        coverage=100.0 * ann.exposed_len / ann.total_len,
        ossific_flag=ann.ossific_point is not None,
    )


def derive_xr(ann: XrAnnotation) -> Measurements:
    """AI, CE and IHDI grade from a radiograph annotation.

    CE is measured against the vertical through the CE ray's first
    endpoint; no pelvic-tilt correction is applied. Laterality is handled
    inside the IHDI quadrant classification.
    """
    vertical = Line2D(ann.ce_ray.p0, (ann.ce_ray.p0[0], ann.ce_ray.p0[1] + 100.0))
    return Measurements(
        ai=acute_angle_between(ann.h_line, ann.ai_line),
        ce=acute_angle_between(vertical, ann.ce_ray),
        ihdi=ihdi_grade(ann.h_point, ann.p_line, ann.diag45_line, ann.h_line, ann.side),
    )


def _intersection(l1: Line2D, l2: Line2D) -> Point:
    """Intersection of two infinite lines; raises if (near-)parallel."""
    if acute_angle_between(l1, l2) < MIN_REFERENCE_ANGLE:
        raise ParallelReferenceLines("reference lines do not intersect")
    (x1, y1), (x2, y2) = l1.p0, l1.p1
    (x3, y3), (x4, y4) = l2.p0, l2.p1
    denom = (x1 - x2) * (y3 - y4) - (y1 - y2) * (x3 - x4)
    a = x1 * y2 - y1 * x2
    b = x3 * y4 - y3 * x4
    return (
        (a * (x3 - x4) - (x1 - x2) * b) / denom,
        (a * (y3 - y4) - (y1 - y2) * b) / denom,
    )


def _mirror_point(p: Point, cx: float) -> Point:
    return (2.0 * cx - p[0], p[1])


def _mirror_line(line: Line2D, cx: float) -> Line2D:
    return Line2D(_mirror_point(line.p0, cx), _mirror_point(line.p1, cx))


def _signed_offset(point: Point, origin: Point, normal: Point) -> float:
    return (point[0] - origin[0]) * normal[0] + (point[1] - origin[1]) * normal[1]


def ihdi_grade(
    h_point: Point,
    p_line: Line2D,
    diag45: Line2D,
    h_line: Line2D,
    side: Side,
) -> IhdiGrade:
    """IHDI grade from the quadrant of the H-point.

    Region tests use signed perpendicular distances; a point exactly on a
    boundary takes the lower (less severe) grade. The canonical frame is a
    right hip as displayed (lateral = image-left, superior = image-up);
    left hips are mirrored about the H/P intersection before testing so
    one convention serves both sides.
    """
    origin = _intersection(h_line, p_line)
    if side is Side.LEFT:
        cx = origin[0]
        h_point = _mirror_point(h_point, cx)
        p_line = _mirror_line(p_line, cx)
        diag45 = _mirror_line(diag45, cx)
        h_line = _mirror_line(h_line, cx)

    # Lateral unit vector along the H-line (image-left for a right hip).
    u_lat = _unit(h_line.direction)
    if u_lat[0] > 0 or (u_lat[0] == 0 and u_lat[1] > 0):
        u_lat = (-u_lat[0], -u_lat[1])
    # Superior unit vector: perpendicular to the H-line, pointing image-up.
    u_sup = (-u_lat[1], u_lat[0])
    if u_sup[1] > 0:
        u_sup = (-u_sup[0], -u_sup[1])

    # Perkin's line: positive offset = lateral. The normal always has a
    # component along u_lat because the P-line is non-parallel to the H-line.
    pd = _unit(p_line.direction)
    n_p = (-pd[1], pd[0])
    lat_component = n_p[0] * u_lat[0] + n_p[1] * u_lat[1]
    if lat_component < 0:
        n_p = (-n_p[0], -n_p[1])
    s_p = _signed_offset(h_point, p_line.p0, n_p)

    # Diagonal: positive offset = medial side. The diagonal descends
    # inferolaterally, so the medial side contains medial-inferior points.
    dd = _unit(diag45.direction)
    n_d = (-dd[1], dd[0])
    med_inf = (-u_lat[0] - u_sup[0], -u_lat[1] - u_sup[1])
    med_component = n_d[0] * med_inf[0] + n_d[1] * med_inf[1]
    if abs(med_component) < 1e-9:
        raise ParallelReferenceLines("45-degree line runs superolaterally")
    if med_component < 0:
        n_d = (-n_d[0], -n_d[1])
    s_d = _signed_offset(h_point, diag45.p0, n_d)

    # H-line: positive offset = superior.
    s_h = _signed_offset(h_point, h_line.p0, u_sup)

    if s_p <= 0:
        return IhdiGrade.I
    if s_d >= 0:
        return IhdiGrade.II
    if s_h <= 0:
        return IhdiGrade.III
    return IhdiGrade.IV
