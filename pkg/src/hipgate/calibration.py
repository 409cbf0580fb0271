"""Affine bias correction and one-sided conformal lower bounds.

For each target t in {alpha, coverage}, calibration is two steps on the
calibration set: (i) fit an exact least-absolute-deviations affine
correction y~ = a*y^ + b, then (ii) take the split-conformal order
statistic of the negated residuals -(y - y~) as the one-sided radius
q_plus. The certified lower bound for a fresh prediction is

    LB = a*y^ + b - (1 + delta) * q_plus

which, under exchangeability and delta = 0, lies below the true value
with probability >= 1 - rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Literal, Sequence

import numpy as np

__all__ = [
    "Target",
    "TARGETS",
    "InsufficientData",
    "EmptyResiduals",
    "EmptyEvalSet",
    "AffineCorrection",
    "ConformalRadius",
    "LowerBoundParams",
    "Calibrator",
    "fit_affine_lad",
    "lad_objective",
    "quantile_index",
    "conformal_radius",
    "lower_bound",
    "empirical_coverage",
    "fit_calibrator",
]

Target = Literal["alpha", "coverage"]
TARGETS: tuple[Target, ...] = ("alpha", "coverage")

# Predictor spread below this triggers the slope-free fallback.
DEGENERATE_SPREAD = 1e-9


class InsufficientData(ValueError):
    """Fewer than two calibration points."""


class EmptyResiduals(ValueError):
    """No residuals to take a quantile of."""


class EmptyEvalSet(ValueError):
    """No evaluation points to compute coverage on."""


@dataclass(frozen=True)
class AffineCorrection:
    """Per-target affine bias correction y~ = a*y^ + b.

    ``fallback`` flags the degenerate-predictor mode where the slope is
    pinned to 1 and b is the median shift.
    """

    target: Target
    a: float
    b: float
    n_fit: int
    fallback: bool = False

    def apply(self, pred_raw: float) -> float:
        return self.a * pred_raw + self.b


@dataclass(frozen=True)
class ConformalRadius:
    """One-sided conformal radius q_plus at miscoverage rho.

    q_plus may be negative (quantile semantics are preserved, no clamping)
    and is +inf when the order-statistic index exceeds n_cal, in which
    case bounds are -inf and never certify.
    """

    target: Target
    rho: float
    q_plus: float
    n_cal: int


@dataclass(frozen=True)
class LowerBoundParams:
    """Everything needed to turn a raw prediction into a certified bound."""

    correction: AffineCorrection
    radius: ConformalRadius
    delta: float

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class Calibrator:
    """Fitted correction plus radius for one target."""

    correction: AffineCorrection
    radius: ConformalRadius

    @property
    def target(self) -> Target:
        return self.correction.target

    def bound_params(self, delta: float) -> LowerBoundParams:
        return LowerBoundParams(correction=self.correction, radius=self.radius, delta=delta)

    def to_dict(self) -> dict[str, Any]:
        q = self.radius.q_plus
        return {
            "target": self.target,
            "a": self.correction.a,
            "b": self.correction.b,
            "rho": self.radius.rho,
            "q_plus": "+inf" if math.isinf(q) else q,
            "n_cal": self.radius.n_cal,
            "fallback_flag": self.correction.fallback,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Calibrator":
        q_raw = d["q_plus"]
        q_plus = math.inf if q_raw == "+inf" else float(q_raw)
        target = d["target"]
        return Calibrator(
            correction=AffineCorrection(
                target=target,
                a=float(d["a"]),
                b=float(d["b"]),
                n_fit=int(d.get("n_fit", d["n_cal"])),
                fallback=bool(d["fallback_flag"]),
            ),
            radius=ConformalRadius(
                target=target,
                rho=float(d["rho"]),
                q_plus=q_plus,
                n_cal=int(d["n_cal"]),
            ),
        )


def lad_objective(a: float, b: float, pred: np.ndarray, label: np.ndarray) -> float:
    """Sum of absolute residuals of the affine fit a*pred + b against label."""
    return float(np.sum(np.abs(a * np.asarray(pred, float) + b - np.asarray(label, float))))


def fit_affine_lad(
    pred: Sequence[float], label: Sequence[float], target: Target = "alpha"
) -> AffineCorrection:
    """Exact minimizer of sum |a*pred_i + b - label_i|.

    A 1-D affine LAD optimum passes through at least two data points, so
    the exact solution is found by enumerating all two-point candidate
    lines (O(n^2) candidates, each scored in O(n)); calibration sets are
    tiny, so exactness is cheap. Ties are broken toward the smallest
    (a, b) in lexicographic order.

    A predictor whose spread is below tolerance cannot identify a slope;
    the fit then falls back to a = 1, b = median(label - pred) and is
    flagged rather than raising.
    """
    x = np.asarray(pred, dtype=float)
    y = np.asarray(label, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pred and label must be 1-D sequences of equal length")
    n = x.size
    if n < 2:
        raise InsufficientData(f"need at least 2 points, got {n}")

    if float(x.max() - x.min()) < DEGENERATE_SPREAD:
        b = float(np.median(y - x))
        return AffineCorrection(target=target, a=1.0, b=b, n_fit=n, fallback=True)

    ii, jj = np.triu_indices(n, k=1)
    dx = x[jj] - x[ii]
    keep = dx != 0.0
    ii, jj, dx = ii[keep], jj[keep], dx[keep]
    slopes = (y[jj] - y[ii]) / dx
    intercepts = y[ii] - slopes * x[ii]
    objectives = np.abs(slopes[:, None] * x[None, :] + intercepts[:, None] - y[None, :]).sum(
        axis=1
    )

    best = objectives.min()
    tied = np.flatnonzero(objectives == best)
    order = np.lexsort((intercepts[tied], slopes[tied]))
    pick = tied[order[0]]
    return AffineCorrection(
        target=target, a=float(slopes[pick]), b=float(intercepts[pick]), n_fit=n
    )


def quantile_index(n_cal: int, rho: float) -> int:
    """Split-conformal order-statistic index k = ceil((n+1)(1-rho)).

    The small epsilon guards against float products landing a hair above
    an integer and pushing the ceiling one rank too high.
    """
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must be in (0, 1), got {rho}")
    return int(math.ceil((n_cal + 1) * (1.0 - rho) - 1e-12))


def conformal_radius(
    residuals: Sequence[float], rho: float, target: Target = "alpha"
) -> ConformalRadius:
    """k-th smallest of the negated residuals, k = ceil((n+1)(1-rho)).

    Residuals are r_i = y_i - y~_i. When k exceeds n_cal the radius is the
    +inf sentinel: the bound is -inf and the system fails safe by never
    certifying. Recomputing on the same residuals is bit-identical.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise EmptyResiduals("no residuals")
    k = quantile_index(r.size, rho)
    if k > r.size:
        q_plus = math.inf
    else:
        q_plus = float(np.sort(-r)[k - 1])
    return ConformalRadius(target=target, rho=rho, q_plus=q_plus, n_cal=int(r.size))


def lower_bound(pred_raw: float, params: LowerBoundParams) -> float:
    """LB = a*pred_raw + b - (1 + delta) * q_plus; -inf when q_plus is +inf."""
    corrected = params.correction.apply(pred_raw)
    return corrected - (1.0 + params.delta) * params.radius.q_plus


def empirical_coverage(
    eval_set: Sequence[tuple[float, float]], params: LowerBoundParams
) -> float:
    """Fraction of (pred_raw, label) pairs with label >= lower bound."""
    if len(eval_set) == 0:
        raise EmptyEvalSet("empty evaluation set")
    hits = sum(1 for pred_raw, label in eval_set if label >= lower_bound(pred_raw, params))
    return hits / len(eval_set)


def fit_calibrator(
    pred: Sequence[float],
    label: Sequence[float],
    rho: float,
    target: Target,
    split_calibration: bool = False,
) -> tuple[Calibrator, dict[str, Any]]:
    """Fit correction and radius for one target; returns stats for the report.

    By default the affine correction and the residual quantile use the
    same calibration set. With ``split_calibration`` the set is halved:
    the first half (input order) fits the correction, the second half
    supplies the quantile residuals, restoring strict exchangeability at
    the cost of resolution.
    """
    x = np.asarray(pred, dtype=float)
    y = np.asarray(label, dtype=float)
    if x.size != y.size:
        raise ValueError("pred and label must have equal length")
    if x.size < 2:
        raise InsufficientData(f"need at least 2 calibration points, got {x.size}")

    if split_calibration:
        half = x.size // 2
        if half < 2 or x.size - half < 1:
            raise InsufficientData("too few points to split the calibration set")
        fit_x, fit_y = x[:half], y[:half]
        quant_x, quant_y = x[half:], y[half:]
    else:
        fit_x, fit_y = x, y
        quant_x, quant_y = x, y

    correction = fit_affine_lad(fit_x, fit_y, target=target)
    residuals = quant_y - (correction.a * quant_x + correction.b)
    radius = conformal_radius(residuals, rho, target=target)

    mae_before = float(np.mean(np.abs(x - y)))
    mae_after = float(np.mean(np.abs(correction.a * x + correction.b - y)))
    report = {
        "target": target,
        "n_cal": int(x.size),
        "n_fit": correction.n_fit,
        "n_quantile": int(quant_x.size),
        "split_calibration": split_calibration,
        "a": correction.a,
        "b": correction.b,
        "fallback_flag": correction.fallback,
        "rho": rho,
        "order_statistic_k": quantile_index(quant_x.size, rho),
        "q_plus": "+inf" if math.isinf(radius.q_plus) else radius.q_plus,
        "mae_before": mae_before,
        "mae_after": mae_after,
    }
    return Calibrator(correction=correction, radius=radius), report
