"""Deferral rule families and the (delta_alpha, delta_cov) policy grid.

A decision d = 1 means "US-only" (skip the radiograph); d = 0 means
"defer to XR". Certification compares calibrated lower bounds against
clinical thresholds with >= (a boundary case certifies). A missing
required prediction can never certify: its branch evaluates to False and
the decision is flagged, which keeps the rule nesting
AND <= alpha-only <= OR intact while failing safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

from .calibration import Calibrator, lower_bound
from .dataset import Modality, StrictPair, ossific_flag_of

__all__ = [
    "Family",
    "Thresholds",
    "PolicySpec",
    "Decision",
    "PolicyGrid",
    "DecisionCube",
    "DEFAULT_DELTAS",
    "decide",
    "sweep_grid",
    "pair_inputs",
]

DEFAULT_DELTAS: tuple[float, ...] = (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)


class Family(Enum):
    """Rule families; declaration order is the canonical tie-break order."""

    ALPHA_ONLY = "alpha_only"
    ALPHA_OR_COV = "alpha_or_cov"
    ALPHA_AND_COV = "alpha_and_cov"

    @property
    def uses_coverage(self) -> bool:
        return self is not Family.ALPHA_ONLY


FAMILY_ORDER: dict[str, int] = {f.value: i for i, f in enumerate(Family)}


@dataclass(frozen=True)
class Thresholds:
    """Clinical normality thresholds indexed by the ossific flag o.

    The defaults keep both entries equal; the two-entry table exists so
    ossification-aware tuning does not change the machinery.
    """

    t_alpha: tuple[float, float] = (60.0, 60.0)
    t_cov: tuple[float, float] = (50.0, 50.0)

    def __post_init__(self) -> None:
        for pair in (self.t_alpha, self.t_cov):
            if len(pair) != 2 or not all(math.isfinite(v) for v in pair):
                raise ValueError(f"thresholds must be two finite values, got {pair}")

    def alpha_for(self, o: int) -> float:
        return self.t_alpha[1 if o else 0]

    def cov_for(self, o: int) -> float:
        return self.t_cov[1 if o else 0]

    def to_dict(self) -> dict[str, Any]:
        return {"t_alpha": list(self.t_alpha), "t_cov": list(self.t_cov)}

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Thresholds":
        return Thresholds(
            t_alpha=(float(d["t_alpha"][0]), float(d["t_alpha"][1])),
            t_cov=(float(d["t_cov"][0]), float(d["t_cov"][1])),
        )


@dataclass(frozen=True)
class PolicySpec:
    """One fully specified policy: family, thresholds, inflations, rho.

    delta_cov is recorded but unused for the alpha-only family.
    """

    family: Family
    thresholds: Thresholds
    delta_alpha: float
    delta_cov: float
    rho: float

    def __post_init__(self) -> None:
        if self.delta_alpha < 0 or self.delta_cov < 0:
            raise ValueError("inflation factors must be >= 0")
        if not (0.0 < self.rho < 1.0):
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")


@dataclass(frozen=True)
class Decision:
    """Per-pair outcome with the bounds and margins that produced it.

    ``missing`` lists targets whose prediction was absent; those branches
    evaluated to False (fail-safe) and the decision is auditable from the
    stored fields: d recomputes exactly from margins and missing.
    """

    d: int
    lb_alpha: float | None
    lb_cov: float | None
    margin_alpha: float | None
    margin_cov: float | None
    missing: tuple[str, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        def enc(v: float | None) -> Any:
            if v is None:
                return None
            if math.isinf(v):
                return "-inf" if v < 0 else "+inf"
            return v

        return {
            "d": self.d,
            "lb_alpha": enc(self.lb_alpha),
            "lb_cov": enc(self.lb_cov),
            "margin_alpha": enc(self.margin_alpha),
            "margin_cov": enc(self.margin_cov),
            "missing": list(self.missing),
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "Decision":
        def dec(v: Any) -> float | None:
            if v is None:
                return None
            if v == "-inf":
                return -math.inf
            if v == "+inf":
                return math.inf
            return float(v)

        return Decision(
            d=int(d["d"]),
            lb_alpha=dec(d["lb_alpha"]),
            lb_cov=dec(d["lb_cov"]),
            margin_alpha=dec(d["margin_alpha"]),
            margin_cov=dec(d["margin_cov"]),
            missing=tuple(d.get("missing", ())),
        )


@dataclass(frozen=True)
class PolicyGrid:
    """Inflation grid swept per rule family."""

    deltas: tuple[float, ...] = DEFAULT_DELTAS
    families: tuple[Family, ...] = tuple(Family)

    def __post_init__(self) -> None:
        if not self.deltas:
            raise ValueError("delta grid must not be empty")
        if any(d < 0 for d in self.deltas):
            raise ValueError("deltas must be >= 0")
        if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ValueError("deltas must be strictly increasing")


def pair_inputs(pair: StrictPair) -> tuple[float | None, float | None, int]:
    """(raw alpha prediction, raw coverage prediction, ossific flag) of a pair."""
    if pair.us_record.modality is not Modality.US:
        raise ValueError(f"{pair.pair_id}: us_record is not a US record")
    preds = pair.us_record.predictions
    alpha = preds.alpha if preds is not None else None
    cov = preds.coverage if preds is not None else None
    return alpha, cov, ossific_flag_of(pair.us_record)


def decide(
    us_pred_raw: tuple[float | None, float | None],
    o: int,
    calibrators: Mapping[str, Calibrator],
    spec: PolicySpec,
) -> Decision:
    """Evaluate one policy on one pair's raw US predictions.

    Lower bounds use the fitted calibrators with the spec's per-target
    inflations. Comparisons use >=, so a bound exactly on the threshold
    certifies.
    """
    pred_alpha, pred_cov = us_pred_raw
    t_alpha = spec.thresholds.alpha_for(o)
    t_cov = spec.thresholds.cov_for(o)

    missing: list[str] = []
    lb_alpha = margin_alpha = None
    if pred_alpha is None:
        missing.append("alpha")
        alpha_ok = False
    else:
        lb_alpha = lower_bound(pred_alpha, calibrators["alpha"].bound_params(spec.delta_alpha))
        margin_alpha = lb_alpha - t_alpha
        alpha_ok = lb_alpha >= t_alpha

    lb_cov = margin_cov = None
    if pred_cov is not None:
        lb_cov = lower_bound(pred_cov, calibrators["coverage"].bound_params(spec.delta_cov))
        margin_cov = lb_cov - t_cov
    if spec.family.uses_coverage and pred_cov is None:
        missing.append("coverage")
    cov_ok = lb_cov is not None and lb_cov >= t_cov

    if spec.family is Family.ALPHA_ONLY:
        d = int(alpha_ok)
    elif spec.family is Family.ALPHA_OR_COV:
        d = int(alpha_ok or cov_ok)
    else:
        d = int(alpha_ok and cov_ok)
    return Decision(
        d=d,
        lb_alpha=lb_alpha,
        lb_cov=lb_cov,
        margin_alpha=margin_alpha,
        margin_cov=margin_cov,
        missing=tuple(missing),
    )


@dataclass(frozen=True)
class DecisionCube:
    """Decisions for every (family, delta_alpha, delta_cov) cell.

    Cells are keyed by (family value, delta_alpha index, delta_cov index).
    Alpha-only decisions do not depend on delta_cov; the same decision
    vector is broadcast across that axis so the cube stays rectangular.
    """

    families: tuple[Family, ...]
    deltas: tuple[float, ...]
    pair_ids: tuple[str, ...]
    rho: float
    thresholds: Thresholds
    cells: dict[tuple[str, int, int], tuple[Decision, ...]]

    def decisions_at(self, family: Family, ia: int, ic: int) -> tuple[Decision, ...]:
        return self.cells[(family.value, ia, ic)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "families": [f.value for f in self.families],
            "deltas": list(self.deltas),
            "pair_ids": list(self.pair_ids),
            "rho": self.rho,
            "thresholds": self.thresholds.to_dict(),
            "cells": [
                {
                    "family": family,
                    "delta_alpha": self.deltas[ia],
                    "delta_cov": self.deltas[ic],
                    "decisions": [d.to_dict() for d in decisions],
                }
                for (family, ia, ic), decisions in sorted(self.cells.items())
            ],
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "DecisionCube":
        deltas = tuple(float(v) for v in d["deltas"])
        index = {v: i for i, v in enumerate(deltas)}
        cells = {}
        for cell in d["cells"]:
            key = (cell["family"], index[float(cell["delta_alpha"])], index[float(cell["delta_cov"])])
            cells[key] = tuple(Decision.from_dict(x) for x in cell["decisions"])
        return DecisionCube(
            families=tuple(Family(v) for v in d["families"]),
            deltas=deltas,
            pair_ids=tuple(d["pair_ids"]),
            rho=float(d["rho"]),
            thresholds=Thresholds.from_dict(d["thresholds"]),
            cells=cells,
        )


def sweep_grid(
    pairs: Sequence[StrictPair],
    calibrators: Mapping[str, Calibrator],
    grid: PolicyGrid,
    thresholds: Thresholds,
    rho: float | None = None,
) -> DecisionCube:
    """Evaluate every grid cell over all pairs.

    Cells are independent pure computations; output assembly is
    deterministic and order-independent.
    """
    if not pairs:
        raise ValueError("no pairs to sweep")
    if rho is None:
        rho = calibrators["alpha"].radius.rho
    inputs = [pair_inputs(p) for p in pairs]
    cells: dict[tuple[str, int, int], tuple[Decision, ...]] = {}
    for family in grid.families:
        for ia, da in enumerate(grid.deltas):
            if family is Family.ALPHA_ONLY:
                # One evaluation per delta_alpha, broadcast across delta_cov.
                spec = PolicySpec(family, thresholds, da, grid.deltas[0], rho)
                row = tuple(decide((a, c), o, calibrators, spec) for a, c, o in inputs)
                for ic in range(len(grid.deltas)):
                    cells[(family.value, ia, ic)] = row
            else:
                for ic, dc in enumerate(grid.deltas):
                    spec = PolicySpec(family, thresholds, da, dc, rho)
                    cells[(family.value, ia, ic)] = tuple(
                        decide((a, c), o, calibrators, spec) for a, c, o in inputs
                    )
    return DecisionCube(
        families=tuple(grid.families),
        deltas=tuple(grid.deltas),
        pair_ids=tuple(p.pair_id for p in pairs),
        rho=rho,
        thresholds=thresholds,
        cells=cells,
    )
