"""Per-pair utilities and decision-curve envelopes over (lambda, mu).

The per-pair utility charges lambda for each acquired radiograph and mu
for each XR-abnormal case the policy kept US-only:

    u = -lambda * (1 - d) - mu * z * d

For each (lambda, mu) the envelope takes the best mean utility over all
grid cells plus the acquire-all and acquire-none baselines. The envelope
is maximized on the same evaluation pairs it reports on; run metadata
carries that caveat.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .metrics import NoLabeledPairs
from .policy import FAMILY_ORDER, DecisionCube

__all__ = [
    "UnknownAbnormality",
    "UtilityParams",
    "EnvelopePoint",
    "DEFAULT_LAMBDA_GRID",
    "DEFAULT_MU_LIST",
    "pair_utility",
    "mean_utility",
    "baselines",
    "envelope",
    "write_decision_curve_csv",
]

DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(round(i / 20, 2) for i in range(21))
DEFAULT_MU_LIST: tuple[float, ...] = (0.0, 0.5)

# Baselines rank after policy cells when utility and xr_use tie exactly.
_BASELINE_ORDER = {"acquire_all": len(FAMILY_ORDER), "acquire_none": len(FAMILY_ORDER) + 1}


class UnknownAbnormality(ValueError):
    """A pair without XR ground truth reached the utility computation."""


@dataclass(frozen=True)
class UtilityParams:
    """Radiation cost and miss penalty; both non-negative and finite."""

    lam: float
    mu: float

    def __post_init__(self) -> None:
        import math

        if not (math.isfinite(self.lam) and math.isfinite(self.mu)):
            raise ValueError("lambda and mu must be finite")
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lambda and mu must be >= 0")


@dataclass(frozen=True)
class EnvelopePoint:
    """Best cell (or baseline) at one (lambda, mu)."""

    lam: float
    mu: float
    best_family: str
    best_delta_alpha: float | None
    best_delta_cov: float | None
    utility: float
    baseline_all: float
    baseline_none: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambda": self.lam,
            "mu": self.mu,
            "best_family": self.best_family,
            "best_delta_alpha": self.best_delta_alpha,
            "best_delta_cov": self.best_delta_cov,
            "utility": self.utility,
            "baseline_all": self.baseline_all,
            "baseline_none": self.baseline_none,
        }


def pair_utility(d: int, z: int, params: UtilityParams) -> float:
    """u = -lambda*(1-d) - mu*z*d for one pair."""
    if z is None:
        raise UnknownAbnormality("z is unknown; unlabeled pairs are excluded upstream")
    return -params.lam * (1 - d) - params.mu * z * d


def mean_utility(ds: Sequence[int], zs: Sequence[int], params: UtilityParams) -> float:
    if not ds:
        raise NoLabeledPairs("no labeled pairs")
    return sum(pair_utility(d, z, params) for d, z in zip(ds, zs)) / len(ds)


def baselines(zs: Sequence[int], params: UtilityParams) -> tuple[float, float]:
    """(acquire-all, acquire-none) mean utilities: -lambda and -mu*mean(z)."""
    if not zs:
        raise NoLabeledPairs("no labeled pairs")
    return -params.lam, -params.mu * (sum(zs) / len(zs))


def envelope(
    cube: DecisionCube,
    z_by_pair: Mapping[str, int | None],
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    mu_list: Sequence[float] = DEFAULT_MU_LIST,
) -> list[EnvelopePoint]:
    """Maximize mean utility over all cells and both baselines per (lambda, mu).

    Ties break toward higher xr_use (safer), then canonical family order,
    then lexicographic (delta_alpha, delta_cov); baselines rank after
    policy cells on exact ties.
    """
    if not lambda_grid or not mu_list:
        raise ValueError("lambda and mu grids must be nonempty")
    z = [z_by_pair.get(pid) for pid in cube.pair_ids]
    keep = [i for i, zj in enumerate(z) if zj is not None]
    if not keep:
        raise NoLabeledPairs("no labeled pairs in cube")
    zs = [z[i] for i in keep]
    n = len(keep)

    # Per-cell labeled decision vectors; utilities are evaluated with the
    # canonical per-pair formula so results match any same-order oracle
    # bit for bit.
    cells = []
    for (family, ia, ic), decisions in sorted(cube.cells.items()):
        ds = [decisions[i].d for i in keep]
        xr_use = 1.0 - sum(ds) / n
        cells.append(
            (family, cube.deltas[ia], cube.deltas[ic], ds, xr_use, FAMILY_ORDER[family])
        )

    points = []
    for mu in mu_list:
        for lam in lambda_grid:
            params = UtilityParams(lam=lam, mu=mu)
            base_all, base_none = baselines(zs, params)
            candidates: list[tuple[float, float, int, float, float, str, float | None, float | None]] = [
                # (utility, xr_use, order, da, dc, family, best_da, best_dc)
                (base_all, 1.0, _BASELINE_ORDER["acquire_all"], 0.0, 0.0, "acquire_all", None, None),
                (base_none, 0.0, _BASELINE_ORDER["acquire_none"], 0.0, 0.0, "acquire_none", None, None),
            ]
            for family, da, dc, ds, xr_use, order in cells:
                utility = mean_utility(ds, zs, params)
                candidates.append((utility, xr_use, order, da, dc, family, da, dc))
            best = max(candidates, key=lambda c: (c[0], c[1], -c[2], -c[3], -c[4]))
            points.append(
                EnvelopePoint(
                    lam=lam,
                    mu=mu,
                    best_family=best[5],
                    best_delta_alpha=best[6],
                    best_delta_cov=best[7],
                    utility=best[0],
                    baseline_all=base_all,
                    baseline_none=base_none,
                )
            )
    return points


def write_decision_curve_csv(points: Sequence[EnvelopePoint], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "mu",
                "lambda",
                "utility",
                "best_family",
                "best_da",
                "best_dc",
                "baseline_all",
                "baseline_none",
            ]
        )
        for p in points:
            writer.writerow(
                [
                    repr(p.mu),
                    repr(p.lam),
                    repr(p.utility),
                    p.best_family,
                    "" if p.best_delta_alpha is None else repr(p.best_delta_alpha),
                    "" if p.best_delta_cov is None else repr(p.best_delta_cov),
                    repr(p.baseline_all),
                    repr(p.baseline_none),
                ]
            )
