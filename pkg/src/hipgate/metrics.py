"""Safety diagnostics per grid cell and the data behind the figures.

Per cell: US-only rate (UOR), XR use = 1 - UOR, miss rate among US-only
decisions (MR, undefined when there are none), and empirical one-sided
coverage per target on the labeled evaluation US set. Pairs without
radiographic ground truth are excluded from every count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from .calibration import Calibrator, empirical_coverage
from .policy import Decision, DecisionCube, Family

__all__ = [
    "NoLabeledPairs",
    "CellMetrics",
    "cell_metrics",
    "cube_metrics",
    "coverage_curve",
    "write_heatmap_csv",
    "write_coverage_curve_csv",
    "write_metrics_csv",
    "snapshots_markdown",
    "DEFAULT_SNAPSHOT_CELLS",
]


class NoLabeledPairs(ValueError):
    """Every pair in the cell lacks radiographic ground truth."""


@dataclass(frozen=True)
class CellMetrics:
    """Diagnostics for one (family, delta_alpha, delta_cov) cell.

    ``miss_rate`` is None (not 0) when no US-only decisions exist; the
    serialized value is null so conservative cells stay honest.
    """

    family: str
    delta_alpha: float
    delta_cov: float
    n_pairs: int
    n_us_only: int
    n_missed: int
    us_only_rate: float
    xr_use: float
    miss_rate: float | None
    cov_alpha: float
    cov_cov: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "delta_alpha": self.delta_alpha,
            "delta_cov": self.delta_cov,
            "n_pairs": self.n_pairs,
            "n_us_only": self.n_us_only,
            "n_missed": self.n_missed,
            "us_only_rate": self.us_only_rate,
            "xr_use": self.xr_use,
            "miss_rate": self.miss_rate,
            "cov_alpha": self.cov_alpha,
            "cov_cov": self.cov_cov,
        }


def cell_metrics(
    decisions: Sequence[Decision],
    z: Sequence[int | None],
    eval_us: Mapping[str, Sequence[tuple[float, float]]],
    params: Mapping[str, Any],
) -> tuple[int, int, int, float, float, float | None, float, float]:
    """Core per-cell numbers; see CellMetrics for field meanings.

    ``decisions`` and ``z`` are aligned by position (same pair order);
    pairs with z = None are excluded. ``eval_us`` maps target to
    (pred_raw, label) tuples for the whole labeled evaluation US set;
    ``params`` maps target to the cell's LowerBoundParams.
    """
    if len(decisions) != len(z):
        raise ValueError("decisions and z must be aligned")
    labeled = [(dec.d, zj) for dec, zj in zip(decisions, z) if zj is not None]
    if not labeled:
        raise NoLabeledPairs("no pairs with XR ground truth")
    n_pairs = len(labeled)
    n_us_only = sum(d for d, _ in labeled)
    n_missed = sum(d * zj for d, zj in labeled)
    uor = n_us_only / n_pairs
    miss_rate = None if n_us_only == 0 else n_missed / n_us_only
    cov_alpha = empirical_coverage(eval_us["alpha"], params["alpha"])
    cov_cov = empirical_coverage(eval_us["coverage"], params["coverage"])
    return n_pairs, n_us_only, n_missed, uor, 1.0 - uor, miss_rate, cov_alpha, cov_cov


def cube_metrics(
    cube: DecisionCube,
    z_by_pair: Mapping[str, int | None],
    eval_us: Mapping[str, Sequence[tuple[float, float]]],
    calibrators: Mapping[str, Calibrator],
) -> list[CellMetrics]:
    """CellMetrics for every cube cell, in deterministic cell order."""
    z = [z_by_pair.get(pid) for pid in cube.pair_ids]
    out = []
    for family in cube.families:
        for ia, da in enumerate(cube.deltas):
            for ic, dc in enumerate(cube.deltas):
                params = {
                    "alpha": calibrators["alpha"].bound_params(da),
                    "coverage": calibrators["coverage"].bound_params(dc),
                }
                n_pairs, n_us, n_miss, uor, xr_use, mr, cov_a, cov_c = cell_metrics(
                    cube.decisions_at(family, ia, ic), z, eval_us, params
                )
                out.append(
                    CellMetrics(
                        family=family.value,
                        delta_alpha=da,
                        delta_cov=dc,
                        n_pairs=n_pairs,
                        n_us_only=n_us,
                        n_missed=n_miss,
                        us_only_rate=uor,
                        xr_use=xr_use,
                        miss_rate=mr,
                        cov_alpha=cov_a,
                        cov_cov=cov_c,
                    )
                )
    return out


def coverage_curve(
    target: str,
    deltas: Sequence[float],
    fixed_other_delta: float,
    eval_set: Sequence[tuple[float, float]],
    calibrator: Calibrator,
) -> list[tuple[float, float]]:
    """Empirical one-sided coverage for one target across the delta grid.

    Coverage of a target depends only on its own delta; the other
    target's fixed delta is carried along for provenance in the emitted
    CSV. The returned sequence is sorted by delta and non-decreasing
    whenever q_plus >= 0.
    """
    if len(eval_set) == 0:
        raise ValueError("empty evaluation set")
    del fixed_other_delta
    return [
        (d, empirical_coverage(eval_set, calibrator.bound_params(d)))
        for d in sorted(deltas)
    ]


def write_heatmap_csv(
    metrics: Sequence[CellMetrics], path: str | Path, value: str
) -> None:
    """Long-format heatmap rows (family, delta_alpha, delta_cov, value).

    A None value (miss rate with no US-only decisions) is written as an
    empty field, never as 0.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["family", "delta_alpha", "delta_cov", value])
        for m in metrics:
            v = getattr(m, value)
            writer.writerow(
                [m.family, repr(m.delta_alpha), repr(m.delta_cov), "" if v is None else repr(v)]
            )


def write_coverage_curve_csv(
    curves: Mapping[str, Sequence[tuple[float, float]]],
    fixed_other: Mapping[str, float],
    path: str | Path,
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["target", "delta", "coverage", "fixed_other_delta"])
        for target in sorted(curves):
            for d, cov in curves[target]:
                writer.writerow([target, repr(d), repr(cov), repr(fixed_other[target])])


def write_metrics_csv(metrics: Sequence[CellMetrics], path: str | Path) -> None:
    """All cell metrics in one long-format table."""
    columns = [
        "family",
        "delta_alpha",
        "delta_cov",
        "n_pairs",
        "n_us_only",
        "n_missed",
        "us_only_rate",
        "xr_use",
        "miss_rate",
        "cov_alpha",
        "cov_cov",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for m in metrics:
            writer.writerow(
                [
                    m.family,
                    repr(m.delta_alpha),
                    repr(m.delta_cov),
                    m.n_pairs,
                    m.n_us_only,
                    m.n_missed,
                    repr(m.us_only_rate),
                    repr(m.xr_use),
                    "" if m.miss_rate is None else repr(m.miss_rate),
                    repr(m.cov_alpha),
                    repr(m.cov_cov),
                ]
            )


# Snapshot cells shown in snapshots.md: (family, delta_alpha, delta_cov).
DEFAULT_SNAPSHOT_CELLS: tuple[tuple[Family, float, float], ...] = (
    (Family.ALPHA_AND_COV, 0.10, 0.10),
    (Family.ALPHA_AND_COV, 0.20, 0.20),
    (Family.ALPHA_OR_COV, 0.35, 0.35),
    (Family.ALPHA_OR_COV, 0.40, 0.40),
)

_FAMILY_LABEL = {
    Family.ALPHA_ONLY.value: "Alpha",
    Family.ALPHA_OR_COV.value: "OR",
    Family.ALPHA_AND_COV.value: "AND",
}


def snapshots_markdown(
    metrics: Sequence[CellMetrics],
    cells: Sequence[tuple[Family, float, float]] = DEFAULT_SNAPSHOT_CELLS,
) -> str:
    """Markdown table of selected operating points.

    Coverage columns are target-global (rule-independent) empirical
    coverages; they are shown for every row. A missing snapshot cell
    (outside the swept grid) is skipped.
    """
    by_key = {(m.family, m.delta_alpha, m.delta_cov): m for m in metrics}
    lines = [
        "# Policy snapshots (strict eval pairs)",
        "",
        "| Rule | da/dc | US-only | XR use | cov_alpha | cov_cov | miss rate |",
        "|------|-------|---------|--------|-----------|---------|-----------|",
    ]
    for family, da, dc in cells:
        m = by_key.get((family.value, da, dc))
        if m is None:
            continue
        mr = "-" if m.miss_rate is None else f"{m.miss_rate:.2f}"
        lines.append(
            f"| {_FAMILY_LABEL[m.family]} | {da:.2f} / {dc:.2f} "
            f"| {m.us_only_rate:.2f} | {m.xr_use:.2f} "
            f"| {m.cov_alpha:.2f} | {m.cov_cov:.2f} | {mr} |"
        )
    lines.append("")
    lines.append(f"N = {metrics[0].n_pairs} strict pairs with XR ground truth." if metrics else "")
    return "\n".join(lines) + "\n"
