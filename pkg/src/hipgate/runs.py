"""Run configuration, pipeline commands and run-directory artifacts.

Every command writes its resolved configuration beside its outputs so
runs are auditable, and keeps wall-clock timestamps in a separate
run_info.json sidecar so repeated runs with the same config and inputs
produce byte-identical outputs.

Exit codes: 0 ok, 2 validation failure, 3 empty result.
"""

from __future__ import annotations

import datetime
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import dataset as ds
from . import svg
from .calibration import Calibrator, fit_calibrator
from .decision_curve import (
    DEFAULT_LAMBDA_GRID,
    DEFAULT_MU_LIST,
    envelope,
    write_decision_curve_csv,
)
from .metrics import (
    CellMetrics,
    coverage_curve,
    cube_metrics,
    snapshots_markdown,
    write_coverage_curve_csv,
    write_heatmap_csv,
    write_metrics_csv,
)
from .policy import (
    DEFAULT_DELTAS,
    DecisionCube,
    Family,
    PolicyGrid,
    Thresholds,
    pair_inputs,
    sweep_grid,
)

__all__ = [
    "RunConfig",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "EXIT_EMPTY",
    "run_calibrate",
    "run_sweep",
    "run_decision_curve",
    "load_calibrators",
    "load_cube",
    "load_pairs_table",
    "load_eval_us",
    "load_metrics",
    "eval_us_sets",
]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EMPTY = 3

ENVELOPE_NOTE = (
    "Envelope is maximized over the policy grid on the same evaluation pairs "
    "it reports on (optimistic); no held-out envelope is computed."
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one pipeline run."""

    records_path: str
    splits_path: str
    out_dir: str
    rho: float = 0.10
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    families: tuple[str, ...] = tuple(f.value for f in Family)
    thresholds: Thresholds = field(default_factory=Thresholds)
    abnormality_rule: ds.AbnormalityRule = field(default_factory=ds.AbnormalityRule)
    mu_list: tuple[float, ...] = DEFAULT_MU_LIST
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    split_calibration: bool = False
    emit_svg: bool = False
    report_dir: str | None = None

    @property
    def reports_to(self) -> Path:
        return Path(self.report_dir) if self.report_dir else Path(self.out_dir)

    def to_dict(self) -> dict[str, Any]:
        return {
            "records_path": self.records_path,
            "splits_path": self.splits_path,
            "out_dir": self.out_dir,
            "rho": self.rho,
            "deltas": list(self.deltas),
            "families": list(self.families),
            "thresholds": self.thresholds.to_dict(),
            "abnormality_rule": self.abnormality_rule.to_dict(),
            "mu_list": list(self.mu_list),
            "lambda_grid": list(self.lambda_grid),
            "split_calibration": self.split_calibration,
            "emit_svg": self.emit_svg,
            "report_dir": self.report_dir,
        }


def _write_json(payload: Any, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_run_info(out_dir: Path, command: str) -> None:
    # The only artifact carrying a timestamp; everything else is
    # byte-reproducible for identical config and inputs.
    path = out_dir / "run_info.json"
    info = {}
    if path.exists():
        info = json.loads(path.read_text(encoding="utf-8"))
    info[command] = {"completed_at": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    _write_json(info, path)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_inputs(config: RunConfig, out_dir: Path) -> tuple[ds.SplitDataset, dict[str, Any]] | int:
    """Load, validate and split the records; returns exit code on failure."""
    try:
        loaded = ds.load_records(config.records_path)
    except ds.ParseError as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    config.reports_to.mkdir(parents=True, exist_ok=True)
    _write_json(loaded.report_dict(), config.reports_to / "load_report.json")
    if not loaded.records:
        return _fail("no valid records loaded", EXIT_VALIDATION)
    if loaded.rejections:
        for rejection in loaded.rejections:
            print(
                f"warning: rejected row {rejection['index']}: {rejection['error']}",
                file=sys.stderr,
            )
    try:
        assignments = ds.load_splits(config.splits_path)
        split_data = ds.assign_splits(loaded.records, assignments)
    except (ds.ParseError, ds.MissingAssignment, ds.DuplicateAssignment) as exc:
        return _fail(str(exc), EXIT_VALIDATION)
    return split_data, loaded.report_dict()


def _labeled_pairs_for_target(
    records: Sequence[ds.StudyRecord], target: str
) -> list[tuple[float, float]]:
    """(pred_raw, label) for US records carrying both, for one target."""
    out = []
    for record in records:
        if record.modality is not ds.Modality.US:
            continue
        if record.predictions is None or record.labels is None:
            continue
        pred = getattr(record.predictions, "alpha" if target == "alpha" else "coverage")
        label = getattr(record.labels, "alpha" if target == "alpha" else "coverage")
        if pred is not None and label is not None:
            out.append((float(pred), float(label)))
    return out


def eval_us_sets(records: Sequence[ds.StudyRecord]) -> dict[str, list[tuple[float, float]]]:
    records = ds.ensure_labels(records)
    return {
        "alpha": _labeled_pairs_for_target(records, "alpha"),
        "coverage": _labeled_pairs_for_target(records, "coverage"),
    }


# --------------------------------------------------------------------------
# calibrate


def run_calibrate(config: RunConfig) -> int:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loaded = _load_inputs(config, out_dir)
    if isinstance(loaded, int):
        return loaded
    split_data, _ = loaded

    cal_records = ds.ensure_labels(split_data.calibration)
    calibrators: dict[str, Any] = {}
    reports: dict[str, Any] = {}
    for target in ("alpha", "coverage"):
        points = _labeled_pairs_for_target(cal_records, target)
        if len(points) < 2:
            return _fail(
                f"calibration split has {len(points)} labeled+predicted US records "
                f"for target {target}; need >= 2",
                EXIT_VALIDATION,
            )
        pred = [p for p, _ in points]
        label = [l for _, l in points]
        calibrator, report = fit_calibrator(
            pred, label, config.rho, target, split_calibration=config.split_calibration
        )
        calibrators[target] = calibrator.to_dict()
        reports[target] = report

    _write_json(calibrators, out_dir / "calibrators.json")
    _write_json(reports, out_dir / "calibration_report.json")
    _write_json(config.to_dict(), out_dir / "config.calibrate.json")
    _write_run_info(out_dir, "calibrate")
    for target, report in reports.items():
        print(
            f"calibrate[{target}]: n_cal={report['n_cal']} a={report['a']:.4f} "
            f"b={report['b']:.4f} k={report['order_statistic_k']} q_plus={report['q_plus']}"
        )
    return EXIT_OK


def load_calibrators(run_dir: str | Path) -> dict[str, Calibrator]:
    payload = json.loads((Path(run_dir) / "calibrators.json").read_text(encoding="utf-8"))
    return {target: Calibrator.from_dict(d) for target, d in payload.items()}


# --------------------------------------------------------------------------
# sweep


def _pairs_table(pairs: Sequence[ds.StrictPair]) -> list[dict[str, Any]]:
    rows = []
    for pair in pairs:
        alpha, cov, o = pair_inputs(pair)
        rows.append(
            {
                "pair_id": pair.pair_id,
                "subject_id": pair.us_record.subject_id,
                "study_date": pair.us_record.study_date.isoformat(),
                "side": pair.us_record.side.value,
                "o": o,
                "z": pair.z,
                "pred_alpha_raw": alpha,
                "pred_cov_raw": cov,
            }
        )
    return rows


def _write_decisions_csv(cube: DecisionCube, path: Path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "family",
                "delta_alpha",
                "delta_cov",
                "pair_id",
                "d",
                "lb_alpha",
                "lb_cov",
                "margin_alpha",
                "margin_cov",
                "missing",
            ]
        )

        def enc(v: float | None) -> str:
            if v is None:
                return ""
            if v == float("inf"):
                return "+inf"
            if v == float("-inf"):
                return "-inf"
            return repr(v)

        for (family, ia, ic), decisions in sorted(cube.cells.items()):
            for pair_id, dec in zip(cube.pair_ids, decisions):
                writer.writerow(
                    [
                        family,
                        repr(cube.deltas[ia]),
                        repr(cube.deltas[ic]),
                        pair_id,
                        dec.d,
                        enc(dec.lb_alpha),
                        enc(dec.lb_cov),
                        enc(dec.margin_alpha),
                        enc(dec.margin_cov),
                        "|".join(dec.missing),
                    ]
                )


def _emit_svgs(metrics_list: Sequence[CellMetrics], cube: DecisionCube, out_dir: Path) -> None:
    deltas = list(cube.deltas)
    for family in cube.families:
        cells = [m for m in metrics_list if m.family == family.value]
        grid_uor = [
            [next(m.us_only_rate for m in cells if m.delta_alpha == da and m.delta_cov == dc) for dc in deltas]
            for da in deltas
        ]
        grid_mr = [
            [next(m.miss_rate for m in cells if m.delta_alpha == da and m.delta_cov == dc) for dc in deltas]
            for da in deltas
        ]
        (out_dir / f"heatmap_usonly_{family.value}.svg").write_text(
            svg.heatmap_svg(grid_uor, deltas, deltas, f"US-only rate ({family.value})"),
            encoding="utf-8",
        )
        (out_dir / f"heatmap_missrate_{family.value}.svg").write_text(
            svg.heatmap_svg(grid_mr, deltas, deltas, f"Miss rate ({family.value})"),
            encoding="utf-8",
        )


def run_sweep(config: RunConfig) -> int:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loaded = _load_inputs(config, out_dir)
    if isinstance(loaded, int):
        return loaded
    split_data, _ = loaded

    try:
        calibrators = load_calibrators(out_dir)
    except FileNotFoundError:
        return _fail(f"{out_dir}/calibrators.json not found; run calibrate first", EXIT_VALIDATION)

    eval_records = ds.ensure_labels(split_data.evaluation)
    pair_result = ds.build_strict_pairs(eval_records, config.abnormality_rule)
    _write_json(pair_result.report_dict(), config.reports_to / "pairing_report.json")
    for warning in pair_result.warnings:
        print(f"warning: {warning}", file=sys.stderr)

    labeled = [p for p in pair_result.pairs if p.z is not None]
    if not labeled:
        return _fail("no strict pairs with XR ground truth", EXIT_EMPTY)

    eval_us = eval_us_sets(split_data.evaluation)
    if not eval_us["alpha"] or not eval_us["coverage"]:
        return _fail("evaluation split has no labeled+predicted US records", EXIT_EMPTY)

    grid = PolicyGrid(deltas=config.deltas, families=tuple(Family(f) for f in config.families))
    cube = sweep_grid(pair_result.pairs, calibrators, grid, config.thresholds, rho=config.rho)

    z_by_pair = {p.pair_id: p.z for p in pair_result.pairs}
    metrics_list = cube_metrics(cube, z_by_pair, eval_us, calibrators)

    median_delta = config.deltas[len(config.deltas) // 2]
    curves = {
        target: coverage_curve(target, config.deltas, median_delta, eval_us[target], calibrators[target])
        for target in ("alpha", "coverage")
    }

    _write_json(cube.to_dict(), out_dir / "cube.json")
    _write_decisions_csv(cube, out_dir / "decisions.csv")
    _write_json(_pairs_table(pair_result.pairs), out_dir / "pairs.json")
    _write_json(
        {t: [[p, l] for p, l in eval_us[t]] for t in eval_us}, out_dir / "eval_us.json"
    )
    _write_json([m.to_dict() for m in metrics_list], out_dir / "metrics.json")
    write_metrics_csv(metrics_list, out_dir / "metrics.csv")
    write_heatmap_csv(metrics_list, out_dir / "heatmap_usonly.csv", "us_only_rate")
    write_heatmap_csv(metrics_list, out_dir / "heatmap_missrate.csv", "miss_rate")
    write_coverage_curve_csv(
        curves, {"alpha": median_delta, "coverage": median_delta}, out_dir / "coverage_curve.csv"
    )
    (out_dir / "snapshots.md").write_text(snapshots_markdown(metrics_list), encoding="utf-8")
    _write_json(config.to_dict(), out_dir / "config.sweep.json")
    if config.emit_svg:
        _emit_svgs(metrics_list, cube, out_dir)
    _write_run_info(out_dir, "sweep")
    print(
        f"sweep: {len(pair_result.pairs)} pairs ({len(labeled)} labeled), "
        f"{len(cube.cells)} cells -> {out_dir}"
    )
    return EXIT_OK


def load_cube(run_dir: str | Path) -> DecisionCube:
    payload = json.loads((Path(run_dir) / "cube.json").read_text(encoding="utf-8"))
    return DecisionCube.from_dict(payload)


def load_pairs_table(run_dir: str | Path) -> list[dict[str, Any]]:
    return json.loads((Path(run_dir) / "pairs.json").read_text(encoding="utf-8"))


def load_eval_us(run_dir: str | Path) -> dict[str, list[tuple[float, float]]]:
    payload = json.loads((Path(run_dir) / "eval_us.json").read_text(encoding="utf-8"))
    return {t: [(float(p), float(l)) for p, l in rows] for t, rows in payload.items()}


def load_metrics(run_dir: str | Path) -> list[dict[str, Any]]:
    return json.loads((Path(run_dir) / "metrics.json").read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# decision curve


def run_decision_curve(config: RunConfig) -> int:
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cube = load_cube(out_dir)
        pairs_table = load_pairs_table(out_dir)
    except FileNotFoundError:
        return _fail(f"{out_dir} has no sweep artifacts; run sweep first", EXIT_EMPTY)
    if not cube.cells:
        return _fail("decision cube is empty", EXIT_EMPTY)

    z_by_pair: Mapping[str, int | None] = {row["pair_id"]: row["z"] for row in pairs_table}
    if not any(z is not None for z in z_by_pair.values()):
        return _fail("no labeled pairs for utilities", EXIT_EMPTY)

    points = envelope(cube, z_by_pair, config.lambda_grid, config.mu_list)
    write_decision_curve_csv(points, out_dir / "decision_curve.csv")
    _write_json(
        {"note": ENVELOPE_NOTE, "mu_list": list(config.mu_list), "lambda_grid": list(config.lambda_grid)},
        out_dir / "decision_curve_meta.json",
    )
    _write_json(config.to_dict(), out_dir / "config.curve.json")
    if config.emit_svg:
        by_mu: dict[float, list] = {}
        for p in points:
            by_mu.setdefault(p.mu, []).append((p.lam, p.utility))
        series = {f"mu={mu}": pts for mu, pts in sorted(by_mu.items())}
        (out_dir / "decision_curve.svg").write_text(
            svg.curve_svg(series, "lambda (radiation cost)", "mean utility", "Decision-curve envelope"),
            encoding="utf-8",
        )
    _write_run_info(out_dir, "decision_curve")
    print(f"decision-curve: {len(points)} envelope points -> {out_dir}/decision_curve.csv")
    return EXIT_OK
