"""Read-only HTTP API over a completed run directory.

Serves precomputed grids and on-demand what-if evaluations to the UI.
Run artifacts are loaded once and never mutated; concurrent requests see
the same immutable state. What-if probes on stored grid cells reuse the
stored lower bounds; off-grid inflation values are recomputed from the
serialized calibrators.

    GET  /run/meta
    GET  /grid?family=...&mu=...&lambda=...
    GET  /curve?mu=...
    POST /whatif   {family, delta_alpha, delta_cov, lambda, mu}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware

from .calibration import Calibrator
from .decision_curve import UtilityParams, baselines, envelope, mean_utility
from .metrics import cell_metrics
from .policy import Decision, DecisionCube, Family, PolicySpec, decide
from .runs import (
    ENVELOPE_NOTE,
    load_calibrators,
    load_cube,
    load_eval_us,
    load_metrics,
    load_pairs_table,
)

__all__ = ["create_app"]

_GRID_TOL = 1e-12


@dataclass(frozen=True)
class RunState:
    config: dict[str, Any]
    calibrators: dict[str, Calibrator]
    cube: DecisionCube
    pairs: list[dict[str, Any]]
    eval_us: dict[str, list[tuple[float, float]]]
    metrics: list[dict[str, Any]]

    @property
    def z_by_pair(self) -> dict[str, int | None]:
        return {row["pair_id"]: row["z"] for row in self.pairs}


def _load_state(run_dir: str | Path) -> RunState:
    run_dir = Path(run_dir)
    config_path = run_dir / "config.sweep.json"
    if not config_path.exists():
        raise FileNotFoundError(f"{run_dir} is not a completed run (missing config.sweep.json)")
    return RunState(
        config=json.loads(config_path.read_text(encoding="utf-8")),
        calibrators=load_calibrators(run_dir),
        cube=load_cube(run_dir),
        pairs=load_pairs_table(run_dir),
        eval_us=load_eval_us(run_dir),
        metrics=load_metrics(run_dir),
    )


def _parse_family(value: str) -> Family:
    try:
        return Family(value)
    except ValueError:
        raise HTTPException(
            status_code=400,
            detail=f"unknown family {value!r}; expected one of {[f.value for f in Family]}",
        )


def _grid_index(deltas: tuple[float, ...], value: float) -> int | None:
    for i, d in enumerate(deltas):
        if abs(d - value) < _GRID_TOL:
            return i
    return None


def _cell_utility(cell: dict[str, Any], lam: float, mu: float) -> float:
    n = cell["n_pairs"]
    return -(lam * (n - cell["n_us_only"]) + mu * cell["n_missed"]) / n


def _histogram(values: list[float], bins: int = 10) -> dict[str, Any]:
    finite = sorted(v for v in values if math.isfinite(v))
    n_nonfinite = len(values) - len(finite)
    if not finite:
        return {"edges": [], "counts": [], "n_nonfinite": n_nonfinite}
    lo, hi = finite[0], finite[-1]
    if hi == lo:
        hi = lo + 1.0
    edges = [lo + (hi - lo) * i / bins for i in range(bins + 1)]
    counts = [0] * bins
    for v in finite:
        idx = min(int((v - lo) / (hi - lo) * bins), bins - 1)
        counts[idx] += 1
    return {"edges": edges, "counts": counts, "n_nonfinite": n_nonfinite}


def _decisions_for(
    state: RunState, family: Family, delta_alpha: float, delta_cov: float
) -> tuple[tuple[Decision, ...], str]:
    """Stored decisions when the deltas sit on the grid, else recomputed."""
    cube = state.cube
    ia = _grid_index(cube.deltas, delta_alpha)
    ic = _grid_index(cube.deltas, delta_cov)
    if ia is not None and ic is not None and (family.value, ia, ic) in cube.cells:
        return cube.decisions_at(family, ia, ic), "grid"
    spec = PolicySpec(
        family=family,
        thresholds=cube.thresholds,
        delta_alpha=delta_alpha,
        delta_cov=delta_cov,
        rho=cube.rho,
    )
    decisions = tuple(
        decide((row["pred_alpha_raw"], row["pred_cov_raw"]), row["o"], state.calibrators, spec)
        for row in state.pairs
    )
    return decisions, "calibrators"


def _evaluate_cell(
    state: RunState,
    family: Family,
    delta_alpha: float,
    delta_cov: float,
    lam: float,
    mu: float,
) -> dict[str, Any]:
    decisions, source = _decisions_for(state, family, delta_alpha, delta_cov)
    z = [row["z"] for row in state.pairs]
    params = {
        "alpha": state.calibrators["alpha"].bound_params(delta_alpha),
        "coverage": state.calibrators["coverage"].bound_params(delta_cov),
    }
    n_pairs, n_us, n_missed, uor, xr_use, mr, cov_a, cov_c = cell_metrics(
        decisions, z, state.eval_us, params
    )
    utility_params = UtilityParams(lam=lam, mu=mu)
    labeled = [(dec.d, zj) for dec, zj in zip(decisions, z) if zj is not None]
    utility = mean_utility([d for d, _ in labeled], [zj for _, zj in labeled], utility_params)
    base_all, base_none = baselines([zj for _, zj in labeled], utility_params)
    return {
        "family": family.value,
        "delta_alpha": delta_alpha,
        "delta_cov": delta_cov,
        "lambda": lam,
        "mu": mu,
        "source": source,
        "metrics": {
            "n_pairs": n_pairs,
            "n_us_only": n_us,
            "n_missed": n_missed,
            "us_only_rate": uor,
            "xr_use": xr_use,
            "miss_rate": mr,
            "cov_alpha": cov_a,
            "cov_cov": cov_c,
        },
        "utility": utility,
        "baseline_all": base_all,
        "baseline_none": base_none,
        "margins": {
            "alpha": _histogram([d.margin_alpha for d in decisions if d.margin_alpha is not None]),
            "coverage": _histogram([d.margin_cov for d in decisions if d.margin_cov is not None]),
        },
    }


def create_app(run_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    state = _load_state(run_dir)
    app = FastAPI(title="hipgate run API", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/run/meta")
    def run_meta() -> dict[str, Any]:
        labeled = sum(1 for row in state.pairs if row["z"] is not None)
        return {
            "rho": state.cube.rho,
            "deltas": list(state.cube.deltas),
            "families": [f.value for f in state.cube.families],
            "thresholds": state.cube.thresholds.to_dict(),
            "abnormality_rule": state.config.get("abnormality_rule"),
            "n_pairs": len(state.pairs),
            "n_labeled_pairs": labeled,
            "mu_list": state.config.get("mu_list"),
            "lambda_grid": state.config.get("lambda_grid"),
            "calibrators": {t: c.to_dict() for t, c in state.calibrators.items()},
            "envelope_note": ENVELOPE_NOTE,
        }

    @app.get("/grid")
    def grid(
        family: str | None = Query(default=None),
        mu: float | None = Query(default=None),
        lam: float | None = Query(default=None, alias="lambda"),
    ) -> dict[str, Any]:
        if family is None:
            raise HTTPException(status_code=400, detail="family query parameter is required")
        fam = _parse_family(family)
        cells = []
        for cell in state.metrics:
            if cell["family"] != fam.value:
                continue
            row = dict(cell)
            if mu is not None and lam is not None:
                row["utility"] = _cell_utility(cell, lam, mu)
            cells.append(row)
        return {"family": fam.value, "deltas": list(state.cube.deltas), "cells": cells}

    @app.get("/curve")
    def curve(mu: float | None = Query(default=None)) -> dict[str, Any]:
        if mu is None:
            raise HTTPException(status_code=400, detail="mu query parameter is required")
        lambda_grid = tuple(state.config.get("lambda_grid") or ())
        if not lambda_grid:
            raise HTTPException(status_code=400, detail="run config has no lambda grid")
        points = envelope(state.cube, state.z_by_pair, lambda_grid, (mu,))
        return {
            "mu": mu,
            "note": ENVELOPE_NOTE,
            "points": [p.to_dict() for p in points],
        }

    @app.post("/whatif")
    async def whatif(request: Request) -> dict[str, Any]:
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        required = ("family", "delta_alpha", "delta_cov", "lambda", "mu")
        missing = [k for k in required if k not in body]
        if missing:
            raise HTTPException(status_code=400, detail=f"missing fields: {missing}")
        fam = _parse_family(str(body["family"]))
        try:
            delta_alpha = float(body["delta_alpha"])
            delta_cov = float(body["delta_cov"])
            lam = float(body["lambda"])
            mu = float(body["mu"])
        except (TypeError, ValueError):
            raise HTTPException(status_code=400, detail="numeric fields must be numbers")
        for name, value in (("delta_alpha", delta_alpha), ("delta_cov", delta_cov)):
            if not math.isfinite(value) or value < 0:
                raise HTTPException(
                    status_code=422, detail=f"{name}={value} is outside the valid delta range"
                )
        if not (math.isfinite(lam) and math.isfinite(mu)) or lam < 0 or mu < 0:
            raise HTTPException(status_code=400, detail="lambda and mu must be finite and >= 0")
        return _evaluate_cell(state, fam, delta_alpha, delta_cov, lam, mu)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
