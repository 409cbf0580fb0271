"""Command-line entry points for the full pipeline.

    hipgate generate       synthesize a cohort (records.json + splits.csv)
    hipgate calibrate      fit per-target affine corrections + conformal radii
    hipgate sweep          evaluate the policy grid on strict pairs
    hipgate decision-curve compute utility envelopes over (lambda, mu)
    hipgate serve          read-only HTTP API over a completed run directory

Exit codes: 0 ok, 2 validation failure, 3 empty result.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .dataset import AbnormalityRule
from .decision_curve import DEFAULT_LAMBDA_GRID, DEFAULT_MU_LIST
from .geometry import IhdiGrade
from .policy import DEFAULT_DELTAS, Thresholds
from .runs import EXIT_VALIDATION, RunConfig, run_calibrate, run_decision_curve, run_sweep
from .synthetic import CohortSpec, generate, write_cohort

__all__ = ["main"]


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_thresholds(text: str) -> Thresholds:
    """"t_alpha,t_cov" or "t_alpha0,t_alpha1,t_cov0,t_cov1" (o-indexed)."""
    values = _parse_floats(text)
    if len(values) == 2:
        return Thresholds(t_alpha=(values[0], values[0]), t_cov=(values[1], values[1]))
    if len(values) == 4:
        return Thresholds(t_alpha=(values[0], values[1]), t_cov=(values[2], values[3]))
    raise argparse.ArgumentTypeError("--thresholds takes 2 or 4 comma-separated values")


def _parse_abnormality(text: str) -> AbnormalityRule:
    """"ai_threshold,ce_threshold,min_ihdi" e.g. "30,20,II"."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--abnormality-rule takes ai,ce,ihdi (e.g. 30,20,II)")
    return AbnormalityRule(
        ai_threshold=float(parts[0]),
        ce_threshold=float(parts[1]),
        ihdi_min_abnormal=IhdiGrade[parts[2]],
    )


def _parse_lambda_grid(text: str) -> tuple[float, ...]:
    """Either a point count N (linspace over [0, 1]) or explicit values."""
    if "," not in text:
        n = int(text)
        if n < 2:
            raise argparse.ArgumentTypeError("lambda grid needs >= 2 points")
        return tuple(i / (n - 1) for i in range(n))
    return _parse_floats(text)


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--records", required=True, help="records.json or records.csv")
    parser.add_argument("--splits", required=True, help="splits.csv (subject_id,split)")
    parser.add_argument("--out", required=True, help="run directory for artifacts")
    parser.add_argument("--rho", type=float, default=0.10, help="miscoverage level (default 0.10)")
    parser.add_argument(
        "--delta-grid",
        type=_parse_floats,
        default=DEFAULT_DELTAS,
        help="comma list of inflation factors (default 0.10..0.40)",
    )
    parser.add_argument(
        "--thresholds",
        type=_parse_thresholds,
        default=Thresholds(),
        help='clinical thresholds "t_alpha,t_cov" or o-indexed 4-tuple (default 60,50)',
    )
    parser.add_argument(
        "--abnormality-rule",
        type=_parse_abnormality,
        default=AbnormalityRule(),
        help='"ai,ce,ihdi" thresholds for z (default 30,20,II)',
    )
    parser.add_argument(
        "--mu-list", type=_parse_floats, default=DEFAULT_MU_LIST, help="miss penalties (default 0,0.5)"
    )
    parser.add_argument(
        "--lambda-grid",
        type=_parse_lambda_grid,
        default=DEFAULT_LAMBDA_GRID,
        help="point count or comma list of radiation costs (default 21 in [0,1])",
    )
    parser.add_argument("--svg", action="store_true", help="also write static SVG figures")
    parser.add_argument(
        "--report",
        default=None,
        help="directory for rejection/leftover reports (default: the run directory)",
    )


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        records_path=args.records,
        splits_path=args.splits,
        out_dir=args.out,
        rho=args.rho,
        deltas=args.delta_grid,
        thresholds=args.thresholds,
        abnormality_rule=args.abnormality_rule,
        mu_list=args.mu_list,
        lambda_grid=args.lambda_grid,
        split_calibration=getattr(args, "split_calibration", False),
        emit_svg=args.svg,
        report_dir=args.report,
    )


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = CohortSpec(
        n_subjects=args.n_subjects,
        pair_fraction=args.pair_fraction,
        alpha_dist=(args.alpha_mean, args.alpha_sd),
        cov_dist=(args.cov_mean, args.cov_sd),
        pred_noise_alpha=(args.alpha_bias, args.alpha_noise),
        pred_noise_cov=(args.cov_bias, args.cov_noise),
        abnormal_fraction=args.abnormal_fraction,
        seed=args.seed,
        split_fractions=args.split_fractions,
    )
    cohort = generate(spec)
    write_cohort(cohort, args.out)
    print(f"generate: {len(cohort.records)} records, {len(cohort.splits)} subjects -> {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    try:
        app = create_app(args.run, ui_dir=args.ui)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hipgate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic cohort")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n-subjects", type=int, default=100)
    p_gen.add_argument("--pair-fraction", type=float, default=0.8)
    p_gen.add_argument("--alpha-mean", type=float, default=62.0)
    p_gen.add_argument("--alpha-sd", type=float, default=8.0)
    p_gen.add_argument("--cov-mean", type=float, default=55.0)
    p_gen.add_argument("--cov-sd", type=float, default=12.0)
    p_gen.add_argument("--alpha-bias", type=float, default=0.0)
    p_gen.add_argument("--alpha-noise", type=float, default=4.0)
    p_gen.add_argument("--cov-bias", type=float, default=0.0)
    p_gen.add_argument("--cov-noise", type=float, default=8.0)
    p_gen.add_argument("--abnormal-fraction", type=float, default=0.25)
    p_gen.add_argument(
        "--split-fractions",
        type=_parse_floats,
        default=(0.2, 0.4, 0.4),
        help="post_train,calibration,evaluation subject fractions",
    )
    p_gen.set_defaults(func=_cmd_generate)

    p_cal = sub.add_parser("calibrate", help="fit affine corrections and conformal radii")
    _add_run_args(p_cal)
    p_cal.add_argument(
        "--split-calibration",
        action="store_true",
        help="fit the affine correction and the quantile on disjoint halves",
    )
    p_cal.set_defaults(func=lambda a: run_calibrate(_config_from_args(a)))

    p_sweep = sub.add_parser("sweep", help="evaluate the policy grid on strict pairs")
    _add_run_args(p_sweep)
    p_sweep.set_defaults(func=lambda a: run_sweep(_config_from_args(a)))

    p_curve = sub.add_parser("decision-curve", help="utility envelopes over (lambda, mu)")
    _add_run_args(p_curve)
    p_curve.set_defaults(func=lambda a: run_decision_curve(_config_from_args(a)))

    p_serve = sub.add_parser("serve", help="serve a completed run over HTTP")
    p_serve.add_argument("--run", required=True, help="run directory with sweep artifacts")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--ui", default=None, help="optional static UI directory to mount at /")
    p_serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
