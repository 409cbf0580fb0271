import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipgate.calibration import (
    AffineCorrection,
    Calibrator,
    ConformalRadius,
    EmptyEvalSet,
    EmptyResiduals,
    InsufficientData,
    LowerBoundParams,
    conformal_radius,
    empirical_coverage,
    fit_affine_lad,
    fit_calibrator,
    lad_objective,
    lower_bound,
    quantile_index,
)


def lad_oracle(x, y):
    """Independent exhaustive two-point enumeration: returns (objective, a, b)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    best = (math.inf, None, None)
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if x[i] == x[j]:
                continue
            a = (y[j] - y[i]) / (x[j] - x[i])
            b = y[i] - a * x[i]
            obj = float(np.abs(a * x + b - y).sum())
            if obj < best[0]:
                best = (obj, a, b)
    return best


def params(a=1.0, b=0.0, q_plus=0.0, rho=0.10, delta=0.0, n=10):
    return LowerBoundParams(
        correction=AffineCorrection(target="alpha", a=a, b=b, n_fit=n),
        radius=ConformalRadius(target="alpha", rho=rho, q_plus=q_plus, n_cal=n),
        delta=delta,
    )


# ---------------------------------------------------------------------------
# LAD fit


def test_identity_fit():
    fit = fit_affine_lad([50.0, 60.0, 70.0, 80.0], [50.0, 60.0, 70.0, 80.0])
    assert (fit.a, fit.b) == (1.0, 0.0)
    assert not fit.fallback


def test_exact_affine_relation():
    pred = [10.0, 20.0, 30.0, 40.0]
    label = [2.0 * p + 3.0 for p in pred]
    fit = fit_affine_lad(pred, label)
    assert fit.a == pytest.approx(2.0, abs=1e-12)
    assert fit.b == pytest.approx(3.0, abs=1e-12)
    assert lad_objective(fit.a, fit.b, pred, label) == pytest.approx(0.0, abs=1e-12)


def test_gross_outlier_matches_enumeration_oracle():
    rng = np.random.default_rng(3)
    pred = rng.uniform(40.0, 80.0, size=5)
    label = 1.1 * pred - 2.0 + rng.normal(0.0, 0.5, size=5)
    label[2] += 40.0  # gross outlier
    fit = fit_affine_lad(pred, label)
    oracle_obj, _, _ = lad_oracle(pred, label)
    assert lad_objective(fit.a, fit.b, pred, label) == pytest.approx(oracle_obj, abs=1e-9)


def test_tie_breaks_toward_smallest_slope_then_intercept():
    # Four corners of a unit square admit several objective-2 lines;
    # lexicographically smallest (a, b) is the a=-1 anti-diagonal.
    pred = [0.0, 1.0, 0.0, 1.0]
    label = [0.0, 0.0, 1.0, 1.0]
    fit = fit_affine_lad(pred, label)
    assert lad_objective(fit.a, fit.b, pred, label) == pytest.approx(2.0, abs=1e-12)
    assert (fit.a, fit.b) == (-1.0, 1.0)


def test_degenerate_predictor_falls_back():
    fit = fit_affine_lad([50.0, 50.0, 50.0], [48.0, 52.0, 55.0])
    assert fit.fallback
    assert fit.a == 1.0
    assert fit.b == pytest.approx(2.0)  # median(label - 50)


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_affine_lad([60.0], [62.0])


@given(
    n=st.integers(3, 20),
    seed=st.integers(0, 10_000),
)
@settings(max_examples=60, deadline=None)
def test_lad_never_beaten_by_any_candidate(n, seed):
    rng = np.random.default_rng(seed)
    pred = rng.uniform(0.0, 100.0, size=n)
    label = rng.uniform(0.0, 100.0, size=n)
    fit = fit_affine_lad(pred, label)
    obj = lad_objective(fit.a, fit.b, pred, label)
    oracle_obj, _, _ = lad_oracle(pred, label)
    assert obj <= oracle_obj + 1e-9


def test_fit_is_deterministic():
    rng = np.random.default_rng(11)
    pred = rng.uniform(40.0, 80.0, size=20)
    label = pred + rng.normal(0, 3, size=20)
    assert fit_affine_lad(pred, label) == fit_affine_lad(pred, label)


# ---------------------------------------------------------------------------
# conformal radius


def test_zero_residuals_give_zero_radius():
    # Any rho for which the order statistic exists (k <= n); smaller rho
    # hits the k > n sentinel regardless of the residuals.
    for rho in (0.10, 0.25, 0.5):
        assert conformal_radius([0.0] * 12, rho).q_plus == 0.0


def test_order_statistic_n9():
    # k = ceil(10 * 0.9) = 9 -> the maximum of the negated residuals.
    residuals = [-4.0, -1.0, 0.5, 2.0, -3.0, 1.0, -2.5, 0.0, 3.0]
    radius = conformal_radius(residuals, 0.10)
    assert quantile_index(9, 0.10) == 9
    assert radius.q_plus == max(-r for r in residuals)


def test_order_statistic_n26():
    # Mirrors a 26-image calibration set: k = ceil(27 * 0.9) = 25.
    rng = np.random.default_rng(0)
    residuals = rng.normal(0, 5, size=26)
    assert quantile_index(26, 0.10) == 25
    radius = conformal_radius(residuals, 0.10)
    assert radius.q_plus == float(np.sort(-residuals)[24])


def test_infinite_sentinel_when_k_exceeds_n():
    radius = conformal_radius([1.0, -1.0, 0.0], 0.10)  # k = ceil(4*0.9) = 4 > 3
    assert math.isinf(radius.q_plus) and radius.q_plus > 0


def test_radius_is_bit_identical():
    rng = np.random.default_rng(5)
    residuals = list(rng.normal(0, 2, size=30))
    assert conformal_radius(residuals, 0.10) == conformal_radius(residuals, 0.10)


def test_empty_residuals():
    with pytest.raises(EmptyResiduals):
        conformal_radius([], 0.10)


def test_bad_rho():
    with pytest.raises(ValueError):
        quantile_index(10, 0.0)
    with pytest.raises(ValueError):
        quantile_index(10, 1.0)


# ---------------------------------------------------------------------------
# lower bound and coverage


def test_lower_bound_hand_arithmetic_alpha():
    # corrected 75.0, radius 10.75, 10% inflation: 75 - 1.1*10.75 = 63.175
    p = params(q_plus=10.75, delta=0.10)
    assert lower_bound(75.0, p) == pytest.approx(63.175, abs=1e-12)


def test_lower_bound_hand_arithmetic_coverage():
    # corrected 60.0, radius 28.74, 40% inflation: 60 - 1.4*28.74 = 19.764
    p = params(q_plus=28.74, delta=0.40)
    assert lower_bound(60.0, p) == pytest.approx(19.764, abs=1e-12)


def test_lower_bound_no_uncertainty():
    p = params(a=1.1, b=-2.0, q_plus=0.0, delta=0.0)
    assert lower_bound(50.0, p) == pytest.approx(1.1 * 50.0 - 2.0)


def test_lower_bound_sentinel_is_minus_inf():
    p = params(q_plus=math.inf, delta=0.2)
    assert lower_bound(75.0, p) == -math.inf


def test_coverage_one_when_bound_is_minus_inf():
    p = params(q_plus=math.inf)
    assert empirical_coverage([(60.0, -500.0), (70.0, 0.0)], p) == 1.0


def test_coverage_zero_when_labels_below_bounds():
    p = params(q_plus=-5.0)  # negative radius raises the bound above predictions
    assert empirical_coverage([(60.0, 60.0), (70.0, 70.0)], p) == 0.0


def test_coverage_empty_eval_set():
    with pytest.raises(EmptyEvalSet):
        empirical_coverage([], params())


@given(
    delta_low=st.floats(0.0, 1.0),
    step=st.floats(0.0, 1.0),
    q_plus=st.floats(0.0, 50.0),
    pred=st.floats(0.0, 100.0),
)
@settings(max_examples=100)
def test_monotone_in_delta_for_nonnegative_radius(delta_low, step, q_plus, pred):
    lo = lower_bound(pred, params(q_plus=q_plus, delta=delta_low + step))
    hi = lower_bound(pred, params(q_plus=q_plus, delta=delta_low))
    assert lo <= hi


def test_monte_carlo_coverage_guarantee():
    # Residual-level oracle: calibration and evaluation residuals drawn
    # exchangeably; the event {-r_eval <= q_plus} must hit >= 0.90 on
    # average. 100 trials of 50/50; threshold is 0.90 - 3 binomial sigmas.
    rng = np.random.default_rng(42)
    trials, n_cal, n_eval = 100, 50, 50
    total = 0.0
    for _ in range(trials):
        cal = rng.normal(0.0, 5.0, size=n_cal)
        ev = rng.normal(0.0, 5.0, size=n_eval)
        radius = conformal_radius(cal, 0.10)
        total += float(np.mean(-ev <= radius.q_plus))
    mean_cov = total / trials
    assert mean_cov >= 0.90 - 3.0 * math.sqrt(0.9 * 0.1 / (trials * n_eval))


# ---------------------------------------------------------------------------
# fit_calibrator and serialization


def test_fit_calibrator_report():
    rng = np.random.default_rng(1)
    truth = rng.uniform(45.0, 80.0, size=26)
    pred = truth + 3.0  # pure +3 shift
    calibrator, report = fit_calibrator(pred, truth, 0.10, "alpha")
    assert report["n_cal"] == 26
    assert report["order_statistic_k"] == 25
    assert calibrator.correction.a == pytest.approx(1.0, abs=1e-9)
    assert calibrator.correction.b == pytest.approx(-3.0, abs=1e-9)
    assert report["mae_after"] < 1e-9 < report["mae_before"]


def test_fit_calibrator_split_mode():
    rng = np.random.default_rng(2)
    truth = rng.uniform(45.0, 80.0, size=26)
    pred = truth + rng.normal(0, 2, size=26)
    calibrator, report = fit_calibrator(pred, truth, 0.10, "alpha", split_calibration=True)
    assert report["n_fit"] == 13
    assert report["n_quantile"] == 13
    assert report["order_statistic_k"] == quantile_index(13, 0.10)
    assert calibrator.radius.n_cal == 13


def test_calibrator_serialization_roundtrip():
    rng = np.random.default_rng(9)
    truth = rng.uniform(30.0, 90.0, size=20)
    pred = truth + rng.normal(0, 4, size=20)
    calibrator, _ = fit_calibrator(pred, truth, 0.10, "coverage")
    again = Calibrator.from_dict(calibrator.to_dict())
    assert again.correction.a == calibrator.correction.a
    assert again.correction.b == calibrator.correction.b
    assert again.radius.q_plus == calibrator.radius.q_plus


def test_calibrator_serializes_infinity_as_literal():
    calibrator = Calibrator(
        correction=AffineCorrection(target="alpha", a=1.0, b=0.0, n_fit=3),
        radius=ConformalRadius(target="alpha", rho=0.10, q_plus=math.inf, n_cal=3),
    )
    d = calibrator.to_dict()
    assert d["q_plus"] == "+inf"
    assert math.isinf(Calibrator.from_dict(d).radius.q_plus)
