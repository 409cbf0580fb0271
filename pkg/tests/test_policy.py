import datetime
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipgate.dataset import Modality, StrictPair, StudyRecord
from hipgate.geometry import IhdiGrade, Measurements, Side
from hipgate.policy import (
    DEFAULT_DELTAS,
    Decision,
    Family,
    PolicyGrid,
    PolicySpec,
    Thresholds,
    decide,
    sweep_grid,
)

from conftest import make_calibrators

DATE = datetime.date(2024, 6, 1)


def spec_for(family, da=0.0, dc=0.0, thresholds=None, rho=0.10):
    return PolicySpec(
        family=family,
        thresholds=thresholds or Thresholds(),
        delta_alpha=da,
        delta_cov=dc,
        rho=rho,
    )


def make_strict_pair(pair_id, alpha_pred, cov_pred, o=0, z=0):
    subject = pair_id
    us = StudyRecord(
        record_id=f"{subject}-US",
        subject_id=subject,
        study_date=DATE,
        side=Side.LEFT,
        modality=Modality.US,
        predictions=Measurements(
            alpha=alpha_pred,
            coverage=cov_pred,
            ossific_flag=bool(o),
        )
        if alpha_pred is not None or cov_pred is not None
        else Measurements(beta=50.0),
    )
    xr = StudyRecord(
        record_id=f"{subject}-XR",
        subject_id=subject,
        study_date=DATE,
        side=Side.LEFT,
        modality=Modality.XR,
        labels=Measurements(ai=35.0 if z else 20.0, ce=15.0 if z else 30.0,
                            ihdi=IhdiGrade.III if z else IhdiGrade.I),
    )
    return StrictPair(pair_id=pair_id, us_record=us, xr_record=xr, z=z)


# ---------------------------------------------------------------------------
# decide


def test_alpha_only_certifies_above_threshold():
    # 75 - 1.1 * 10.75 = 63.175 >= 60
    calibs = make_calibrators(q_alpha=10.75)
    decision = decide((75.0, None), 0, calibs, spec_for(Family.ALPHA_ONLY, da=0.10))
    assert decision.d == 1
    assert decision.lb_alpha == pytest.approx(63.175)
    assert decision.margin_alpha == pytest.approx(3.175)


def test_and_fails_on_alpha():
    calibs = make_calibrators()
    decision = decide((59.99, 51.0), 0, calibs, spec_for(Family.ALPHA_AND_COV))
    assert decision.d == 0


def test_or_passes_on_coverage():
    calibs = make_calibrators()
    decision = decide((59.99, 51.0), 0, calibs, spec_for(Family.ALPHA_OR_COV))
    assert decision.d == 1


def test_boundary_certifies():
    calibs = make_calibrators()
    decision = decide((60.0, 50.0), 0, calibs, spec_for(Family.ALPHA_AND_COV))
    assert decision.d == 1


def test_ossific_indexed_thresholds():
    thresholds = Thresholds(t_alpha=(60.0, 55.0), t_cov=(50.0, 45.0))
    calibs = make_calibrators()
    spec = spec_for(Family.ALPHA_ONLY, thresholds=thresholds)
    assert decide((57.0, None), 0, calibs, spec).d == 0
    assert decide((57.0, None), 1, calibs, spec).d == 1


def test_missing_coverage_fails_safe():
    calibs = make_calibrators()
    # AND can never certify without a coverage bound.
    and_dec = decide((80.0, None), 0, calibs, spec_for(Family.ALPHA_AND_COV))
    assert and_dec.d == 0
    assert and_dec.missing == ("coverage",)
    # OR still certifies through the alpha branch; the gap is flagged.
    or_dec = decide((80.0, None), 0, calibs, spec_for(Family.ALPHA_OR_COV))
    assert or_dec.d == 1
    assert or_dec.missing == ("coverage",)
    # Alpha-only ignores coverage entirely.
    assert decide((80.0, None), 0, calibs, spec_for(Family.ALPHA_ONLY)).missing == ()


def test_missing_alpha_defers():
    calibs = make_calibrators()
    for family in Family:
        decision = decide((None, 80.0), 0, calibs, spec_for(family))
        if family is Family.ALPHA_OR_COV:
            assert decision.d == 1  # coverage branch can still certify
        else:
            assert decision.d == 0
        assert "alpha" in decision.missing


def test_missing_never_flips_zero_to_one():
    calibs = make_calibrators()
    for family in Family:
        for alpha_pred in (55.0, 65.0):
            full = decide((alpha_pred, 40.0), 0, calibs, spec_for(family))
            dropped = decide((alpha_pred, None), 0, calibs, spec_for(family))
            if full.d == 0:
                assert dropped.d == 0
            if family is Family.ALPHA_ONLY:
                assert dropped.d == full.d


def recompute(decision: Decision, family: Family) -> int:
    alpha_ok = decision.margin_alpha is not None and decision.margin_alpha >= 0
    cov_ok = decision.margin_cov is not None and decision.margin_cov >= 0
    if family is Family.ALPHA_ONLY:
        return int(alpha_ok)
    if family is Family.ALPHA_OR_COV:
        return int(alpha_ok or cov_ok)
    return int(alpha_ok and cov_ok)


@given(
    alpha_pred=st.one_of(st.none(), st.floats(0.0, 120.0)),
    cov_pred=st.one_of(st.none(), st.floats(0.0, 100.0)),
    q_alpha=st.floats(0.0, 30.0),
    q_cov=st.floats(0.0, 40.0),
    da=st.floats(0.0, 0.5),
    dc=st.floats(0.0, 0.5),
    o=st.integers(0, 1),
)
@settings(max_examples=200)
def test_decisions_recompute_from_margins_and_nesting(alpha_pred, cov_pred, q_alpha, q_cov, da, dc, o):
    calibs = make_calibrators(q_alpha=q_alpha, q_cov=q_cov)
    decisions = {
        family: decide((alpha_pred, cov_pred), o, calibs, spec_for(family, da=da, dc=dc))
        for family in Family
    }
    for family, decision in decisions.items():
        assert decision.d == recompute(decision, family)
    # AND <= alpha-only <= OR
    assert decisions[Family.ALPHA_AND_COV].d <= decisions[Family.ALPHA_ONLY].d
    assert decisions[Family.ALPHA_ONLY].d <= decisions[Family.ALPHA_OR_COV].d


@given(
    alpha_pred=st.floats(0.0, 120.0),
    cov_pred=st.floats(0.0, 100.0),
    q_alpha=st.floats(0.0, 30.0),
    q_cov=st.floats(0.0, 40.0),
    da=st.floats(0.0, 0.4),
    dc=st.floats(0.0, 0.4),
    bump=st.floats(0.0, 0.5),
)
@settings(max_examples=200)
def test_monotone_in_delta(alpha_pred, cov_pred, q_alpha, q_cov, da, dc, bump):
    calibs = make_calibrators(q_alpha=q_alpha, q_cov=q_cov)
    for family in Family:
        base = decide((alpha_pred, cov_pred), 0, calibs, spec_for(family, da=da, dc=dc))
        wider_a = decide((alpha_pred, cov_pred), 0, calibs, spec_for(family, da=da + bump, dc=dc))
        wider_c = decide((alpha_pred, cov_pred), 0, calibs, spec_for(family, da=da, dc=dc + bump))
        assert wider_a.d <= base.d
        assert wider_c.d <= base.d


# ---------------------------------------------------------------------------
# sweep_grid


def test_alpha_only_rows_broadcast():
    pairs = [make_strict_pair("P1", 72.0, 55.0), make_strict_pair("P2", 58.0, 40.0)]
    cube = sweep_grid(pairs, make_calibrators(q_alpha=2.0, q_cov=3.0), PolicyGrid(), Thresholds())
    for ia in range(len(cube.deltas)):
        first = cube.decisions_at(Family.ALPHA_ONLY, ia, 0)
        for ic in range(1, len(cube.deltas)):
            assert cube.decisions_at(Family.ALPHA_ONLY, ia, ic) is first


def test_cube_shape():
    pairs = [make_strict_pair("P1", 72.0, 55.0)]
    cube = sweep_grid(pairs, make_calibrators(), PolicyGrid(), Thresholds())
    assert len(cube.cells) == 3 * 7 * 7
    assert cube.pair_ids == ("P1",)


def test_all_infinite_radii_defer_everywhere():
    pairs = [make_strict_pair("P1", 85.0, 90.0), make_strict_pair("P2", 70.0, 60.0)]
    cube = sweep_grid(
        pairs, make_calibrators(q_alpha=math.inf, q_cov=math.inf), PolicyGrid(), Thresholds()
    )
    assert all(dec.d == 0 for decisions in cube.cells.values() for dec in decisions)


def test_rule_nesting_per_cell_on_random_pairs():
    import numpy as np

    rng = np.random.default_rng(8)
    pairs = [
        make_strict_pair(f"P{i}", float(rng.uniform(40, 85)), float(rng.uniform(20, 80)),
                         o=int(rng.integers(0, 2)), z=int(rng.integers(0, 2)))
        for i in range(25)
    ]
    cube = sweep_grid(pairs, make_calibrators(q_alpha=4.0, q_cov=9.0), PolicyGrid(), Thresholds())
    for ia in range(len(cube.deltas)):
        for ic in range(len(cube.deltas)):
            and_set = {i for i, d in enumerate(cube.decisions_at(Family.ALPHA_AND_COV, ia, ic)) if d.d}
            alpha_set = {i for i, d in enumerate(cube.decisions_at(Family.ALPHA_ONLY, ia, ic)) if d.d}
            or_set = {i for i, d in enumerate(cube.decisions_at(Family.ALPHA_OR_COV, ia, ic)) if d.d}
            assert and_set <= alpha_set <= or_set


def test_cube_serialization_roundtrip():
    from hipgate.policy import DecisionCube

    pairs = [make_strict_pair("P1", 72.0, 55.0), make_strict_pair("P2", 58.0, None)]
    cube = sweep_grid(pairs, make_calibrators(q_alpha=2.0), PolicyGrid(), Thresholds())
    again = DecisionCube.from_dict(cube.to_dict())
    assert again.pair_ids == cube.pair_ids
    assert again.deltas == cube.deltas
    assert again.cells == cube.cells


def test_infinite_bounds_serialize_as_literals(tmp_path):
    from hipgate.runs import _write_decisions_csv

    pairs = [make_strict_pair("P1", 85.0, 90.0)]
    cube = sweep_grid(
        pairs, make_calibrators(q_alpha=math.inf, q_cov=math.inf), PolicyGrid(), Thresholds()
    )
    path = tmp_path / "decisions.csv"
    _write_decisions_csv(cube, path)
    text = path.read_text()
    assert "-inf" in text
    # JSON round trip keeps the sentinel too.
    from hipgate.policy import DecisionCube

    again = DecisionCube.from_dict(cube.to_dict())
    dec = again.decisions_at(Family.ALPHA_ONLY, 0, 0)[0]
    assert dec.lb_alpha == -math.inf


def test_grid_validation():
    with pytest.raises(ValueError):
        PolicyGrid(deltas=(0.2, 0.1))
    with pytest.raises(ValueError):
        PolicyGrid(deltas=())
    with pytest.raises(ValueError):
        PolicyGrid(deltas=(-0.1, 0.2))


def test_default_grid_matches_swept_range():
    assert DEFAULT_DELTAS == (0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)
