import csv
import json

import pytest
from fastapi.testclient import TestClient

from hipgate.api import create_app
from hipgate.cli import main

from test_cli import run_pipeline


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("api_run")
    return run_pipeline(base, seed=29, gen_args=["--n-subjects", "80"])


@pytest.fixture(scope="module")
def client(run_dir):
    return TestClient(create_app(run_dir))


def test_run_meta(client):
    meta = client.get("/run/meta").json()
    assert meta["rho"] == 0.10
    assert meta["deltas"] == [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40]
    assert set(meta["families"]) == {"alpha_only", "alpha_or_cov", "alpha_and_cov"}
    assert meta["n_labeled_pairs"] <= meta["n_pairs"]
    assert "envelope" in meta["envelope_note"].lower()
    assert meta["calibrators"]["alpha"]["rho"] == 0.10


def test_grid_alpha_only_constant_across_delta_cov(client):
    payload = client.get("/grid", params={"family": "alpha_only"}).json()
    assert payload["family"] == "alpha_only"
    by_da = {}
    for cell in payload["cells"]:
        by_da.setdefault(cell["delta_alpha"], set()).add(cell["us_only_rate"])
    assert all(len(rates) == 1 for rates in by_da.values())


def test_grid_unknown_family_is_400(client):
    assert client.get("/grid", params={"family": "nope"}).status_code == 400


def test_grid_utility_column(client):
    payload = client.get(
        "/grid", params={"family": "alpha_or_cov", "mu": 0.5, "lambda": 0.3}
    ).json()
    cell = payload["cells"][0]
    n = cell["n_pairs"]
    expected = -(0.3 * (n - cell["n_us_only"]) + 0.5 * cell["n_missed"]) / n
    assert cell["utility"] == pytest.approx(expected, abs=1e-12)


def test_whatif_on_grid_matches_swept_metrics(client, run_dir):
    metrics = json.loads((run_dir / "metrics.json").read_text())
    for cell in metrics[:: max(1, len(metrics) // 7)]:
        body = {
            "family": cell["family"],
            "delta_alpha": cell["delta_alpha"],
            "delta_cov": cell["delta_cov"],
            "lambda": 0.4,
            "mu": 0.5,
        }
        response = client.post("/whatif", json=body)
        assert response.status_code == 200
        got = response.json()
        assert got["source"] == "grid"
        for key in ("n_pairs", "n_us_only", "n_missed"):
            assert got["metrics"][key] == cell[key]
        for key in ("us_only_rate", "xr_use", "cov_alpha", "cov_cov"):
            assert got["metrics"][key] == pytest.approx(cell[key], abs=1e-12)
        if cell["miss_rate"] is None:
            assert got["metrics"]["miss_rate"] is None
        else:
            assert got["metrics"]["miss_rate"] == pytest.approx(cell["miss_rate"], abs=1e-12)


def test_whatif_off_grid_interpolates_uor(client, run_dir):
    metrics = json.loads((run_dir / "metrics.json").read_text())
    lo = next(m for m in metrics if m["family"] == "alpha_or_cov"
              and m["delta_alpha"] == 0.10 and m["delta_cov"] == 0.10)
    hi = next(m for m in metrics if m["family"] == "alpha_or_cov"
              and m["delta_alpha"] == 0.15 and m["delta_cov"] == 0.15)
    body = {"family": "alpha_or_cov", "delta_alpha": 0.125, "delta_cov": 0.125,
            "lambda": 0.2, "mu": 0.5}
    got = client.post("/whatif", json=body).json()
    assert got["source"] == "calibrators"
    # Monotone in delta: UOR at 0.125 sits between the surrounding cells.
    assert hi["us_only_rate"] <= got["metrics"]["us_only_rate"] <= lo["us_only_rate"]


def test_whatif_negative_delta_is_422(client):
    body = {"family": "alpha_only", "delta_alpha": -0.1, "delta_cov": 0.1,
            "lambda": 0.2, "mu": 0.5}
    assert client.post("/whatif", json=body).status_code == 422


def test_whatif_missing_fields_is_400(client):
    assert client.post("/whatif", json={"family": "alpha_only"}).status_code == 400
    assert client.post("/whatif", json=[1, 2]).status_code == 400
    assert client.post(
        "/whatif", content=b"{not json", headers={"Content-Type": "application/json"}
    ).status_code == 400


def test_grid_and_curve_require_params(client):
    assert client.get("/grid").status_code == 400
    assert client.get("/curve").status_code == 400


def test_whatif_bad_numbers_is_400(client):
    body = {"family": "alpha_only", "delta_alpha": "abc", "delta_cov": 0.1,
            "lambda": 0.2, "mu": 0.5}
    assert client.post("/whatif", json=body).status_code == 400


def test_whatif_is_idempotent(client):
    body = {"family": "alpha_and_cov", "delta_alpha": 0.2, "delta_cov": 0.3,
            "lambda": 0.35, "mu": 0.5}
    first = client.post("/whatif", json=body).json()
    second = client.post("/whatif", json=body).json()
    assert first == second


def test_whatif_margins_histogram_shape(client):
    body = {"family": "alpha_or_cov", "delta_alpha": 0.2, "delta_cov": 0.2,
            "lambda": 0.0, "mu": 0.0}
    got = client.post("/whatif", json=body).json()
    hist = got["margins"]["alpha"]
    assert len(hist["edges"]) == len(hist["counts"]) + 1
    assert sum(hist["counts"]) + hist["n_nonfinite"] == got["metrics"]["n_pairs"] or \
        sum(hist["counts"]) > 0


def test_curve_matches_decision_curve_csv(client, run_dir):
    with open(run_dir / "decision_curve.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if float(r["mu"]) == 0.5]
    payload = client.get("/curve", params={"mu": 0.5}).json()
    assert len(payload["points"]) == len(rows)
    for row, point in zip(rows, payload["points"]):
        assert float(row["lambda"]) == point["lambda"]
        assert float(row["utility"]) == point["utility"]
        assert row["best_family"] == point["best_family"]


def test_unknown_path_is_404(client):
    assert client.get("/nope").status_code == 404


def test_stale_run_dir_rejected(tmp_path):
    with pytest.raises(FileNotFoundError):
        create_app(tmp_path)


def test_ui_mount_serves_static(tmp_path):
    data = tmp_path / "data"
    assert main(["generate", "--out", str(data), "--seed", "41", "--n-subjects", "40"]) == 0
    common = ["--records", str(data / "records.json"), "--splits", str(data / "splits.csv"),
              "--out", str(tmp_path / "run")]
    assert main(["calibrate", *common]) == 0
    assert main(["sweep", *common]) == 0
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>operating points</body></html>")
    client = TestClient(create_app(tmp_path / "run", ui_dir=ui))
    assert client.get("/run/meta").status_code == 200
    page = client.get("/")
    assert page.status_code == 200
    assert "operating points" in page.text
