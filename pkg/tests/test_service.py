import math

import pytest
from fastapi.testclient import TestClient

from hcpspectra.service import app

client = TestClient(app)

SMALL_RUN = {
    "n0": 50,
    "dp": 0.05,
    "mode": "impulse",
    "shells": ["10meV"],
    "theta_min_deg": 10.0,
    "theta_max_deg": 170.0,
    "theta_count": 9,
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok"}


def test_spectrum_endpoint():
    resp = client.post("/spectrum", json=SMALL_RUN)
    assert resp.status_code == 200, resp.text
    payload = resp.json()
    assert len(payload["shells"]) == 1
    shell = payload["shells"][0]
    assert shell["columns"][0] == "theta_deg"
    assert len(shell["rows"]) == 9
    assert shell["summary"]["chi"] == pytest.approx(6.25)
    # every row carries three branches on the 10 meV shell
    assert all(row[5] == 3 for row in shell["rows"])


def test_spectrum_validation():
    bad = dict(SMALL_RUN, mode="banana")
    resp = client.post("/spectrum", json=bad)
    assert resp.status_code == 422
    bad = dict(SMALL_RUN, shells=["10eV"])
    resp = client.post("/spectrum", json=bad)
    assert resp.status_code == 422
    bad = dict(SMALL_RUN, unknown_field=1)
    resp = client.post("/spectrum", json=bad)
    assert resp.status_code == 422


def test_shell_curve_endpoint():
    resp = client.post("/shell-curve", json=SMALL_RUN)
    assert resp.status_code == 200
    payload = resp.json()
    assert payload[0]["columns"] == ["r0_bohr", "theta0_deg", "branch", "theta_f_deg"]
    assert len(payload[0]["rows"]) > 100


def test_catastrophes_endpoint():
    resp = client.post("/catastrophes", json=SMALL_RUN)
    assert resp.status_code == 200
    report = resp.json()["10meV"]
    assert report["glory_at_zero"] and report["glory_at_pi"]
    assert report["rainbows"] == []


def test_oracle_endpoint_validation():
    resp = client.post("/oracle", json=SMALL_RUN)  # n0 = 50: rejected
    assert resp.status_code == 422


def test_oracle_endpoint():
    req = {
        "n0": 6,
        "dp": 0.3,
        "mode": "impulse",
        "shells": ["500meV"],
        "theta_min_deg": 30.0,
        "theta_max_deg": 150.0,
        "theta_count": 5,
    }
    resp = client.post("/oracle", json=req)
    assert resp.status_code == 200
    rows = resp.json()[0]["rows"]
    assert len(rows) == 5
    assert all(r[1] >= 0 for r in rows)


def test_scale_endpoint():
    resp = client.post("/scale", json={"config": SMALL_RUN, "gamma": 5.0})
    assert resp.status_code == 200
    out = resp.json()
    assert out["config"]["n0"] == 10
    assert out["config"]["dp"] == pytest.approx(0.25)
    assert out["chi"] == pytest.approx(6.25)
    resp = client.post("/scale", json={"config": SMALL_RUN, "gamma": 3.0})
    assert resp.status_code == 422
