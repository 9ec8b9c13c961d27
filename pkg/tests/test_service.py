"""HTTP service tests over the in-process test client."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from driftguard.service import create_app
from driftguard.simgen import SimConfig, generate

TINY_TRAIN = {"max_epochs": 4, "patience": 2, "hidden_dim": 8, "batch_size": 16}


@pytest.fixture
def client():
    return TestClient(create_app())


def train_small(client, seed=4, values=None):
    if values is None:
        values = generate(SimConfig(phi=0.1, seed=11, length=90,
                                    tau=80)).values.tolist()
    resp = client.post("/train", json={"values": values, "window": 5,
                                       "b": 2, "seed": seed,
                                       "train": TINY_TRAIN})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestHealthAndSimulate:
    def test_health(self, client):
        doc = client.get("/health").json()
        assert doc["status"] == "ok"
        assert doc["bundles"] == 0

    def test_simulate_matches_library(self, client):
        resp = client.post("/simulate", json={"phi": 0.5, "seed": 3,
                                              "length": 80, "tau": 70})
        assert resp.status_code == 200
        doc = resp.json()
        expected = generate(SimConfig(phi=0.5, seed=3, length=80, tau=70))
        assert doc["label"] == expected.label
        assert np.allclose(doc["values"], expected.values)

    def test_simulate_invalid_garch_is_422(self, client):
        resp = client.post("/simulate", json={"phi": 0.1, "alpha1": 0.6,
                                              "beta": 0.5})
        assert resp.status_code == 422

    def test_simulate_missing_phi_is_422(self, client):
        assert client.post("/simulate", json={}).status_code == 422


class TestBundleRegistry:
    def test_train_monitor_roundtrip(self, client):
        summary = train_small(client)
        bundle_id = summary["bundle_id"]
        assert summary["window"] == 5 and summary["b"] == 2
        assert client.get("/health").json()["bundles"] == 1

        values = generate(SimConfig(phi=0.1, seed=12, length=40,
                                    tau=30)).values.tolist()
        resp = client.post("/monitor", json={"bundle_id": bundle_id,
                                             "values": values})
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["n_points"] == 40 - 5
        assert doc["n_alarms"] == len(doc["alarms"])

    def test_training_is_idempotent(self, client):
        first = train_small(client)
        second = train_small(client)
        assert first["bundle_id"] == second["bundle_id"]
        assert client.get("/health").json()["bundles"] == 1

    def test_export_import_cycle(self, client):
        bundle_id = train_small(client)["bundle_id"]
        doc = client.get(f"/bundles/{bundle_id}").json()
        other = TestClient(create_app())
        imported = other.post("/bundles", json=doc)
        assert imported.status_code == 200
        assert imported.json()["bundle_id"] == bundle_id

    def test_list_and_delete(self, client):
        bundle_id = train_small(client)["bundle_id"]
        listed = client.get("/bundles").json()
        assert [b["bundle_id"] for b in listed] == [bundle_id]
        assert client.delete(f"/bundles/{bundle_id}").status_code == 200
        assert client.get("/bundles").json() == []
        assert client.delete(f"/bundles/{bundle_id}").status_code == 404

    def test_unknown_bundle_is_404(self, client):
        resp = client.post("/monitor", json={"bundle_id": "beef",
                                             "values": [0.0] * 10})
        assert resp.status_code == 404

    def test_bad_import_document_is_400(self, client):
        resp = client.post("/bundles", json={"format_version": 999})
        assert resp.status_code == 400

    def test_monitor_window_mismatch_is_422(self, client):
        bundle_id = train_small(client)["bundle_id"]
        resp = client.post("/monitor", json={"bundle_id": bundle_id,
                                             "values": [0.0] * 20,
                                             "window": 7})
        assert resp.status_code == 422

    def test_monitor_short_series_is_400(self, client):
        bundle_id = train_small(client)["bundle_id"]
        resp = client.post("/monitor", json={"bundle_id": bundle_id,
                                             "values": [0.0] * 3})
        assert resp.status_code == 400

    def test_train_with_too_few_members_is_422(self, client):
        resp = client.post("/train", json={"values": [0.0] * 50, "b": 1,
                                           "train": TINY_TRAIN})
        assert resp.status_code == 422


class TestEvaluate:
    def test_rows_match_hand_computation(self, client):
        runs = [
            {"model": "proposed", "phi": 0.1, "delta": 1.0, "tau": 31,
             "length": 50, "alarms": [35]},
            {"model": "proposed", "phi": 0.1, "delta": 1.0, "tau": 31,
             "length": 50, "alarms": [10, 40]},
        ]
        doc = client.post("/evaluate", json={"runs": runs}).json()
        assert len(doc["rows"]) == 1
        row = doc["rows"][0]
        assert row["fap"] == 0.5
        assert row["dr"] == 1.0
        assert row["ced"] == 6.5
        assert row["recall"] == 5.0

    def test_undefined_ced_serializes_as_null(self, client):
        runs = [{"tau": 31, "length": 50, "alarms": []}]
        row = client.post("/evaluate", json={"runs": runs}).json()["rows"][0]
        assert row["ced"] is None
        assert row["dr"] == 0.0

    def test_alarm_outside_series_is_400(self, client):
        runs = [{"tau": 31, "length": 50, "alarms": [99]}]
        assert client.post("/evaluate", json={"runs": runs}).status_code == 400

    def test_empty_runs_is_422(self, client):
        assert client.post("/evaluate", json={"runs": []}).status_code == 422


class TestPreprocess:
    def test_at_summary(self, client):
        doc = client.post("/preprocess/at-summary",
                          json={"spectra": [[1, 1, 1], [2, 2]]}).json()
        assert doc["values"] == pytest.approx(
            [np.sqrt(2.0), np.sqrt(8 / 1.5)])

    def test_at_summary_empty_spectrum_is_400(self, client):
        resp = client.post("/preprocess/at-summary", json={"spectra": [[]]})
        assert resp.status_code == 400

    def test_energy_resample_constant_day(self, client):
        start = np.datetime64("2024-01-05T00:00:00")
        stamps = [str(start + np.timedelta64(i, "m")) + "Z"
                  for i in range(1440)]
        resp = client.post("/preprocess/energy-resample",
                           json={"timestamps": stamps,
                                 "values": [1.0] * 1440})
        assert resp.status_code == 200
        doc = resp.json()
        assert len(doc["values"]) == 37
        assert doc["timestamps"][0].endswith("Z")

    def test_energy_resample_bad_timestamp_is_400(self, client):
        resp = client.post("/preprocess/energy-resample",
                           json={"timestamps": ["not-a-time"] * 2,
                                 "values": [1.0, 2.0]})
        assert resp.status_code == 400
