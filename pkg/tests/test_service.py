import json

import pytest
from fastapi.testclient import TestClient

from relosim import simulation
from relosim.service import create_app


@pytest.fixture(scope="module")
def fast_scenario_path(tmp_path_factory):
    """The smalltown scenario shrunk for request-speed tests."""
    import shutil

    src = __import__("conftest").SMALLTOWN
    town = tmp_path_factory.mktemp("svc") / "town"
    shutil.copytree(src, town)
    import yaml

    doc = yaml.safe_load((town / "scenario.yaml").read_text())
    doc["n_agents"] = 250
    doc["convergence"] = {"epsilon": 0.05, "window": 2, "max_iterations": 120}
    (town / "scenario.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    return str(town / "scenario.yaml")


@pytest.fixture()
def client():
    return TestClient(create_app())


@pytest.fixture()
def session(client, fast_scenario_path):
    response = client.post("/sessions", json={"scenario_path": fast_scenario_path})
    assert response.status_code == 200, response.text
    return response.json()


class TestCreateSession:
    def test_smalltown_session_converges(self, session):
        assert session["summary"]["converged"] is True
        assert session["summary"]["n_agents"] == 250

    def test_malformed_scenario_422(self, client, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("schema: relosim-scenario/1\nn_agents: 10\n")
        response = client.post("/sessions", json={"scenario_path": str(bad)})
        assert response.status_code == 422
        assert any("geography" in d for d in response.json()["detail"])

    def test_duplicate_create_gives_distinct_sessions(self, client, fast_scenario_path):
        a = client.post("/sessions", json={"scenario_path": fast_scenario_path}).json()
        b = client.post("/sessions", json={"scenario_path": fast_scenario_path}).json()
        assert a["session_id"] != b["session_id"]
        assert a["summary"] == b["summary"]

    def test_inline_scenario_document(self, client, fast_scenario_path):
        import os

        import yaml

        doc = yaml.safe_load(open(fast_scenario_path))
        response = client.post("/sessions", json={
            "scenario": doc, "base_dir": os.path.dirname(fast_scenario_path),
        })
        assert response.status_code == 200, response.text

    def test_large_scenario_returns_job_handle(self, fast_scenario_path):
        client = TestClient(create_app(sync_threshold=10))
        response = client.post("/sessions", json={"scenario_path": fast_scenario_path})
        assert response.status_code == 202
        body = response.json()
        assert body["status"] == "running"
        # poll until done
        import time

        for _ in range(200):
            poll = client.get(f"/sessions/{body['session_id']}/summary")
            if poll.status_code == 200:
                assert poll.json()["converged"] is True
                break
            assert poll.status_code == 202
            time.sleep(0.05)
        else:
            pytest.fail("background baseline never finished")


class TestLayers:
    def test_feature_count_matches_geometry(self, client, session):
        layers = client.get(f"/sessions/{session['session_id']}/layers").json()
        kinds = [f["properties"]["kind"] for f in layers["features"]]
        assert kinds.count("block_group") == 12
        assert kinds.count("building") == 40
        assert len(layers["features"]) == 52

    def test_metrics_joined_with_diversity_bounds(self, client, session):
        import math

        layers = client.get(f"/sessions/{session['session_id']}/layers").json()
        bg_feats = [f for f in layers["features"] if f["properties"]["kind"] == "block_group"]
        for feat in bg_feats:
            assert 0.0 <= feat["properties"]["diversity"] <= math.log(8) + 1e-12
            assert "vacancies" in feat["properties"]
            assert "rent" in feat["properties"]

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/layers").status_code == 404


class TestWhatifs:
    def test_empty_interventions_zero_deltas(self, client, session):
        sid = session["session_id"]
        response = client.post(f"/sessions/{sid}/whatifs",
                               json={"name": "noop", "interventions": []})
        assert response.status_code == 200, response.text
        deltas = response.json()["deltas"]
        assert all(v == 0.0 for v in deltas["mode_shares"].values())
        assert deltas["mean_commute_minutes"] == 0.0

    def test_transit_off_bus_share_zero(self, client, session):
        sid = session["session_id"]
        response = client.post(f"/sessions/{sid}/whatifs", json={
            "name": "no-bus",
            "interventions": [
                {"kind": "set_transit_flag", "target": "*", "flag": "has_bus", "value": False},
            ],
        })
        assert response.status_code == 200, response.text
        assert response.json()["summary"]["mode_shares"]["bus"] == 0.0

    def test_same_interventions_identical_payloads(self, client, session):
        sid = session["session_id"]
        interventions = [{"kind": "set_rent", "target": "B-11", "value": 1000.0}]
        a = client.post(f"/sessions/{sid}/whatifs",
                        json={"name": "a", "interventions": interventions}).json()
        b = client.post(f"/sessions/{sid}/whatifs",
                        json={"name": "b", "interventions": interventions}).json()
        assert a["summary"] == b["summary"]
        assert a["deltas"] == b["deltas"]

    def test_eviction_409(self, client, session):
        sid = session["session_id"]
        response = client.post(f"/sessions/{sid}/whatifs", json={
            "name": "evict",
            "interventions": [
                {"kind": "remove_vacancies", "target": "BG-01", "value": 100_000},
            ],
        })
        assert response.status_code == 409
        assert any("evict" in d for d in response.json()["detail"])

    def test_invalid_target_422(self, client, session):
        sid = session["session_id"]
        response = client.post(f"/sessions/{sid}/whatifs", json={
            "name": "bad",
            "interventions": [{"kind": "set_rent", "target": "NOPE", "value": 1.0}],
        })
        assert response.status_code == 422

    def test_get_stored_whatif(self, client, session):
        sid = session["session_id"]
        posted = client.post(f"/sessions/{sid}/whatifs",
                             json={"name": "keep", "interventions": []}).json()
        fetched = client.get(f"/sessions/{sid}/whatifs/keep").json()
        assert fetched == posted
        assert client.get(f"/sessions/{sid}/whatifs/gone").status_code == 404

    def test_whatif_layers_overlay(self, client, session):
        sid = session["session_id"]
        client.post(f"/sessions/{sid}/whatifs", json={
            "name": "cheap",
            "interventions": [{"kind": "set_rent", "target": "B-11", "value": 500.0}],
        })
        base = client.get(f"/sessions/{sid}/layers").json()
        overlay = client.get(f"/sessions/{sid}/layers", params={"whatif": "cheap"}).json()
        assert len(base["features"]) == len(overlay["features"])
        rent = {f["properties"]["id"]: f["properties"].get("rent")
                for f in overlay["features"]}
        assert rent["B-11"] == 500.0
        assert client.get(f"/sessions/{sid}/layers",
                          params={"whatif": "nope"}).status_code == 404


class TestSessionIsolation:
    def test_whatifs_do_not_leak_across_sessions(self, client, fast_scenario_path):
        a = client.post("/sessions", json={"scenario_path": fast_scenario_path}).json()
        b = client.post("/sessions", json={"scenario_path": fast_scenario_path}).json()
        client.post(f"/sessions/{a['session_id']}/whatifs",
                    json={"name": "only-a", "interventions": []})
        assert client.get(f"/sessions/{b['session_id']}/whatifs/only-a").status_code == 404
        summary_b = client.get(f"/sessions/{b['session_id']}/summary").json()
        assert summary_b == b["summary"]


class TestCliEquivalence:
    def test_summary_matches_cli_run(self, client, fast_scenario_path, tmp_path):
        from click.testing import CliRunner

        from relosim.cli import main

        session = client.post("/sessions", json={"scenario_path": fast_scenario_path}).json()
        out = tmp_path / "out"
        result = CliRunner().invoke(main, ["run", fast_scenario_path, "-o", str(out)])
        assert result.exit_code == 0
        cli_summary = json.loads((out / "summary.json").read_text())
        assert cli_summary == session["summary"]
