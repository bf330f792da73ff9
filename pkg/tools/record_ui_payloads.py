"""Record service payloads for the frontend snapshot tests.

Runs the smalltown scenario through the HTTP service in-process and dumps
the layers, summary, and a transit-off what-if payload into
frontend/test/fixtures/.  Re-run whenever the fixture or engine changes.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fastapi.testclient import TestClient

from relosim.service import create_app

SMALLTOWN = os.path.join(os.path.dirname(__file__), "..", "src", "relosim", "data", "smalltown")
OUT = os.path.join(os.path.dirname(__file__), "..", "frontend", "test", "fixtures")


def main():
    os.makedirs(OUT, exist_ok=True)
    client = TestClient(create_app())
    created = client.post(
        "/sessions", json={"scenario_path": os.path.join(SMALLTOWN, "scenario.yaml")}
    )
    created.raise_for_status()
    session = created.json()
    sid = session["session_id"]

    layers = client.get(f"/sessions/{sid}/layers").json()
    whatif = client.post(
        f"/sessions/{sid}/whatifs",
        json={
            "name": "transit-off",
            "interventions": [
                {"kind": "set_transit_flag", "target": "*", "flag": "has_bus", "value": False},
                {"kind": "set_transit_flag", "target": "*", "flag": "has_T", "value": False},
            ],
        },
    ).json()

    for name, doc in (
        ("summary.json", session["summary"]),
        ("layers.json", layers),
        ("whatif_transit_off.json", whatif),
    ):
        with open(os.path.join(OUT, name), "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {name}")
    assert whatif["summary"]["mode_shares"]["bus"] == 0.0
    assert whatif["summary"]["mode_shares"]["T"] == 0.0
    print("bus and T shares are zero in the transit-off what-if")


if __name__ == "__main__":
    main()
