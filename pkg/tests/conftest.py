import json
import os
from pathlib import Path

import pytest

from relosim import simulation

REPO = Path(__file__).resolve().parent.parent
SMALLTOWN = REPO / "src" / "relosim" / "data" / "smalltown"


@pytest.fixture(scope="session")
def smalltown_dir() -> Path:
    return SMALLTOWN


@pytest.fixture(scope="session")
def smalltown_scenario():
    return simulation.load_scenario(str(SMALLTOWN / "scenario.yaml"))


@pytest.fixture(scope="session")
def smalltown_world(smalltown_scenario):
    return simulation.World.from_scenario(smalltown_scenario)


def write_bundle(dirpath, block_groups=None, vacancies=None, buildings=None,
                 transit=None, roads=None, crs="local-meters"):
    """Write a five-layer bundle from feature lists (helpers for tiny tests)."""
    os.makedirs(dirpath, exist_ok=True)
    layers = {
        "block_groups.geojson": block_groups or [],
        "vacancies.geojson": vacancies or [],
        "buildings.geojson": buildings or [],
        "transit.geojson": transit or [],
        "roads.geojson": roads or [],
    }
    for name, feats in layers.items():
        with open(os.path.join(dirpath, name), "w") as fh:
            json.dump({"type": "FeatureCollection", "crs": crs, "features": feats}, fh)
    return dirpath


def square_feature(x0, y0, side, properties, fid=None):
    ring = [[x0, y0], [x0 + side, y0], [x0 + side, y0 + side], [x0, y0 + side], [x0, y0]]
    feat = {"type": "Feature", "properties": properties,
            "geometry": {"type": "Polygon", "coordinates": [ring]}}
    if fid is not None:
        feat["id"] = fid
    return feat


def line_feature(coords, modes):
    return {"type": "Feature", "properties": {"mobility_allowed": list(modes)},
            "geometry": {"type": "LineString", "coordinates": [list(c) for c in coords]}}


def point_feature(x, y, mode):
    return {"type": "Feature", "properties": {"mode": mode},
            "geometry": {"type": "Point", "coordinates": [x, y]}}


@pytest.fixture
def tiny_bundle(tmp_path):
    """One block group, two buildings (one residential), three road edges."""
    bg = square_feature(0, 0, 1000, {"GEOID": "G1", "city": "town",
                                     "population": {"low": 5, "high": 5}})
    vac = {"type": "Feature", "geometry": None,
           "properties": {"GEOID": "G1", "vacant_spaces": 10, "rent_vacancy": 1000.0}}
    res = square_feature(100, 100, 50, {"associated_block_group": "G1",
                                        "vacant_spaces": 4, "rent_vacancy": 900.0,
                                        "usage": "residential"}, fid="R1")
    work = square_feature(700, 700, 50, {"associated_block_group": "G1",
                                         "vacant_spaces": 0, "rent_vacancy": 0.0,
                                         "usage": "nonresidential"}, fid="W1")
    roads = [line_feature([(0, 0), (500, 0), (500, 500), (1000, 1000)],
                          ["walk", "bike", "car", "bus"])]
    return write_bundle(tmp_path / "bundle", block_groups=[bg], vacancies=[vac],
                        buildings=[res, work], roads=roads)
