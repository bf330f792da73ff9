"""Generate the bundled `smalltown` synthetic fixture.

Writes the five-layer geography bundle, the four tabular files, the scenario
document, and (by running the scenario's default criteria to equilibrium)
the observed-data tables shipped for the calibration demo.

Layout: a 4x3 grid of block groups, 1500 m x 1300 m each.  The middle two
columns are the fine-grained area ("centreville"): 40 buildings, of which 10
nonresidential workplaces cluster in the two central block groups.  The
outer columns ("edgewater") offer block-group level housing only.  A rail
line with three stations runs along the central row; bus stops cover a
cross-shaped subset of block groups.

Housing supply is deliberately generous (roughly three slots per agent) and
the two cities' rent bands do not overlap; both choices keep the simulated
distributions smooth functions of the behavioral weights, which the
calibration recovery harness depends on.

Run from the repo root after installing the package:

    python3 tools/make_smalltown.py
"""

import json
import os
import sys

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "relosim", "data", "smalltown")

BG_W, BG_H = 1500.0, 1300.0
COLS, ROWS = 4, 3
INNER_COLS = (1, 2)

PROFILES = [
    # profile_id, proportion, p_car, p_bike
    ("<$25,000", 0.10, 0.25, 0.30),
    ("$25,000-$44,999", 0.14, 0.40, 0.35),
    ("$45,000-$59,999", 0.16, 0.55, 0.40),
    ("$60,000-$99,999", 0.24, 0.65, 0.45),
    ("$100,000-$124,999", 0.14, 0.75, 0.45),
    ("$125,000-$149,999", 0.10, 0.85, 0.40),
    ("$150,000-$199,999", 0.07, 0.90, 0.35),
    ("$200,000+", 0.05, 0.95, 0.30),
]

# Default criteria: the three middle rows reproduce the published synthetic
# weighting tables verbatim; the others extend the same gradients.
HOUSING = [
    ("<$25,000", -0.9, 0.2, 0.2, "edgewater"),
    ("$25,000-$44,999", -0.85, 0.1, 0.3, "edgewater"),
    ("$45,000-$59,999", -0.8, 0.0, 0.4, "centreville"),
    ("$60,000-$99,999", -0.6, -0.3, 0.5, "centreville"),
    ("$100,000-$124,999", -0.5, -0.5, 0.6, "centreville"),
    ("$125,000-$149,999", -0.45, -0.5, 0.65, "centreville"),
    ("$150,000-$199,999", -0.4, -0.6, 0.7, "centreville"),
    ("$200,000+", -0.3, -0.7, 0.8, "centreville"),
]

MOBILITY = [
    ("<$25,000", -0.95, -0.6, -0.5, 0.5),
    ("$25,000-$44,999", -0.9, -0.7, -0.6, 0.6),
    ("$45,000-$59,999", -0.8, -0.8, -0.7, 0.7),
    ("$60,000-$99,999", -0.7, -0.85, -0.75, 0.8),
    ("$100,000-$124,999", -0.6, -0.9, -0.8, 0.95),
    ("$125,000-$149,999", -0.55, -0.9, -0.8, 0.9),
    ("$150,000-$199,999", -0.5, -0.95, -0.85, 0.95),
    ("$200,000+", -0.45, -0.95, -0.9, 1.0),
]

MODES = [
    # mode_id, price_per_km, mean_speed_kmh, waiting_min, difficulty, pattern, access
    # price/speed/pattern carry the published mobility-feature values; waiting
    # time and difficulty are fixture configuration.
    ("walk", 0.0, 5.0, 0.0, 0.2, 0.5, "walk"),
    ("bike", 0.01, 5.0, 0.0, 0.4, 0.5, "private_bike"),
    ("bus", 0.1, 20.0, 7.0, 0.26666666666666666, 0.4, "public_bus"),
    ("T", 0.12, 35.0, 6.0, 0.3, 0.45, "public_T"),
    ("car", 0.32, 30.0, 0.0, 0.1, 1.0, "private_car"),
]

BUS_BGS = {(0, 1), (1, 1), (2, 1), (3, 1), (1, 0), (2, 0), (1, 2), (2, 2)}

# Outer block-group housing: (vacant, rent); rents stay below every
# centreville building so the two cities' bands never overlap.
OUTER_SUPPLY = {
    (0, 0): (780, 1000.0),
    (0, 1): (960, 1150.0),
    (0, 2): (720, 950.0),
    (3, 0): (840, 1100.0),
    (3, 1): (900, 1250.0),
    (3, 2): (660, 900.0),
}


def geoid(c, r):
    return f"BG-{c}{r}"


def bg_rect(c, r):
    x0, y0 = c * BG_W, r * BG_H
    return [[x0, y0], [x0 + BG_W, y0], [x0 + BG_W, y0 + BG_H], [x0, y0 + BG_H], [x0, y0]]


def square(x, y, side=40.0):
    return [[x, y], [x + side, y], [x + side, y + side], [x, y + side], [x, y]]


def feature(geometry, properties, fid=None):
    f = {"type": "Feature", "properties": properties, "geometry": geometry}
    if fid is not None:
        f["id"] = fid
    return f


def collection(features):
    return {"type": "FeatureCollection", "crs": "local-meters", "features": features}


def build_block_groups(rng):
    feats = []
    mixes = {
        "outer": np.array([0.18, 0.18, 0.17, 0.17, 0.10, 0.08, 0.07, 0.05]),
        "inner_mid": np.array([0.05, 0.07, 0.10, 0.20, 0.15, 0.15, 0.15, 0.13]),
        "inner_edge": np.array([0.10, 0.12, 0.14, 0.22, 0.14, 0.12, 0.09, 0.07]),
    }
    for c in range(COLS):
        for r in range(ROWS):
            if c in INNER_COLS:
                city = "centreville"
                mix = mixes["inner_mid"] if r == 1 else mixes["inner_edge"]
            else:
                city = "edgewater"
                mix = mixes["outer"]
            total = int(rng.integers(250, 500))
            counts = np.floor(mix * total).astype(int)
            rest = total - counts.sum()
            order = np.argsort(-(mix * total - counts))
            for i in order[:rest]:
                counts[i] += 1
            population = {PROFILES[i][0]: int(counts[i]) for i in range(len(PROFILES))}
            feats.append(
                feature(
                    {"type": "Polygon", "coordinates": [bg_rect(c, r)]},
                    {"GEOID": geoid(c, r), "city": city, "population": population},
                )
            )
    return collection(feats)


def build_vacancies():
    feats = []
    for c in range(COLS):
        for r in range(ROWS):
            vacant, rent = OUTER_SUPPLY.get((c, r), (0, 0.0))
            feats.append(
                feature(None, {"GEOID": geoid(c, r), "vacant_spaces": vacant,
                               "rent_vacancy": rent})
            )
    return collection(feats)


def build_buildings(rng):
    feats = []
    # Workplaces: 6 in BG-11, 4 in BG-21
    spots_w = [
        (1800, 1600), (2100, 1600), (2400, 1600), (1800, 2100), (2100, 2100), (2400, 2100),
        (3200, 1600), (3500, 1600), (3200, 2100), (3500, 2100),
    ]
    for i, (x, y) in enumerate(spots_w, start=1):
        bg = geoid(1, 1) if i <= 6 else geoid(2, 1)
        feats.append(
            feature(
                {"type": "Polygon", "coordinates": [square(x, y)]},
                {"associated_block_group": bg, "vacant_spaces": 0,
                 "rent_vacancy": 0.0, "usage": "nonresidential"},
                fid=f"B-{i:02d}",
            )
        )
    # Residential: 5 per inner block group; pricier along the central row
    offsets = [(200, 200), (650, 200), (1100, 200), (350, 900), (900, 900)]
    i = 11
    for c in INNER_COLS:
        for r in range(ROWS):
            base_rent = 2600.0 if r == 1 else 1700.0
            for dx, dy in offsets:
                rent = base_rent + float(rng.integers(0, 9)) * 100.0
                vacant = int(rng.integers(75, 168))
                feats.append(
                    feature(
                        {"type": "Polygon",
                         "coordinates": [square(c * BG_W + dx, r * BG_H + dy)]},
                        {"associated_block_group": geoid(c, r), "vacant_spaces": vacant,
                         "rent_vacancy": rent, "usage": "residential"},
                        fid=f"B-{i:02d}",
                    )
                )
                i += 1
    return collection(feats)


def build_roads():
    feats = []
    xs = [750.0 * i for i in range(9)]  # 0 .. 6000
    ys = [650.0 * j for j in range(7)]  # 0 .. 3900
    modes = ["walk", "bike", "bus", "car"]
    for y in ys:
        feats.append(
            feature({"type": "LineString", "coordinates": [[x, y] for x in xs]},
                    {"mobility_allowed": modes})
        )
    for x in xs:
        feats.append(
            feature({"type": "LineString", "coordinates": [[x, y] for y in ys]},
                    {"mobility_allowed": modes})
        )
    return collection(feats)


def build_transit():
    feats = []
    # Rail line with three stations along the central row (y = 1950)
    stations = [(2250.0, 1950.0), (3750.0, 1950.0), (5250.0, 1950.0)]
    feats.append(
        feature({"type": "LineString", "coordinates": [[x, y] for x, y in stations]},
                {"mobility_allowed": ["T"]})
    )
    for x, y in stations:
        feats.append(feature({"type": "Point", "coordinates": [x, y]}, {"mode": "T"}))
    for c, r in sorted(BUS_BGS):
        feats.append(
            feature(
                {"type": "Point", "coordinates": [c * BG_W + 750.0, r * BG_H + 650.0]},
                {"mode": "bus"},
            )
        )
    return collection(feats)


def write_json(name, doc):
    with open(os.path.join(OUT, name), "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def write_csv(name, header, rows):
    import csv

    with open(os.path.join(OUT, name), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(2026)

    write_json("block_groups.geojson", build_block_groups(rng))
    write_json("vacancies.geojson", build_vacancies())
    write_json("buildings.geojson", build_buildings(rng))
    write_json("roads.geojson", build_roads())
    write_json("transit.geojson", build_transit())

    write_csv("profiles.csv", ["profile_id", "proportion", "p_car", "p_bike"], PROFILES)
    write_csv(
        "housing_criteria.csv",
        ["profile_id", "w_price", "diversity_acceptance", "zone_weight", "preferred_zone"],
        HOUSING,
    )
    write_csv(
        "mobility_criteria.csv",
        ["profile_id", "w_price", "w_time", "w_difficulty", "w_pattern"],
        MOBILITY,
    )
    write_csv(
        "modes.csv",
        ["mode_id", "price_per_km", "mean_speed_kmh", "waiting_min", "difficulty",
         "pattern", "access"],
        MODES,
    )

    scenario = {
        "schema": "relosim-scenario/1",
        "geography": ".",
        "tables": {
            "profiles": "profiles.csv",
            "housing_criteria": "housing_criteria.csv",
            "mobility_criteria": "mobility_criteria.csv",
            "modes": "modes.csv",
        },
        "n_agents": 2000,
        "seed": 42,
        "consts": {"c_ref": 10.0, "t_ref": 60.0, "r_ref": 4000.0},
        "convergence": {"epsilon": 0.01, "window": 3, "max_iterations": 500},
        "interventions": [],
        "calibration": {
            "step_size": 0.15,
            "max_evaluations": 3000,
            "restarts": 5,
            "seed": 7,
            "observed_housing": "observed_housing.csv",
            "observed_modes": "observed_modes.csv",
        },
    }
    import yaml

    with open(os.path.join(OUT, "scenario.yaml"), "w") as fh:
        yaml.safe_dump(scenario, fh, sort_keys=False)

    # Observed data: equilibrium of the default criteria above.
    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
    from relosim import calibration, simulation

    sc = simulation.load_scenario(os.path.join(OUT, "scenario.yaml"))
    world = simulation.World.from_scenario(sc)
    state = simulation.run_to_convergence(world)
    print(f"default-criteria run: converged={state.converged} iterations={state.iteration} "
          f"movers_last={state.movers_last}")
    observed = calibration.generate_observed(state)
    calibration.save_observed(
        observed,
        os.path.join(OUT, "observed_housing.csv"),
        os.path.join(OUT, "observed_modes.csv"),
    )
    shares = {m: round(100 * s, 2) for m, s in
              zip(world.mode_ids, calibration._mode_share_vector(state))}
    print(f"mode shares [%]: {shares}")
    print(f"block groups with residents: {len(observed.housing)}")


if __name__ == "__main__":
    main()
