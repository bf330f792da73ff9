"""Geographic layers, the mode-filtered road network, and travel queries.

A geography bundle is a directory of five JSON feature files (GeoJSON-style,
one per layer): ``block_groups``, ``vacancies``, ``buildings``, ``transit``
and ``roads``.  Every file declares a ``crs`` member; everything is
reprojected once at load into a local planar frame in meters.  The loaded
model is immutable afterwards and safe for concurrent reads; routing
queries are pure functions.
"""

import heapq
import json
import math
import os
from dataclasses import dataclass, field

from shapely.geometry import Point, Polygon

from .errors import UnreachableError, ValidationError

LAYER_FILES = {
    "block_groups": "block_groups.geojson",
    "vacancies": "vacancies.geojson",
    "buildings": "buildings.geojson",
    "transit": "transit.geojson",
    "roads": "roads.geojson",
}

EARTH_RADIUS_M = 6371008.8

RESIDENTIAL = "residential"
NONRESIDENTIAL = "nonresidential"


@dataclass
class BlockGroup:
    """Census block group: the coarse housing unit (outskirts living option)."""

    geoid: str
    geometry: Polygon
    city: str
    vacant_spaces: int
    rent_vacancy: float
    population: dict
    has_T: bool = False
    has_bus: bool = False

    @property
    def centroid(self):
        c = self.geometry.centroid
        return (c.x, c.y)


@dataclass
class Building:
    """Fine-grained housing/workplace unit inside the study area."""

    building_id: str
    geometry: Polygon
    associated_block_group: str
    vacant_spaces: int
    rent_vacancy: float
    usage: str  # RESIDENTIAL or NONRESIDENTIAL

    @property
    def centroid(self):
        c = self.geometry.centroid
        return (c.x, c.y)


@dataclass(frozen=True)
class Dwelling:
    """A housing slot: either inside a Building or pooled at block-group level.

    ``rent`` is the container's rent at assignment time (kept for the agent
    record; scoring always reads the container's current rent).
    """

    kind: str  # "building" | "block_group"
    ref: str
    rent: float


@dataclass
class Edge:
    u: int
    v: int
    length: float
    modes: frozenset
    source: str = "roads"  # originating layer, kept so save round-trips


@dataclass
class TransitStop:
    mode: str  # "T" | "bus"
    x: float
    y: float


class RoadNetwork:
    """Undirected graph over which per-mode shortest paths are computed."""

    def __init__(self):
        self.node_xy = []  # node id -> (x, y)
        self._node_index = {}  # (x, y) -> node id
        self.edges = []
        self._adj = {}  # node -> list of (neighbor, edge index)

    def add_node(self, x: float, y: float) -> int:
        key = (x, y)
        nid = self._node_index.get(key)
        if nid is None:
            nid = len(self.node_xy)
            self.node_xy.append(key)
            self._node_index[key] = nid
            self._adj[nid] = []
        return nid

    def add_edge(self, u: int, v: int, modes, source: str = "roads") -> Edge:
        ax, ay = self.node_xy[u]
        bx, by = self.node_xy[v]
        length = math.hypot(bx - ax, by - ay)
        edge = Edge(u, v, length, frozenset(modes), source)
        idx = len(self.edges)
        self.edges.append(edge)
        self._adj[u].append((v, idx))
        self._adj[v].append((u, idx))
        return edge

    def nearest_node(self, point, mode: str | None = None) -> int:
        """Snap a point to the nearest node; with ``mode``, only nodes that
        touch at least one edge allowing that mode count.  Ties break on the
        smaller node id."""
        x, y = point
        best = None
        best_d = None
        for nid, (nx, ny) in enumerate(self.node_xy):
            if mode is not None and not any(
                mode in self.edges[ei].modes for _, ei in self._adj[nid]
            ):
                continue
            d = (nx - x) ** 2 + (ny - y) ** 2
            if best_d is None or d < best_d:
                best, best_d = nid, d
        if best is None:
            raise UnreachableError(f"no network node offers mode {mode!r}")
        return best

    def route(self, origin, destination, mode: str):
        """Shortest path by length over edges allowing ``mode``.

        Among equal-length paths the one with the smallest node-id sequence
        wins.  Returns (distance_m, [Edge, ...]); identical snapped endpoints
        give (0.0, []).  Raises UnreachableError when the mode's subgraph
        does not connect the endpoints.
        """
        src = self.nearest_node(origin, mode)
        dst = self.nearest_node(destination, mode)
        if src == dst:
            return 0.0, []
        # Dijkstra keyed on (distance, node sequence): the first pop of a node
        # carries its shortest distance with the lexicographically smallest
        # path, which is the documented tie-break.
        heap = [(0.0, (src,), [])]
        done = set()
        while heap:
            dist, path, edge_idxs = heapq.heappop(heap)
            node = path[-1]
            if node in done:
                continue
            done.add(node)
            if node == dst:
                return dist, [self.edges[i] for i in edge_idxs]
            for nb, ei in self._adj[node]:
                if nb in done or mode not in self.edges[ei].modes:
                    continue
                heapq.heappush(
                    heap, (dist + self.edges[ei].length, path + (nb,), edge_idxs + [ei])
                )
        raise UnreachableError(f"unreachable by mode {mode!r}")

    def distances_from(self, source: int, mode: str) -> dict:
        """Plain Dijkstra distances from a node over the mode's subgraph."""
        dist = {source: 0.0}
        heap = [(0.0, source)]
        while heap:
            d, node = heapq.heappop(heap)
            if d > dist.get(node, math.inf):
                continue
            for nb, ei in self._adj[node]:
                edge = self.edges[ei]
                if mode not in edge.modes:
                    continue
                nd = d + edge.length
                if nd < dist.get(nb, math.inf):
                    dist[nb] = nd
                    heapq.heappush(heap, (nd, nb))
        return dist


@dataclass
class GeoModel:
    """Validated, cross-referenced in-memory geography."""

    block_groups: dict  # geoid -> BlockGroup, in file order
    buildings: dict  # building_id -> Building, in file order
    network: RoadNetwork
    transit_stops: list = field(default_factory=list)

    def block_group_of(self, dwelling_or_building) -> BlockGroup:
        if isinstance(dwelling_or_building, Building):
            return self.block_groups[dwelling_or_building.associated_block_group]
        if isinstance(dwelling_or_building, Dwelling):
            if dwelling_or_building.kind == "building":
                b = self.buildings[dwelling_or_building.ref]
                return self.block_groups[b.associated_block_group]
            return self.block_groups[dwelling_or_building.ref]
        return self.block_groups[dwelling_or_building]

    def dwelling_origin(self, dwelling: Dwelling):
        """Commute origin: building centroid, or the block-group centroid for
        outskirts dwellings."""
        if dwelling.kind == "building":
            return self.buildings[dwelling.ref].centroid
        return self.block_groups[dwelling.ref].centroid


def travel_time(distance_m: float, mode) -> float:
    """Commute minutes: per-mode waiting plus distance at the mode's mean
    speed.  Private modes carry zero waiting time in the modes table."""
    return mode.waiting_min + 60.0 * (distance_m / 1000.0) / mode.mean_speed_kmh


# ---------------------------------------------------------------------------
# Loading


def _read_layer(bundle_dir: str, layer: str, problems: list):
    path = os.path.join(bundle_dir, LAYER_FILES[layer])
    if not os.path.exists(path):
        problems.append(f"{LAYER_FILES[layer]}: missing layer file")
        return None
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            problems.append(f"{LAYER_FILES[layer]}: not valid JSON ({exc})")
            return None
    if "crs" not in doc:
        problems.append(f"{LAYER_FILES[layer]}: missing required crs member")
        return None
    return doc


def _is_local(crs: str) -> bool:
    return crs.lower().startswith("local")


class _Projector:
    """Equirectangular projection into meters around a fixed origin.

    Identity for already-planar ("local") layers.  All files in a bundle
    must agree on the geographic/planar split; mixing is rejected upstream.
    """

    def __init__(self, lon0: float, lat0: float):
        self.lon0 = lon0
        self.lat0 = lat0
        self._coslat = math.cos(math.radians(lat0))

    def xy(self, lon: float, lat: float):
        x = math.radians(lon - self.lon0) * EARTH_RADIUS_M * self._coslat
        y = math.radians(lat - self.lat0) * EARTH_RADIUS_M
        return (x, y)


def _project_ring(ring, proj):
    if proj is None:
        return [(float(x), float(y)) for x, y in ring]
    return [proj.xy(float(x), float(y)) for x, y in ring]


def _polygon(feature, layer_name: str, fid: str, proj, problems: list):
    geom = feature.get("geometry")
    if not geom or geom.get("type") != "Polygon":
        problems.append(
            f"{layer_name}: feature {fid}: expected Polygon geometry, "
            f"got {geom.get('type') if geom else None}"
        )
        return None
    rings = [_project_ring(r, proj) for r in geom["coordinates"]]
    return Polygon(rings[0], rings[1:])


def load_geography(bundle_dir: str) -> GeoModel:
    """Load and validate the five-layer bundle; build the routing graph.

    Transit stops fold into the containing block group's has_T/has_bus flags,
    and transit line features become network edges tagged with their own
    allowed modes.  Raises ValidationError listing every problem found.
    """
    problems: list = []
    docs = {layer: _read_layer(bundle_dir, layer, problems) for layer in LAYER_FILES}
    if problems:
        raise ValidationError(problems)

    crss = {layer: doc["crs"] for layer, doc in docs.items()}
    local = {_is_local(c) for c in crss.values()}
    if len(local) > 1:
        raise ValidationError(
            ["mixed CRS across layers without a shared projection: "
             + ", ".join(f"{k}={v}" for k, v in sorted(crss.items()))]
        )
    proj = None
    if not local.pop():
        for layer, crs in crss.items():
            if crs.upper() != "EPSG:4326":
                problems.append(f"{LAYER_FILES[layer]}: unsupported crs {crs!r}")
        if problems:
            raise ValidationError(problems)
        lons, lats = [], []
        for feat in docs["block_groups"].get("features", []):
            geom = feat.get("geometry") or {}
            for ring in geom.get("coordinates", []):
                for lon, lat in ring:
                    lons.append(lon)
                    lats.append(lat)
        if not lons:
            raise ValidationError(["block_groups layer has no coordinates to project"])
        proj = _Projector(sum(lons) / len(lons), sum(lats) / len(lats))

    # Block groups
    block_groups: dict = {}
    for feat in docs["block_groups"].get("features", []):
        props = feat.get("properties", {})
        geoid = props.get("GEOID")
        if geoid is None:
            problems.append("block_groups: feature without GEOID")
            continue
        if geoid in block_groups:
            problems.append(f"block_groups: duplicate GEOID {geoid}")
            continue
        poly = _polygon(feat, "block_groups", geoid, proj, problems)
        if poly is None:
            continue
        population = {str(k): int(v) for k, v in (props.get("population") or {}).items()}
        if any(v < 0 for v in population.values()):
            problems.append(f"block_groups: {geoid}: negative population count")
        block_groups[geoid] = BlockGroup(
            geoid=geoid,
            geometry=poly,
            city=str(props.get("city", "")),
            vacant_spaces=0,
            rent_vacancy=0.0,
            population=population,
            has_T=bool(props.get("has_T", False)),
            has_bus=bool(props.get("has_bus", False)),
        )

    # Vacancies join onto block groups by GEOID
    for feat in docs["vacancies"].get("features", []):
        props = feat.get("properties", {})
        geoid = props.get("GEOID")
        if geoid not in block_groups:
            problems.append(f"vacancies: unknown GEOID {geoid}")
            continue
        bg = block_groups[geoid]
        bg.vacant_spaces = int(props.get("vacant_spaces", 0))
        bg.rent_vacancy = float(props.get("rent_vacancy", 0.0))
        if bg.vacant_spaces < 0:
            problems.append(f"vacancies: {geoid}: vacant_spaces < 0")
        if bg.vacant_spaces > 0 and bg.rent_vacancy <= 0:
            problems.append(f"vacancies: {geoid}: rent_vacancy must be > 0 when vacancies exist")

    # Buildings
    buildings: dict = {}
    for feat in docs["buildings"].get("features", []):
        props = feat.get("properties", {})
        bid = str(feat.get("id", props.get("building_id", "")))
        if not bid:
            problems.append("buildings: feature without id")
            continue
        if bid in buildings:
            problems.append(f"buildings: duplicate id {bid}")
            continue
        poly = _polygon(feat, "buildings", bid, proj, problems)
        if poly is None:
            continue
        abg = props.get("associated_block_group")
        if abg not in block_groups:
            problems.append(f"buildings: {bid}: associated_block_group {abg!r} not found")
            continue
        usage = props.get("usage", RESIDENTIAL)
        if usage not in (RESIDENTIAL, NONRESIDENTIAL):
            problems.append(f"buildings: {bid}: unknown usage {usage!r}")
            continue
        vacant = int(props.get("vacant_spaces", 0))
        rent = float(props.get("rent_vacancy", 0.0))
        if usage == NONRESIDENTIAL and vacant != 0:
            # Nonresidential space never houses agents.
            problems.append(f"buildings: {bid}: nonresidential building with vacant_spaces > 0")
            continue
        if vacant > 0 and rent <= 0:
            problems.append(f"buildings: {bid}: rent_vacancy must be > 0 when vacancies exist")
        buildings[bid] = Building(
            building_id=bid,
            geometry=poly,
            associated_block_group=abg,
            vacant_spaces=vacant,
            rent_vacancy=rent,
            usage=usage,
        )

    # Road network: roads layer first, then transit line features
    network = RoadNetwork()
    for layer, source in (("roads", "roads"), ("transit", "transit")):
        for feat in docs[layer].get("features", []):
            geom = feat.get("geometry") or {}
            if geom.get("type") != "LineString":
                continue
            props = feat.get("properties", {})
            modes = props.get("mobility_allowed")
            if not modes:
                problems.append(f"{layer}: line feature without mobility_allowed")
                continue
            coords = _project_ring(geom["coordinates"], proj)
            for a, b in zip(coords, coords[1:]):
                u = network.add_node(*a)
                v = network.add_node(*b)
                if u == v:
                    problems.append(f"{layer}: zero-length segment at {a}")
                    continue
                network.add_edge(u, v, modes, source)

    # Transit stops set block-group flags
    transit_stops = []
    for feat in docs["transit"].get("features", []):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Point":
            continue
        props = feat.get("properties", {})
        stop_mode = props.get("mode")
        if stop_mode not in ("T", "bus"):
            problems.append(f"transit: stop with unknown mode {stop_mode!r}")
            continue
        x, y = _project_ring([geom["coordinates"]], proj)[0]
        transit_stops.append(TransitStop(stop_mode, x, y))
        pt = Point(x, y)
        for bg in block_groups.values():
            if bg.geometry.intersects(pt):
                if stop_mode == "T":
                    bg.has_T = True
                else:
                    bg.has_bus = True

    for edge in network.edges:
        if edge.length <= 0:
            problems.append("roads: edge with non-positive length")

    if problems:
        raise ValidationError(problems)
    return GeoModel(block_groups, buildings, network, transit_stops)


# ---------------------------------------------------------------------------
# Saving (the model reloads identically from its own output)


def _feature(geometry, properties, fid=None):
    feat = {"type": "Feature", "properties": properties, "geometry": geometry}
    if fid is not None:
        feat["id"] = fid
    return feat


def _polygon_geometry(poly: Polygon):
    rings = [list(map(list, poly.exterior.coords))]
    rings += [list(map(list, ring.coords)) for ring in poly.interiors]
    return {"type": "Polygon", "coordinates": rings}


def save_geography(model: GeoModel, out_dir: str) -> None:
    """Serialize a loaded model back into a five-layer bundle (meters CRS)."""
    os.makedirs(out_dir, exist_ok=True)

    def write(layer, features):
        doc = {"type": "FeatureCollection", "crs": "local-meters", "features": features}
        with open(os.path.join(out_dir, LAYER_FILES[layer]), "w") as fh:
            json.dump(doc, fh, indent=1)

    write(
        "block_groups",
        [
            _feature(
                _polygon_geometry(bg.geometry),
                {
                    "GEOID": bg.geoid,
                    "city": bg.city,
                    "population": bg.population,
                    "has_T": bg.has_T,
                    "has_bus": bg.has_bus,
                },
            )
            for bg in model.block_groups.values()
        ],
    )
    write(
        "vacancies",
        [
            _feature(
                None,
                {
                    "GEOID": bg.geoid,
                    "vacant_spaces": bg.vacant_spaces,
                    "rent_vacancy": bg.rent_vacancy,
                },
            )
            for bg in model.block_groups.values()
        ],
    )
    write(
        "buildings",
        [
            _feature(
                _polygon_geometry(b.geometry),
                {
                    "associated_block_group": b.associated_block_group,
                    "vacant_spaces": b.vacant_spaces,
                    "rent_vacancy": b.rent_vacancy,
                    "usage": b.usage,
                },
                fid=b.building_id,
            )
            for b in model.buildings.values()
        ],
    )

    def line_features(source):
        feats = []
        for edge in model.network.edges:
            if edge.source != source:
                continue
            a = model.network.node_xy[edge.u]
            b = model.network.node_xy[edge.v]
            feats.append(
                _feature(
                    {"type": "LineString", "coordinates": [list(a), list(b)]},
                    {"mobility_allowed": sorted(edge.modes)},
                )
            )
        return feats

    transit_feats = [
        _feature({"type": "Point", "coordinates": [s.x, s.y]}, {"mode": s.mode})
        for s in model.transit_stops
    ] + line_features("transit")
    write("transit", transit_feats)
    write("roads", line_features("roads"))
