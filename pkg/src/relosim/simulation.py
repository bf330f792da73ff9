"""Scenario loading, the relocation loop, interventions, and summaries.

A Scenario is the full recipe for a run: geography bundle, tabular files,
agent count, seed, normalization constants, convergence settings, and an
optional intervention list.  Loading a scenario materializes an immutable
World (geography, criteria defaults, modes, and the per-mode travel tables);
simulation state then lives in flat arrays updated by the engine module.

Identical scenario + seed gives identical histories, final states, and
summaries; all randomness is drawn from named substreams of the one seed.
"""

import copy
import csv
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from . import engine
from .choice import NormalizationConstants
from .errors import EvictionError, UnreachableError, ValidationError
from .geodata import NONRESIDENTIAL, Dwelling, GeoModel, load_geography
from .population import (
    Person,
    load_housing_criteria,
    load_mobility_criteria,
    load_modes,
    load_profiles,
    mode_sort_key,
    synthesize_population,
)
from .rng import substream

SCENARIO_SCHEMA = "relosim-scenario/1"
SUMMARY_SCHEMA = "relosim-summary/1"
STATE_SCHEMA = "relosim-state/1"

BLOCK_GROUP = "block_group"
BUILDING = "building"

INTERVENTION_KINDS = ("set_rent", "add_vacancies", "remove_vacancies", "set_transit_flag")


@dataclass
class Convergence:
    """Stop when the mover fraction stays below epsilon for `window`
    consecutive iterations, giving up (flagged) after max_iterations."""

    epsilon: float = 0.01
    window: int = 3
    max_iterations: int = 500

    def validate(self):
        problems = []
        if not (0.0 < self.epsilon <= 1.0):
            problems.append(f"convergence.epsilon={self.epsilon} outside (0, 1]")
        if self.window < 1:
            problems.append("convergence.window must be >= 1")
        if self.max_iterations < 1:
            problems.append("convergence.max_iterations must be >= 1")
        if problems:
            raise ValidationError(problems)
        return self


@dataclass
class Intervention:
    kind: str
    target: str  # geoid, building id, or "*" for every block group
    value: object = None
    flag: str | None = None  # set_transit_flag: "has_T" | "has_bus"

    @classmethod
    def from_dict(cls, doc: dict) -> "Intervention":
        kind = doc.get("kind")
        if kind not in INTERVENTION_KINDS:
            raise ValidationError([f"unknown intervention kind {kind!r}"])
        iv = cls(kind=kind, target=str(doc.get("target", "")),
                 value=doc.get("value"), flag=doc.get("flag"))
        if kind == "set_transit_flag" and iv.flag not in ("has_T", "has_bus"):
            raise ValidationError([f"set_transit_flag needs flag has_T or has_bus, got {iv.flag!r}"])
        return iv

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, "target": self.target, "value": self.value}
        if self.flag is not None:
            doc["flag"] = self.flag
        return doc


@dataclass
class Scenario:
    """File references plus run parameters; fully determines a run."""

    geography_dir: str
    tables: dict  # profiles/housing_criteria/mobility_criteria/modes -> path
    n_agents: int
    seed: int
    consts: NormalizationConstants = field(default_factory=NormalizationConstants)
    convergence: Convergence = field(default_factory=Convergence)
    interventions: list = field(default_factory=list)
    calibration: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCENARIO_SCHEMA,
            "geography": self.geography_dir,
            "tables": dict(self.tables),
            "n_agents": self.n_agents,
            "seed": self.seed,
            "consts": {"c_ref": self.consts.c_ref, "t_ref": self.consts.t_ref,
                       "r_ref": self.consts.r_ref},
            "convergence": {"epsilon": self.convergence.epsilon,
                            "window": self.convergence.window,
                            "max_iterations": self.convergence.max_iterations},
            "interventions": [iv.to_dict() for iv in self.interventions],
            "calibration": dict(self.calibration),
        }

    def apply_overrides(self, overrides: dict) -> "Scenario":
        """Return a copy with CLI-style key=value overrides applied."""
        sc = copy.deepcopy(self)
        for key, raw in overrides.items():
            if key == "seed":
                sc.seed = int(raw)
            elif key == "n_agents":
                sc.n_agents = int(raw)
            elif key == "epsilon":
                sc.convergence.epsilon = float(raw)
            elif key == "window":
                sc.convergence.window = int(raw)
            elif key == "max_iterations":
                sc.convergence.max_iterations = int(raw)
            elif key in ("c_ref", "t_ref", "r_ref"):
                sc.consts = replace(sc.consts, **{key: float(raw)})
            elif key in ("step_size", "max_evaluations", "restarts",
                         "calibration_seed", "alt_seeds"):
                sc.calibration[key] = float(raw) if key == "step_size" else int(raw)
            else:
                raise ValidationError([f"unknown override key {key!r}"])
        sc.convergence.validate()
        return sc


def scenario_from_dict(doc: dict, base_dir: str) -> Scenario:
    problems = []
    for req in ("geography", "tables", "n_agents", "seed"):
        if req not in doc:
            problems.append(f"scenario: missing required key {req!r}")
    if problems:
        raise ValidationError(problems)
    tables = {}
    for name in ("profiles", "housing_criteria", "mobility_criteria", "modes"):
        rel = doc["tables"].get(name)
        if rel is None:
            problems.append(f"scenario: tables.{name} missing")
            continue
        tables[name] = os.path.normpath(os.path.join(base_dir, rel))
    if problems:
        raise ValidationError(problems)
    consts_doc = doc.get("consts", {})
    consts = NormalizationConstants(
        c_ref=float(consts_doc.get("c_ref", 10.0)),
        t_ref=float(consts_doc.get("t_ref", 60.0)),
        r_ref=float(consts_doc.get("r_ref", 4000.0)),
    )
    conv_doc = doc.get("convergence", {})
    convergence = Convergence(
        epsilon=float(conv_doc.get("epsilon", 0.01)),
        window=int(conv_doc.get("window", 3)),
        max_iterations=int(conv_doc.get("max_iterations", 500)),
    ).validate()
    n_agents = int(doc["n_agents"])
    if n_agents < 0:
        raise ValidationError(["scenario: n_agents must be >= 0"])
    calibration = dict(doc.get("calibration") or {})
    for key in ("observed_housing", "observed_modes"):
        if key in calibration:
            calibration[key] = os.path.normpath(os.path.join(base_dir, calibration[key]))
    return Scenario(
        geography_dir=os.path.normpath(os.path.join(base_dir, doc["geography"])),
        tables=tables,
        n_agents=n_agents,
        seed=int(doc["seed"]),
        consts=consts,
        convergence=convergence,
        interventions=[Intervention.from_dict(d) for d in doc.get("interventions") or []],
        calibration=calibration,
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValidationError([f"{path}: scenario document must be a mapping"])
    return scenario_from_dict(doc, os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# World: immutable, array-compiled view of geography + tables


class World:
    """Loaded geography and behavior tables, flattened for the engine.

    Units are indexed block groups first (bundle order), then residential
    buildings (bundle order).  All arrays are read-only by convention once
    built; interventions produce a new World via with_changes().
    """

    def __init__(self, model: GeoModel, profiles, housing_criteria, mobility_criteria,
                 modes, consts: NormalizationConstants, scenario: Scenario | None = None):
        self.model = model
        self.profiles = list(profiles)
        self.profile_ids = [p.profile_id for p in self.profiles]
        self.profile_index = {pid: i for i, pid in enumerate(self.profile_ids)}
        self.housing_criteria = dict(housing_criteria)
        self.mobility_criteria = dict(mobility_criteria)
        self.modes = dict(modes)
        self.modes_list = sorted(self.modes.values(), key=lambda m: mode_sort_key(m.mode_id))
        self.mode_ids = [m.mode_id for m in self.modes_list]
        self.mode_index = {mid: i for i, mid in enumerate(self.mode_ids)}
        self.consts = consts
        self.scenario = scenario
        self._check_criteria_cover_profiles()
        self._build_units()
        self._build_travel_tables()
        self._build_availability()
        max_count = int(self.capacity.sum() + self.background.sum()) + 2
        self.xlogx, self.logn = engine.log_tables(max_count)

    def _check_criteria_cover_profiles(self):
        problems = []
        for pid in self.profile_ids:
            if pid not in self.housing_criteria:
                problems.append(f"housing criteria missing profile {pid}")
            if pid not in self.mobility_criteria:
                problems.append(f"mobility criteria missing profile {pid}")
        for bg in self.model.block_groups.values():
            for pid in bg.population:
                if pid not in self.profile_index:
                    problems.append(f"block group {bg.geoid}: population profile {pid} not defined")
        if problems:
            raise ValidationError(problems)

    def _build_units(self):
        model = self.model
        n_p = len(self.profiles)
        self.bg_ids = list(model.block_groups.keys())
        self.bg_index = {g: i for i, g in enumerate(self.bg_ids)}
        unit_ids, unit_kind, unit_bg, cap, rent = [], [], [], [], []
        background_rows = []
        for geoid, bg in model.block_groups.items():
            unit_ids.append(geoid)
            unit_kind.append(BLOCK_GROUP)
            unit_bg.append(self.bg_index[geoid])
            cap.append(bg.vacant_spaces)
            rent.append(bg.rent_vacancy)
            row = np.zeros(n_p, dtype=np.int64)
            for pid, count in bg.population.items():
                row[self.profile_index[pid]] = count
            background_rows.append(row)
        for bid, b in model.buildings.items():
            if b.usage != NONRESIDENTIAL:
                unit_ids.append(bid)
                unit_kind.append(BUILDING)
                unit_bg.append(self.bg_index[b.associated_block_group])
                cap.append(b.vacant_spaces)
                rent.append(b.rent_vacancy)
                background_rows.append(np.zeros(n_p, dtype=np.int64))
        self.unit_ids = unit_ids
        self.unit_index = {uid: i for i, uid in enumerate(unit_ids)}
        self.unit_kind = unit_kind
        self.unit_bg = np.array(unit_bg, dtype=np.int64)
        self.capacity = np.array(cap, dtype=np.int64)
        self.rent = np.array(rent, dtype=np.float64)
        self.background = np.stack(background_rows) if background_rows else np.zeros((0, n_p), np.int64)
        self.n_units = len(unit_ids)
        # One entry per dwelling slot, grouped by unit; slot_offset[u] is the
        # first slot of unit u.
        self.slot_unit = np.repeat(np.arange(self.n_units, dtype=np.int64), self.capacity)
        self.slot_offset = np.concatenate(([0], np.cumsum(self.capacity)))[:-1]

        self.cities = sorted({bg.city for bg in model.block_groups.values()})
        city_index = {c: i for i, c in enumerate(self.cities)}
        self.unit_city = np.array(
            [city_index[model.block_groups[self.bg_ids[b]].city] for b in self.unit_bg],
            dtype=np.int64,
        )

        self.workplaces = [b for b in model.buildings.values() if b.usage == NONRESIDENTIAL]
        self.work_ids = [b.building_id for b in self.workplaces]
        self.work_index = {wid: i for i, wid in enumerate(self.work_ids)}
        self.work_bg = np.array(
            [self.bg_index[b.associated_block_group] for b in self.workplaces], dtype=np.int64
        )
        self.bg_has_bus = np.array([model.block_groups[g].has_bus for g in self.bg_ids], bool)
        self.bg_has_T = np.array([model.block_groups[g].has_T for g in self.bg_ids], bool)

    def _unit_origin(self, u: int):
        uid = self.unit_ids[u]
        if self.unit_kind[u] == BUILDING:
            return self.model.buildings[uid].centroid
        return self.model.block_groups[uid].centroid

    def _build_travel_tables(self):
        """Per-mode shortest-path distance from every unit to every workplace,
        then the derived trip time and cost tables."""
        net = self.model.network
        n_m, n_u, n_w = len(self.modes_list), self.n_units, len(self.workplaces)
        dist = np.full((n_m, n_u, n_w), np.inf)
        origins = [self._unit_origin(u) for u in range(n_u)]
        for mi, mode in enumerate(self.modes_list):
            try:
                unit_nodes = [net.nearest_node(pt, mode.mode_id) for pt in origins]
                work_nodes = [net.nearest_node(b.centroid, mode.mode_id) for b in self.workplaces]
            except UnreachableError:
                continue  # mode absent from every edge: stays unreachable
            for wi, wnode in enumerate(work_nodes):
                table = net.distances_from(wnode, mode.mode_id)
                for ui, unode in enumerate(unit_nodes):
                    d = table.get(unode)
                    if d is not None:
                        dist[mi, ui, wi] = d
        self.dist_tab = dist
        speed = np.array([m.mean_speed_kmh for m in self.modes_list])
        wait = np.array([m.waiting_min for m in self.modes_list])
        price = np.array([m.price_per_km for m in self.modes_list])
        km = dist / 1000.0
        self.time_tab = wait[:, None, None] + 60.0 * km / speed[:, None, None]
        self.cost_tab = price[:, None, None] * km

        if n_u and n_w:
            walk = [i for i, m in enumerate(self.modes_list) if m.access == "walk"]
            if not walk or not np.isfinite(dist[walk[0]]).all():
                raise ValidationError(
                    ["every housing unit must reach every workplace on foot; "
                     "check the roads layer and the walk mode"]
                )

    def _build_availability(self):
        """avail[ownership, mode, unit, workplace]; ownership packs
        (owns_car, owns_bike) as car*2 + bike."""
        n_m, n_u, n_w = len(self.modes_list), self.n_units, len(self.workplaces)
        avail = np.zeros((4, n_m, n_u, n_w), dtype=bool)
        unit_bus = self.bg_has_bus[self.unit_bg]
        unit_T = self.bg_has_T[self.unit_bg]
        work_bus = self.bg_has_bus[self.work_bg]
        work_T = self.bg_has_T[self.work_bg]
        for mi, mode in enumerate(self.modes_list):
            if mode.access == "walk":
                avail[:, mi] = True
            elif mode.access == "private_car":
                avail[2, mi] = avail[3, mi] = True
            elif mode.access == "private_bike":
                avail[1, mi] = avail[3, mi] = True
            elif mode.access == "public_bus":
                avail[:, mi] = (unit_bus[:, None] & work_bus[None, :])[None, :, :]
            elif mode.access == "public_T":
                avail[:, mi] = (unit_T[:, None] & work_T[None, :])[None, :, :]
        self.avail = avail

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "World":
        model = load_geography(scenario.geography_dir)
        profiles = load_profiles(scenario.tables["profiles"])
        housing = load_housing_criteria(scenario.tables["housing_criteria"])
        mobility = load_mobility_criteria(scenario.tables["mobility_criteria"])
        modes = load_modes(scenario.tables["modes"])
        world = cls(model, profiles, housing, mobility, modes, scenario.consts, scenario)
        if scenario.interventions:
            world = apply_interventions(world, scenario.interventions)
        return world

    # -- scoring tables -----------------------------------------------------

    def score_tables(self, housing_criteria=None, mobility_criteria=None):
        """Vectorized score tables for a criteria assignment.

        Returns (hs_static[p,u], m_best[p,o,u,w], mode_best_idx[p,o,u,w],
        divn[p]); m_best already maximizes the mode score over available,
        reachable modes, with the first (fixed-order) mode winning ties.
        """
        hc = housing_criteria or self.housing_criteria
        mc = mobility_criteria or self.mobility_criteria
        n_p = len(self.profiles)
        consts = self.consts

        w_price = np.array([mc[p].w_price for p in self.profile_ids])
        w_time = np.array([mc[p].w_time for p in self.profile_ids])
        w_diff = np.array([mc[p].w_difficulty for p in self.profile_ids])
        w_pat = np.array([mc[p].w_pattern for p in self.profile_ids])
        difficulty = np.array([m.difficulty for m in self.modes_list])
        pattern = np.array([m.pattern for m in self.modes_list])

        cost_n = np.minimum(self.cost_tab / consts.c_ref, 1.0)  # (M,U,W)
        time_n = np.minimum(self.time_tab / consts.t_ref, 1.0)
        msc = (
            w_price[:, None, None, None] * cost_n[None]
            + w_time[:, None, None, None] * time_n[None]
            + w_diff[:, None, None, None] * difficulty[None, :, None, None]
            + w_pat[:, None, None, None] * pattern[None, :, None, None]
        )  # (P,M,U,W)
        msc = np.where(np.isfinite(self.dist_tab)[None], msc, -np.inf)
        full = np.where(self.avail[None], msc[:, None], -np.inf)  # (P,O,M,U,W)
        m_best = full.max(axis=2)
        mode_best_idx = full.argmax(axis=2).astype(np.int64)

        wh_price = np.array([hc[p].w_price for p in self.profile_ids])
        zone_w = np.array([hc[p].zone_weight for p in self.profile_ids])
        city_index = {c: i for i, c in enumerate(self.cities)}
        pref = np.array([city_index.get(hc[p].preferred_zone, -1) for p in self.profile_ids])
        rent_n = np.minimum(self.rent / consts.r_ref, 1.0)
        in_zone = pref[:, None] == self.unit_city[None, :]
        hs_static = wh_price[:, None] * rent_n[None, :] + zone_w[:, None] * in_zone

        div_acc = np.array([hc[p].diversity_acceptance for p in self.profile_ids])
        log_k = math.log(n_p) if n_p > 1 else 0.0
        divn = div_acc / log_k if log_k > 0 else np.zeros(n_p)
        return hs_static, m_best, mode_best_idx, divn

    def available_mode_ids(self, owner: int, unit: int, work: int):
        mask = self.avail[owner, :, unit, work]
        return frozenset(m for m, ok in zip(self.mode_ids, mask) if ok)


# ---------------------------------------------------------------------------
# Interventions


def _resolve_targets(world: World, intervention: Intervention):
    if intervention.target == "*":
        if intervention.kind != "set_transit_flag":
            raise ValidationError([f"wildcard target only valid for set_transit_flag"])
        return list(range(len(world.bg_ids))), True
    if intervention.kind == "set_transit_flag":
        if intervention.target not in world.bg_index:
            raise ValidationError([f"intervention target {intervention.target!r}: unknown block group"])
        return [world.bg_index[intervention.target]], True
    if intervention.target not in world.unit_index:
        raise ValidationError([f"intervention target {intervention.target!r}: unknown unit"])
    return [world.unit_index[intervention.target]], False


def apply_interventions(world: World, interventions, occupied=None) -> "World":
    """Apply rent/vacancy/transit edits, returning a new World.

    ``occupied`` is the per-unit agent count when editing a running state;
    removing more vacancies than the unoccupied capacity of the target is an
    eviction and is rejected with the state untouched.
    """
    if occupied is None:
        occupied = np.zeros(world.n_units, dtype=np.int64)
    capacity = world.capacity.copy()
    rent = world.rent.copy()
    bg_bus = world.bg_has_bus.copy()
    bg_T = world.bg_has_T.copy()

    for iv in interventions:
        targets, is_bg = _resolve_targets(world, iv)
        if iv.kind == "set_rent":
            value = float(iv.value)
            if value <= 0:
                raise ValidationError([f"set_rent {iv.target}: rent must be > 0"])
            rent[targets[0]] = value
        elif iv.kind == "add_vacancies":
            value = int(iv.value)
            if value < 0:
                raise ValidationError([f"add_vacancies {iv.target}: value must be >= 0"])
            u = targets[0]
            capacity[u] += value
            if capacity[u] > 0 and rent[u] <= 0:
                raise ValidationError(
                    [f"add_vacancies {iv.target}: unit has no rent set; set_rent first"]
                )
        elif iv.kind == "remove_vacancies":
            value = int(iv.value)
            u = targets[0]
            unoccupied = int(capacity[u] - occupied[u])
            if value > unoccupied:
                raise EvictionError(
                    [f"remove_vacancies {iv.target}: removing {value} would evict residents "
                     f"(only {unoccupied} unoccupied)"]
                )
            capacity[u] -= value
        else:  # set_transit_flag
            value = bool(iv.value)
            arr = bg_T if iv.flag == "has_T" else bg_bus
            for b in targets:
                arr[b] = value

    # Rebuild a model copy that mirrors the edits, then a fresh World.
    model = copy.copy(world.model)
    model.block_groups = dict(world.model.block_groups)
    model.buildings = dict(world.model.buildings)
    for u, uid in enumerate(world.unit_ids):
        base_vacant = int(capacity[u])
        if world.unit_kind[u] == BLOCK_GROUP:
            bg = model.block_groups[uid]
            model.block_groups[uid] = replace(
                bg, vacant_spaces=base_vacant, rent_vacancy=float(rent[u])
            )
        else:
            b = model.buildings[uid]
            model.buildings[uid] = replace(
                b, vacant_spaces=base_vacant, rent_vacancy=float(rent[u])
            )
    for bi, geoid in enumerate(world.bg_ids):
        bg = model.block_groups[geoid]
        if bg.has_bus != bool(bg_bus[bi]) or bg.has_T != bool(bg_T[bi]):
            model.block_groups[geoid] = replace(
                bg, has_bus=bool(bg_bus[bi]), has_T=bool(bg_T[bi])
            )
    return World(model, world.profiles, world.housing_criteria, world.mobility_criteria,
                 world.modes, world.consts, world.scenario)


# ---------------------------------------------------------------------------
# Simulation state


@dataclass
class SimulationState:
    world: World
    seed: int
    n_agents: int
    housing_criteria: dict
    mobility_criteria: dict
    person_profile: np.ndarray
    person_owner: np.ndarray
    person_work: np.ndarray
    person_unit: np.ndarray
    person_slot: np.ndarray
    person_mode: np.ndarray
    slot_occupied: np.ndarray  # (S,) one flag per dwelling slot
    counts: np.ndarray  # (U,P) occupants incl. block-group background
    nsum: np.ndarray
    slog: np.ndarray
    vac: np.ndarray
    tables: tuple
    iteration: int = 0
    converged: bool = False
    movers_last: int = 0
    history: list = field(default_factory=list)

    @property
    def mode_shares(self) -> dict:
        counts = np.bincount(self.person_mode, minlength=len(self.world.mode_ids)) \
            if self.n_agents else np.zeros(len(self.world.mode_ids), dtype=np.int64)
        denom = max(self.n_agents, 1)
        return {mid: int(counts[i]) / denom for i, mid in enumerate(self.world.mode_ids)}

    def commute_minutes(self) -> np.ndarray:
        if self.n_agents == 0:
            return np.zeros(0)
        return self.world.time_tab[self.person_mode, self.person_unit, self.person_work]

    def commute_costs(self) -> np.ndarray:
        if self.n_agents == 0:
            return np.zeros(0)
        return self.world.cost_tab[self.person_mode, self.person_unit, self.person_work]

    def unit_diversity(self) -> np.ndarray:
        # Reporting recomputes from the integer counts rather than reusing the
        # engine's incrementally-maintained float sum, so a persisted and
        # reloaded state reports bit-identical diversity values.
        slog = self.world.xlogx[self.counts].sum(axis=1)
        return np.where(self.nsum > 0, self.world.logn[self.nsum] - slog / np.maximum(self.nsum, 1), 0.0)

    def agents_per_unit(self) -> np.ndarray:
        return self.world.capacity - self.vac

    def check_conservation(self):
        world = self.world
        ok = (
            int(self.vac.sum()) + self.n_agents == int(world.capacity.sum())
            and (self.vac >= 0).all()
            and int(self.nsum.sum()) == int(world.background.sum()) + self.n_agents
            and int(self.slot_occupied.sum()) == self.n_agents
        )
        if not ok:
            raise AssertionError("occupancy/vacancy conservation violated")

    def persons(self) -> list:
        """Materialize Person records from the state arrays."""
        world = self.world
        out = []
        times = self.commute_minutes()
        costs = self.commute_costs()
        dists = (
            world.dist_tab[self.person_mode, self.person_unit, self.person_work]
            if self.n_agents
            else np.zeros(0)
        )
        for i in range(self.n_agents):
            u = int(self.person_unit[i])
            uid = world.unit_ids[u]
            owner = int(self.person_owner[i])
            out.append(
                Person(
                    person_id=i,
                    profile=world.profile_ids[int(self.person_profile[i])],
                    activity_place=world.work_ids[int(self.person_work[i])],
                    living_place=Dwelling(world.unit_kind[u], uid, float(world.rent[u])),
                    owns_car=bool(owner & 2),
                    owns_bike=bool(owner & 1),
                    possible_mobility_modes=world.available_mode_ids(
                        owner, u, int(self.person_work[i])
                    ),
                    mobility_mode=world.mode_ids[int(self.person_mode[i])],
                    time_main_activity=float(times[i]),
                    distance_main_activity=float(dists[i]),
                    commuting_cost=float(costs[i]),
                )
            )
        return out


def initialize(world: World, seed: int | None = None, n_agents: int | None = None,
               housing_criteria=None, mobility_criteria=None) -> SimulationState:
    """Iteration 0: random placement, then mode choice for every agent."""
    scenario = world.scenario
    if seed is None:
        seed = scenario.seed
    if n_agents is None:
        n_agents = scenario.n_agents
    hc = housing_criteria or world.housing_criteria
    mc = mobility_criteria or world.mobility_criteria

    total_capacity = int(world.capacity.sum())
    if n_agents > total_capacity:
        raise ValidationError(
            [f"insufficient housing supply: {n_agents} agents, {total_capacity} vacant spaces"]
        )

    if n_agents > 0:
        persons = synthesize_population(
            n_agents, world.profiles, list(world.model.buildings.values()), seed
        )
        person_profile = np.array([world.profile_index[p.profile] for p in persons], np.int64)
        person_owner = np.array(
            [(2 if p.owns_car else 0) | (1 if p.owns_bike else 0) for p in persons], np.int64
        )
        person_work = np.array([world.work_index[p.activity_place] for p in persons], np.int64)
    else:
        person_profile = np.zeros(0, np.int64)
        person_owner = np.zeros(0, np.int64)
        person_work = np.zeros(0, np.int64)

    counts = world.background.copy()
    nsum = counts.sum(axis=1)
    slog = world.xlogx[counts].sum(axis=1)
    vac = world.capacity.copy()
    slot_occupied = np.zeros(world.slot_unit.shape[0], np.int64)
    person_unit = np.zeros(n_agents, np.int64)
    person_slot = np.zeros(n_agents, np.int64)
    person_mode = np.zeros(n_agents, np.int64)

    tables = world.score_tables(hc, mc)
    hs_static, m_best, mode_best_idx, divn = tables
    if n_agents > 0:
        uniforms = substream(seed, "placement").random((n_agents, engine.ATTEMPTS))
        engine.place_agents(
            uniforms, person_profile, person_owner, person_work, person_unit,
            person_slot, person_mode, world.slot_unit, slot_occupied,
            counts, nsum, slog, vac, mode_best_idx, world.xlogx,
        )

    state = SimulationState(
        world=world, seed=seed, n_agents=n_agents,
        housing_criteria=hc, mobility_criteria=mc,
        person_profile=person_profile, person_owner=person_owner,
        person_work=person_work, person_unit=person_unit, person_slot=person_slot,
        person_mode=person_mode, slot_occupied=slot_occupied,
        counts=counts, nsum=nsum, slog=slog, vac=vac, tables=tables,
    )
    state.check_conservation()
    return state


def step(state: SimulationState) -> SimulationState:
    """Advance one relocation iteration (mutates and returns the state)."""
    world = state.world
    it = state.iteration + 1
    hs_static, m_best, mode_best_idx, divn = state.tables
    if state.n_agents > 0:
        perm = substream(state.seed, "permutation", it).permutation(state.n_agents)
        uniforms = substream(state.seed, "sampling", it).random(
            (state.n_agents, engine.ATTEMPTS)
        )
        movers = engine.run_iteration(
            perm, uniforms, state.person_profile, state.person_owner, state.person_work,
            state.person_unit, state.person_slot, state.person_mode,
            world.slot_unit, state.slot_occupied, state.counts, state.nsum, state.slog,
            state.vac, hs_static, m_best, mode_best_idx, divn, world.xlogx, world.logn,
        )
    else:
        movers = 0
    state.iteration = it
    state.movers_last = int(movers)
    commute = state.commute_minutes()
    state.history.append(
        {
            "iteration": it,
            "movers": int(movers),
            "mode_shares": state.mode_shares,
            "mean_commute_minutes": float(commute.mean()) if commute.size else 0.0,
            "unit_diversity": [float(h) for h in state.unit_diversity()],
        }
    )
    state.check_conservation()
    return state


def run_steps_until_converged(state: SimulationState,
                              convergence: Convergence | None = None) -> SimulationState:
    conv = convergence or state.world.scenario.convergence
    streak = 0
    start = state.iteration
    while state.iteration - start < conv.max_iterations:
        step(state)
        fraction = state.movers_last / state.n_agents if state.n_agents else 0.0
        streak = streak + 1 if fraction < conv.epsilon else 0
        if streak >= conv.window:
            state.converged = True
            break
    return state


def run_to_convergence(world: World, seed: int | None = None, n_agents: int | None = None,
                       housing_criteria=None, mobility_criteria=None,
                       convergence: Convergence | None = None) -> SimulationState:
    """Initialize and iterate until the mover fraction settles (or the
    iteration budget runs out, flagged via state.converged=False)."""
    state = initialize(world, seed=seed, n_agents=n_agents,
                       housing_criteria=housing_criteria, mobility_criteria=mobility_criteria)
    return run_steps_until_converged(state, convergence)


def _slots_for_occupants(world: World, person_unit: np.ndarray):
    """Assign each unit's occupants to its first slots, in person-id order.

    Slot identity only couples draws within one run, so any deterministic
    assignment works when rebuilding a state against a (possibly edited)
    World.
    """
    n = person_unit.shape[0]
    slot_occupied = np.zeros(world.slot_unit.shape[0], np.int64)
    person_slot = np.zeros(n, np.int64)
    fill = np.zeros(world.n_units, np.int64)
    for i in range(n):
        u = person_unit[i]
        s = int(world.slot_offset[u] + fill[u])
        person_slot[i] = s
        slot_occupied[s] = 1
        fill[u] += 1
    return person_slot, slot_occupied


def whatif_run(baseline: SimulationState, interventions,
               convergence: Convergence | None = None) -> SimulationState:
    """Apply interventions to a converged baseline and re-run to convergence.

    The baseline is never mutated.  Agents keep their dwellings; commuting
    modes are re-chosen under the edited geography before iterating.
    """
    world2 = apply_interventions(baseline.world, interventions, baseline.agents_per_unit())
    tables = world2.score_tables(baseline.housing_criteria, baseline.mobility_criteria)
    _, _, mode_best_idx, _ = tables
    counts = world2.background.copy()
    if baseline.n_agents:
        np.add.at(counts, (baseline.person_unit, baseline.person_profile), 1)
    nsum = counts.sum(axis=1)
    slog = world2.xlogx[counts].sum(axis=1)
    occupied = np.zeros(world2.n_units, np.int64)
    if baseline.n_agents:
        occupied = np.bincount(baseline.person_unit, minlength=world2.n_units)
    person_slot, slot_occupied = _slots_for_occupants(world2, baseline.person_unit)
    state = SimulationState(
        world=world2, seed=baseline.seed, n_agents=baseline.n_agents,
        housing_criteria=baseline.housing_criteria,
        mobility_criteria=baseline.mobility_criteria,
        person_profile=baseline.person_profile.copy(),
        person_owner=baseline.person_owner.copy(),
        person_work=baseline.person_work.copy(),
        person_unit=baseline.person_unit.copy(),
        person_slot=person_slot,
        person_mode=(
            mode_best_idx[baseline.person_profile, baseline.person_owner,
                          baseline.person_unit, baseline.person_work]
            if baseline.n_agents else np.zeros(0, np.int64)
        ),
        slot_occupied=slot_occupied,
        counts=counts, nsum=nsum, slog=slog,
        vac=world2.capacity - occupied,
        tables=tables,
        iteration=baseline.iteration,
    )
    state.check_conservation()
    if not interventions:
        # Nothing changed, so the baseline's convergence still stands and the
        # comparison is an exact identity (all deltas zero).
        state.converged = baseline.converged
        state.history = list(baseline.history)
        return state
    return run_steps_until_converged(state, convergence)


# ---------------------------------------------------------------------------
# Reports


def summarize(state: SimulationState) -> dict:
    """Equilibrium metrics: mode shares, per-block-group profile
    distributions, unit diversity, commute statistics, mover series."""
    world = state.world
    commute = state.commute_minutes()
    diversity = state.unit_diversity()

    bg_profile_pct: dict = {}
    n_bg = len(world.bg_ids)
    bg_counts = np.zeros((n_bg, len(world.profiles)), np.int64)
    if state.n_agents:
        np.add.at(bg_counts, (world.unit_bg[state.person_unit], state.person_profile), 1)
    for bi, geoid in enumerate(world.bg_ids):
        total = int(bg_counts[bi].sum())
        bg_profile_pct[geoid] = {
            pid: (100.0 * int(bg_counts[bi, pi]) / total if total else 0.0)
            for pi, pid in enumerate(world.profile_ids)
        }

    units = []
    occupied = state.agents_per_unit()
    dominant = np.argmax(state.counts, axis=1)
    for u, uid in enumerate(world.unit_ids):
        units.append(
            {
                "id": uid,
                "kind": world.unit_kind[u],
                "block_group": world.bg_ids[int(world.unit_bg[u])],
                "occupants": int(occupied[u]),
                "vacancies": int(state.vac[u]),
                "rent": float(world.rent[u]),
                "diversity": float(diversity[u]),
                "dominant_profile": (
                    world.profile_ids[int(dominant[u])] if state.nsum[u] > 0 else None
                ),
            }
        )

    pct = (
        {p: float(np.percentile(commute, q)) for p, q in (("p10", 10), ("p50", 50), ("p90", 90))}
        if commute.size
        else {"p10": 0.0, "p50": 0.0, "p90": 0.0}
    )
    return {
        "schema": SUMMARY_SCHEMA,
        "seed": state.seed,
        "n_agents": state.n_agents,
        "iterations": state.iteration,
        "converged": state.converged,
        "mode_shares": state.mode_shares,
        "mean_commute_minutes": float(commute.mean()) if commute.size else 0.0,
        "commute_minutes": pct,
        "block_group_profile_percent": bg_profile_pct,
        "units": units,
        "movers": [rec["movers"] for rec in state.history],
    }


def compare_summaries(baseline: dict, variant: dict) -> dict:
    """Deltas (variant minus baseline) for the what-if comparison payload."""
    mode_delta = {
        m: variant["mode_shares"].get(m, 0.0) - baseline["mode_shares"].get(m, 0.0)
        for m in sorted(set(baseline["mode_shares"]) | set(variant["mode_shares"]))
    }
    bg_delta = {}
    for geoid, base_row in baseline["block_group_profile_percent"].items():
        var_row = variant["block_group_profile_percent"].get(geoid, {})
        bg_delta[geoid] = {p: var_row.get(p, 0.0) - v for p, v in base_row.items()}
    base_div = {u["id"]: u["diversity"] for u in baseline["units"]}
    div_delta = {
        u["id"]: u["diversity"] - base_div.get(u["id"], 0.0) for u in variant["units"]
    }
    return {
        "mode_shares": mode_delta,
        "mean_commute_minutes": variant["mean_commute_minutes"] - baseline["mean_commute_minutes"],
        "block_group_profile_percent": bg_delta,
        "unit_diversity": div_delta,
    }


def write_summary(summary: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=1)
        fh.write("\n")


def read_summary(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SUMMARY_SCHEMA:
        raise ValidationError([f"{path}: not a summary document"])
    return doc


def write_history_csv(state: SimulationState, path: str) -> None:
    """Flat iteration table: iteration, movers, one share column per mode."""
    mode_ids = state.world.mode_ids
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "movers"] + [f"share_{m}" for m in mode_ids])
        for rec in state.history:
            writer.writerow(
                [rec["iteration"], rec["movers"]]
                + [repr(rec["mode_shares"][m]) for m in mode_ids]
            )


def read_history_csv(path: str) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rec = {"iteration": int(row["iteration"]), "movers": int(row["movers"])}
            rec["mode_shares"] = {
                k[len("share_"):]: float(v) for k, v in row.items() if k.startswith("share_")
            }
            rows.append(rec)
        return rows


def write_agents_csv(state: SimulationState, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["person_id", "profile", "unit", "mode", "commute_minutes", "cost"])
        for p in state.persons():
            writer.writerow(
                [p.person_id, p.profile, p.living_place.ref, p.mobility_mode,
                 repr(p.time_main_activity), repr(p.commuting_cost)]
            )


def save_state(state: SimulationState, path: str) -> None:
    """Persist a converged run so what-if studies can resume from it."""
    scenario = state.world.scenario
    doc = {
        "schema": STATE_SCHEMA,
        "scenario": scenario.to_dict() if scenario else None,
        "seed": state.seed,
        "n_agents": state.n_agents,
        "iteration": state.iteration,
        "converged": state.converged,
        "unit_ids": state.world.unit_ids,
        "mode_ids": state.world.mode_ids,
        "person_unit": [int(u) for u in state.person_unit],
        "person_mode": [int(m) for m in state.person_mode],
        "history": state.history,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_state(path: str) -> SimulationState:
    """Rebuild a persisted state; the scenario's files must still exist."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != STATE_SCHEMA:
        raise ValidationError([f"{path}: not a state document"])
    if not doc.get("scenario"):
        raise ValidationError([f"{path}: state document lacks its scenario"])
    scenario = scenario_from_dict(doc["scenario"], base_dir=os.getcwd())
    world = World.from_scenario(scenario)
    state = initialize(world, seed=doc["seed"], n_agents=doc["n_agents"])
    if doc["unit_ids"] != world.unit_ids or doc["mode_ids"] != world.mode_ids:
        raise ValidationError([f"{path}: geography changed since the state was saved"])
    person_unit = np.array(doc["person_unit"], np.int64)
    person_mode = np.array(doc["person_mode"], np.int64)
    if person_unit.shape[0] != state.n_agents:
        raise ValidationError([f"{path}: agent count mismatch"])
    counts = world.background.copy()
    if state.n_agents:
        np.add.at(counts, (person_unit, state.person_profile), 1)
    occupied = (
        np.bincount(person_unit, minlength=world.n_units)
        if state.n_agents
        else np.zeros(world.n_units, np.int64)
    )
    state.person_unit = person_unit
    state.person_mode = person_mode
    state.person_slot, state.slot_occupied = _slots_for_occupants(world, person_unit)
    state.counts = counts
    state.nsum = counts.sum(axis=1)
    state.slog = world.xlogx[counts].sum(axis=1)
    state.vac = world.capacity - occupied
    state.iteration = int(doc["iteration"])
    state.converged = bool(doc["converged"])
    state.history = doc["history"]
    state.check_conservation()
    return state
