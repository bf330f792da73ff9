"""Fitting the 64 behavioral weights against observed distributions.

The error of a candidate weight vector is the sum of two RMSE terms: the
housing error over (block group, profile) percentage cells and the mobility
error over the five mode-share percentages, each comparing the observed
table with the equilibrium of a deterministic simulation run (fixed seed, so
the search landscape is itself deterministic).  The search is steepest-
ascent hill climbing over single-coordinate +-step moves, restarted from
several seeded random starts because a single climb heavily depends on its
starting point.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .population import HousingCriteria, MobilityCriteria
from .rng import substream
from .simulation import SimulationState, World, run_to_convergence
from .choice import NormalizationConstants  # noqa: F401  (re-exported for callers)

CALIBRATION_SCHEMA = "relosim-calibration/1"

# Per-profile coordinate layout: 4 housing slots then 4 mobility slots.
FIELDS = (
    ("housing", "w_price", -1.0, 0.0),
    ("housing", "diversity_acceptance", -1.0, 1.0),
    ("housing", "zone_weight", 0.0, 1.0),
    ("housing", "preferred_zone", 0.0, 1.0),  # encoded city index
    ("mobility", "w_price", -1.0, 0.0),
    ("mobility", "w_time", -1.0, 0.0),
    ("mobility", "w_difficulty", -1.0, 0.0),
    ("mobility", "w_pattern", 0.0, 1.0),
)


@dataclass
class ObservedData:
    """Observed housing distribution and mode shares, in percent."""

    housing: dict  # geoid -> {profile_id: percent}
    mode_shares: dict  # mode_id -> percent

    def validate(self):
        problems = []
        for geoid, row in self.housing.items():
            total = sum(row.values())
            if abs(total - 100.0) > 0.1:
                problems.append(f"observed housing {geoid}: percentages sum to {total}, not 100")
        total = sum(self.mode_shares.values())
        if abs(total - 100.0) > 0.1:
            problems.append(f"observed mode shares sum to {total}, not 100")
        if problems:
            raise ValidationError(problems)
        return self


class CriteriaSpace:
    """Flat 64-real encoding of per-profile housing + mobility criteria.

    The preferred zone is a categorical over the scenario's city names; it
    rides in [0, 1] as the midpoint of its city's bin so criteria -> vector
    -> criteria is lossless.
    """

    def __init__(self, profile_ids, cities):
        self.profile_ids = list(profile_ids)
        self.cities = list(cities)
        self.size = len(self.profile_ids) * len(FIELDS)

    @classmethod
    def from_world(cls, world: World) -> "CriteriaSpace":
        return cls(world.profile_ids, world.cities)

    def bounds(self):
        lo = np.tile([f[2] for f in FIELDS], len(self.profile_ids))
        hi = np.tile([f[3] for f in FIELDS], len(self.profile_ids))
        return lo, hi

    def coordinate_names(self):
        return [f"{pid}.{group}.{name}"
                for pid in self.profile_ids
                for group, name, _, _ in FIELDS]

    def _encode_zone(self, city: str) -> float:
        k = len(self.cities)
        idx = self.cities.index(city) if city in self.cities else 0
        return (idx + 0.5) / k

    def _decode_zone(self, coord: float) -> str:
        k = len(self.cities)
        return self.cities[min(int(coord * k), k - 1)]

    def to_vector(self, housing: dict, mobility: dict) -> np.ndarray:
        vec = np.empty(self.size)
        for i, pid in enumerate(self.profile_ids):
            hc, mc = housing[pid], mobility[pid]
            vec[i * 8: i * 8 + 8] = [
                hc.w_price, hc.diversity_acceptance, hc.zone_weight,
                self._encode_zone(hc.preferred_zone),
                mc.w_price, mc.w_time, mc.w_difficulty, mc.w_pattern,
            ]
        return vec

    def to_criteria(self, vec: np.ndarray):
        housing, mobility = {}, {}
        for i, pid in enumerate(self.profile_ids):
            c = vec[i * 8: i * 8 + 8]
            housing[pid] = HousingCriteria(
                w_price=float(c[0]), diversity_acceptance=float(c[1]),
                zone_weight=float(c[2]), preferred_zone=self._decode_zone(float(c[3])),
            )
            mobility[pid] = MobilityCriteria(
                w_price=float(c[4]), w_time=float(c[5]),
                w_difficulty=float(c[6]), w_pattern=float(c[7]),
            )
        return housing, mobility

    def random_vector(self, rng) -> np.ndarray:
        lo, hi = self.bounds()
        return lo + rng.random(self.size) * (hi - lo)

    def check_bounds(self, vec: np.ndarray):
        lo, hi = self.bounds()
        if not ((vec >= lo) & (vec <= hi)).all():
            raise ValidationError(["criteria vector outside its per-coordinate bounds"])


# ---------------------------------------------------------------------------
# Errors


def rmse(observed, simulated) -> float:
    """Root-mean-square deviation between two equal-length vectors."""
    y = np.asarray(observed, dtype=np.float64)
    yhat = np.asarray(simulated, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1 or y.size == 0:
        raise ValidationError(["rmse needs two equal-length non-empty vectors"])
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def _simulated_bg_percent(state: SimulationState) -> np.ndarray:
    """Per-block-group profile percentages of the agent population."""
    world = state.world
    counts = np.zeros((len(world.bg_ids), len(world.profiles)), np.int64)
    if state.n_agents:
        np.add.at(counts, (world.unit_bg[state.person_unit], state.person_profile), 1)
    totals = counts.sum(axis=1)
    pct = np.zeros_like(counts, dtype=np.float64)
    nonzero = totals > 0
    pct[nonzero] = 100.0 * counts[nonzero] / totals[nonzero, None]
    return pct


def housing_error(state: SimulationState, observed: ObservedData) -> float:
    """RMSE over every (block group, profile) cell present in the observed
    housing table, pooled into one vector."""
    world = state.world
    pct = _simulated_bg_percent(state)
    y, yhat = [], []
    for geoid in observed.housing:
        if geoid not in world.bg_index:
            raise ValidationError([f"observed housing references unknown geoid {geoid!r}"])
    for geoid in sorted(observed.housing):
        row = observed.housing[geoid]
        bi = world.bg_index[geoid]
        for pi, pid in enumerate(world.profile_ids):
            if pid in row:
                y.append(row[pid])
                yhat.append(pct[bi, pi])
    return rmse(y, yhat)


def mobility_error(state: SimulationState, observed: ObservedData) -> float:
    """RMSE over the mode-share percentages (every mode must be observed)."""
    world = state.world
    missing = [m for m in world.mode_ids if m not in observed.mode_shares]
    if missing:
        raise ValidationError([f"observed mode shares missing modes {missing}"])
    shares = _mode_share_vector(state)
    y = [observed.mode_shares[m] for m in world.mode_ids]
    yhat = [100.0 * s for s in shares]
    return rmse(y, yhat)


def _mode_share_vector(state: SimulationState):
    n_modes = len(state.world.mode_ids)
    if state.n_agents == 0:
        return [0.0] * n_modes
    counts = np.bincount(state.person_mode, minlength=n_modes)
    return [int(c) / state.n_agents for c in counts]


def generate_observed(state: SimulationState) -> ObservedData:
    """Observed-data tables from an equilibrium state (recovery fixtures:
    block groups where agents actually live, plus the global mode shares)."""
    world = state.world
    pct = _simulated_bg_percent(state)
    totals = pct.sum(axis=1)
    housing = {}
    for bi, geoid in enumerate(world.bg_ids):
        if totals[bi] > 0:
            housing[geoid] = {pid: float(pct[bi, pi]) for pi, pid in enumerate(world.profile_ids)}
    shares = _mode_share_vector(state)
    return ObservedData(
        housing=housing,
        mode_shares={m: 100.0 * s for m, s in zip(world.mode_ids, shares)},
    )


def objective(vector: np.ndarray, world: World, observed: ObservedData,
              space: CriteriaSpace | None = None) -> dict:
    """Run the scenario under the vector's criteria and score both errors.

    Uses the scenario's fixed seed, so repeat evaluations of one vector are
    identical and the search landscape is deterministic.
    """
    space = space or CriteriaSpace.from_world(world)
    space.check_bounds(vector)
    housing, mobility = space.to_criteria(vector)
    state = run_to_convergence(world, housing_criteria=housing, mobility_criteria=mobility)
    he = housing_error(state, observed)
    me = mobility_error(state, observed)
    return {"housing_error": he, "mobility_error": me, "total": he + me}


# ---------------------------------------------------------------------------
# Hill climbing


@dataclass
class CalibrationConfig:
    step_size: float = 0.05
    max_evaluations: int = 3000
    restarts: int = 5
    seed: int = 0
    threads: int = 1

    def validate(self):
        if self.step_size <= 0:
            raise ValidationError(["calibration step_size must be > 0"])
        if self.max_evaluations < 1 or self.restarts < 1:
            raise ValidationError(["calibration budget and restarts must be >= 1"])
        return self


@dataclass
class TraceEntry:
    index: int
    restart: int
    vector: np.ndarray
    housing_error: float
    mobility_error: float

    @property
    def total(self) -> float:
        return self.housing_error + self.mobility_error


@dataclass
class CalibrationResult:
    best_vector: np.ndarray
    housing_error: float
    mobility_error: float
    trace: list
    evaluations: int
    budget_exhausted: bool
    space: CriteriaSpace

    @property
    def total(self) -> float:
        return self.housing_error + self.mobility_error


def hill_climb(world: World, observed: ObservedData,
               config: CalibrationConfig | None = None,
               objective_fn=None) -> CalibrationResult:
    """Hill climbing with restarts over the 64-cube: strictly improving
    single-coordinate steps of up to step_size, first improvement in a
    seeded scan order.

    Each pass visits the 128 (coordinate, direction) moves in a freshly
    seeded random order, each with its own dithered step length in
    [0.1, 1.0] x step_size, and accepts a move the moment it strictly lowers
    the total error; a full pass without an accepted move means the climb
    sits at a local minimum of that neighborhood and stops.  (First
    improvement instead of a full steepest sweep per move, and dithered
    instead of lattice-fixed steps: a 128-evaluation sweep per single move
    cannot traverse this space inside the documented budgets, and a fixed
    lattice anchored at the random start cannot land inside the narrow
    low-error region around the optimum.)  Restarts draw fresh seeded
    starting points; the budget caps total evaluations across restarts, and
    exhausting it returns the best-so-far, flagged.

    ``objective_fn(vector) -> {housing_error, mobility_error, total}`` can
    replace the simulation objective (used by the synthetic-surface tests).
    """
    config = (config or CalibrationConfig()).validate()
    space = CriteriaSpace.from_world(world)
    lo, hi = space.bounds()
    if objective_fn is None:
        objective_fn = lambda vec: objective(vec, world, observed, space)

    trace: list = []
    best: TraceEntry | None = None
    exhausted = False

    def evaluate(restart, vector):
        res = objective_fn(vector)
        entry = TraceEntry(
            index=len(trace), restart=restart, vector=vector.copy(),
            housing_error=res["housing_error"], mobility_error=res["mobility_error"],
        )
        trace.append(entry)
        return entry

    for restart in range(config.restarts):
        if len(trace) >= config.max_evaluations:
            exhausted = True
            break
        start = space.random_vector(substream(config.seed, "calibration-start", restart))
        current = evaluate(restart, start)
        if best is None or current.total < best.total:
            best = current

        moves = [(j, sign) for j in range(space.size) for sign in (-1.0, 1.0)]
        pass_index = 0
        stagnant = False
        while not stagnant and len(trace) < config.max_evaluations:
            rng = substream(config.seed, "calibration-scan", restart, pass_index)
            order = rng.permutation(len(moves))
            dither = 0.1 + 0.9 * rng.random(len(moves))
            pass_index += 1
            improved = False
            for pos, k in enumerate(order):
                if len(trace) >= config.max_evaluations:
                    exhausted = True
                    break
                j, sign = moves[k]
                delta = sign * config.step_size * dither[pos]
                moved = min(max(current.vector[j] + delta, lo[j]), hi[j])
                if moved == current.vector[j]:
                    continue  # clamped onto the current point
                cand = current.vector.copy()
                cand[j] = moved
                entry = evaluate(restart, cand)
                if best is None or entry.total < best.total:
                    best = entry
                if entry.total < current.total:
                    current = entry
                    improved = True
            stagnant = not improved

    return CalibrationResult(
        best_vector=best.vector.copy(),
        housing_error=best.housing_error,
        mobility_error=best.mobility_error,
        trace=trace,
        evaluations=len(trace),
        budget_exhausted=exhausted or len(trace) >= config.max_evaluations,
        space=space,
    )


# ---------------------------------------------------------------------------
# File formats


def load_observed(housing_path: str, modes_path: str) -> ObservedData:
    housing: dict = {}
    with open(housing_path, newline="") as fh:
        for row in csv.DictReader(fh):
            housing.setdefault(row["geoid"], {})[row["profile_id"]] = float(row["percent"])
    mode_shares = {}
    with open(modes_path, newline="") as fh:
        for row in csv.DictReader(fh):
            mode_shares[row["mode_id"]] = float(row["percent"])
    return ObservedData(housing=housing, mode_shares=mode_shares).validate()


def save_observed(observed: ObservedData, housing_path: str, modes_path: str) -> None:
    with open(housing_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["geoid", "profile_id", "percent"])
        for geoid, row in observed.housing.items():
            for pid, pct in row.items():
                w.writerow([geoid, pid, repr(pct)])
    with open(modes_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode_id", "percent"])
        for mid, pct in observed.mode_shares.items():
            w.writerow([mid, repr(pct)])


def write_trace_csv(result: CalibrationResult, path: str) -> None:
    names = result.space.coordinate_names()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["evaluation", "restart"] + names + ["housing_error", "mobility_error"])
        for e in result.trace:
            w.writerow([e.index, e.restart] + [repr(float(x)) for x in e.vector]
                       + [repr(float(e.housing_error)), repr(float(e.mobility_error))])


def read_trace_csv(path: str) -> list:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_coords = len(header) - 4
        for row in reader:
            rows.append(
                {
                    "evaluation": int(row[0]),
                    "restart": int(row[1]),
                    "vector": [float(x) for x in row[2: 2 + n_coords]],
                    "housing_error": float(row[-2]),
                    "mobility_error": float(row[-1]),
                }
            )
    return rows


def write_result(result: CalibrationResult, path: str, extra: dict | None = None) -> None:
    housing, mobility = result.space.to_criteria(result.best_vector)
    doc = {
        "schema": CALIBRATION_SCHEMA,
        "housing_error": result.housing_error,
        "mobility_error": result.mobility_error,
        "total_error": result.total,
        "evaluations": result.evaluations,
        "budget_exhausted": result.budget_exhausted,
        "best_vector": [float(x) for x in result.best_vector],
        "coordinate_names": result.space.coordinate_names(),
        "best_criteria": {
            pid: {
                "housing": {
                    "w_price": housing[pid].w_price,
                    "diversity_acceptance": housing[pid].diversity_acceptance,
                    "zone_weight": housing[pid].zone_weight,
                    "preferred_zone": housing[pid].preferred_zone,
                },
                "mobility": {
                    "w_price": mobility[pid].w_price,
                    "w_time": mobility[pid].w_time,
                    "w_difficulty": mobility[pid].w_difficulty,
                    "w_pattern": mobility[pid].w_pattern,
                },
            }
            for pid in result.space.profile_ids
        },
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_result(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != CALIBRATION_SCHEMA:
        raise ValidationError([f"{path}: not a calibration result document"])
    return doc
