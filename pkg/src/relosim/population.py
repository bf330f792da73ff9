"""Income profiles, behavioral criteria tables, mobility modes, and agents.

The four tabular inputs are comma-separated files with a header row:
``profiles.csv``, ``housing_criteria.csv``, ``mobility_criteria.csv`` and
``modes.csv``.  Profile assignment uses largest-remainder rounding so the
synthesized population matches the stated proportions exactly; only
workplace and vehicle ownership are sampled.
"""

import csv
from dataclasses import dataclass, field

from .errors import ValidationError
from .geodata import NONRESIDENTIAL, Dwelling
from .rng import substream

# Fixed tie-break order for mode choice; unknown modes sort after, by name.
MODE_ORDER = {"walk": 0, "bike": 1, "bus": 2, "T": 3, "car": 4}

ACCESS_KINDS = ("walk", "private_car", "private_bike", "public_bus", "public_T")


@dataclass(frozen=True)
class IncomeProfile:
    profile_id: str
    proportion: float
    p_car: float
    p_bike: float


@dataclass(frozen=True)
class HousingCriteria:
    """Per-profile housing weights: rent aversion, diversity acceptance, and
    the preference for one named city."""

    w_price: float  # [-1, 0]
    diversity_acceptance: float  # [-1, 1]
    zone_weight: float  # [0, 1]
    preferred_zone: str


@dataclass(frozen=True)
class MobilityCriteria:
    w_price: float  # [-1, 0]
    w_time: float  # [-1, 0]
    w_difficulty: float  # [-1, 0]
    w_pattern: float  # [0, 1]


@dataclass(frozen=True)
class MobilityMode:
    mode_id: str
    price_per_km: float
    mean_speed_kmh: float
    waiting_min: float
    difficulty: float  # [0, 1]
    pattern: float  # [0, 1]
    access: str  # one of ACCESS_KINDS


@dataclass
class Person:
    """A worker agent: fixed profile and workplace, mutable dwelling/mode."""

    person_id: int
    profile: str
    activity_place: str  # nonresidential building id
    living_place: Dwelling | None = None
    owns_car: bool = False
    owns_bike: bool = False
    possible_mobility_modes: frozenset = frozenset()
    mobility_mode: str | None = None
    time_main_activity: float = 0.0
    distance_main_activity: float = 0.0
    commuting_cost: float = 0.0


def mode_sort_key(mode_id: str):
    return (MODE_ORDER.get(mode_id, len(MODE_ORDER)), mode_id)


# ---------------------------------------------------------------------------
# Tabular file loading


def _read_rows(path: str, required: tuple, problems: list):
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                problems.append(f"{path}: missing columns {missing}")
                return []
            return list(reader)
    except OSError as exc:
        problems.append(f"{path}: {exc}")
        return []


def load_profiles(path: str) -> list:
    problems: list = []
    rows = _read_rows(path, ("profile_id", "proportion", "p_car", "p_bike"), problems)
    profiles = []
    for i, row in enumerate(rows, start=2):
        try:
            profiles.append(
                IncomeProfile(
                    profile_id=row["profile_id"],
                    proportion=float(row["proportion"]),
                    p_car=float(row["p_car"]),
                    p_bike=float(row["p_bike"]),
                )
            )
        except ValueError as exc:
            problems.append(f"{path}: line {i}: {exc}")
    if not problems:
        if abs(sum(p.proportion for p in profiles) - 1.0) > 1e-9:
            problems.append(f"{path}: proportions must sum to 1")
        for p in profiles:
            if not (0.0 <= p.p_car <= 1.0 and 0.0 <= p.p_bike <= 1.0):
                problems.append(f"{path}: {p.profile_id}: ownership probabilities outside [0,1]")
        if len({p.profile_id for p in profiles}) != len(profiles):
            problems.append(f"{path}: duplicate profile_id")
    if problems:
        raise ValidationError(problems)
    return profiles


def _check_range(value, lo, hi, what, where, problems):
    if not (lo <= value <= hi):
        problems.append(f"{where}: {what}={value} outside [{lo}, {hi}]")
    return value


def load_housing_criteria(path: str) -> dict:
    """profile_id -> HousingCriteria"""
    problems: list = []
    rows = _read_rows(
        path,
        ("profile_id", "w_price", "diversity_acceptance", "zone_weight", "preferred_zone"),
        problems,
    )
    out = {}
    for row in rows:
        pid = row["profile_id"]
        where = f"{path}: {pid}"
        out[pid] = HousingCriteria(
            w_price=_check_range(float(row["w_price"]), -1, 0, "w_price", where, problems),
            diversity_acceptance=_check_range(
                float(row["diversity_acceptance"]), -1, 1, "diversity_acceptance", where, problems
            ),
            zone_weight=_check_range(
                float(row["zone_weight"]), 0, 1, "zone_weight", where, problems
            ),
            preferred_zone=row["preferred_zone"],
        )
    if problems:
        raise ValidationError(problems)
    return out


def load_mobility_criteria(path: str) -> dict:
    """profile_id -> MobilityCriteria"""
    problems: list = []
    rows = _read_rows(
        path, ("profile_id", "w_price", "w_time", "w_difficulty", "w_pattern"), problems
    )
    out = {}
    for row in rows:
        pid = row["profile_id"]
        where = f"{path}: {pid}"
        out[pid] = MobilityCriteria(
            w_price=_check_range(float(row["w_price"]), -1, 0, "w_price", where, problems),
            w_time=_check_range(float(row["w_time"]), -1, 0, "w_time", where, problems),
            w_difficulty=_check_range(
                float(row["w_difficulty"]), -1, 0, "w_difficulty", where, problems
            ),
            w_pattern=_check_range(float(row["w_pattern"]), 0, 1, "w_pattern", where, problems),
        )
    if problems:
        raise ValidationError(problems)
    return out


def load_modes(path: str) -> dict:
    """mode_id -> MobilityMode, insertion order preserved from the file."""
    problems: list = []
    rows = _read_rows(
        path,
        ("mode_id", "price_per_km", "mean_speed_kmh", "waiting_min", "difficulty",
         "pattern", "access"),
        problems,
    )
    out = {}
    for row in rows:
        mid = row["mode_id"]
        where = f"{path}: {mid}"
        mode = MobilityMode(
            mode_id=mid,
            price_per_km=float(row["price_per_km"]),
            mean_speed_kmh=float(row["mean_speed_kmh"]),
            waiting_min=float(row["waiting_min"]),
            difficulty=_check_range(float(row["difficulty"]), 0, 1, "difficulty", where, problems),
            pattern=_check_range(float(row["pattern"]), 0, 1, "pattern", where, problems),
            access=row["access"],
        )
        if mode.mean_speed_kmh <= 0:
            problems.append(f"{where}: mean_speed_kmh must be > 0")
        if mode.price_per_km < 0:
            problems.append(f"{where}: price_per_km must be >= 0")
        if mode.access not in ACCESS_KINDS:
            problems.append(f"{where}: unknown access {mode.access!r}")
        out[mid] = mode
    if problems:
        raise ValidationError(problems)
    return out


def save_criteria(housing: dict, mobility: dict, housing_path: str, mobility_path: str) -> None:
    """Write criteria tables in the same format load_* reads them."""
    with open(housing_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["profile_id", "w_price", "diversity_acceptance", "zone_weight", "preferred_zone"])
        for pid, hc in housing.items():
            w.writerow([pid, repr(hc.w_price), repr(hc.diversity_acceptance),
                        repr(hc.zone_weight), hc.preferred_zone])
    with open(mobility_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["profile_id", "w_price", "w_time", "w_difficulty", "w_pattern"])
        for pid, mc in mobility.items():
            w.writerow([pid, repr(mc.w_price), repr(mc.w_time),
                        repr(mc.w_difficulty), repr(mc.w_pattern)])


# ---------------------------------------------------------------------------
# Synthesis


def largest_remainder_counts(n: int, proportions: list) -> list:
    """Integer counts summing to n, each within 1 of n*proportion."""
    quotas = [n * p for p in proportions]
    counts = [int(q) for q in quotas]
    leftover = n - sum(counts)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def synthesize_population(n: int, profiles: list, buildings: list, rng_seed: int) -> list:
    """Create the agent population: exact profile counts, uniformly drawn
    workplaces over nonresidential buildings, Bernoulli vehicle ownership.

    Pure function of (n, profiles, buildings order, rng_seed).
    """
    if n <= 0:
        raise ValidationError(["population size must be positive"])
    workplaces = [b for b in buildings if b.usage == NONRESIDENTIAL]
    if not workplaces:
        raise ValidationError(["no nonresidential buildings to assign workplaces from"])
    if abs(sum(p.proportion for p in profiles) - 1.0) > 1e-9:
        raise ValidationError(["profile proportions must sum to 1"])

    counts = largest_remainder_counts(n, [p.proportion for p in profiles])
    work_rng = substream(rng_seed, "workplace")
    veh_rng = substream(rng_seed, "vehicles")

    persons = []
    pid = 0
    for profile, count in zip(profiles, counts):
        for _ in range(count):
            work = workplaces[int(work_rng.integers(len(workplaces)))]
            owns_car = bool(veh_rng.random() < profile.p_car)
            owns_bike = bool(veh_rng.random() < profile.p_bike)
            persons.append(
                Person(
                    person_id=pid,
                    profile=profile.profile_id,
                    activity_place=work.building_id,
                    owns_car=owns_car,
                    owns_bike=owns_bike,
                )
            )
            pid += 1
    return persons


def available_modes(person: Person, dwelling: Dwelling, model, modes: dict) -> frozenset:
    """Modes the agent can use from this dwelling to its workplace.

    Walking is always available; private modes require ownership; public
    modes require the service flag at both the dwelling's and the
    workplace's block group.
    """
    home_bg = model.block_group_of(dwelling)
    work_bg = model.block_group_of(model.buildings[person.activity_place])
    out = set()
    for mode in modes.values():
        if mode.access == "walk":
            out.add(mode.mode_id)
        elif mode.access == "private_car" and person.owns_car:
            out.add(mode.mode_id)
        elif mode.access == "private_bike" and person.owns_bike:
            out.add(mode.mode_id)
        elif mode.access == "public_bus" and home_bg.has_bus and work_bg.has_bus:
            out.add(mode.mode_id)
        elif mode.access == "public_T" and home_bg.has_T and work_bg.has_T:
            out.add(mode.mode_id)
    return frozenset(out)
