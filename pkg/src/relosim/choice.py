"""Scoring of mobility modes and housing options, and profile diversity.

Every score is a linear combination of normalized features.  Cost, time and
rent are divided by scenario-level reference constants and clamped to [0, 1]
so each weighted term stays within [-1, 1]; difficulty and pattern are
already normalized in the modes table.  Diversity uses the Shannon-Weaver
index over income-profile counts, normalized by ln(number of profiles).
"""

import math
from dataclasses import dataclass

from .errors import UnreachableError, ValidationError
from .geodata import travel_time
from .population import mode_sort_key


@dataclass(frozen=True)
class NormalizationConstants:
    """Feature scales: commute cost, commute minutes, monthly rent."""

    c_ref: float = 10.0
    t_ref: float = 60.0
    r_ref: float = 4000.0

    def __post_init__(self):
        if self.c_ref <= 0 or self.t_ref <= 0 or self.r_ref <= 0:
            raise ValidationError(["normalization constants must be strictly positive"])


@dataclass(frozen=True)
class ModeEvaluation:
    mode_id: str
    cost: float  # currency per trip
    time: float  # minutes
    distance: float  # meters
    score: float


@dataclass(frozen=True)
class HousingEvaluation:
    dwelling: object
    best_mode: ModeEvaluation
    score: float


def mode_score(criteria, mode, distance_m: float, consts: NormalizationConstants) -> float:
    """Weighted sum of normalized cost and time plus difficulty and pattern."""
    cost = mode.price_per_km * (distance_m / 1000.0)
    time = travel_time(distance_m, mode)
    return (
        criteria.w_price * min(cost / consts.c_ref, 1.0)
        + criteria.w_time * min(time / consts.t_ref, 1.0)
        + criteria.w_difficulty * mode.difficulty
        + criteria.w_pattern * mode.pattern
    )


def evaluate_mode(criteria, mode, distance_m: float, consts) -> ModeEvaluation:
    cost = mode.price_per_km * (distance_m / 1000.0)
    return ModeEvaluation(
        mode_id=mode.mode_id,
        cost=cost,
        time=travel_time(distance_m, mode),
        distance=distance_m,
        score=mode_score(criteria, mode, distance_m, consts),
    )


def choose_mode(criteria, candidates: list, consts) -> ModeEvaluation:
    """Pick the highest-scoring mode among (mode, distance_m) candidates.

    Unreachable candidates are passed as distance None and dropped.  Ties
    break on the fixed mode order (walk < bike < bus < T < car) so the result
    never depends on input ordering.
    """
    evaluations = [
        evaluate_mode(criteria, mode, dist, consts)
        for mode, dist in candidates
        if dist is not None
    ]
    if not evaluations:
        raise UnreachableError("workplace unreachable by every available mode")
    return min(evaluations, key=lambda ev: (-ev.score, mode_sort_key(ev.mode_id)))


def shannon_diversity(counts: dict) -> float:
    """Shannon-Weaver index H = -sum p_i ln p_i over positive counts."""
    total = sum(counts.values())
    if total <= 0:
        raise ValidationError(["diversity undefined for all-zero counts"])
    h = 0.0
    for c in counts.values():
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    return h


def housing_score(
    criteria,
    rent: float,
    city: str,
    best_mode: ModeEvaluation,
    unit_diversity: float,
    k_profiles: int,
    consts: NormalizationConstants,
) -> float:
    """Score a housing option for one profile.

    Combines normalized rent, diversity acceptance over the normalized
    Shannon index of the unit's current occupants, the preferred-zone bonus,
    and the score of the best available commuting mode from that unit.
    """
    log_k = math.log(k_profiles) if k_profiles > 1 else 0.0
    diversity_term = (
        criteria.diversity_acceptance * (unit_diversity / log_k) if log_k > 0 else 0.0
    )
    return (
        criteria.w_price * min(rent / consts.r_ref, 1.0)
        + diversity_term
        + (criteria.zone_weight if city == criteria.preferred_zone else 0.0)
        + best_mode.score
    )
