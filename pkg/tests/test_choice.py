import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relosim import choice
from relosim.errors import UnreachableError, ValidationError
from relosim.population import HousingCriteria, MobilityCriteria, MobilityMode

CONSTS = choice.NormalizationConstants(c_ref=10.0, t_ref=60.0, r_ref=4000.0)

# Published synthetic weighting rows for the middle income brackets.
MC_60_100 = MobilityCriteria(w_price=-0.7, w_time=-0.85, w_difficulty=-0.75, w_pattern=0.8)
HC_45_60 = HousingCriteria(w_price=-0.8, diversity_acceptance=0.0, zone_weight=0.4,
                           preferred_zone="centreville")

BUS = MobilityMode("bus", price_per_km=0.1, mean_speed_kmh=20.0, waiting_min=7.0,
                   difficulty=4.0 / 15.0, pattern=0.4, access="public_bus")
WALK = MobilityMode("walk", price_per_km=0.0, mean_speed_kmh=5.0, waiting_min=0.0,
                    difficulty=0.2, pattern=0.5, access="walk")


class TestModeScore:
    def test_bus_worked_example(self):
        ev = choice.evaluate_mode(MC_60_100, BUS, 5000.0, CONSTS)
        assert ev.cost == pytest.approx(0.5)
        assert ev.time == pytest.approx(22.0)
        assert ev.score == pytest.approx(-0.2267, abs=1e-4)

    def test_zero_weights(self):
        mc = MobilityCriteria(0.0, 0.0, 0.0, 0.0)
        for dist in (0.0, 1000.0, 50000.0):
            assert choice.mode_score(mc, BUS, dist, CONSTS) == 0.0

    def test_zero_distance_zero_wait(self):
        got = choice.mode_score(MC_60_100, WALK, 0.0, CONSTS)
        expected = MC_60_100.w_difficulty * WALK.difficulty + MC_60_100.w_pattern * WALK.pattern
        assert got == pytest.approx(expected)

    def test_clamped_beyond_references(self):
        # past the clamp, further distance adds nothing through cost/time
        far = choice.mode_score(MC_60_100, WALK, 50_000.0, CONSTS)
        farther = choice.mode_score(MC_60_100, WALK, 500_000.0, CONSTS)
        assert far == farther

    @given(dists=st.lists(st.floats(0, 50_000), min_size=2, max_size=10))
    @settings(max_examples=100, deadline=None)
    def test_nonincreasing_in_distance(self, dists):
        dists = sorted(dists)
        scores = [choice.mode_score(MC_60_100, BUS, d, CONSTS) for d in dists]
        assert all(a >= b - 1e-12 for a, b in zip(scores, scores[1:]))


class TestChooseMode:
    def test_singleton(self):
        ev = choice.choose_mode(MC_60_100, [(WALK, 5000.0)], CONSTS)
        self_score = choice.mode_score(MC_60_100, WALK, 5000.0, CONSTS)
        assert ev.mode_id == "walk" and ev.score == pytest.approx(self_score)

    def test_bus_beats_walk_at_5km(self):
        ev = choice.choose_mode(MC_60_100, [(WALK, 5000.0), (BUS, 5000.0)], CONSTS)
        assert ev.mode_id == "bus"
        walk_score = choice.mode_score(MC_60_100, WALK, 5000.0, CONSTS)
        assert walk_score == pytest.approx(-0.6, abs=1e-9)
        assert ev.score == pytest.approx(-0.2267, abs=1e-4)
        assert ev.score > walk_score

    def test_tie_break_fixed_order(self):
        same = dict(price_per_km=0.0, mean_speed_kmh=10.0, waiting_min=0.0,
                    difficulty=0.5, pattern=0.5)
        modes = [MobilityMode(mid, access="walk", **same)
                 for mid in ("car", "T", "bus", "bike", "walk")]
        ev = choice.choose_mode(MC_60_100, [(m, 1000.0) for m in modes], CONSTS)
        assert ev.mode_id == "walk"

    def test_order_independence(self):
        candidates = [(WALK, 4000.0), (BUS, 6000.0)]
        a = choice.choose_mode(MC_60_100, candidates, CONSTS)
        b = choice.choose_mode(MC_60_100, list(reversed(candidates)), CONSTS)
        assert a == b

    def test_unreachable_all(self):
        with pytest.raises(UnreachableError):
            choice.choose_mode(MC_60_100, [(WALK, None)], CONSTS)

    @given(
        w=st.tuples(st.floats(-1, 0), st.floats(-1, 0), st.floats(-1, 0), st.floats(0, 1)),
        lam=st.floats(0.01, 100.0),
        dists=st.lists(st.floats(0, 20000), min_size=2, max_size=5),
    )
    @settings(max_examples=200, deadline=None)
    def test_argmax_invariant_under_scaling(self, w, lam, dists):
        mc = MobilityCriteria(*w)
        scaled = MobilityCriteria(*(x * lam for x in w))
        modes = [BUS, WALK,
                 MobilityMode("car", 0.32, 30.0, 0.0, 0.1, 1.0, "private_car"),
                 MobilityMode("T", 0.12, 35.0, 6.0, 0.3, 0.45, "public_T"),
                 MobilityMode("bike", 0.01, 5.0, 0.0, 0.4, 0.5, "private_bike")]
        candidates = [(m, d) for m, d in zip(modes, dists * 3)][: len(dists)]
        assert choice.choose_mode(mc, candidates, CONSTS).mode_id \
            == choice.choose_mode(scaled, candidates, CONSTS).mode_id


class TestShannonDiversity:
    def test_uniform_two_species(self):
        assert choice.shannon_diversity({"a": 5, "b": 5}) == pytest.approx(math.log(2))

    def test_single_species(self):
        assert choice.shannon_diversity({"a": 10}) == 0.0

    def test_worked_three_species(self):
        assert choice.shannon_diversity({"a": 1, "b": 1, "c": 2}) \
            == pytest.approx(1.0397, abs=1e-4)

    def test_all_zero_rejected(self):
        with pytest.raises(ValidationError):
            choice.shannon_diversity({"a": 0, "b": 0})

    @given(counts=st.lists(st.integers(0, 500), min_size=1, max_size=8))
    @settings(max_examples=300, deadline=None)
    def test_bounds(self, counts):
        if sum(counts) == 0:
            return
        h = choice.shannon_diversity(dict(enumerate(counts)))
        k = sum(c > 0 for c in counts)
        assert -1e-12 <= h <= math.log(max(k, 1)) + 1e-12
        if k == 1:
            assert h == 0.0


class TestHousingScore:
    def test_zero_case(self):
        hc = HousingCriteria(0.0, 0.0, 0.0, "anywhere")
        zero_mode = choice.ModeEvaluation("walk", 0.0, 0.0, 0.0, 0.0)
        assert choice.housing_score(hc, 2000.0, "town", zero_mode, 0.5, 8, CONSTS) == 0.0

    def test_worked_example_preferred_zone(self):
        best = choice.ModeEvaluation("bus", 0.5, 22.0, 5000.0, -0.2267)
        got = choice.housing_score(HC_45_60, 2000.0, "centreville", best, 1.0, 8, CONSTS)
        assert got == pytest.approx(-0.2267, abs=1e-9)

    def test_worked_example_other_zone(self):
        best = choice.ModeEvaluation("bus", 0.5, 22.0, 5000.0, -0.2267)
        got = choice.housing_score(HC_45_60, 2000.0, "edgewater", best, 1.0, 8, CONSTS)
        assert got == pytest.approx(-0.6267, abs=1e-9)

    def test_diversity_term_normalized(self):
        hc = HousingCriteria(0.0, 1.0, 0.0, "x")
        zero_mode = choice.ModeEvaluation("walk", 0.0, 0.0, 0.0, 0.0)
        h_max = math.log(8)
        got = choice.housing_score(hc, 0.0, "y", zero_mode, h_max, 8, CONSTS)
        assert got == pytest.approx(1.0)

    def test_single_profile_diversity_term_vanishes(self):
        hc = HousingCriteria(0.0, 1.0, 0.0, "x")
        zero_mode = choice.ModeEvaluation("walk", 0.0, 0.0, 0.0, 0.0)
        assert choice.housing_score(hc, 0.0, "y", zero_mode, 0.0, 1, CONSTS) == 0.0

    @given(r1=st.floats(0, 3999), r2=st.floats(0, 3999))
    @settings(max_examples=100, deadline=None)
    def test_strictly_decreasing_in_rent_below_clamp(self, r1, r2):
        if abs(r1 - r2) < 1e-6:  # below float resolution of the score
            return
        lo, hi = sorted((r1, r2))
        best = choice.ModeEvaluation("walk", 0.0, 10.0, 1000.0, -0.1)
        s_lo = choice.housing_score(HC_45_60, lo, "t", best, 0.5, 8, CONSTS)
        s_hi = choice.housing_score(HC_45_60, hi, "t", best, 0.5, 8, CONSTS)
        assert s_lo > s_hi
