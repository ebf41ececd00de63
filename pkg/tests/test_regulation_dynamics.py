import math

import pytest
from hypothesis import given, strategies as st

from selfreg import harness
from selfreg.goal_model import EngineParams
from selfreg.regulation_dynamics import (
    ShieldFatigueState,
    effective_sigma,
    fatigue_step,
    fresh_shield,
    grant_override,
    suppression_load,
)
from selfreg.world_sim import parse_scenario

from builders import forced_switch_doc

PARAMS = EngineParams()


class TestEffectiveSigma:
    def test_no_override(self):
        s = ShieldFatigueState(sigma=0.4)
        assert effective_sigma(s, PARAMS) == 0.4

    def test_active_override_adds(self):
        s = ShieldFatigueState(sigma=0.4, override_boost=0.3, override_ticks_left=5)
        assert effective_sigma(s, PARAMS) == pytest.approx(0.7)

    def test_clamped_at_sigma_max(self):
        s = ShieldFatigueState(sigma=0.9, override_boost=0.3, override_ticks_left=5)
        assert effective_sigma(s, PARAMS) == PARAMS.sigma_max


class TestFatigueStep:
    def test_full_load_depletes(self):
        s = ShieldFatigueState(sigma=1.0)
        assert fatigue_step(s, 1.0, EngineParams(delta_dep=0.1)).sigma == pytest.approx(0.9)

    def test_partial_load_scales_depletion(self):
        s = ShieldFatigueState(sigma=1.0)
        assert fatigue_step(s, 0.5, EngineParams(delta_dep=0.1)).sigma == pytest.approx(0.95)

    def test_clamped_at_sigma_min(self):
        s = ShieldFatigueState(sigma=0.22)
        stepped = fatigue_step(s, 1.0, EngineParams(delta_dep=0.1, sigma_min=0.2))
        assert stepped.sigma == pytest.approx(0.2)

    def test_rest_recovers(self):
        s = ShieldFatigueState(sigma=0.5)
        assert fatigue_step(s, 0.0, EngineParams(delta_rec=0.05)).sigma == pytest.approx(0.55)

    def test_depletion_step_count_matches_closed_form(self):
        # Independent oracle: the closed-form step count.
        expected_steps = math.ceil((PARAMS.sigma_max - PARAMS.sigma_min) / PARAMS.delta_dep)
        assert expected_steps == 16
        s = fresh_shield(PARAMS)
        steps = 0
        seen = [s.sigma]
        while s.sigma > PARAMS.sigma_min:
            nxt = fatigue_step(s, 1.0, PARAMS)
            assert nxt.sigma < s.sigma
            s = nxt
            steps += 1
            seen.append(s.sigma)
        assert steps == expected_steps
        assert s.sigma == pytest.approx(PARAMS.sigma_min)

    def test_recovery_until_max(self):
        s = ShieldFatigueState(sigma=PARAMS.sigma_min)
        steps = 0
        while s.sigma < PARAMS.sigma_max:
            nxt = fatigue_step(s, 0.0, PARAMS)
            assert nxt.sigma > s.sigma
            s = nxt
            steps += 1
        assert steps == math.ceil((PARAMS.sigma_max - PARAMS.sigma_min) / PARAMS.delta_rec)

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=300))
    def test_sigma_never_leaves_bounds(self, loads):
        s = fresh_shield(PARAMS)
        for load in loads:
            s = fatigue_step(s, load, PARAMS)
            assert PARAMS.sigma_min <= s.sigma <= PARAMS.sigma_max

    def test_override_expiry_zeroes_boost(self):
        s = ShieldFatigueState(sigma=0.5, override_boost=0.3, override_ticks_left=2)
        s = fatigue_step(s, 0.0, PARAMS)
        assert s.override_ticks_left == 1 and s.override_boost == 0.3
        s = fatigue_step(s, 0.0, PARAMS)
        assert s.override_ticks_left == 0 and s.override_boost == 0.0


class TestGrantOverride:
    def test_zero_salience_noop(self):
        s = ShieldFatigueState(sigma=0.5)
        assert grant_override(s, 0.0, 1.0, PARAMS) == s

    def test_boost_from_salience_and_importance(self):
        s = grant_override(ShieldFatigueState(sigma=0.5), 1.0, 1.0, PARAMS)
        assert s.override_boost == pytest.approx(0.3)
        assert s.override_ticks_left == PARAMS.override_ticks

    def test_boost_capped(self):
        s = grant_override(ShieldFatigueState(sigma=0.5), 3.0, 1.0, PARAMS)
        assert s.override_boost == pytest.approx(0.5)

    def test_invariant_boost_implies_ticks(self):
        s = grant_override(ShieldFatigueState(sigma=0.5), 0.5, 1.0, PARAMS)
        assert not (s.override_boost > 0 and s.override_ticks_left == 0)


class TestSuppressionLoad:
    def test_normalized_by_prune_k(self):
        assert suppression_load(2, EngineParams(prune_k=8)) == pytest.approx(0.25)

    def test_capped_at_one(self):
        assert suppression_load(12, EngineParams(prune_k=8)) == 1.0


class TestForcedSwitchGuarantee:
    """Engine-level: sustained suppression of a positive-utility competitor
    forces a switch within ceil((sigma_max - sigma_min)/delta_dep) + 1 ticks."""

    def _runs(self, trace):
        runs, cur, length = [], object(), 0
        for ev in trace:
            if ev.selected_means == cur:
                length += 1
            else:
                if length:
                    runs.append(length)
                cur, length = ev.selected_means, 1
        runs.append(length)
        return runs

    def test_pursuit_runs_bounded(self):
        scenario = parse_scenario(forced_switch_doc())
        bound = math.ceil((1.0 - 0.2) / 0.05) + 1
        assert bound == 17
        for seed in range(10):
            trace = harness.run_episode(scenario, seed)
            assert max(self._runs(trace)) <= bound
            assert any(ev.forced_switch for ev in trace)

    def test_override_delays_by_its_duration(self):
        plain = parse_scenario(forced_switch_doc())
        base_trace = harness.run_episode(plain, 0)
        first_forced = next(ev.tick for ev in base_trace if ev.forced_switch)

        boosted = parse_scenario(
            forced_switch_doc(
                events=[{"tick": first_forced, "type": "reward", "salience": 1.0}]
            )
        )
        boosted_trace = harness.run_episode(boosted, 0)
        delayed = next(ev.tick for ev in boosted_trace if ev.forced_switch)
        assert delayed == first_forced + plain.params.override_ticks
