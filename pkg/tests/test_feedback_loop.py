import pytest
from hypothesis import given, strategies as st

from selfreg.errors import EngineInvariantError, UnobservableGoalError
from selfreg.feedback_loop import LoopState, compare, perceive, update_loop
from selfreg.goal_model import EngineParams, GoalNode

PARAMS = EngineParams()


def node(polarity="approach", reference=10.0, margin=0.0):
    return GoalNode(
        id="g1", parent_id=None, level=0, polarity=polarity, label="",
        base_value=1.0, importance=1.0, reference=reference,
        avoidance_margin=margin, affect_decay=1.0,
    )


class TestPerceive:
    def test_reads_the_goal_channel(self):
        assert perceive({"g1": 4.0}, node()) == 4.0

    def test_missing_channel(self):
        g2 = GoalNode("g2", None, 0, "approach", "", 1.0, 1.0, 1.0, 0.0, 1.0)
        with pytest.raises(UnobservableGoalError):
            perceive({"g1": 4.0}, g2)

    def test_negative_values_pass_through(self):
        assert perceive({"g1": -2.5}, node()) == -2.5


class TestCompare:
    def test_approach_satisfied(self):
        assert compare(10.0, node(reference=10.0)) == 0.0

    def test_approach_shortfall(self):
        assert compare(4.0, node(reference=10.0)) == 6.0

    def test_avoidance_margin_shortfall(self):
        g = node(polarity="avoidance", reference=10.0, margin=3.0)
        assert compare(9.0, g) == pytest.approx(2.0)

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.floats(0, 1e3),
           st.booleans())
    def test_never_negative(self, current, reference, margin, avoid):
        g = node(
            polarity="avoidance" if avoid else "approach",
            reference=reference,
            margin=margin if avoid else 0.0,
        )
        if avoid and margin == 0.0:
            return  # invalid node shape, filtered rather than built
        assert compare(current, g) >= 0.0

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=20))
    def test_approach_piecewise_monotone(self, values):
        g = node(reference=50.0)
        for v in values:
            d = compare(v, g)
            if v >= 50.0:
                assert d == 0.0
        ordered = sorted(values)
        ds = [compare(v, g) for v in ordered]
        assert all(a >= b for a, b in zip(ds, ds[1:]))


class TestUpdateLoop:
    def _run(self, samples):
        """samples: list of (tick, observed value)."""
        state = LoopState(goal_id="g1")
        g = node(reference=10.0)
        for tick, value in samples:
            state = update_loop(state, {"g1": value}, g, tick, PARAMS)
        return state

    def test_velocity_from_window_endpoints(self):
        # discrepancies 6 then 4 over one tick
        state = self._run([(1, 4.0), (2, 6.0)])
        assert state.history == ((1, 6.0), (2, 4.0))
        assert state.velocity == pytest.approx(2.0)

    def test_single_sample_velocity_zero(self):
        state = self._run([(1, 4.0)])
        assert state.velocity == 0.0

    def test_no_progress_velocity_zero(self):
        state = self._run([(1, 6.0), (3, 6.0)])
        assert state.velocity == 0.0

    def test_constant_discrepancy_window_velocity_zero(self):
        state = self._run([(t, 3.0) for t in range(1, 12)])
        assert state.velocity == 0.0

    def test_window_eviction(self):
        state = self._run([(t, float(t)) for t in range(1, 20)])
        assert len(state.history) == PARAMS.window
        assert state.history[0][0] == 19 - PARAMS.window + 1

    def test_nonmonotonic_tick_rejected(self):
        state = self._run([(1, 4.0), (2, 4.0)])
        with pytest.raises(EngineInvariantError):
            update_loop(state, {"g1": 4.0}, node(), 2, PARAMS)

    def test_pure_function(self):
        state = self._run([(1, 4.0), (2, 5.0)])
        g = node(reference=10.0)
        once = update_loop(state, {"g1": 6.5}, g, 3, PARAMS)
        twice = update_loop(state, {"g1": 6.5}, g, 3, PARAMS)
        assert once == twice
        assert state.history[-1][0] == 2  # input untouched
