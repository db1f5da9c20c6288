import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance, small_random_instance
from nashbp.enumerate import ResourceError
from nashbp.instance import GeneratorParams, generate_instance
from nashbp.optimize import (DecimationError, Estimator, StopRule, exhaustive_x,
                             greedy_decimation)

EXACT = Estimator("exact")


def twin_units():
    """Four users of weight 2 that all fit on either of two identical units."""
    edges = [(u, s, 2) for u in range(4) for s in (0, 1)]
    return make_instance(edges, capacity=[8, 8], p=[1.0] * 4)


class TestGreedy:
    def test_unused_unit_goes_first(self):
        inst = make_instance([(0, 0, 3), (1, 0, 3), (1, 2, 4)], capacity=[5, 5, 5],
                             p=[0.6, 0.8])
        traj = greedy_decimation(inst, EXACT)
        assert traj.steps[0].switched_off == 1
        assert traj.steps[0].drop_abs == pytest.approx(0.0, abs=1e-12)

    def test_twin_units(self):
        traj = greedy_decimation(twin_units(), EXACT)
        first, second = traj.steps
        assert first.switched_off == 0
        assert first.drop_abs == pytest.approx(0.0, abs=1e-12)
        assert second.drop_abs == pytest.approx(32.0)
        assert second.O_after == pytest.approx(0.0)

    def test_trajectory_bookkeeping(self, s1_instance):
        traj = greedy_decimation(s1_instance, EXACT)
        assert len(traj.steps) == 4
        assert sorted(st.switched_off for st in traj.steps) == [0, 1, 2, 3]
        O0 = traj.initial.Osat
        for prev, st in zip([None] + traj.steps[:-1], traj.steps):
            before = O0 if prev is None else prev.O_after
            assert st.O_before == before
            assert st.drop_abs == pytest.approx(st.O_before - st.O_after)
            assert st.drop_rel_cumulative == pytest.approx((O0 - st.O_after) / O0)
        assert np.all(traj.steps[-1].x_after == 0)

    @settings(max_examples=25)
    @given(st.integers(0, 10**6))
    def test_exact_osat_never_rises(self, seed):
        inst = small_random_instance(seed, max_users=5, max_units=4)
        traj = greedy_decimation(inst, EXACT)
        values = [traj.initial.Osat] + [st.O_after for st in traj.steps]
        assert np.all(np.diff(values) <= 1e-9)

    def test_deterministic(self, s1_instance):
        a = greedy_decimation(s1_instance, Estimator("mirror"))
        b = greedy_decimation(s1_instance, Estimator("mirror"))
        assert [s.switched_off for s in a.steps] == [s.switched_off for s in b.steps]
        assert [s.O_after for s in a.steps] == [s.O_after for s in b.steps]

    def test_max_steps_and_stop_early(self, s1_instance):
        traj = greedy_decimation(s1_instance, EXACT, max_steps=2)
        assert len(traj.steps) == 2
        early = greedy_decimation(s1_instance, EXACT, StopRule("rel_drop", 0.0), stop_early=True)
        assert early.chosen_stop == StopRule("rel_drop", 0.0).stop_index(early.steps)
        assert len(early.steps) == early.chosen_stop + 1

    def test_failed_candidates_are_skipped(self):
        inst = twin_units()

        def flaky(inst_, x):
            if tuple(x) == (0, 1):
                return None
            return EXACT(inst_, x)

        traj = greedy_decimation(inst, flaky, max_steps=1)
        assert traj.steps[0].switched_off == 1 and traj.steps[0].n_failed == 1

    def test_all_candidates_fail(self, s1_instance):
        def broken(inst, x):
            return EXACT(inst, x) if np.all(x == 1) else None

        with pytest.raises(DecimationError, match="step 1"):
            greedy_decimation(s1_instance, broken)


class TestStopRule:
    class Step:
        def __init__(self, rel):
            self.drop_rel_cumulative = rel

    def test_rel_drop(self):
        steps = [self.Step(r) for r in (0.001, 0.004, 0.006, 0.2)]
        assert StopRule("rel_drop", 0.005).stop_index(steps) == 2

    def test_max_steps(self):
        steps = [self.Step(0.0)] * 5
        assert StopRule("max_steps", 3).stop_index(steps) == 3
        assert StopRule("none").stop_index(steps) == 5

    def test_unknown(self):
        with pytest.raises(ValueError):
            StopRule("sometimes").stop_index([])


class TestExhaustive:
    def test_table_size_and_order(self, s1_instance):
        res = exhaustive_x(s1_instance, EXACT)
        assert len(res.table) == 16
        assert [tuple(x) for x, _ in res.table[:3]] == [(0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 0)]

    @settings(max_examples=20)
    @given(st.integers(0, 10**6))
    def test_free_energy_favours_all_on(self, seed):
        inst = small_random_instance(seed, max_users=4, max_units=4)
        res = exhaustive_x(inst, EXACT)
        full = dict((tuple(x), o) for x, o in res.table)[(1,) * inst.n_units]
        assert full.F == pytest.approx(res.F_best, abs=1e-9)

    def test_costly_energy_turns_everything_off(self, s1_instance):
        res = exhaustive_x(s1_instance.replace(alpha=1e6), EXACT)
        assert np.all(res.x_best == 0)

    def test_size_guard(self):
        inst = generate_instance(GeneratorParams(20, 16, 1, 5, 10, seed=0))
        with pytest.raises(ResourceError):
            exhaustive_x(inst, Estimator("mirror"))

    def test_ties_pick_lexicographically_smallest(self):
        # unit 1 has no users, so x and x with unit 1 flipped tie
        inst = make_instance([(0, 0, 3)], capacity=[5, 5], p=[0.5])
        res = exhaustive_x(inst, EXACT)
        assert res.x_best.tolist() == [1, 0]


class TestEstimator:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Estimator("oracle")

    def test_mirror_close_to_exact_on_tree(self):
        inst = make_instance([(0, 0, 3), (1, 0, 4), (1, 1, 2)], capacity=[5, 5], p=[0.5, 0.7])
        x = np.ones(2, int)
        a, b = Estimator("mirror")(inst, x), EXACT(inst, x)
        assert a.Osat == pytest.approx(b.Osat, abs=1e-6)
