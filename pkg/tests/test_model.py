import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoi_sched.model import (
    AgeFunction,
    ConfigError,
    ProblemInstance,
    normalized_reward,
    reward_to_cost,
    sample_pilot,
    sample_step,
    step_cost,
    transition_dist,
    transition_tensor,
)

from conftest import instances


class TestStepCost:
    def test_drop_pays_only_age(self, fig2):
        assert step_cost(fig2, 1, 0) == pytest.approx(0.4, abs=1e-15)

    def test_age_only_weight(self, fig2):
        inst = fig2.replace(alpha=1.0)
        assert step_cost(inst, 7, 3) == 7.0

    def test_exponential_age(self):
        inst = ProblemInstance(1, (0.5,), 10, 2.0, 0.5, AgeFunction.exponential(0.3))
        assert step_cost(inst, 4, 1) == pytest.approx(0.5 * math.exp(1.2) + 1.0, rel=1e-15)

    def test_cost_table_agrees(self, fig2):
        for s in range(1, 11):
            for a in range(5):
                assert fig2.cost_table[s - 1, a] == step_cost(fig2, s, a)


class TestTransitions:
    def test_drop_is_deterministic(self, fig2):
        d = transition_dist(fig2, 3, 0)
        assert d[3] == 1.0 and d.sum() == 1.0

    def test_saturated_state(self, fig2):
        d = transition_dist(fig2, 10, 1)
        assert d[0] == pytest.approx(0.2) and d[9] == pytest.approx(0.8)
        assert np.count_nonzero(d) == 2

    def test_interior_transmit(self, fig2):
        d = transition_dist(fig2, 5, 2)
        assert d[0] == pytest.approx(0.4) and d[5] == pytest.approx(0.6)
        assert np.count_nonzero(d) == 2

    def test_tensor_matches_rows(self, fig2):
        P = transition_tensor(fig2)
        for s in range(1, 11):
            for a in range(5):
                np.testing.assert_array_equal(P[s - 1, a], transition_dist(fig2, s, a))

    def test_rejects_invalid(self, fig2):
        with pytest.raises(ValueError):
            transition_dist(fig2, 0, 0)
        with pytest.raises(ValueError):
            transition_dist(fig2, 3, 5)

    @settings(max_examples=60, deadline=None)
    @given(instances())
    def test_rows_sum_to_one(self, inst):
        P = transition_tensor(inst)
        np.testing.assert_allclose(P.sum(axis=2), 1.0, rtol=0, atol=2e-16)
        assert (P >= 0).all()


class TestSampling:
    def test_drop_step(self, fig2, rng):
        out = sample_step(fig2, 5, 0, rng)
        assert out.next_state == 6 and out.transmission_success is None
        assert out.cost == step_cost(fig2, 5, 0)

    def test_near_perfect_channel(self):
        # Reliability 1 is outside the valid range; 1 - 1e-12 stands in for the limit.
        inst = ProblemInstance(1, (1 - 1e-12,), 10, 1.0, 0.5)
        rng = np.random.default_rng(7)
        draws = rng.random(1_000_000)
        assert np.mean(draws < inst.success_probs[0]) >= 1 - 1e-6
        hits = sum(sample_step(inst, 4, 1, rng).next_state == 1 for _ in range(20_000))
        assert hits == 20_000

    def test_seeded_determinism(self, fig2):
        a = sample_step(fig2, 1, 1, np.random.default_rng(42))
        b = sample_step(fig2, 1, 1, np.random.default_rng(42))
        assert a == b

    def test_pilot_frequency(self, fig2):
        rng = np.random.default_rng(3)
        hits = sum(sample_pilot(fig2, 4, rng) for _ in range(100_000))
        assert abs(hits / 100_000 - 0.8) < 0.01

    def test_pilot_channel_range(self, fig2, rng):
        with pytest.raises(ValueError):
            sample_pilot(fig2, 0, rng)
        with pytest.raises(ValueError):
            sample_pilot(fig2, 5, rng)

    @settings(max_examples=40, deadline=None)
    @given(instances(), st.integers(0, 2**32 - 1), st.integers(1, 200))
    def test_age_stays_in_range(self, inst, seed, steps):
        rng = np.random.default_rng(seed)
        s = int(rng.integers(1, inst.a_max + 1))
        for _ in range(steps):
            a = int(rng.integers(0, inst.num_actions))
            s = sample_step(inst, s, a, rng).next_state
            assert 1 <= s <= inst.a_max

    @settings(max_examples=40, deadline=None)
    @given(instances(), st.data())
    def test_drop_absorbs_at_cap(self, inst, data):
        s0 = data.draw(st.integers(1, inst.a_max))
        rng = np.random.default_rng(0)
        s = s0
        for step in range(inst.a_max - s0):
            assert s != inst.a_max
            s = sample_step(inst, s, 0, rng).next_state
        assert s == inst.a_max
        for _ in range(5):
            s = sample_step(inst, s, 0, rng).next_state
            assert s == inst.a_max


class TestReward:
    def test_best_pair_maps_to_one(self, fig2):
        assert normalized_reward(fig2, 1, 0) == pytest.approx(1.0, abs=1e-15)

    def test_worst_pair_maps_to_zero(self, fig2):
        assert normalized_reward(fig2, 10, 1) == pytest.approx(0.0, abs=1e-15)

    def test_power_only(self, fig2):
        inst = fig2.replace(alpha=0.0)
        for s in (1, 5, 10):
            assert normalized_reward(inst, s, 0) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(instances())
    def test_affine_and_decreasing(self, inst):
        r = inst.reward_table
        c = inst.cost_table
        assert r.min() >= 0 and r.max() <= 1
        assert r[0, 0] == pytest.approx(1.0) and r[-1, 1] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(reward_to_cost(inst, r), c, rtol=1e-12, atol=1e-12)
        order = np.argsort(c.ravel(), kind="stable")
        assert np.all(np.diff(r.ravel()[order]) <= 1e-12)


class TestValidation:
    @pytest.mark.parametrize("field, value, key", [
        ("success_probs", (0.2, 0.4, 0.6, 1.2), "success_probs"),
        ("success_probs", (0.2, 0.4, 0.6, 0.0), "success_probs"),
        ("success_probs", (0.2, 0.4), "success_probs"),
        ("alpha", 1.5, "alpha"),
        ("power_cost", -1.0, "power_cost"),
        ("a_max", 1, "a_max"),
        ("horizon", 0, "horizon"),
        ("delta", 0.0, "delta"),
    ])
    def test_bad_field_names_key(self, fig2, field, value, key):
        with pytest.raises(ConfigError) as info:
            fig2.replace(**{field: value})
        assert info.value.key == key

    def test_zero_reward_scale_rejected(self):
        with pytest.raises(ConfigError):
            ProblemInstance(2, (0.3, 0.6), 5, 0.0, 0.0)

    def test_best_channel_lowest_on_ties(self):
        inst = ProblemInstance(3, (0.7, 0.7, 0.2), 5, 1.0, 0.5)
        assert inst.best_channel == 1
