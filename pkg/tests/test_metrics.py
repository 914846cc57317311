import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blocktown.metrics import (
    ArchetypeLabel,
    ConvergenceTracker,
    aggregate_actions,
    classify_action,
    individual_utility,
    move_system_delta,
    optimal_system_utility,
    price_of_anarchy,
    residential_gini,
    system_utility,
    utility_as_float,
)


def rational_utility(population: int, capacity: int) -> Fraction:
    """Independent oracle: the piecewise density utility in exact rationals."""
    rho = Fraction(population, capacity)
    if rho <= Fraction(1, 2):
        return 2 * rho
    return Fraction(3, 2) - rho


class TestIndividualUtility:
    def test_quoted_values(self):
        assert individual_utility(30, 50) == 90  # rho 0.6 -> 0.9
        assert individual_utility(20, 50) == 80  # rho 0.4 -> 0.8
        assert utility_as_float(individual_utility(30, 50), 50) == 0.9
        assert utility_as_float(individual_utility(20, 50), 50) == 0.8

    def test_peak_and_empty(self):
        assert individual_utility(25, 50) == 100
        assert individual_utility(0, 50) == 0

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            individual_utility(-1, 50)
        with pytest.raises(ValueError):
            individual_utility(51, 50)

    @given(capacity=st.integers(1, 200), data=st.data())
    def test_matches_rational_oracle(self, capacity, data):
        population = data.draw(st.integers(0, capacity))
        scaled = individual_utility(population, capacity)
        assert Fraction(scaled, 2 * capacity) == rational_utility(population, capacity)


class TestSystemUtility:
    def test_all_blocks_at_peak(self):
        assert system_utility([25] * 9, 50) == 22500
        assert utility_as_float(22500, 50) == 225.0

    def test_one_full_one_empty(self):
        assert utility_as_float(system_utility([50, 0], 50), 50) == 25.0

    def test_tiny_hand_case(self):
        # capacity 2, populations (2, 1): 2*0.5 + 1*1.0 = 2.0
        assert utility_as_float(system_utility([2, 1], 2), 2) == 2.0

    def test_equals_sum_over_agents(self):
        populations = [7, 0, 3, 5]
        capacity = 8
        per_agent = sum(
            individual_utility(n, capacity) * n for n in populations
        )
        assert system_utility(populations, capacity) == per_agent


class TestMoveSystemDelta:
    def test_matches_full_recompute(self):
        populations = (24, 25, 3, 50)
        capacity = 50
        for src, dst in itertools.permutations(range(4), 2):
            if populations[dst] >= capacity or populations[src] == 0:
                continue
            after = list(populations)
            after[src] -= 1
            after[dst] += 1
            assert move_system_delta(populations, capacity, src, dst) == (
                system_utility(after, capacity) - system_utility(populations, capacity)
            )


def brute_force_optimal(num_agents: int, num_blocks: int, capacity: int) -> int:
    best = -1
    for split in itertools.product(range(capacity + 1), repeat=num_blocks):
        if sum(split) == num_agents:
            best = max(best, system_utility(split, capacity))
    return best


class TestOptimalAllocation:
    def test_full_scale_reaches_global_peak(self):
        assert optimal_system_utility(225, 9, 50) == 22500

    def test_three_agents_two_tiny_blocks(self):
        # enumeration over {(2,1),(1,2)} gives 2.0
        assert utility_as_float(optimal_system_utility(3, 2, 2), 2) == 2.0

    def test_zero_agents(self):
        assert optimal_system_utility(0, 5, 7) == 0

    def test_infeasible_rejected(self):
        with pytest.raises(ValueError):
            optimal_system_utility(11, 2, 5)

    def test_agrees_with_enumeration_on_samples(self):
        for num_blocks, capacity in [(2, 4), (3, 3), (4, 5)]:
            for num_agents in range(num_blocks * capacity + 1):
                assert optimal_system_utility(num_agents, num_blocks, capacity) == (
                    brute_force_optimal(num_agents, num_blocks, capacity)
                ), (num_agents, num_blocks, capacity)

    def test_monotone_up_to_half_capacity(self):
        for num_blocks, capacity in [(3, 4), (2, 6), (4, 2)]:
            values = [
                optimal_system_utility(n, num_blocks, capacity)
                for n in range(num_blocks * capacity // 2 + 1)
            ]
            assert values == sorted(values)


class TestPriceOfAnarchy:
    def test_ratio_values(self):
        assert price_of_anarchy(22500, 22500) == 1.0
        assert round(price_of_anarchy(19251, 22500), 4) == 0.8556
        assert price_of_anarchy(0, 22500) == 0.0

    def test_zero_optimal_rejected(self):
        with pytest.raises(ValueError):
            price_of_anarchy(1, 0)

    @given(st.data())
    def test_never_exceeds_one_for_reachable_worlds(self, data):
        num_blocks = data.draw(st.integers(1, 5))
        capacity = data.draw(st.integers(1, 8))
        populations = data.draw(
            st.lists(
                st.integers(0, capacity), min_size=num_blocks, max_size=num_blocks
            )
        )
        num_agents = sum(populations)
        if num_agents == 0:
            return
        achieved = system_utility(populations, capacity)
        optimal = optimal_system_utility(num_agents, num_blocks, capacity)
        assert price_of_anarchy(achieved, optimal) <= 1.0


class TestResidentialGini:
    def test_even_distribution_is_zero(self):
        assert residential_gini([25] * 9) == 0

    def test_two_block_extreme(self):
        assert residential_gini([50, 0]) == Fraction(1, 2)

    def test_hand_evaluated_case(self):
        assert residential_gini([10, 10, 40]) == Fraction(1, 3)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            residential_gini([])
        with pytest.raises(ValueError):
            residential_gini([0, 0])

    @given(st.lists(st.integers(0, 60), min_size=1, max_size=9).filter(lambda v: sum(v) > 0))
    def test_permutation_invariant_and_zero_iff_equal(self, populations):
        value = residential_gini(populations)
        assert residential_gini(sorted(populations)) == value
        assert 0 <= value < 1
        assert (value == 0) == (len(set(populations)) == 1)


class TestClassification:
    def test_table_is_total_and_exhaustive(self):
        seen = set()
        for d_ind, d_sys in itertools.product((-7, 0, 7), repeat=2):
            seen.add(classify_action(d_ind, d_sys))
        assert seen == set(ArchetypeLabel)

    def test_named_cells(self):
        assert classify_action(2, -144) is ArchetypeLabel.SELFISH_GAIN
        assert classify_action(-2, 140) is ArchetypeLabel.ALTRUISTIC_SACRIFICE
        assert classify_action(0, 0) is ArchetypeLabel.FUTILE_MOVE
        assert classify_action(5, 5) is ArchetypeLabel.WIN_WIN
        assert classify_action(-1, -1) is ArchetypeLabel.LOSE_LOSE

    @given(st.integers(-500, 500), st.integers(-500, 500))
    def test_total_on_any_deltas(self, d_ind, d_sys):
        assert classify_action(d_ind, d_sys) in ArchetypeLabel


class TestConvergence:
    def test_required_count_is_exact(self):
        assert ConvergenceTracker(225, threshold=0.9).required_count == 203
        assert ConvergenceTracker(10, threshold=0.7).required_count == 7
        assert ConvergenceTracker(10, threshold=0.9).required_count == 9

    def test_hand_constructed_trace_fires_at_seven(self):
        tracker = ConvergenceTracker(10, threshold=0.9, window=3)
        # agent 9 keeps moving; the rest stop after step 4
        for step in range(1, 5):
            tracker.update([True] * 10, step)
        for step in range(5, 9):
            flags = [False] * 9 + [True]
            tracker.update(flags, step)
            if step < 7:
                assert tracker.converged_at is None
        assert tracker.converged_at == 7

    def test_any_move_resets_streak(self):
        tracker = ConvergenceTracker(3, threshold=1.0, window=3)
        tracker.update([False, False, False], 1)
        tracker.update([False, True, False], 2)
        assert tracker.streaks[1] == 0
        assert tracker.streaks[0] == 2

    def test_constant_movement_never_converges(self):
        tracker = ConvergenceTracker(4, threshold=0.9, window=3)
        for step in range(1, 50):
            tracker.update([True, True, True, True], step)
        assert tracker.converged_at is None

    def test_converged_at_is_stable(self):
        tracker = ConvergenceTracker(2, threshold=1.0, window=2)
        for step in range(1, 4):
            tracker.update([False, False], step)
        assert tracker.converged_at == 2
        tracker.update([True, True], 4)
        tracker.update([False, False], 5)
        assert tracker.converged_at == 2


class TestActionMatrix:
    def test_counting_proportions(self):
        labels = [ArchetypeLabel.SELFISH_GAIN] * 4 + [ArchetypeLabel.WIN_WIN] * 6
        matrix = aggregate_actions(labels)
        assert matrix.proportion(ArchetypeLabel.SELFISH_GAIN) == 0.40
        assert matrix.moves == 10
        assert not matrix.empty

    def test_all_stay_is_flagged_empty(self):
        matrix = aggregate_actions([], stays=12)
        assert matrix.empty
        assert matrix.stays == 12
        assert matrix.grid() == [[0.0] * 3] * 3

    def test_altruistic_total(self):
        labels = (
            [ArchetypeLabel.COSTLESS_ALTRUISM] * 2
            + [ArchetypeLabel.ALTRUISTIC_SACRIFICE]
            + [ArchetypeLabel.FUTILE_MOVE] * 7
        )
        matrix = aggregate_actions(labels)
        assert matrix.altruistic_share == pytest.approx(0.30)

    def test_grid_layout_matches_sign_table(self):
        labels = [
            classify_action(d_ind, d_sys)
            for d_ind, d_sys in itertools.product((1, 0, -1), repeat=2)
        ]
        matrix = aggregate_actions(labels)
        grid = matrix.grid()
        assert all(value == pytest.approx(1 / 9) for row in grid for value in row)
