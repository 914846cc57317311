import random
from fractions import Fraction

import pytest

from blocktown.world import FullBlockError, GridWorld, initial_world


def test_full_scale_placement_respects_capacity():
    world = initial_world(num_blocks=9, capacity=50, num_agents=225, seed=11)
    assert world.num_agents == 225
    assert sum(world.populations) == 225
    assert all(0 <= p <= 50 for p in world.populations)
    assert [world.populations[q] for q in range(9)] == [
        world.locations.count(q) for q in range(9)
    ]


def test_single_block_forces_placement():
    world = initial_world(num_blocks=1, capacity=10, num_agents=10, seed=0)
    assert world.populations == [10]
    assert world.locations == [0] * 10


def test_seeded_placement_is_reproducible():
    a = initial_world(9, 50, 225, seed=42)
    b = initial_world(9, 50, 225, seed=42)
    assert a.locations == b.locations
    c = initial_world(9, 50, 225, seed=43)
    assert a.locations != c.locations


def test_infeasible_population_rejected():
    with pytest.raises(ValueError):
        initial_world(num_blocks=2, capacity=3, num_agents=7, seed=0)


def test_move_updates_both_blocks():
    locations = [0] * 24 + [1] * 10
    world = GridWorld(capacity=50, locations=locations, populations=[24, 10])
    moved = world.apply_move(24, 0)  # an agent currently in block 1
    assert moved
    assert world.populations == [25, 9]
    assert world.locations[24] == 0


def test_stay_is_identity_on_locations():
    world = GridWorld(capacity=5, locations=[0, 1], populations=[1, 1])
    before = world.population_vector()
    assert world.apply_move(0, None) is False
    assert world.apply_move(0, 0) is False  # own block normalizes to stay
    assert world.population_vector() == before


def test_move_to_full_block_raises():
    world = GridWorld(capacity=2, locations=[0, 1, 1], populations=[1, 2])
    with pytest.raises(FullBlockError):
        world.apply_move(0, 1)


def test_move_to_own_full_block_is_a_stay():
    world = GridWorld(capacity=2, locations=[0, 0, 1], populations=[2, 1])
    assert world.apply_move(0, 0) is False


def test_block_density_is_exact():
    world = GridWorld(capacity=50, locations=[], populations=[25, 30, 0])
    assert world.block_density(0) == Fraction(1, 2)
    assert world.block_density(1) == Fraction(3, 5)
    assert world.block_density(2) == 0


def test_reversibility_restores_population_vector():
    world = initial_world(4, 6, 12, seed=3)
    before = world.population_vector()
    origin = world.locations[5]
    target = next(
        q for q in range(4) if q != origin and world.populations[q] < world.capacity
    )
    world.apply_move(5, target)
    world.apply_move(5, origin)
    assert world.population_vector() == before


def test_conservation_and_capacity_under_random_legal_moves():
    rng = random.Random(99)
    world = initial_world(5, 4, 12, seed=99)
    for _ in range(500):
        agent = rng.randrange(world.num_agents)
        options = [None] + [
            q
            for q in range(world.num_blocks)
            if q != world.locations[agent] and world.populations[q] < world.capacity
        ]
        world.apply_move(agent, rng.choice(options))
        assert sum(world.populations) == 12
        assert all(0 <= p <= world.capacity for p in world.populations)
