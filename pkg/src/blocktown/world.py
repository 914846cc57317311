"""Grid world state: agent locations, block populations, and migration moves."""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

# Recorded in run metadata so a run directory pins its own placement scheme.
PLACEMENT_SAMPLER = "per-agent uniform draw over non-full blocks (mt19937, string-seeded)"


class FullBlockError(ValueError):
    """Move targets a block that is already at capacity."""


@dataclass
class GridWorld:
    """Mutable world state: single writer (the run loop), cheap read access.

    ``populations[q]`` is kept in lockstep with ``locations`` so density and
    utility lookups are O(1). ``step`` is timestep bookkeeping owned by the
    caller; moves never touch it.
    """

    capacity: int
    locations: list[int]
    populations: list[int]
    step: int = 0

    @property
    def num_blocks(self) -> int:
        return len(self.populations)

    @property
    def num_agents(self) -> int:
        return len(self.locations)

    def population_vector(self) -> tuple[int, ...]:
        return tuple(self.populations)

    def block_density(self, block: int) -> Fraction:
        """Exact occupancy fraction of ``block`` (no floating rounding)."""
        return Fraction(self.populations[block], self.capacity)

    def apply_move(self, agent: int, target: int | None) -> bool:
        """Relocate ``agent`` to ``target``; ``None`` or the current block stays.

        Returns True when the agent actually changed block (a move into the
        agent's own block is normalized to a stay). Raises FullBlockError when
        the target is at capacity.
        """
        current = self.locations[agent]
        if target is None or target == current:
            return False
        if not 0 <= target < self.num_blocks:
            raise ValueError(f"block {target} out of range [0, {self.num_blocks})")
        if self.populations[target] >= self.capacity:
            raise FullBlockError(
                f"block {target} is full ({self.capacity}/{self.capacity})"
            )
        self.populations[current] -= 1
        self.populations[target] += 1
        self.locations[agent] = target
        return True


def initial_world(
    num_blocks: int, capacity: int, num_agents: int, seed: int | str
) -> GridWorld:
    """Seeded uniform random placement subject to per-block capacity.

    Each agent, in id order, draws one block uniformly from those still below
    capacity. Identical (dimensions, seed) always yields identical locations.
    """
    if num_blocks < 1 or capacity < 1:
        raise ValueError("need at least one block and a positive capacity")
    if num_agents < 0:
        raise ValueError("negative population")
    if num_agents > num_blocks * capacity:
        raise ValueError(
            f"{num_agents} agents exceed total capacity {num_blocks * capacity}"
        )
    rng = random.Random(f"{seed}:placement")
    populations = [0] * num_blocks
    locations: list[int] = []
    for _ in range(num_agents):
        open_blocks = [q for q in range(num_blocks) if populations[q] < capacity]
        block = rng.choice(open_blocks)
        populations[block] += 1
        locations.append(block)
    return GridWorld(capacity=capacity, locations=locations, populations=populations)
