"""Exact welfare metrics in scaled-integer arithmetic.

Utilities are integers counted in units of 1/(2*capacity). A block housing
``n`` of ``H`` residents pays each of them ``4*n`` units when ``2*n <= H`` and
``3*H - 2*n`` units otherwise; dividing by ``2*H`` recovers the real-valued
density utility exactly (2*rho below the 0.5 peak, 1.5 - rho above it).
Keeping every quantity integral makes the zero-delta column of the action
classification exact -- no epsilon anywhere downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence


def individual_utility(population: int, capacity: int) -> int:
    """Scaled per-resident utility of a block at the given population.

    Returns an integer in units of 1/(2*capacity); e.g. capacity 50 and
    population 30 give 90, i.e. a real utility of 0.90.
    """
    if not 0 <= population <= capacity:
        raise ValueError(f"population {population} outside [0, {capacity}]")
    if 2 * population <= capacity:
        return 4 * population
    return 3 * capacity - 2 * population


def utility_as_float(scaled: int, capacity: int) -> float:
    """Convert a scaled utility (units of 1/(2*capacity)) to a real number."""
    return scaled / (2 * capacity)


def block_contribution(population: int, capacity: int) -> int:
    """Scaled total utility contributed by one block's residents."""
    return population * individual_utility(population, capacity)


def system_utility(populations: Sequence[int], capacity: int) -> int:
    """Scaled sum of all residents' utilities across the whole grid."""
    return sum(block_contribution(n, capacity) for n in populations)


def move_system_delta(
    populations: Sequence[int], capacity: int, src: int, dst: int
) -> int:
    """Scaled system-utility change if one resident moved ``src`` -> ``dst``."""
    if src == dst:
        return 0
    return (
        block_contribution(populations[src] - 1, capacity)
        - block_contribution(populations[src], capacity)
        + block_contribution(populations[dst] + 1, capacity)
        - block_contribution(populations[dst], capacity)
    )


def optimal_system_utility(num_agents: int, num_blocks: int, capacity: int) -> int:
    """Best scaled system utility over every feasible population split.

    Dynamic program over (blocks filled, residents placed); O(Q * N * H) and
    exact, so it stays instant at full scale where enumeration is hopeless.
    """
    if num_blocks < 1 or capacity < 1:
        raise ValueError("need at least one block and a positive capacity")
    if not 0 <= num_agents <= num_blocks * capacity:
        raise ValueError(
            f"population {num_agents} infeasible for {num_blocks} blocks of {capacity}"
        )
    contrib = [block_contribution(n, capacity) for n in range(capacity + 1)]
    # best[j] = max utility of placing j residents into the blocks seen so far;
    # contributions are nonnegative, so -1 marks unreachable counts.
    best = [-1] * (num_agents + 1)
    best[0] = 0
    for _ in range(num_blocks):
        nxt = [-1] * (num_agents + 1)
        for placed, value in enumerate(best):
            if value < 0:
                continue
            for n in range(min(capacity, num_agents - placed) + 1):
                candidate = value + contrib[n]
                if candidate > nxt[placed + n]:
                    nxt[placed + n] = candidate
        best = nxt
    return best[num_agents]


def price_of_anarchy(final_scaled: int, optimal_scaled: int) -> float:
    """Achieved over optimal system utility; 1.0 means the optimum was reached."""
    if optimal_scaled <= 0:
        raise ValueError("optimal utility must be positive")
    return final_scaled / optimal_scaled


def residential_gini(populations: Sequence[int]) -> Fraction:
    """Exact inequality of the block population distribution.

    Sum of absolute pairwise differences over 2 * Q * total population;
    0 means perfectly even, values near 1 mean extreme concentration.
    """
    total = sum(populations)
    if not populations or total <= 0:
        raise ValueError("need a population vector with at least one resident")
    q = len(populations)
    diff = sum(abs(a - b) for a in populations for b in populations)
    return Fraction(diff, 2 * q * total)


class ArchetypeLabel(Enum):
    """Nine-way classification of a move by the signs of its utility deltas."""

    WIN_WIN = "win_win"
    NEUTRAL_SELF_GAIN = "neutral_self_gain"
    SELFISH_GAIN = "selfish_gain"
    COSTLESS_ALTRUISM = "costless_altruism"
    FUTILE_MOVE = "futile_move"
    INADVERTENT_SABOTAGE = "inadvertent_sabotage"
    ALTRUISTIC_SACRIFICE = "altruistic_sacrifice"
    POINTLESS_SELF_HARM = "pointless_self_harm"
    LOSE_LOSE = "lose_lose"


# (sign of individual delta, sign of system delta) -> label
_SIGN_TABLE = {
    (1, 1): ArchetypeLabel.WIN_WIN,
    (1, 0): ArchetypeLabel.NEUTRAL_SELF_GAIN,
    (1, -1): ArchetypeLabel.SELFISH_GAIN,
    (0, 1): ArchetypeLabel.COSTLESS_ALTRUISM,
    (0, 0): ArchetypeLabel.FUTILE_MOVE,
    (0, -1): ArchetypeLabel.INADVERTENT_SABOTAGE,
    (-1, 1): ArchetypeLabel.ALTRUISTIC_SACRIFICE,
    (-1, 0): ArchetypeLabel.POINTLESS_SELF_HARM,
    (-1, -1): ArchetypeLabel.LOSE_LOSE,
}


def _sign(value: int) -> int:
    return (value > 0) - (value < 0)


def classify_action(d_individual: int, d_system: int) -> ArchetypeLabel:
    """Map exact scaled deltas to an archetype; total over all sign pairs."""
    return _SIGN_TABLE[(_sign(d_individual), _sign(d_system))]


@dataclass
class ConvergenceTracker:
    """First step at which enough agents have been still for long enough.

    An agent's streak counts consecutive steps without moving; the run is
    converged at the first step where at least ceil(threshold * N) agents
    have streaks >= window. Once set, ``converged_at`` never changes.
    """

    num_agents: int
    threshold: float = 0.9
    window: int = 3
    streaks: list[int] = field(default_factory=list)
    converged_at: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not self.streaks:
            self.streaks = [0] * self.num_agents

    @property
    def required_count(self) -> int:
        # str() round-trips the configured literal, so 0.9 * 225 ceils to 203
        # rather than whatever binary float noise would suggest.
        return math.ceil(Fraction(str(self.threshold)) * self.num_agents)

    def update(self, moved_flags: Sequence[bool], step: int) -> None:
        if len(moved_flags) != self.num_agents:
            raise ValueError("one moved flag per agent required")
        for i, moved in enumerate(moved_flags):
            self.streaks[i] = 0 if moved else self.streaks[i] + 1
        if self.converged_at is None:
            still = sum(1 for s in self.streaks if s >= self.window)
            if still >= self.required_count:
                self.converged_at = step


# Row-major archetype grid: rows are the individual-delta sign (+, 0, -),
# columns the system-delta sign (+, 0, -).
GRID_LAYOUT: tuple[tuple[ArchetypeLabel, ...], ...] = (
    (
        ArchetypeLabel.WIN_WIN,
        ArchetypeLabel.NEUTRAL_SELF_GAIN,
        ArchetypeLabel.SELFISH_GAIN,
    ),
    (
        ArchetypeLabel.COSTLESS_ALTRUISM,
        ArchetypeLabel.FUTILE_MOVE,
        ArchetypeLabel.INADVERTENT_SABOTAGE,
    ),
    (
        ArchetypeLabel.ALTRUISTIC_SACRIFICE,
        ArchetypeLabel.POINTLESS_SELF_HARM,
        ArchetypeLabel.LOSE_LOSE,
    ),
)


@dataclass
class ActionMatrix:
    """Archetype counts over move actions, with stay actions tallied aside."""

    moves: int
    stays: int
    counts: dict[ArchetypeLabel, int]

    @property
    def empty(self) -> bool:
        return self.moves == 0

    def proportion(self, label: ArchetypeLabel) -> float:
        if self.moves == 0:
            return 0.0
        return self.counts.get(label, 0) / self.moves

    def grid(self) -> list[list[float]]:
        return [[self.proportion(label) for label in row] for row in GRID_LAYOUT]

    @property
    def altruistic_share(self) -> float:
        return self.proportion(ArchetypeLabel.COSTLESS_ALTRUISM) + self.proportion(
            ArchetypeLabel.ALTRUISTIC_SACRIFICE
        )

    @property
    def egoistic_share(self) -> float:
        return self.proportion(ArchetypeLabel.SELFISH_GAIN) + self.proportion(
            ArchetypeLabel.INADVERTENT_SABOTAGE
        )

    @property
    def pro_social_share(self) -> float:
        return self.altruistic_share + self.proportion(ArchetypeLabel.WIN_WIN)

    @property
    def anti_social_share(self) -> float:
        return self.egoistic_share + self.proportion(ArchetypeLabel.LOSE_LOSE)

    def to_dict(self) -> dict:
        return {
            "moves": self.moves,
            "stays": self.stays,
            "empty": self.empty,
            "counts": {label.value: self.counts.get(label, 0) for label in ArchetypeLabel},
            "proportions": {label.value: self.proportion(label) for label in ArchetypeLabel},
            "grid": self.grid(),
            "altruistic_actions": self.altruistic_share,
            "egoistic_actions": self.egoistic_share,
            "pro_social_total": self.pro_social_share,
            "anti_social_total": self.anti_social_share,
        }


def aggregate_actions(
    move_labels: Iterable[ArchetypeLabel], stays: int = 0
) -> ActionMatrix:
    """Tally move archetypes into the 3x3 matrix; stays are counted separately."""
    counts: dict[ArchetypeLabel, int] = {}
    moves = 0
    for label in move_labels:
        counts[label] = counts.get(label, 0) + 1
        moves += 1
    return ActionMatrix(moves=moves, stays=stays, counts=counts)
