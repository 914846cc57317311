"""Simulation loop: seeded setup, per-step agent turns, board curation,
convergence, and a complete on-disk audit trail.

A run directory contains:

* ``config.json``      -- config snapshot plus metadata (initial locations,
                          placement sampler, template fingerprint, version)
* ``events.jsonl``     -- one decision record per agent turn
* ``board.jsonl``      -- post-curation board snapshot per step (board runs)
* ``exchanges.jsonl``  -- raw HTTP attempt trail (live model runs)
* ``replay_store.jsonl`` -- content-addressed completions (live model runs)
* ``summary.json``     -- the run summary

Every metric in the summary is recomputable from ``config.json`` and
``events.jsonl`` alone; see :mod:`blocktown.analysis`.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .board import (
    BoardAction,
    Message,
    MessageBoard,
    Post,
    action_from_dict,
    action_to_dict,
    apply_board_action,
)
from .gateway import GatewayClient, ModelEndpoint, ReplayStore, exchange_key
from .metrics import (
    ArchetypeLabel,
    ConvergenceTracker,
    aggregate_actions,
    classify_action,
    individual_utility,
    optimal_system_utility,
    price_of_anarchy,
    residential_gini,
    system_utility,
    utility_as_float,
)
from .policies import SCRIPTED_POLICIES, llm_decide, rng_for_agent, scripted_decide
from .prompts import HistoryEntry, Observation, template_fingerprint
from .world import PLACEMENT_SAMPLER, GridWorld, initial_world

UPDATE_MODES = ("sequential", "simultaneous")
REPORT_DECIMALS = 4

# Others-history is filtered per observer; a deque this deep always retains at
# least 10 entries from other agents (an agent appears at most twice in it).
_RECENT_DEPTH = 12
_HISTORY_DEPTH = 10


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """All parameters of one reproducible run."""

    num_blocks: int = 9
    capacity: int = 50
    initial_density: float = 0.5
    guidance_level: int = 1
    board_enabled: bool = False
    update_mode: str = "sequential"
    policy: str = "altruistic_optimizer"
    seed: int = 0
    max_steps: int = 100
    convergence_threshold: float = 0.9
    convergence_window: int = 3
    endpoint: ModelEndpoint | None = None

    @property
    def num_agents(self) -> int:
        exact = Fraction(str(self.initial_density)) * self.num_blocks * self.capacity
        if exact.denominator != 1:
            raise ConfigError(
                f"initial_density {self.initial_density} does not yield a whole "
                f"number of agents for {self.num_blocks} blocks of {self.capacity}"
            )
        return int(exact)

    def validate(self) -> None:
        if self.num_blocks < 1 or self.capacity < 1:
            raise ConfigError("num_blocks and capacity must be positive")
        if not 0 < self.initial_density <= 1:
            raise ConfigError("initial_density must be in (0, 1]")
        self.num_agents  # raises if not integral
        if self.guidance_level not in (0, 1, 2):
            raise ConfigError("guidance_level must be 0, 1 or 2")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError(f"update_mode must be one of {UPDATE_MODES}")
        if self.policy not in SCRIPTED_POLICIES + ("llm",):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1")
        if not 0 < self.convergence_threshold <= 1:
            raise ConfigError("convergence_threshold must be in (0, 1]")
        if self.convergence_window < 1:
            raise ConfigError("convergence_window must be at least 1")

    def to_dict(self) -> dict:
        data = {
            "num_blocks": self.num_blocks,
            "capacity": self.capacity,
            "initial_density": self.initial_density,
            "guidance_level": self.guidance_level,
            "board_enabled": self.board_enabled,
            "update_mode": self.update_mode,
            "policy": self.policy,
            "seed": self.seed,
            "max_steps": self.max_steps,
            "convergence_threshold": self.convergence_threshold,
            "convergence_window": self.convergence_window,
            "endpoint": self.endpoint.to_dict() if self.endpoint else None,
        }
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        endpoint = data.pop("endpoint", None)
        known = {f for f in cls.__dataclass_fields__ if f != "endpoint"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(
            **data,
            endpoint=ModelEndpoint.from_dict(endpoint) if endpoint else None,
        )
        config.validate()
        return config

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed)


@dataclass
class DecisionRecord:
    """One agent turn: what was decided, what it did to both utilities."""

    step: int
    agent_id: int
    from_block: int
    to_block: int
    thinking: str
    board_action: BoardAction
    board_outcome: str  # posted | liked | like_target_missing | none
    board_message_id: int | None
    d_individual: int
    d_system: int
    archetype: ArchetypeLabel | None  # present iff the agent actually moved
    parse_attempts: int
    policy: str
    rejected_full: bool = False
    parse_failed: bool = False

    @property
    def moved(self) -> bool:
        return self.from_block != self.to_block

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "agent_id": self.agent_id,
            "decision": "move" if self.moved else "stay",
            "from_block": self.from_block,
            "to_block": self.to_block,
            "thinking": self.thinking,
            "board_action": action_to_dict(self.board_action),
            "board_outcome": self.board_outcome,
            "board_message_id": self.board_message_id,
            "d_individual": self.d_individual,
            "d_system": self.d_system,
            "archetype": self.archetype.value if self.archetype else None,
            "parse_attempts": self.parse_attempts,
            "policy": self.policy,
            "rejected_full": self.rejected_full,
            "parse_failed": self.parse_failed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionRecord":
        return cls(
            step=data["step"],
            agent_id=data["agent_id"],
            from_block=data["from_block"],
            to_block=data["to_block"],
            thinking=data["thinking"],
            board_action=action_from_dict(data["board_action"]),
            board_outcome=data["board_outcome"],
            board_message_id=data["board_message_id"],
            d_individual=data["d_individual"],
            d_system=data["d_system"],
            archetype=ArchetypeLabel(data["archetype"]) if data["archetype"] else None,
            parse_attempts=data["parse_attempts"],
            policy=data["policy"],
            rejected_full=data["rejected_full"],
            parse_failed=data["parse_failed"],
        )


@dataclass
class RunSummary:
    """Final metrics of a run; reproducible from the logs alone."""

    converged_at: int | None
    steps_run: int
    final_populations: list[int]
    final_system_utility_scaled: int
    final_system_utility: float
    optimal_system_utility_scaled: int
    optimal_system_utility: float
    price_of_anarchy: float
    residential_gini: float
    action_matrix: dict
    utility_series: list[list]
    final_board: list[dict]
    board_text_frequency: list[dict]

    def to_dict(self) -> dict:
        return {
            "converged_at": self.converged_at,
            "steps_run": self.steps_run,
            "final_populations": self.final_populations,
            "final_system_utility_scaled": self.final_system_utility_scaled,
            "final_system_utility": self.final_system_utility,
            "optimal_system_utility_scaled": self.optimal_system_utility_scaled,
            "optimal_system_utility": self.optimal_system_utility,
            "price_of_anarchy": self.price_of_anarchy,
            "residential_gini": self.residential_gini,
            "action_matrix": self.action_matrix,
            "utility_series": self.utility_series,
            "final_board": self.final_board,
            "board_text_frequency": self.board_text_frequency,
        }


def compute_deltas(world: GridWorld, agent: int, target: int | None) -> tuple[int, int]:
    """Exact scaled (individual, system) deltas of acting now versus staying.

    The individual baseline is the agent's utility if it stayed in the world
    as it currently stands; the post-move value counts the agent's own effect
    on the destination density. Staying is exactly (0, 0).
    """
    current = world.locations[agent]
    if target is None or target == current:
        return 0, 0
    capacity = world.capacity
    stay_u = individual_utility(world.populations[current], capacity)
    move_u = individual_utility(world.populations[target] + 1, capacity)
    before = system_utility(world.populations, capacity)
    populations_after = list(world.populations)
    populations_after[current] -= 1
    populations_after[target] += 1
    after = system_utility(populations_after, capacity)
    return move_u - stay_u, after - before


def board_text_frequency(
    records: Sequence[DecisionRecord], final_messages: Sequence[Message]
) -> list[dict]:
    """Frequency table over exact post texts, plus the total likes each text
    still holds on the final board (so both readings of "popularity" are
    recoverable from one table)."""
    counts: dict[str, int] = {}
    for record in records:
        if record.board_outcome == "posted" and isinstance(record.board_action, Post):
            text = record.board_action.text
            counts[text] = counts.get(text, 0) + 1
    final_likes: dict[str, int] = {}
    for message in final_messages:
        final_likes[message.text] = final_likes.get(message.text, 0) + message.likes
    rows = [
        {"text": text, "post_count": count, "final_likes": final_likes.get(text, 0)}
        for text, count in counts.items()
    ]
    rows.sort(key=lambda row: -row["post_count"])  # stable: ties keep post order
    return rows


def build_summary(
    *,
    config: RunConfig,
    records: Sequence[DecisionRecord],
    final_populations: Sequence[int],
    utility_series: list[list],
    converged_at: int | None,
    steps_run: int,
    final_messages: Sequence[Message],
) -> RunSummary:
    capacity = config.capacity
    final_scaled = system_utility(final_populations, capacity)
    optimal_scaled = optimal_system_utility(
        config.num_agents, config.num_blocks, capacity
    )
    matrix = aggregate_actions(
        (r.archetype for r in records if r.archetype is not None),
        stays=sum(1 for r in records if not r.moved),
    )
    return RunSummary(
        converged_at=converged_at,
        steps_run=steps_run,
        final_populations=list(final_populations),
        final_system_utility_scaled=final_scaled,
        final_system_utility=utility_as_float(final_scaled, capacity),
        optimal_system_utility_scaled=optimal_scaled,
        optimal_system_utility=utility_as_float(optimal_scaled, capacity),
        price_of_anarchy=round(
            price_of_anarchy(final_scaled, optimal_scaled), REPORT_DECIMALS
        ),
        residential_gini=round(
            float(residential_gini(final_populations)), REPORT_DECIMALS
        ),
        action_matrix=matrix.to_dict(),
        utility_series=utility_series,
        final_board=[m.to_dict() for m in final_messages],
        board_text_frequency=board_text_frequency(records, final_messages),
    )


def _dump_line(data: dict) -> str:
    return json.dumps(data, ensure_ascii=False, separators=(",", ":"))


class _Completer:
    """Resolves prompts to completions: live HTTP when recording, pure lookup
    when replaying. Live mode records every completion under a key built from
    (agent scope, attempt ordinal, prompt) so repeated identical repair
    prompts stay distinguishable."""

    def __init__(
        self,
        config: RunConfig,
        run_dir: Path,
        transport,
        replay_path: str | Path | None,
    ):
        self.replay: ReplayStore | None = None
        self.client: GatewayClient | None = None
        self.record_store: ReplayStore | None = None
        self._exchange_path = run_dir / "exchanges.jsonl"
        if replay_path is not None:
            self.replay = ReplayStore.load(replay_path)
            return
        if config.endpoint is None:
            raise ConfigError(
                "policy 'llm' needs an endpoint (or a replay store to run offline)"
            )
        self.client = GatewayClient(config.endpoint, transport=transport)
        self._exchange_path.write_text("", encoding="utf-8")
        self.record_store = ReplayStore(run_dir / "replay_store.jsonl")

    def close(self) -> None:
        if self.client is not None:
            self.client.close()

    def for_agent(self, scope: str) -> Callable[[str], str]:
        counter = itertools.count(1)

        def complete(prompt: str) -> str:
            attempt = next(counter)
            key = exchange_key(scope, attempt, prompt)
            if self.replay is not None:
                return self.replay.get(key)
            assert self.client is not None and self.record_store is not None
            text, exchanges = self.client.complete(prompt)
            with open(self._exchange_path, "a", encoding="utf-8") as handle:
                for exchange in exchanges:
                    handle.write(
                        _dump_line({"scope": scope, **exchange.to_dict()}) + "\n"
                    )
            self.record_store.put(key, text)
            return text

        return complete


class _Memory:
    """Per-agent personal history plus the shared recent-decisions window."""

    def __init__(self, num_agents: int):
        self.personal: list[deque[HistoryEntry]] = [
            deque(maxlen=_HISTORY_DEPTH) for _ in range(num_agents)
        ]
        self.recent: deque[tuple[int, HistoryEntry]] = deque(maxlen=_RECENT_DEPTH)

    def record(self, agent: int, entry: HistoryEntry) -> None:
        self.personal[agent].append(entry)
        self.recent.append((agent, entry))

    def others_for(self, agent: int) -> tuple[HistoryEntry, ...]:
        entries = [e for aid, e in self.recent if aid != agent]
        return tuple(entries[-_HISTORY_DEPTH:])


def _observe(
    config: RunConfig,
    agent: int,
    own_block: int,
    populations: tuple[int, ...],
    memory: _Memory,
    board_view,
) -> Observation:
    return Observation(
        num_blocks=config.num_blocks,
        capacity=config.capacity,
        populations=populations,
        own_block=own_block,
        guidance_level=config.guidance_level,
        personal_history=tuple(memory.personal[agent]),
        others_history=memory.others_for(agent),
        board=board_view,
    )


def run(
    config: RunConfig,
    run_dir: str | Path,
    *,
    transport=None,
    replay_path: str | Path | None = None,
) -> RunSummary:
    """Execute a full run and persist its audit trail under ``run_dir``.

    ``transport`` is an optional httpx transport for the live model client
    (used by tests and demos to stand in for a real endpoint). ``replay_path``
    switches the model policy to offline replay from a recorded store.
    """
    config.validate()
    num_agents = config.num_agents
    capacity = config.capacity
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    world = initial_world(config.num_blocks, capacity, num_agents, config.seed)
    board = MessageBoard() if config.board_enabled else None
    memory = _Memory(num_agents)
    tracker = ConvergenceTracker(
        num_agents,
        threshold=config.convergence_threshold,
        window=config.convergence_window,
    )
    order_rng = random.Random(f"{config.seed}:order")
    agent_rngs = [rng_for_agent(config.seed, i) for i in range(num_agents)]

    completer: _Completer | None = None
    if config.policy == "llm":
        completer = _Completer(config, run_dir, transport, replay_path)

    metadata = {
        "num_agents": num_agents,
        "initial_locations": list(world.locations),
        "placement_sampler": PLACEMENT_SAMPLER,
        "package_version": __version__,
        "templates": template_fingerprint(),
        "replayed_from": str(replay_path) if replay_path else None,
    }
    (run_dir / "config.json").write_text(
        json.dumps(
            {"config": config.to_dict(), "metadata": metadata},
            indent=2,
            sort_keys=True,
            ensure_ascii=False,
        )
        + "\n",
        encoding="utf-8",
    )

    events_path = run_dir / "events.jsonl"
    events_handle = open(events_path, "w", encoding="utf-8")
    board_path = run_dir / "board.jsonl"
    board_handle = open(board_path, "w", encoding="utf-8") if board is not None else None

    sys_scaled = system_utility(world.populations, capacity)
    utility_series: list[list] = [[0, sys_scaled, utility_as_float(sys_scaled, capacity)]]
    records: list[DecisionRecord] = []
    steps_run = 0

    def apply_and_record(
        agent: int, obs: Observation, response, attempts: int, failed: bool, step: int
    ) -> bool:
        nonlocal sys_scaled
        from_block = world.locations[agent]
        target = response.move_to_block
        rejected = False
        if target != from_block and world.populations[target] >= capacity:
            # Legal against the (frozen) observation but stale now: demote to stay.
            rejected = True
            target = from_block
        d_individual, d_system = compute_deltas(
            world, agent, None if target == from_block else target
        )
        moved = world.apply_move(agent, None if target == from_block else target)
        sys_scaled += d_system
        outcome, message_id = "none", None
        if board is not None:
            outcome, message_id = apply_board_action(
                board, response.board_action, obs.board, step
            )
        archetype = classify_action(d_individual, d_system) if moved else None
        record = DecisionRecord(
            step=step,
            agent_id=agent,
            from_block=from_block,
            to_block=world.locations[agent],
            thinking=response.thinking,
            board_action=response.board_action,
            board_outcome=outcome,
            board_message_id=message_id,
            d_individual=d_individual,
            d_system=d_system,
            archetype=archetype,
            parse_attempts=attempts,
            policy=config.policy,
            rejected_full=rejected,
            parse_failed=failed,
        )
        records.append(record)
        events_handle.write(_dump_line(record.to_dict()) + "\n")
        own_after = individual_utility(
            world.populations[world.locations[agent]], capacity
        )
        memory.record(
            agent,
            HistoryEntry(
                step=step,
                from_block=from_block,
                to_block=world.locations[agent],
                own_reward_scaled=own_after,
                system_reward_scaled=sys_scaled,
            ),
        )
        return moved

    def decide(agent: int, obs: Observation, step: int):
        if config.policy == "llm":
            assert completer is not None
            outcome = llm_decide(
                obs, completer.for_agent(f"agent-{agent}:step-{step}")
            )
            return outcome.response, outcome.attempts, outcome.failed
        response = scripted_decide(config.policy, obs, rng=agent_rngs[agent])
        return response, 1, False

    try:
        for step in range(1, config.max_steps + 1):
            steps_run = step
            world.step = step
            order = list(range(num_agents))
            order_rng.shuffle(order)
            moved_flags = [False] * num_agents

            if config.update_mode == "sequential":
                for agent in order:
                    obs = _observe(
                        config,
                        agent,
                        world.locations[agent],
                        world.population_vector(),
                        memory,
                        board.snapshot() if board is not None else None,
                    )
                    response, attempts, failed = decide(agent, obs, step)
                    moved_flags[agent] = apply_and_record(
                        agent, obs, response, attempts, failed, step
                    )
            else:
                frozen_populations = world.population_vector()
                frozen_board = board.snapshot() if board is not None else None
                staged = []
                for agent in order:
                    obs = _observe(
                        config,
                        agent,
                        world.locations[agent],
                        frozen_populations,
                        memory,
                        frozen_board,
                    )
                    response, attempts, failed = decide(agent, obs, step)
                    staged.append((agent, obs, response, attempts, failed))
                for agent, obs, response, attempts, failed in staged:
                    moved_flags[agent] = apply_and_record(
                        agent, obs, response, attempts, failed, step
                    )

            if board is not None:
                board.curate()
                assert board_handle is not None
                board_handle.write(
                    _dump_line(
                        {
                            "step": step,
                            "messages": [m.to_dict() for m in board.ranked_messages()],
                        }
                    )
                    + "\n"
                )
            utility_series.append(
                [step, sys_scaled, utility_as_float(sys_scaled, capacity)]
            )
            tracker.update(moved_flags, step)
            if tracker.converged_at == step:
                break
    finally:
        events_handle.close()
        if board_handle is not None:
            board_handle.close()
        if completer is not None:
            completer.close()

    summary = build_summary(
        config=config,
        records=records,
        final_populations=world.populations,
        utility_series=utility_series,
        converged_at=tracker.converged_at,
        steps_run=steps_run,
        final_messages=board.ranked_messages() if board is not None else [],
    )
    (run_dir / "summary.json").write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    return summary
