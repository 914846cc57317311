"""Deterministic scripted residents and the retry loop for model-backed ones.

Scripted policies are exact oracles: the greedy egoist maximizes its own
post-move reward, the altruistic optimizer maximizes the post-move collective
reward, both breaking ties toward staying and then the lowest block id. Their
generated "thinking" sentences state the computed rewards so the qualitative
pipeline has real material to code even in fully offline runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable

from .board import DO_NOTHING
from .gateway import ExhaustedError
from .metrics import individual_utility, move_system_delta, system_utility, utility_as_float
from .parsing import AgentResponse, ParseError, parse_response
from .prompts import Observation, build_prompt

SCRIPTED_POLICIES = (
    "greedy_egoist",
    "altruistic_optimizer",
    "random_walk",
    "always_stay",
)
MAX_REPAIR_RETRIES = 2

_REPAIR_SUFFIX = (
    "\n\n# Error:\nYour previous response could not be used: {error}\n"
    "Respond again. JSON format only:"
)


def rng_for_agent(seed: int | str, agent_id: int) -> random.Random:
    """Per-agent stream: a pure function of (seed, agent), immune to call order."""
    return random.Random(f"{seed}:agent:{agent_id}")


def _open_targets(obs: Observation) -> list[int]:
    return [
        q
        for q in range(obs.num_blocks)
        if q != obs.own_block and obs.populations[q] < obs.capacity
    ]


def _rewards_sentence(obs: Observation, target: int | None, closing: str) -> str:
    capacity = obs.capacity
    stay_u = utility_as_float(
        individual_utility(obs.populations[obs.own_block], capacity), capacity
    )
    sys_now = utility_as_float(system_utility(obs.populations, capacity), capacity)
    lead = (
        f"Staying gives me a personal reward of {stay_u:.4f} "
        f"and keeps the system reward at {sys_now:.4f}."
    )
    if target is None:
        return f"{lead} {closing}"
    move_u = utility_as_float(
        individual_utility(obs.populations[target] + 1, capacity), capacity
    )
    sys_after = utility_as_float(
        system_utility(obs.populations, capacity)
        + move_system_delta(obs.populations, capacity, obs.own_block, target),
        capacity,
    )
    return (
        f"{lead} Moving to block {target} gives me {move_u:.4f} "
        f"and changes the system reward to {sys_after:.4f}. {closing}"
    )


def _respond(obs: Observation, target: int | None, closing: str) -> AgentResponse:
    block = obs.own_block if target is None else target
    return AgentResponse(
        thinking=_rewards_sentence(obs, target, closing),
        move_to_block=block,
        board_action=DO_NOTHING,
    )


def _greedy_egoist(obs: Observation) -> AgentResponse:
    capacity = obs.capacity
    best_target: int | None = None
    best_u = individual_utility(obs.populations[obs.own_block], capacity)
    for q in _open_targets(obs):
        u = individual_utility(obs.populations[q] + 1, capacity)
        if u > best_u:
            best_target, best_u = q, u
    if best_target is None:
        return _respond(
            obs,
            None,
            "No other neighborhood offers me a better personal reward, "
            f"therefore I choose to stay in block {obs.own_block}.",
        )
    return _respond(
        obs,
        best_target,
        "I value my personal satisfaction, therefore I choose to move to "
        f"block {best_target}.",
    )


def _altruistic_optimizer(obs: Observation) -> AgentResponse:
    capacity = obs.capacity
    best_target: int | None = None
    best_delta = 0  # staying changes nothing
    for q in _open_targets(obs):
        delta = move_system_delta(obs.populations, capacity, obs.own_block, q)
        if delta > best_delta:
            best_target, best_delta = q, delta
    if best_target is None:
        return _respond(
            obs,
            None,
            "No move increases the system reward, therefore I choose to stay "
            f"in block {obs.own_block}.",
        )
    return _respond(
        obs,
        best_target,
        "The collective gain outweighs my personal change, therefore I choose "
        f"to move to block {best_target}.",
    )


def _random_walk(obs: Observation, rng: random.Random) -> AgentResponse:
    options: list[int | None] = [None]
    options.extend(_open_targets(obs))
    target = rng.choice(options)
    if target is None:
        return _respond(
            obs, None, f"I am exploring my options and choose to stay in block {obs.own_block}."
        )
    return _respond(
        obs, target, f"I am exploring the city, therefore I choose to move to block {target}."
    )


def _always_stay(obs: Observation) -> AgentResponse:
    return _respond(
        obs, None, f"I prefer not to move, therefore I choose to stay in block {obs.own_block}."
    )


def scripted_decide(
    kind: str, obs: Observation, rng: random.Random | None = None
) -> AgentResponse:
    """Deterministic decision for a scripted policy (rng only for random_walk)."""
    if kind == "greedy_egoist":
        return _greedy_egoist(obs)
    if kind == "altruistic_optimizer":
        return _altruistic_optimizer(obs)
    if kind == "random_walk":
        if rng is None:
            raise ValueError("random_walk needs a seeded rng")
        return _random_walk(obs, rng)
    if kind == "always_stay":
        return _always_stay(obs)
    raise ValueError(f"unknown scripted policy: {kind!r}")


@dataclass
class LlmOutcome:
    response: AgentResponse
    attempts: int
    failed: bool  # fell back to staying put


def llm_decide(obs: Observation, complete_fn: Callable[[str], str]) -> LlmOutcome:
    """Prompt, parse, validate -- with up to two repair re-prompts.

    A repair re-prompt appends the parse error to the original prompt. Any
    remaining failure (including an exhausted endpoint) degrades to staying
    put with no board action; the run never aborts mid-step on one agent.
    """
    base = build_prompt(obs)
    board_size = len(obs.board) if obs.board is not None else None
    error: ParseError | None = None
    attempts = 0
    for attempt in range(1, MAX_REPAIR_RETRIES + 2):
        attempts = attempt
        prompt = base if error is None else base + _REPAIR_SUFFIX.format(error=error)
        try:
            raw = complete_fn(prompt)
        except ExhaustedError:
            break
        try:
            response = parse_response(raw, obs.num_blocks, board_size)
        except ParseError as exc:
            error = exc
            continue
        target = response.move_to_block
        if target != obs.own_block and obs.populations[target] >= obs.capacity:
            error = ParseError(
                "full_block", f"neighborhood {target} is full and cannot be moved into"
            )
            continue
        return LlmOutcome(response=response, attempts=attempt, failed=False)
    fallback = AgentResponse(
        thinking="", move_to_block=obs.own_block, board_action=DO_NOTHING
    )
    return LlmOutcome(response=fallback, attempts=attempts, failed=True)
