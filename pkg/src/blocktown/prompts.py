"""Prompt assembly for resident agents.

Every section is rendered from the fixed fragments below, so identical
observations produce byte-identical prompts. ``template_fingerprint`` digests
the fragments; run metadata stores it so a run directory pins the exact
wording it used.

``guidance_level`` selects how much social context the wording carries:
0 frames a purely individual decision, 1 tells the agent that similarly
minded residents are deciding too, 2 additionally pushes second-order
reasoning about how its choice feeds back through others.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .board import BoardMessageView

TEMPLATE_VERSION = "1"

GUIDANCE_LEVELS = (0, 1, 2)

_OPENING_SOLO = (
    "You are a resident in a city with {num_blocks} neighborhoods, deciding where to live."
)
_OPENING_SOCIAL = (
    "You are a resident in a city with {num_blocks} neighborhoods, deciding where to live. "
    "There are other residents also deciding where to migrate, and they have similar preferences."
)

_REWARD_SECTION = """# SELF-reward Function:
Your personal SELF-reward in a neighborhood is determined by its population density (rho). The SELF-reward function u(rho) is:
- If density rho <= 0.5, then SELF-reward u(rho) = 2 * rho
- If density rho > 0.5, then SELF-reward u(rho) = 1.5 - rho

# Collective Reward Function:
The collective reward of the system is the sum of rewards for all residents. A neighborhood with population n out of capacity {capacity} contributes n * u(n / {capacity}) to the collective reward; the collective reward adds this up over all {num_blocks} neighborhoods."""

_HISTORY_HEADER = "# Your Current History:"
_HISTORY_LOCATION = "You currently live in block {block}."
_HISTORY_EMPTY = "You have not made any migration decisions yet."

_OTHERS_HEADER = "# Recent Migration Decisions by Other Residents:"
_OTHERS_EMPTY = "No decisions by other residents have been observed yet."

_BOARD_HEADER = "--- Global Message Board (All residents can see and interact with all messages) ---"
_BOARD_FOOTER = "--- End of Message Board ---"
_BOARD_EMPTY = "(no messages yet)"

_OPTIONS_HEADER = "# Your Options:"
_OPTION_ENTRY = """- Neighborhood (Block ID: {block}) :
  - Current Density: {density}
  - Population: {population}/{capacity}
  - Your Personal SELF-Reward (u(rho)): (Should Calculated by Yourself)"""

_RULES_HEADER = "# Decision Rules:"
_RULE_FULL = "You CANNOT move to a neighborhood that is full (at 100% capacity)."
_RULE_OTHERS_BASIC = (
    "Think about what other residents might decide and consider this when making your decision."
)
_RULE_OTHERS_DEEP = (
    "Think about what other residents might decide and consider this when making your decision. "
    "You should also consider how your actions affect other people's decisions, and how their "
    "decisions further affect you. You should plan for the long term based on your history and "
    "the actions of others."
)
_RULE_BOARD = """You can interact with the Global Message Board:
   - To POST a new message, include "[POST] Your message here" in your thinking.
   - To LIKE an existing message, include "[LIKE_POST N]" where N is the message number.
   - All residents can see and interact with all messages."""

_TASK_HEADER = "# Your Task:"
_TASK_BASE = (
    "Based on the data, rules, your history{board_clause}, and the reward analysis, decide "
    "where to live. Your response MUST be a JSON object with the following keys:"
)
_TASK_THINKING_SOLO = '1. "thinking": A short sentence explaining your reasoning.'
_TASK_THINKING_SOCIAL = (
    '1. "thinking": A short sentence explaining your reasoning, considering both your '
    "personal reward and the system's collective reward."
)
_TASK_THINKING_BOARD_SUFFIX = " You can also include your post or like action here."
_TASK_MOVE = '2. "move_to_block": The Block ID of your chosen neighborhood (e.g., "0" or "1").'

_EXAMPLE_HEADER = "# Example:"
_EXAMPLE_PLAIN = """{
  "thinking": "Staying gives me a personal reward of [value]... Moving gives me [value]... I value [reason], therefore I choose [action].",
  "move_to_block": "a valid int"
}"""
_EXAMPLE_BOARD = """{
  "thinking": "Staying gives me a personal reward of [value]... [POST] I think moving might be better for everyone if density balances out. OR [LIKE_POST 1]",
  "move_to_block": "a valid int"
}"""

_CLOSING = "Your decision (JSON format only):"

_FRAGMENTS = {
    "opening_solo": _OPENING_SOLO,
    "opening_social": _OPENING_SOCIAL,
    "rewards": _REWARD_SECTION,
    "history_header": _HISTORY_HEADER,
    "history_location": _HISTORY_LOCATION,
    "history_empty": _HISTORY_EMPTY,
    "others_header": _OTHERS_HEADER,
    "others_empty": _OTHERS_EMPTY,
    "board_header": _BOARD_HEADER,
    "board_footer": _BOARD_FOOTER,
    "board_empty": _BOARD_EMPTY,
    "options_header": _OPTIONS_HEADER,
    "option_entry": _OPTION_ENTRY,
    "rules_header": _RULES_HEADER,
    "rule_full": _RULE_FULL,
    "rule_others_basic": _RULE_OTHERS_BASIC,
    "rule_others_deep": _RULE_OTHERS_DEEP,
    "rule_board": _RULE_BOARD,
    "task_header": _TASK_HEADER,
    "task_base": _TASK_BASE,
    "task_thinking_solo": _TASK_THINKING_SOLO,
    "task_thinking_social": _TASK_THINKING_SOCIAL,
    "task_thinking_board_suffix": _TASK_THINKING_BOARD_SUFFIX,
    "task_move": _TASK_MOVE,
    "example_header": _EXAMPLE_HEADER,
    "example_plain": _EXAMPLE_PLAIN,
    "example_board": _EXAMPLE_BOARD,
    "closing": _CLOSING,
}


def template_fingerprint() -> dict:
    """Version plus SHA-256 digests of every template fragment."""
    fragments = {
        name: hashlib.sha256(text.encode("utf-8")).hexdigest()
        for name, text in sorted(_FRAGMENTS.items())
    }
    combined = hashlib.sha256(
        "\x1f".join(_FRAGMENTS[name] for name in sorted(_FRAGMENTS)).encode("utf-8")
    ).hexdigest()
    return {
        "template_version": TEMPLATE_VERSION,
        "combined_sha256": combined,
        "fragments": fragments,
    }


@dataclass(frozen=True)
class HistoryEntry:
    """One remembered decision: where someone moved and the rewards after it."""

    step: int
    from_block: int
    to_block: int
    own_reward_scaled: int
    system_reward_scaled: int


@dataclass(frozen=True)
class Observation:
    """Everything one agent gets to see before deciding.

    ``board`` is None when the run has no message board; otherwise it is the
    ranked snapshot whose ordinals any like must reference. Histories are
    already capped by the caller (at most 10 entries each).
    """

    num_blocks: int
    capacity: int
    populations: tuple[int, ...]
    own_block: int
    guidance_level: int
    personal_history: tuple[HistoryEntry, ...] = ()
    others_history: tuple[HistoryEntry, ...] = ()
    board: tuple[BoardMessageView, ...] | None = None


def _reward(scaled: int, capacity: int) -> str:
    return f"{scaled / (2 * capacity):.4f}"


def _movement(entry: HistoryEntry) -> str:
    if entry.from_block == entry.to_block:
        return f"stayed in block {entry.from_block}"
    return f"moved from block {entry.from_block} to block {entry.to_block}"


def _personal_line(entry: HistoryEntry, capacity: int) -> str:
    return (
        f"- Step {entry.step}: you {_movement(entry)}. "
        f"Your reward after: {_reward(entry.own_reward_scaled, capacity)}. "
        f"Collective reward after: {_reward(entry.system_reward_scaled, capacity)}."
    )


def _others_line(entry: HistoryEntry, capacity: int) -> str:
    return (
        f"- Step {entry.step}: a resident {_movement(entry)}. "
        f"Collective reward after: {_reward(entry.system_reward_scaled, capacity)}."
    )


def build_prompt(obs: Observation) -> str:
    """Render the decision prompt for one observation; pure and byte-stable."""
    if obs.guidance_level not in GUIDANCE_LEVELS:
        raise ValueError(f"guidance level must be one of {GUIDANCE_LEVELS}")
    social = obs.guidance_level >= 1
    board_on = obs.board is not None
    sections: list[str] = []

    opening = _OPENING_SOCIAL if social else _OPENING_SOLO
    sections.append(opening.format(num_blocks=obs.num_blocks))

    sections.append(
        _REWARD_SECTION.format(capacity=obs.capacity, num_blocks=obs.num_blocks)
    )

    history_lines = [_HISTORY_HEADER, _HISTORY_LOCATION.format(block=obs.own_block)]
    if obs.personal_history:
        history_lines.extend(
            _personal_line(entry, obs.capacity) for entry in obs.personal_history
        )
    else:
        history_lines.append(_HISTORY_EMPTY)
    sections.append("\n".join(history_lines))

    others_lines = [_OTHERS_HEADER]
    if obs.others_history:
        others_lines.extend(
            _others_line(entry, obs.capacity) for entry in obs.others_history
        )
    else:
        others_lines.append(_OTHERS_EMPTY)
    sections.append("\n".join(others_lines))

    if board_on:
        board_lines = [_BOARD_HEADER]
        if obs.board:
            board_lines.extend(
                f"{view.ordinal}. {view.text} [Likes: {view.likes}]"
                for view in obs.board
            )
        else:
            board_lines.append(_BOARD_EMPTY)
        board_lines.append(_BOARD_FOOTER)
        sections.append("\n".join(board_lines))

    option_lines = [_OPTIONS_HEADER]
    for block, population in enumerate(obs.populations):
        option_lines.append(
            _OPTION_ENTRY.format(
                block=block,
                density=f"{population / obs.capacity:.2f}",
                population=population,
                capacity=obs.capacity,
            )
        )
    sections.append("\n".join(option_lines))

    rules = [_RULE_FULL]
    if social:
        rules.append(_RULE_OTHERS_DEEP if obs.guidance_level >= 2 else _RULE_OTHERS_BASIC)
    if board_on:
        rules.append(_RULE_BOARD)
    rule_lines = [_RULES_HEADER]
    rule_lines.extend(f"{i}. {rule}" for i, rule in enumerate(rules, start=1))
    sections.append("\n".join(rule_lines))

    board_clause = ", the message board" if board_on else ""
    thinking = _TASK_THINKING_SOCIAL if social else _TASK_THINKING_SOLO
    if board_on:
        thinking += _TASK_THINKING_BOARD_SUFFIX
    sections.append(
        "\n".join(
            [
                _TASK_HEADER,
                _TASK_BASE.format(board_clause=board_clause),
                thinking,
                _TASK_MOVE,
            ]
        )
    )

    example = _EXAMPLE_BOARD if board_on else _EXAMPLE_PLAIN
    sections.append("\n".join([_EXAMPLE_HEADER, example]))

    sections.append(_CLOSING)
    return "\n\n".join(sections)
