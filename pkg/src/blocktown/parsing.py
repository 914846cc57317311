"""Parsing of model responses into actions, tolerant of prose and code fences."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .board import DO_NOTHING, BoardAction, Like, Post

_POST_RE = re.compile(r"\[POST\]\s*(.*)")
_LIKE_RE = re.compile(r"\[LIKE_POST\s+(\d+)\s*\]")
# A later directive on the same line terminates a post's text.
_NEXT_DIRECTIVE_RE = re.compile(r"\[(?:POST\]|LIKE_POST\s)")


class ParseError(ValueError):
    """Retry-eligible failure of a model response.

    ``kind`` is one of: malformed_json, missing_field, block_out_of_range,
    bad_like_ordinal, full_block (the last raised by move validation, not by
    the parser itself).
    """

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class AgentResponse:
    """A usable decision: staying is expressed as moving to one's own block."""

    thinking: str
    move_to_block: int
    board_action: BoardAction = DO_NOTHING


def extract_json_object(raw: str) -> dict:
    """First JSON object in ``raw``; surrounding prose or fences are fine."""
    decoder = json.JSONDecoder()
    idx = raw.find("{")
    while idx != -1:
        try:
            obj, _ = decoder.raw_decode(raw, idx)
        except json.JSONDecodeError:
            idx = raw.find("{", idx + 1)
            continue
        if isinstance(obj, dict):
            return obj
        idx = raw.find("{", idx + 1)
    raise ParseError("malformed_json", "no JSON object found in response")


def _coerce_block(value: object) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return int(value) if value.is_integer() else None
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            return None
    return None


def extract_board_action(thinking: str, board_size: int | None) -> BoardAction:
    """Earliest [POST]/[LIKE_POST N] directive wins; the rest are ignored.

    With ``board_size`` None (no board this run) directives are inert. A like
    ordinal outside 1..board_size is a retry-eligible failure.
    """
    if board_size is None:
        return DO_NOTHING
    post_match = _POST_RE.search(thinking)
    like_match = _LIKE_RE.search(thinking)
    if post_match and (like_match is None or post_match.start() < like_match.start()):
        text = post_match.group(1)
        cut = _NEXT_DIRECTIVE_RE.search(text)
        if cut:
            text = text[: cut.start()]
        text = text.strip().strip('"').strip()
        if text:
            return Post(text=text)
        return DO_NOTHING
    if like_match:
        ordinal = int(like_match.group(1))
        if not 1 <= ordinal <= board_size:
            raise ParseError(
                "bad_like_ordinal",
                f"[LIKE_POST {ordinal}] does not match any of the {board_size} "
                "messages shown on the board",
            )
        return Like(ordinal=ordinal)
    return DO_NOTHING


def parse_response(
    raw: str, num_blocks: int, board_size: int | None = None
) -> AgentResponse:
    """Parse raw model output into an AgentResponse or raise ParseError."""
    obj = extract_json_object(raw)
    if "move_to_block" not in obj:
        raise ParseError("missing_field", 'response lacks a "move_to_block" key')
    block = _coerce_block(obj["move_to_block"])
    if block is None:
        raise ParseError("missing_field", '"move_to_block" is not an integer')
    if not 0 <= block < num_blocks:
        raise ParseError(
            "block_out_of_range", f"block {block} is not in [0, {num_blocks})"
        )
    thinking = obj.get("thinking", "")
    if not isinstance(thinking, str):
        thinking = json.dumps(thinking, ensure_ascii=False)
    action = extract_board_action(thinking, board_size)
    return AgentResponse(thinking=thinking, move_to_block=block, board_action=action)
