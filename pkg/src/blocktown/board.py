"""Public message board: anonymous posts, likes, and the end-of-step purge."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Message:
    id: int
    text: str
    likes: int
    published_step: int

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "likes": self.likes,
            "published_step": self.published_step,
        }


@dataclass(frozen=True)
class Post:
    text: str


@dataclass(frozen=True)
class Like:
    ordinal: int


@dataclass(frozen=True)
class DoNothing:
    pass


BoardAction = Post | Like | DoNothing
DO_NOTHING = DoNothing()


@dataclass(frozen=True)
class BoardMessageView:
    """One line of the board as an agent saw it: ordinals start at 1."""

    ordinal: int
    message_id: int
    text: str
    likes: int


class MessageBoard:
    """Anonymous board ranked by likes, seniority breaking ties.

    Message ids increase monotonically and are never reused, so they double as
    publication order; (likes desc, id asc) is the canonical ranking for both
    display and the curation purge. Nothing on a message identifies its author.
    """

    def __init__(self) -> None:
        self._messages: dict[int, Message] = {}
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._messages)

    def post(self, text: str, step: int) -> Message:
        text = text.strip()
        if not text:
            raise ValueError("post text is empty")
        message = Message(id=self._next_id, text=text, likes=0, published_step=step)
        self._next_id += 1
        self._messages[message.id] = message
        return message

    def like(self, message_id: int) -> bool:
        """Increment a like count; False when the target has been purged."""
        message = self._messages.get(message_id)
        if message is None:
            return False
        message.likes += 1
        return True

    def _ranked(self) -> list[Message]:
        return sorted(self._messages.values(), key=lambda m: (-m.likes, m.id))

    def snapshot(self) -> tuple[BoardMessageView, ...]:
        """Current board in ranked order, numbered 1..M for prompt display."""
        return tuple(
            BoardMessageView(ordinal=i + 1, message_id=m.id, text=m.text, likes=m.likes)
            for i, m in enumerate(self._ranked())
        )

    def ranked_messages(self) -> list[Message]:
        return self._ranked()

    def curate(self) -> int:
        """Drop the bottom floor(M/2) messages under (likes desc, oldest first).

        Returns the number of messages removed; a single message survives.
        """
        ranked = self._ranked()
        cut = len(ranked) // 2
        for message in ranked[len(ranked) - cut :]:
            del self._messages[message.id]
        return cut


def apply_board_action(
    board: MessageBoard,
    action: BoardAction,
    observed: tuple[BoardMessageView, ...] | None,
    step: int,
) -> tuple[str, int | None]:
    """Apply one agent's board action against the snapshot that agent saw.

    Returns (outcome, message_id) where outcome is "posted", "liked", "none",
    or "like_target_missing" -- a stale like target is logged by the caller
    and otherwise treated as doing nothing.
    """
    if isinstance(action, Post):
        message = board.post(action.text, step)
        return "posted", message.id
    if isinstance(action, Like):
        if not observed or not 1 <= action.ordinal <= len(observed):
            return "like_target_missing", None
        target = observed[action.ordinal - 1].message_id
        if board.like(target):
            return "liked", target
        return "like_target_missing", target
    return "none", None


def action_to_dict(action: BoardAction) -> dict:
    if isinstance(action, Post):
        return {"kind": "post", "text": action.text}
    if isinstance(action, Like):
        return {"kind": "like", "ordinal": action.ordinal}
    return {"kind": "none"}


def action_from_dict(data: dict) -> BoardAction:
    kind = data.get("kind")
    if kind == "post":
        return Post(text=data["text"])
    if kind == "like":
        return Like(ordinal=int(data["ordinal"]))
    if kind == "none":
        return DO_NOTHING
    raise ValueError(f"unknown board action kind: {kind!r}")
