# %% [markdown]
# # The public message board
#
# Residents can post anonymous messages and like what others wrote. The board
# is always shown ranked by likes (older messages win ties), and at the end of
# every step the bottom half is purged -- attention is scarce, so only
# messages the crowd endorses survive.

# %%
from blocktown import MessageBoard

board = MessageBoard()
board.post("Let's all keep our blocks near half full.", step=1)
board.post("Block 7 has plenty of room, join me!", step=1)
board.post("Moving constantly helps nobody.", step=1)
board.post("I want the lake view in block 2.", step=1)

for view in board.snapshot():
    print(f"{view.ordinal}. {view.text} [Likes: {view.likes}]")

# %% [markdown]
# Likes are cast against the snapshot a resident actually saw, by ordinal:

# %%
snapshot = board.snapshot()
board.like(snapshot[0].message_id)
board.like(snapshot[0].message_id)
board.like(snapshot[2].message_id)

print("after some likes:")
for view in board.snapshot():
    print(f"{view.ordinal}. {view.text} [Likes: {view.likes}]")

# %% [markdown]
# Curation drops floor(M/2) messages: with four messages, the two weakest go.
# A message that survives keeps its id and its likes forever; ids are never
# reused, so publication order is always recoverable.

# %%
removed = board.curate()
print(f"curation removed {removed} messages:")
for view in board.snapshot():
    print(f"{view.ordinal}. {view.text} [Likes: {view.likes}]")

# %% [markdown]
# A like aimed at a message that was purged in the meantime simply fizzles:
# it is logged as a stale target and treated as doing nothing.

# %%
from blocktown import Like, apply_board_action

stale_view = next(v for v in snapshot if v.text.startswith("I want the lake view"))
outcome, _ = apply_board_action(board, Like(ordinal=stale_view.ordinal), snapshot, step=2)
print("liking a purged message:", outcome)
