# %% [markdown]
# # Model-backed residents, recorded and replayed
#
# Residents can also be driven by any chat-completion endpoint. Each turn the
# agent receives a prompt describing the reward functions, its own history,
# recent decisions by others, the message board (when enabled) and all nine
# options; it must answer with a JSON object naming its target block, and may
# embed `[POST] ...` or `[LIKE_POST N]` directives in its reasoning.
#
# This demo needs no network: a tiny in-process stub stands in for the
# endpoint. Point `ModelEndpoint.base_url` at a real server and export your
# key under `BLOCKTOWN_API_KEY` to run the same code live.

# %%
import hashlib
import json
import os
import re
import tempfile
from pathlib import Path

import httpx

from blocktown import ModelEndpoint, Observation, RunConfig, build_prompt, run

os.environ.setdefault("BLOCKTOWN_API_KEY", "demo-key")

# %% [markdown]
# What a prompt looks like:

# %%
observation = Observation(
    num_blocks=9,
    capacity=50,
    populations=(24, 27, 25, 25, 25, 25, 25, 25, 24),
    own_block=1,
    guidance_level=1,
)
print(build_prompt(observation)[:600] + "\n[...]")

# %% [markdown]
# The stub resident below answers any prompt deterministically (it hashes the
# prompt to pick between staying, moving and posting), so a "live" run against
# it is reproducible end to end.

# %%
_OWN = re.compile(r"You currently live in block (\d+)")
_OPTION = re.compile(r"Block ID: (\d+)\) :\n  - Current Density: [\d.]+\n  - Population: (\d+)/(\d+)")


def stub_reply(prompt: str) -> str:
    own = int(_OWN.search(prompt).group(1))
    options = [(int(b), int(p), int(c)) for b, p, c in _OPTION.findall(prompt)]
    digest = hashlib.sha256(prompt.encode()).digest()
    open_blocks = [b for b, p, c in options if b != own and p < c]
    target = open_blocks[digest[1] % len(open_blocks)] if digest[0] % 3 == 0 and open_blocks else own
    thinking = f"Block {target} looks right to me."
    if "--- Global Message Board" in prompt and digest[2] % 3 == 0:
        thinking += f" [POST] Consider block {target}, it is close to balanced."
    return json.dumps({"thinking": thinking, "move_to_block": str(target)})


def stub_transport() -> httpx.MockTransport:
    def handler(request: httpx.Request) -> httpx.Response:
        prompt = json.loads(request.content)["messages"][0]["content"]
        return httpx.Response(
            200, json={"choices": [{"message": {"content": stub_reply(prompt)}}]}
        )

    return httpx.MockTransport(handler)


# %% [markdown]
# A live run records every completion into a content-addressed store
# (`replay_store.jsonl`) and the raw wire traffic (`exchanges.jsonl`).
# Replaying from the store reproduces `events.jsonl` byte for byte -- no
# network, no nondeterminism, no re-billing.

# %%
workdir = Path(tempfile.mkdtemp(prefix="blocktown-demo-"))
config = RunConfig(
    num_blocks=9,
    capacity=50,
    initial_density=0.5,
    policy="llm",
    board_enabled=True,
    seed=3,
    max_steps=4,
    convergence_threshold=1.0,
    convergence_window=10,
    endpoint=ModelEndpoint(
        base_url="https://stub.local/v1",
        model_name="stub-resident",
        requests_per_minute=0,  # the stub needs no pacing
    ),
)

live = run(config, workdir / "live", transport=stub_transport())
replayed = run(config, workdir / "replayed", replay_path=workdir / "live" / "replay_store.jsonl")

live_bytes = (workdir / "live" / "events.jsonl").read_bytes()
replay_bytes = (workdir / "replayed" / "events.jsonl").read_bytes()
print("events byte-identical:", live_bytes == replay_bytes)
print("summaries identical:  ", live.to_dict() == replayed.to_dict())

# %% [markdown]
# The board carried real traffic; the summary keeps both the surviving
# messages and a post-frequency table over everything ever posted.

# %%
print(f"PoA {live.price_of_anarchy:.4f}, gini {live.residential_gini:.4f}")
for row in live.board_text_frequency[:5]:
    print(f"  posted {row['post_count']:>2}x (final likes {row['final_likes']}): {row['text']}")
print("run directories kept under:", workdir)
