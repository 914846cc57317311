"""Shared test helpers: deterministic fake model and judge endpoints."""

from __future__ import annotations

import hashlib
import json
import re

import httpx
import pytest

from blocktown.gateway import ModelEndpoint

FAKE_KEY = "sk-test-do-not-log-9f3a77"


def fake_endpoint(**overrides) -> ModelEndpoint:
    settings = dict(
        base_url="https://model.test/v1",
        model_name="stub-model",
        api_key_env="BLOCKTOWN_API_KEY",
        temperature=0.7,
        max_tokens=256,
        timeout=5.0,
        max_retries=2,
        requests_per_minute=100000,
    )
    settings.update(overrides)
    return ModelEndpoint(**settings)


@pytest.fixture
def api_key(monkeypatch) -> str:
    monkeypatch.setenv("BLOCKTOWN_API_KEY", FAKE_KEY)
    return FAKE_KEY


_OWN_RE = re.compile(r"You currently live in block (\d+)")
_OPTION_RE = re.compile(
    r"Block ID: (\d+)\) :\n  - Current Density: \d+\.\d+\n  - Population: (\d+)/(\d+)"
)
_BOARD_LINE_RE = re.compile(r"(?m)^\d+\. .+ \[Likes: \d+\]$")


def stub_resident_reply(prompt: str) -> str:
    """Deterministic fake resident: a pure function of the prompt bytes.

    Mostly stays put; sometimes moves to a non-full block, posts, or likes,
    all driven by a hash of the prompt so record/replay tests see realistic
    yet fully reproducible traffic.
    """
    own = int(_OWN_RE.search(prompt).group(1))
    options = [(int(b), int(p), int(c)) for b, p, c in _OPTION_RE.findall(prompt)]
    digest = hashlib.sha256(prompt.encode("utf-8")).digest()
    open_targets = [b for b, p, c in options if b != own and p < c]
    target = own
    if digest[0] % 3 == 0 and open_targets:
        target = open_targets[digest[1] % len(open_targets)]
    thinking = f"I compared my options and block {target} suits me."
    if "--- Global Message Board" in prompt:
        board_size = len(_BOARD_LINE_RE.findall(prompt))
        pick = digest[2] % 3
        if pick == 0:
            thinking += f" [POST] Block {target} keeps the city balanced."
        elif pick == 1 and board_size:
            thinking += f" [LIKE_POST {1 + digest[3] % board_size}]"
    return json.dumps({"thinking": thinking, "move_to_block": str(target)})


def completion_payload(content: str) -> dict:
    return {"choices": [{"message": {"content": content}}]}


def model_stub_transport() -> httpx.MockTransport:
    """A fake chat-completion server backed by ``stub_resident_reply``."""

    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        prompt = body["messages"][0]["content"]
        return httpx.Response(200, json=completion_payload(stub_resident_reply(prompt)))

    return httpx.MockTransport(handler)


def _between(text: str, start: str, end: str) -> str:
    return text.split(start, 1)[1].split(end, 1)[0].strip()


def stub_judge_reply(prompt: str) -> str:
    """Deterministic fake judge that keeps cross-stage references consistent."""
    if "# STAGE 1: OPEN CODING" in prompt:
        return json.dumps(
            {
                "open_codes": [
                    "Personal Reward Calculation",
                    "Collective Reward Weighing",
                    "Preference For Stability",
                    "Exploration Of Options",
                ]
            }
        )
    if "# STAGE 2: AXIAL CODING" in prompt:
        codes = json.loads(_between(prompt, "--- OPEN CODES START ---", "--- OPEN CODES END ---"))
        buckets: list[list[str]] = [[], [], []]
        for i, code in enumerate(codes):
            buckets[i % 3].append(code)
        names = ("Self-Interested Calculus", "Collective Orientation", "Behavioral Inertia")
        return json.dumps(
            {
                "axial_codes": [
                    {
                        "category_name": name,
                        "description": f"Codes grouped under {name.lower()}.",
                        "included_codes": bucket,
                    }
                    for name, bucket in zip(names, buckets)
                ]
            }
        )
    if "# STAGE 3: SELECTIVE CODING" in prompt:
        categories = json.loads(
            _between(prompt, "--- AXIAL CODES START ---", "--- AXIAL CODES END ---")
        )
        return json.dumps(
            {
                "core_category": categories[0]["category_name"],
                "theory": "Agents balance private reward against the shared total, "
                "defaulting to stability once both stop improving.",
            }
        )
    raise AssertionError("stub judge saw an unknown stage prompt")


def judge_stub_transport() -> httpx.MockTransport:
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        prompt = body["messages"][0]["content"]
        return httpx.Response(200, json=completion_payload(stub_judge_reply(prompt)))

    return httpx.MockTransport(handler)
