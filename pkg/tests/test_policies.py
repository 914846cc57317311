import random

import pytest

from blocktown.board import DO_NOTHING
from blocktown.gateway import ExhaustedError
from blocktown.metrics import (
    classify_action,
    individual_utility,
    move_system_delta,
    system_utility,
)
from blocktown.parsing import AgentResponse
from blocktown.policies import llm_decide, rng_for_agent, scripted_decide
from blocktown.prompts import Observation


def make_observation(populations, own_block, capacity=50, **overrides) -> Observation:
    settings = dict(
        num_blocks=len(populations),
        capacity=capacity,
        populations=tuple(populations),
        own_block=own_block,
        guidance_level=1,
    )
    settings.update(overrides)
    return Observation(**settings)


def random_observation(rng: random.Random) -> Observation:
    num_blocks = rng.randint(2, 6)
    capacity = rng.randint(2, 10)
    populations = [rng.randint(0, capacity) for _ in range(num_blocks)]
    occupied = [q for q, n in enumerate(populations) if n > 0]
    if not occupied:
        populations[0] = 1
        occupied = [0]
    return make_observation(populations, rng.choice(occupied), capacity=capacity)


class TestGreedyEgoist:
    def test_takes_personal_gain(self):
        # own block 24/50 (0.96 staying); the 25/50 block offers 0.98 post-move
        obs = make_observation([24, 25, 10], own_block=0)
        response = scripted_decide("greedy_egoist", obs)
        assert response.move_to_block == 1

    def test_stays_when_nothing_beats_staying(self):
        obs = make_observation([25, 10, 10], own_block=0)
        response = scripted_decide("greedy_egoist", obs)
        assert response.move_to_block == 0
        assert "stay" in response.thinking

    def test_never_below_stay_utility(self):
        rng = random.Random(5)
        for _ in range(300):
            obs = random_observation(rng)
            response = scripted_decide("greedy_egoist", obs)
            stay = individual_utility(obs.populations[obs.own_block], obs.capacity)
            if response.move_to_block == obs.own_block:
                chosen = stay
            else:
                chosen = individual_utility(
                    obs.populations[response.move_to_block] + 1, obs.capacity
                )
            assert chosen >= stay

    def test_tie_breaks_prefer_stay_then_lowest_block(self):
        # own block at 20 (0.80); both targets reach 20 after arrival (0.80): stay
        obs = make_observation([19, 20, 19], own_block=1, capacity=50)
        assert scripted_decide("greedy_egoist", obs).move_to_block == 1
        # two equally better targets: lowest block id wins
        obs = make_observation([20, 5, 20], own_block=1, capacity=50)
        assert scripted_decide("greedy_egoist", obs).move_to_block == 0


class TestAltruisticOptimizer:
    def test_accepts_personal_loss_for_system_gain(self):
        # own block 26/50; moving into a 23/50 block costs 0.02 personally
        # but raises the system utility by 1.40
        obs = make_observation([26, 23], own_block=0)
        response = scripted_decide("altruistic_optimizer", obs)
        assert response.move_to_block == 1
        d_ind = individual_utility(24, 50) - individual_utility(26, 50)
        d_sys = move_system_delta(obs.populations, 50, 0, 1)
        assert (d_ind, d_sys) == (-2, 140)
        assert classify_action(d_ind, d_sys).value == "altruistic_sacrifice"

    def test_never_below_stay_system_utility(self):
        rng = random.Random(6)
        for _ in range(300):
            obs = random_observation(rng)
            response = scripted_decide("altruistic_optimizer", obs)
            if response.move_to_block != obs.own_block:
                delta = move_system_delta(
                    obs.populations, obs.capacity, obs.own_block, response.move_to_block
                )
                assert delta > 0

    def test_stays_at_balanced_optimum(self):
        obs = make_observation([25, 25, 25], own_block=0)
        assert scripted_decide("altruistic_optimizer", obs).move_to_block == 0


class TestRandomWalkAndStay:
    def test_random_walk_only_legal_targets(self):
        obs = make_observation([1, 2, 2], own_block=0, capacity=2)
        rng = rng_for_agent(0, 0)
        for _ in range(50):
            response = scripted_decide("random_walk", obs, rng=rng)
            assert response.move_to_block == 0  # both other blocks are full

    def test_random_walk_stream_is_per_agent(self):
        obs = make_observation([3, 3, 3], own_block=0, capacity=10)
        one = [
            scripted_decide("random_walk", obs, rng=rng_for_agent(9, 4)).move_to_block
            for _ in range(10)
        ]
        # fresh stream with the same identity replays identically
        rng = rng_for_agent(9, 4)
        two = [scripted_decide("random_walk", obs, rng=rng).move_to_block for _ in range(1)]
        assert one[0] == two[0]
        assert rng_for_agent(9, 4).random() == rng_for_agent(9, 4).random()
        assert rng_for_agent(9, 4).random() != rng_for_agent(9, 5).random()

    def test_random_walk_requires_rng(self):
        with pytest.raises(ValueError):
            scripted_decide("random_walk", make_observation([1, 1], 0))

    def test_always_stay(self):
        obs = make_observation([10, 2], own_block=0)
        response = scripted_decide("always_stay", obs)
        assert response.move_to_block == 0
        assert response.board_action == DO_NOTHING

    def test_unknown_policy_rejected(self):
        with pytest.raises(ValueError):
            scripted_decide("bogus", make_observation([1], 0))


class TestThinkingText:
    def test_states_both_rewards_with_four_decimals(self):
        obs = make_observation([26, 23], own_block=0)
        response = scripted_decide("altruistic_optimizer", obs)
        sys_now = system_utility(obs.populations, 50) / 100
        assert "Staying gives me a personal reward of 0.9800" in response.thinking
        assert f"keeps the system reward at {sys_now:.4f}" in response.thinking
        assert "Moving to block 1 gives me 0.9600" in response.thinking


class TestLlmDecide:
    def test_valid_response_passes_through(self):
        obs = make_observation([5, 5], own_block=0)
        outcome = llm_decide(obs, lambda prompt: '{"thinking": "ok", "move_to_block": 1}')
        assert outcome.response.move_to_block == 1
        assert outcome.attempts == 1
        assert not outcome.failed

    def test_repair_prompt_carries_error_and_json_reminder(self):
        obs = make_observation([5, 5], own_block=0)
        prompts: list[str] = []

        def complete(prompt: str) -> str:
            prompts.append(prompt)
            if len(prompts) == 1:
                return "not json at all"
            return '{"thinking": "fixed", "move_to_block": 1}'

        outcome = llm_decide(obs, complete)
        assert outcome.attempts == 2
        assert not outcome.failed
        assert "JSON format only" in prompts[1]
        assert "no JSON object found" in prompts[1]

    def test_persistent_garbage_falls_back_to_stay(self):
        obs = make_observation([5, 5], own_block=0)
        calls = []

        def complete(prompt: str) -> str:
            calls.append(prompt)
            return "garbage"

        outcome = llm_decide(obs, complete)
        assert len(calls) == 3  # one attempt plus two repairs
        assert outcome.failed
        assert outcome.attempts == 3
        assert outcome.response == AgentResponse(
            thinking="", move_to_block=0, board_action=DO_NOTHING
        )

    def test_full_block_target_enters_retry_path(self):
        obs = make_observation([1, 2], own_block=0, capacity=2)
        replies = iter(
            ['{"thinking": "go", "move_to_block": 1}', '{"thinking": "ok", "move_to_block": 0}']
        )
        prompts: list[str] = []

        def complete(prompt: str) -> str:
            prompts.append(prompt)
            return next(replies)

        outcome = llm_decide(obs, complete)
        assert outcome.response.move_to_block == 0
        assert outcome.attempts == 2
        assert "full" in prompts[1]

    def test_exhausted_endpoint_degrades_to_stay(self):
        obs = make_observation([5, 5], own_block=0)

        def complete(prompt: str) -> str:
            raise ExhaustedError("down", [])

        outcome = llm_decide(obs, complete)
        assert outcome.failed
        assert outcome.response.move_to_block == 0
