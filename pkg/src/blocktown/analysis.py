"""Post-hoc analysis: rebuild every metric of a run from its logs alone.

Nothing in here trusts the numbers the run wrote into its own records; the
initial placement plus the sequence of logged decisions is enough to replay
the world, the board, both utility deltas of every action, and the
convergence bookkeeping. ``analyze(run_dir)`` therefore returns a summary
that must agree field for field with the one the run produced -- any
divergence means the log is corrupt or the bookkeeping drifted.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .board import MessageBoard, apply_board_action
from .metrics import (
    ArchetypeLabel,
    ConvergenceTracker,
    classify_action,
    system_utility,
    utility_as_float,
)
from .simulation import (
    DecisionRecord,
    RunConfig,
    RunSummary,
    build_summary,
    compute_deltas,
)
from .world import GridWorld


class AnalysisError(RuntimeError):
    """Log is unreadable or internally inconsistent.

    ``last_valid_step`` is the last step for which a complete, well-formed
    record was read before the problem appeared.
    """

    def __init__(self, message: str, last_valid_step: int = 0):
        super().__init__(message)
        self.last_valid_step = last_valid_step


@dataclass
class RecomputedTurn:
    """Independent recomputation of one logged turn."""

    record: DecisionRecord
    d_individual: int
    d_system: int
    archetype: ArchetypeLabel | None
    board_outcome: str = "none"
    board_message_id: int | None = None


@dataclass
class ReplayedRun:
    config: RunConfig
    num_agents: int
    records: list[DecisionRecord]
    turns: list[RecomputedTurn]
    summary: RunSummary

    def delta_mismatches(self) -> list[RecomputedTurn]:
        """Turns whose logged deltas or archetype disagree with the replay."""
        return [
            turn
            for turn in self.turns
            if (turn.d_individual, turn.d_system, turn.archetype)
            != (turn.record.d_individual, turn.record.d_system, turn.record.archetype)
        ]


def _load_config(run_dir: Path) -> tuple[RunConfig, dict]:
    path = run_dir / "config.json"
    if not path.exists():
        raise AnalysisError(f"{path} not found")
    data = json.loads(path.read_text(encoding="utf-8"))
    return RunConfig.from_dict(data["config"]), data["metadata"]


def _load_records(run_dir: Path) -> list[DecisionRecord]:
    path = run_dir / "events.jsonl"
    if not path.exists():
        raise AnalysisError(f"{path} not found")
    records: list[DecisionRecord] = []
    last_valid_step = 0
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = DecisionRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise AnalysisError(
                    f"events.jsonl corrupt at line {lineno} ({exc}); "
                    f"last valid step: {last_valid_step}",
                    last_valid_step=last_valid_step,
                ) from exc
            records.append(record)
            last_valid_step = record.step
    return records


def replay_run(run_dir: str | Path) -> ReplayedRun:
    """Replay a run directory from config + events and recompute everything."""
    run_dir = Path(run_dir)
    config, metadata = _load_config(run_dir)
    initial_locations = list(metadata["initial_locations"])
    num_agents = int(metadata["num_agents"])
    capacity = config.capacity

    populations = [0] * config.num_blocks
    for block in initial_locations:
        populations[block] += 1
    world = GridWorld(
        capacity=capacity, locations=initial_locations, populations=populations
    )
    board = MessageBoard() if config.board_enabled else None
    tracker = ConvergenceTracker(
        num_agents,
        threshold=config.convergence_threshold,
        window=config.convergence_window,
    )

    sys_scaled = system_utility(world.populations, capacity)
    utility_series: list[list] = [[0, sys_scaled, utility_as_float(sys_scaled, capacity)]]
    turns: list[RecomputedTurn] = []
    records = _load_records(run_dir)

    step = 0
    moved_flags = [False] * num_agents
    frozen_board_view = None
    last_valid_step = 0

    def close_step() -> None:
        nonlocal sys_scaled
        if step == 0:
            return
        if board is not None:
            board.curate()
        # Cross-check: the telescoped deltas must agree with a from-scratch
        # recomputation of the system utility at every step boundary.
        recomputed = system_utility(world.populations, capacity)
        if recomputed != sys_scaled:
            raise AnalysisError(
                f"utility bookkeeping drifted at step {step}: tracked "
                f"{sys_scaled}, recomputed {recomputed}",
                last_valid_step=step - 1,
            )
        utility_series.append(
            [step, sys_scaled, utility_as_float(sys_scaled, capacity)]
        )
        tracker.update(moved_flags, step)

    for index, record in enumerate(records):
        if record.step != step:
            if record.step != step + 1:
                raise AnalysisError(
                    f"record {index} jumps from step {step} to {record.step}; "
                    f"last valid step: {last_valid_step}",
                    last_valid_step=last_valid_step,
                )
            close_step()
            step = record.step
            moved_flags = [False] * num_agents
            if board is not None and config.update_mode == "simultaneous":
                frozen_board_view = board.snapshot()
        if not 0 <= record.agent_id < num_agents:
            raise AnalysisError(
                f"record {index} names unknown agent {record.agent_id}",
                last_valid_step=last_valid_step,
            )
        if world.locations[record.agent_id] != record.from_block:
            raise AnalysisError(
                f"record {index}: agent {record.agent_id} logged in block "
                f"{record.from_block} but replay places it in block "
                f"{world.locations[record.agent_id]}; last valid step: {last_valid_step}",
                last_valid_step=last_valid_step,
            )
        target = None if record.to_block == record.from_block else record.to_block
        if target is not None and world.populations[target] >= capacity:
            raise AnalysisError(
                f"record {index}: move into full block {target}; "
                f"last valid step: {last_valid_step}",
                last_valid_step=last_valid_step,
            )
        d_individual, d_system = compute_deltas(world, record.agent_id, target)
        moved = world.apply_move(record.agent_id, target)
        sys_scaled += d_system
        moved_flags[record.agent_id] = moved
        archetype = classify_action(d_individual, d_system) if moved else None
        outcome, message_id = "none", None
        if board is not None:
            observed = (
                frozen_board_view
                if config.update_mode == "simultaneous"
                else board.snapshot()
            )
            outcome, message_id = apply_board_action(
                board, record.board_action, observed, step
            )
        turns.append(
            RecomputedTurn(
                record=record,
                d_individual=d_individual,
                d_system=d_system,
                archetype=archetype,
                board_outcome=outcome,
                board_message_id=message_id,
            )
        )
        last_valid_step = step
    close_step()

    # The summary is built from recomputed values; logged deltas, archetypes
    # and board outcomes are only carried for mismatch reporting.
    cloned: list[DecisionRecord] = []
    for turn in turns:
        data = turn.record.to_dict()
        data["d_individual"] = turn.d_individual
        data["d_system"] = turn.d_system
        data["archetype"] = turn.archetype.value if turn.archetype else None
        data["board_outcome"] = turn.board_outcome
        data["board_message_id"] = turn.board_message_id
        cloned.append(DecisionRecord.from_dict(data))

    summary = build_summary(
        config=config,
        records=cloned,
        final_populations=world.populations,
        utility_series=utility_series,
        converged_at=tracker.converged_at,
        steps_run=step,
        final_messages=board.ranked_messages() if board is not None else [],
    )
    return ReplayedRun(
        config=config,
        num_agents=num_agents,
        records=records,
        turns=turns,
        summary=summary,
    )


def analyze(run_dir: str | Path) -> RunSummary:
    """Recompute the run summary from the logs alone."""
    return replay_run(run_dir).summary


def write_reports(run_dir: str | Path, summary: RunSummary | None = None) -> list[Path]:
    """Write plot-ready CSV reports next to the logs; returns the paths."""
    run_dir = Path(run_dir)
    if summary is None:
        summary = analyze(run_dir)
    config, _ = _load_config(run_dir)
    paths: list[Path] = []

    summary_path = run_dir / "summary_recomputed.json"
    summary_path.write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True, ensure_ascii=False)
        + "\n",
        encoding="utf-8",
    )
    paths.append(summary_path)

    side = math.isqrt(config.num_blocks)
    if side * side < config.num_blocks:
        side += 1
    density_path = run_dir / "density_matrix.csv"
    with open(density_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        for row_start in range(0, config.num_blocks, side):
            row = [
                f"{summary.final_populations[q] / config.capacity:.4f}"
                for q in range(row_start, min(row_start + side, config.num_blocks))
            ]
            writer.writerow(row)
    paths.append(density_path)

    matrix_path = run_dir / "action_matrix.csv"
    with open(matrix_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["d_individual \\ d_system", "gain", "neutral", "loss"]
        )
        for label, row in zip(("gain", "neutral", "loss"), summary.action_matrix["grid"]):
            writer.writerow([label] + [f"{value:.4f}" for value in row])
    paths.append(matrix_path)

    series_path = run_dir / "utility_series.csv"
    with open(series_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "system_utility_scaled", "system_utility"])
        for step, scaled, value in summary.utility_series:
            writer.writerow([step, scaled, f"{value:.4f}"])
    paths.append(series_path)

    board_path = run_dir / "board_messages.csv"
    with open(board_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["text", "post_count", "final_likes"])
        for row in summary.board_text_frequency:
            writer.writerow([row["text"], row["post_count"], row["final_likes"]])
    paths.append(board_path)

    return paths
