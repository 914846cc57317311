"""Three-stage qualitative coding of run logs via a judge model.

Stage 1 (open coding) extracts concise concept labels from a sample of agent
reasoning plus the board content; stage 2 (axial coding) groups those labels
into 3-5 named categories; stage 3 (selective coding) picks the core category
and states a short theory. Each stage feeds the previous stage's validated
JSON into its data section -- there is no hidden state between stages.

The judge's *content* is never asserted anywhere: only JSON schema validity
and cross-stage referential integrity are enforced, with the same repair-
retry contract used for agent responses.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .gateway import ExhaustedError
from .parsing import extract_json_object, ParseError

MAX_REPAIR_RETRIES = 2
DEFAULT_SAMPLE_SIZE = 100

_REPAIR_SUFFIX = (
    "\n\n# Error:\nYour previous response could not be used: {error}\n"
    "Respond again. JSON format only:"
)

_STAGE1_PROMPT = """You are a qualitative research assistant specializing in Grounded Theory. You are analyzing logs from a multi-agent simulation.

# STAGE 1: OPEN CODING

## Your Task:
You are performing the 'Open Coding' step. Your ONLY task is to read the following agent logs and identify all distinct concepts, motivations, and reasoning patterns. Focus on the 'why' behind decisions. Do not categorize or explain, just extract the core ideas as concise noun phrases (e.g., "Personal Utility Calculation", "Fear of Overcrowding", "Adherence to Social Norms").

Return your findings as a single JSON object with one key, "open_codes", which is a list of unique strings.

## Data:
--- AGENT LOGS START ---
{logs}
--- AGENT LOGS END ---
--- MESSAGE BOARD START ---
{board}
--- MESSAGE BOARD END ---

Your answer (JSON format only):"""

_STAGE2_PROMPT = """You are a qualitative research assistant specializing in Grounded Theory. You are analyzing concept labels extracted from a multi-agent simulation.

# STAGE 2: AXIAL CODING

## Your Task:
You are performing 'Axial Coding'. Given the comprehensive list of concepts ('open codes') generated in the previous stage, your task is to group them into 3-5 broader thematic categories. For each category, provide a clear name, a brief description of the theme, and a list of the open codes that belong to it. Use only codes from the list; never place one code in two categories.

Return a single JSON object with one key, "axial_codes". This key should contain a list of objects, where each object has three keys: "category_name" (string), "description" (string), and "included_codes" (a list of strings).

## Data:
--- OPEN CODES START ---
{codes}
--- OPEN CODES END ---

Your answer (JSON format only):"""

_STAGE3_PROMPT = """You are a qualitative research assistant specializing in Grounded Theory. You are concluding the analysis of a multi-agent simulation.

# STAGE 3: SELECTIVE CODING (THEORY INDUCTION)

## Your Task:
You are performing 'Selective Coding'. Based on the structured thematic categories ('axial codes') from the previous stage, your task is to synthesize the findings into a coherent theory. Identify the single, most central theme as the "core_category" (it must be one of the category names) and then formulate a concise, overarching theory that explains the agents' dominant migration logic.

Return a single JSON object with two keys: "core_category" (string) and "theory" (string).

## Data:
--- AXIAL CODES START ---
{categories}
--- AXIAL CODES END ---

Your answer (JSON format only):"""


class SampleError(ValueError):
    """Run directory has nothing to sample."""


class StageError(RuntimeError):
    """A pipeline stage could not produce a valid document.

    ``completed`` holds the validated artifacts of every stage that finished
    before the failure.
    """

    def __init__(self, stage: str, message: str, completed: dict):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.completed = completed


@dataclass
class LogBatch:
    """What the judge gets to read: sampled reasoning plus board content."""

    thinking_texts: list[str]
    board_lines: list[str]

    def rendered_logs(self) -> str:
        return "\n".join(f"- {text}" for text in self.thinking_texts)

    def rendered_board(self) -> str:
        if not self.board_lines:
            return "(no message board content)"
        return "\n".join(self.board_lines)


@dataclass
class AxialCategory:
    category_name: str
    description: str
    included_codes: list[str]

    def to_dict(self) -> dict:
        return {
            "category_name": self.category_name,
            "description": self.description,
            "included_codes": self.included_codes,
        }


@dataclass
class CodingResult:
    open_codes: list[str]
    axial_codes: list[AxialCategory]
    core_category: str
    theory: str


def sample_logs(
    run_dir: str | Path, k: int = DEFAULT_SAMPLE_SIZE, seed: int | str = 0
) -> LogBatch:
    """Seeded uniform sample of k reasoning texts plus the board post table.

    ``k`` larger than the log returns every record (in log order); samples are
    drawn without replacement so the k texts come from distinct records.
    """
    events_path = Path(run_dir) / "events.jsonl"
    if not events_path.exists():
        raise SampleError(f"{events_path} not found")
    thinking: list[str] = []
    post_counts: dict[str, int] = {}
    with open(events_path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            thinking.append(record["thinking"])
            action = record.get("board_action", {})
            if record.get("board_outcome") == "posted" and action.get("kind") == "post":
                text = action["text"]
                post_counts[text] = post_counts.get(text, 0) + 1
    if not thinking:
        raise SampleError(f"{events_path} holds no decision records")
    if k >= len(thinking):
        sampled = thinking
    else:
        rng = random.Random(f"{seed}:log-sample")
        sampled = rng.sample(thinking, k)
    board_rows = sorted(post_counts.items(), key=lambda item: -item[1])
    board_lines = [f'- "{text}" (posted {count}x)' for text, count in board_rows]
    return LogBatch(thinking_texts=sampled, board_lines=board_lines)


def _dedupe_case_insensitive(codes: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for code in codes:
        key = code.strip().lower()
        if key and key not in seen:
            seen.add(key)
            out.append(code.strip())
    return out


def _validate_open(obj: dict) -> list[str]:
    codes = obj.get("open_codes")
    if not isinstance(codes, list) or not codes:
        raise ParseError("missing_field", '"open_codes" must be a non-empty list')
    if not all(isinstance(code, str) and code.strip() for code in codes):
        raise ParseError("missing_field", '"open_codes" entries must be non-empty strings')
    return _dedupe_case_insensitive(codes)


def _validate_axial(obj: dict, open_codes: list[str]) -> list[AxialCategory]:
    raw = obj.get("axial_codes")
    if not isinstance(raw, list):
        raise ParseError("missing_field", '"axial_codes" must be a list')
    if not 3 <= len(raw) <= 5:
        raise ParseError(
            "missing_field", f'"axial_codes" must hold 3-5 categories, got {len(raw)}'
        )
    known = {code.lower() for code in open_codes}
    assigned: set[str] = set()
    categories: list[AxialCategory] = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise ParseError("missing_field", "each axial category must be an object")
        name = entry.get("category_name")
        description = entry.get("description")
        included = entry.get("included_codes")
        if not isinstance(name, str) or not name.strip():
            raise ParseError("missing_field", '"category_name" must be a non-empty string')
        if not isinstance(description, str):
            raise ParseError("missing_field", '"description" must be a string')
        if not isinstance(included, list) or not all(
            isinstance(code, str) for code in included
        ):
            raise ParseError("missing_field", '"included_codes" must be a list of strings')
        for code in included:
            key = code.lower()
            if key not in known:
                raise ParseError(
                    "missing_field",
                    f'included code "{code}" does not appear in the stage-1 open codes',
                )
            if key in assigned:
                raise ParseError(
                    "missing_field", f'code "{code}" appears in two categories'
                )
            assigned.add(key)
        categories.append(
            AxialCategory(
                category_name=name.strip(),
                description=description,
                included_codes=list(included),
            )
        )
    return categories


def _validate_theory(obj: dict, category_names: list[str]) -> tuple[str, str]:
    core = obj.get("core_category")
    theory = obj.get("theory")
    if not isinstance(core, str) or not core.strip():
        raise ParseError("missing_field", '"core_category" must be a non-empty string')
    if not isinstance(theory, str) or not theory.strip():
        raise ParseError("missing_field", '"theory" must be a non-empty string')
    if core.strip() not in category_names:
        raise ParseError(
            "missing_field",
            f'"core_category" {core!r} is not one of the stage-2 category names',
        )
    return core.strip(), theory.strip()


def _ask(
    stage: str,
    prompt: str,
    complete_fn: Callable[[str], str],
    validate: Callable[[dict], object],
    completed: dict,
):
    error: ParseError | None = None
    for _ in range(MAX_REPAIR_RETRIES + 1):
        full = prompt if error is None else prompt + _REPAIR_SUFFIX.format(error=error)
        try:
            raw = complete_fn(full)
        except ExhaustedError as exc:
            raise StageError(stage, f"judge endpoint exhausted: {exc}", completed)
        try:
            return validate(extract_json_object(raw))
        except ParseError as exc:
            error = exc
    raise StageError(stage, f"no valid document after retries: {error}", completed)


def run_pipeline(
    batch: LogBatch,
    complete_fn_factory: Callable[[str], Callable[[str], str]],
    out_dir: str | Path | None = None,
) -> CodingResult:
    """Run open -> axial -> selective coding and persist the three artifacts.

    ``complete_fn_factory(stage_name)`` returns the completion callable for
    that stage (live judge or replay store). Artifacts are written to
    ``out_dir`` as open_codes.json, axial_codes.json and theory.json.
    """
    completed: dict = {}

    open_codes = _ask(
        "open",
        _STAGE1_PROMPT.format(
            logs=batch.rendered_logs(), board=batch.rendered_board()
        ),
        complete_fn_factory("open"),
        _validate_open,
        completed,
    )
    completed["open_codes"] = open_codes

    codes_json = json.dumps(open_codes, indent=2, ensure_ascii=False)
    axial = _ask(
        "axial",
        _STAGE2_PROMPT.format(codes=codes_json),
        complete_fn_factory("axial"),
        lambda obj: _validate_axial(obj, open_codes),
        completed,
    )
    completed["axial_codes"] = [c.to_dict() for c in axial]

    categories_json = json.dumps(
        [c.to_dict() for c in axial], indent=2, ensure_ascii=False
    )
    names = [c.category_name for c in axial]
    core, theory = _ask(
        "selective",
        _STAGE3_PROMPT.format(categories=categories_json),
        complete_fn_factory("selective"),
        lambda obj: _validate_theory(obj, names),
        completed,
    )

    result = CodingResult(
        open_codes=open_codes, axial_codes=axial, core_category=core, theory=theory
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_json(out_dir / "open_codes.json", {"open_codes": open_codes})
        _write_json(
            out_dir / "axial_codes.json",
            {"axial_codes": [c.to_dict() for c in axial]},
        )
        _write_json(
            out_dir / "theory.json", {"core_category": core, "theory": theory}
        )
    return result


def _write_json(path: Path, data: dict) -> None:
    path.write_text(
        json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
