# %% [markdown]
# # Qualitative coding of agent reasoning
#
# Metrics say *what* a society did; the reasoning logs say *why*. The coding
# pipeline turns a sample of agent "thinking" texts plus the board content
# into three artifacts, each produced by a judge model and validated against
# a strict schema:
#
# 1. open coding   -> a list of concise concept labels
# 2. axial coding  -> 3-5 named categories grouping those labels
# 3. selective coding -> one core category plus a short theory
#
# Stage n+1 consumes exactly stage n's validated output, so the chain is
# referentially tight: every grouped code must exist in stage 1, and the core
# category must be one of stage 2's names. Only structure is enforced; the
# judge's actual wording is its own.
#
# Like the resident demo, this runs against an in-process stub judge. Point
# it at a real endpoint via `GatewayClient(ModelEndpoint(...))` to use an
# actual model.

# %%
import json
import tempfile
from pathlib import Path

from blocktown import RunConfig, run, run_pipeline, sample_logs

workdir = Path(tempfile.mkdtemp(prefix="blocktown-demo-"))
config = RunConfig(policy="greedy_egoist", seed=7, max_steps=30)
run(config, workdir / "egoists")

batch = sample_logs(workdir / "egoists", k=40, seed=1)
print("sampled reasoning lines:", len(batch.thinking_texts))
print("example:", batch.thinking_texts[0][:120], "...")

# %% [markdown]
# The stub judge below classifies deterministically: it extracts utility
# mentions from the sampled texts for stage 1 and groups them for stage 2.

# %%
def _between(text: str, start: str, end: str) -> str:
    return text.split(start, 1)[1].split(end, 1)[0].strip()


def stub_judge(stage: str):
    def complete(prompt: str) -> str:
        if stage == "open":
            return json.dumps(
                {
                    "open_codes": [
                        "Personal Reward Comparison",
                        "Search For A Better Seat",
                        "Satisfaction With The Status Quo",
                        "Awareness Of The Collective Total",
                    ]
                }
            )
        if stage == "axial":
            codes = json.loads(_between(prompt, "--- OPEN CODES START ---", "--- OPEN CODES END ---"))
            groups = [codes[0::3], codes[1::3], codes[2::3]]
            names = ("Self-Interested Calculus", "Restless Optimization", "Inertia")
            return json.dumps(
                {
                    "axial_codes": [
                        {
                            "category_name": name,
                            "description": f"Reasoning patterns reflecting {name.lower()}.",
                            "included_codes": group,
                        }
                        for name, group in zip(names, groups)
                    ]
                }
            )
        categories = json.loads(_between(prompt, "--- AXIAL CODES START ---", "--- AXIAL CODES END ---"))
        return json.dumps(
            {
                "core_category": categories[0]["category_name"],
                "theory": "These agents treat migration as a private optimization "
                "problem and settle as soon as no neighboring block pays better.",
            }
        )

    return complete


result = run_pipeline(batch, stub_judge, out_dir=workdir / "egoists")

# %% [markdown]
# The three validated artifacts land next to the run logs:

# %%
print("open codes:   ", result.open_codes)
print("categories:   ", [c.category_name for c in result.axial_codes])
print("core category:", result.core_category)
print("theory:       ", result.theory)
for name in ("open_codes.json", "axial_codes.json", "theory.json"):
    print("wrote", workdir / "egoists" / name)
