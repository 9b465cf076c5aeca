"""Diagnostics reports: hit-rate curves and the v1-vs-v2 context-growth contrast.

Both reports write a CSV next to a rendered PNG. The context-growth runner
plays the same scripted 20-turn campaign through each engine and measures what
each one actually sends to the model: v1 ships its entire history every turn,
v2 keeps a bounded summary-plus-window. The synthetic scripts live here so the
acceptance suite can replay the identical scenario.
"""

from __future__ import annotations

import csv
import json
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .combat import BASE_HIT_PROBABILITY, GameRng, HitChance, hit_probability, roll_hit
from .engine import GmEngine, LogicalClock
from .llm import ScriptedBackend
from .react import RequestOptions
from .state import CampaignStore, EngineVersion
from .v2 import MemoryPolicy

LONG_NARRATIVE = (
    "The road narrows between black pines and the air tastes of cold iron. "
    "Somewhere ahead a bell is ringing though no tower is in sight, and the "
    "mud keeps the prints of something large that walks on two legs. You press "
    "on past a toppled waystone whose runes have been scratched out, past a "
    "shrine stuffed with wax-stubbed candles, past the hollow where the crows "
    "will not land. The light fails slowly, as if reluctant to leave you alone "
    "out here. Your pack straps creak, your breath fogs, and the story keeps "
    "walking beside you like a patient animal waiting to be fed."
)

SCRIPTED_SUMMARY = (
    "The traveler pushes deeper along the pine road toward the unseen bell, "
    "past defaced waystones and abandoned shrines, trailed by two-legged "
    "prints. Goals: find the bell tower, identify the stalker. Unresolved: "
    "who scratched out the runes."
)


def turn_input(index: int) -> str:
    return f"Turn {index:02d}: I march further down the pine road and study the tracks."


def build_v1_growth_script(turns: int) -> list[dict]:
    entries = []
    response = json.dumps(
        {"narrative": LONG_NARRATIVE, "characters": [], "environment": {}, "opponent": ""}
    )
    for index in range(1, turns + 1):
        marker = turn_input(index)
        entries.append({"matcher": marker, "response": '{"hurt": false, "heal": false}'})
        entries.append({"matcher": marker, "response": response})
    return entries


def build_v2_growth_script(turns: int) -> list[dict]:
    final = f"Thought: Do I need to use a tool? No\nFinal Answer: {LONG_NARRATIVE} [END]"
    done = (
        "Thought: Do I need to use a tool? No\n"
        "Final Answer: No new characters or environments to archive. [END]"
    )
    entries = []
    for index in range(1, turns + 1):
        entries.append({"matcher": f"New input: Turn {index:02d}", "response": final})
        entries.append({"matcher": f"Player input: Turn {index:02d}", "response": done})
    for _ in range(turns):
        entries.append(
            {
                "matcher": "Summarize the following role-playing game events",
                "response": SCRIPTED_SUMMARY,
            }
        )
    return entries


def _game_start_entries(engine: EngineVersion) -> list[dict]:
    if engine is EngineVersion.V1:
        response = json.dumps(
            {"narrative": LONG_NARRATIVE, "characters": [], "environment": {}, "opponent": ""}
        )
        return [{"matcher": "The player character is", "response": response}]
    return [
        {
            "matcher": "New input: Setting:",
            "response": f"Thought: Do I need to use a tool? No\nFinal Answer: {LONG_NARRATIVE} [END]",
        },
        {
            "matcher": "Player input: Setting:",
            "response": (
                "Thought: Do I need to use a tool? No\n"
                "Final Answer: Nothing to archive yet. [END]"
            ),
        },
    ]


def run_context_growth(
    turns: int = 20, seed: int = 11, policy: MemoryPolicy | None = None
) -> dict:
    """Play the scripted campaign on both engines and collect per-turn sizes.

    Returns turn-indexed lists: ``v1RequestChars`` (characters sent per v1
    request) and ``v2ContextChars`` (characters of summary-plus-window bound
    into the v2 narrator prompt).
    """
    policy = policy or MemoryPolicy()
    results: dict = {"turns": turns, "v1RequestChars": [], "v2ContextChars": []}
    for engine_version in (EngineVersion.V1, EngineVersion.V2):
        script = _game_start_entries(engine_version)
        if engine_version is EngineVersion.V1:
            script += build_v1_growth_script(turns)
        else:
            script += build_v2_growth_script(turns)
        backend = ScriptedBackend.from_list(script)
        with tempfile.TemporaryDirectory() as tmp:
            engine = GmEngine(
                store=CampaignStore(tmp),
                backend=backend,
                options=RequestOptions(temperature=0.0),
                policy=policy,
                clock=LogicalClock(),
            )
            campaign, _ = engine.create_campaign(
                "fantasy", "a bell rings beyond the pines", "Rowan", "A weathered scout.",
                engine_version, seed,
            )
            for index in range(1, turns + 1):
                outcome = engine.take_turn(campaign.id, "do", turn_input(index))
                if engine_version is EngineVersion.V1:
                    results["v1RequestChars"].append(outcome.record["requestChars"])
                else:
                    results["v2ContextChars"].append(outcome.record["contextChars"])
            if engine_version is EngineVersion.V2:
                final = engine.get_campaign(campaign.id)
                results["v2SummaryApplied"] = final.summarized_through_seq > 0
                results["v2TotalMessageChars"] = sum(len(m.text) for m in final.messages)
    results["bound"] = policy.raw_window + policy.summary_cap
    return results


def write_context_growth_report(out_dir: str | Path, turns: int = 20, seed: int = 11) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = run_context_growth(turns=turns, seed=seed)
    csv_path = out / "context_growth.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["turn", "v1_request_chars", "v2_context_chars"])
        for index in range(turns):
            writer.writerow([index + 1, data["v1RequestChars"][index], data["v2ContextChars"][index]])

    figure, axis = plt.subplots(figsize=(7, 4.5))
    x = range(1, turns + 1)
    axis.plot(x, data["v1RequestChars"], marker="o", label="v1 request size")
    axis.plot(x, data["v2ContextChars"], marker="s", label="v2 rendered context")
    axis.axhline(data["bound"], linestyle="--", color="gray", label="v2 memory bound")
    axis.set_xlabel("turn")
    axis.set_ylabel("characters")
    axis.set_title("Context growth: full-history pipeline vs bounded agent memory")
    axis.legend()
    figure.tight_layout()
    figure.savefig(out / "context_growth.png", dpi=120)
    plt.close(figure)
    data["csv"] = str(csv_path)
    data["png"] = str(out / "context_growth.png")
    return data


def hit_rate_table(seed: int = 5, trials: int = 10_000, max_prior_hits: int = 6) -> list[dict]:
    rows = []
    for chance in HitChance:
        for prior in range(max_prior_hits + 1):
            rng = GameRng(seed).split(f"report:{chance.value}:{prior}")
            hits = sum(roll_hit(rng, chance, prior) for _ in range(trials))
            rows.append(
                {
                    "chance": chance.value,
                    "priorHits": prior,
                    "expected": hit_probability(chance, prior),
                    "empirical": hits / trials,
                }
            )
    return rows


def write_hit_rate_report(
    out_dir: str | Path, seed: int = 5, trials: int = 10_000, max_prior_hits: int = 6
) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = hit_rate_table(seed=seed, trials=trials, max_prior_hits=max_prior_hits)
    csv_path = out / "hit_rates.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=["chance", "priorHits", "expected", "empirical"])
        writer.writeheader()
        writer.writerows(rows)

    figure, axis = plt.subplots(figsize=(7, 4.5))
    for chance in HitChance:
        points = [r for r in rows if r["chance"] == chance.value]
        axis.plot(
            [r["priorHits"] for r in points],
            [r["empirical"] for r in points],
            marker="o",
            label=f"{chance.value} (base {BASE_HIT_PROBABILITY[chance]:.2f})",
        )
    axis.set_xlabel("prior hits this turn")
    axis.set_ylabel("empirical hit rate")
    axis.set_title(f"Hit rates over {trials:,} trials per point")
    axis.set_ylim(-0.05, 1.0)
    axis.legend()
    figure.tight_layout()
    figure.savefig(out / "hit_rates.png", dpi=120)
    plt.close(figure)
    return {"rows": rows, "csv": str(csv_path), "png": str(out / "hit_rates.png")}
