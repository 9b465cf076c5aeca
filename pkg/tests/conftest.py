"""Shared fixtures: figure constants, golden script loading, episode runner."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from solo_gm import state
from solo_gm.engine import GmEngine, LogicalClock
from solo_gm.llm import ScriptedBackend
from solo_gm.react import RequestOptions
from solo_gm.state import CampaignStore, CharType, EngineVersion

REPO_ROOT = Path(__file__).resolve().parents[1]
GOLDEN_DIR = REPO_ROOT / "golden"

NARRATOR_FIG_FINAL = (
    "Your sword strikes the guard's shoulder and he winces in pain but is still able to "
    "hold on to his sword. The guard, despite his combat training, is thrown off balance "
    "and therefore misses his retaliatory attack. He realizes his mistake and assumes his "
    "combat stance, more focused than ever."
)
NARRATOR_FIG_DAMAGE_SENTENCE = (
    "Ivan deals 12 damage to Castle Guard. They have 28 health points out of 40 remaining."
)
NARRATOR_FIG_OBSERVATION = (
    'Ivan described as "A wielder of earth, wind, and fire" fights Castle Guard described '
    'as "A vigilant guard of the kingdom".\n'
    "Ivan deals 12 damage to Castle Guard. They have 28 health points out of 40 remaining. "
    "Castle Guard misses their attack on Ivan. Ivan and Castle Guard's battle has been "
    "resolved and this pair can not be used for the battle tool again."
)
NARRATOR_FIG_INPUT = (
    "I swing my sword towards the guard's sword-wielding arm in hopes of disarming him."
)
NARRATOR_FIG_BATTLE_JSON = json.dumps(
    {
        "participant1": {"name": "Ivan", "description": "A wielder of earth, wind, and fire."},
        "participant2": {"name": "Castle Guard", "description": "A vigilant guard of the kingdom."},
        "participant1HitChance": "Medium",
        "participant2HitChance": "Low",
        "participant1DamageSeverity": "High",
        "participant2DamageSeverity": "Medium",
    }
)

ARCHIVIST_FIG_INPUT = (
    "I sneak towards the encampment's barracks and attempt to enter sneakily through the door."
)
ARCHIVIST_FIG_NARRATIVE = (
    "As you sneak around like a scoundrel, you hear rustling from the barracks. As you "
    "attempt to open the door, you find that it is locked."
)
ARCHIVIST_FIG_OBSERVATION = (
    "A new environment Encampment Barracks has been created with the following description: "
    "A wooden makeshift shelter for the encampment's soldiers. The door is locked."
)
ARCHIVIST_FIG_FINAL = (
    "I have created the environment Encampment Barracks. No other new details about "
    "characters or environments are mentioned in the narrative, so I am finished."
)
ARCHIVIST_FIG_ENV_JSON = json.dumps(
    {
        "name": "Encampment Barracks",
        "description": "A wooden makeshift shelter for the encampment's soldiers. The door is locked.",
        "isPlayerHere": True,
    }
)

SIX_TASK_V2_SEED = 42
SIX_TASK_V1_SEED = 99
SIX_TASK_TURNS = [
    ("do", "I descend the creaking stairs into the cellar."),
    ("do", "I pry open the dusty crate with my bare hands."),
    ("say", "Who keeps these barrels stocked?"),
    ("attack", "I attack the giant rat gnawing the grain sacks."),
    # task 5 (defeat) and 6 (heal) are driven per engine; see run_six_task_episode
]


def tool_call_text(action: str, payload_json: str) -> str:
    return f"Thought: Do I need to use a tool? Yes\nAction: {action}\nAction Input: {payload_json}"


def final_text(answer: str, end_marker: bool = True) -> str:
    suffix = " [END]" if end_marker else ""
    return f"Thought: Do I need to use a tool? No\nFinal Answer: {answer}{suffix}"


def load_golden(name: str) -> list[dict]:
    return json.loads((GOLDEN_DIR / f"{name}.json").read_text(encoding="utf-8"))


def golden_backend(name: str) -> ScriptedBackend:
    return ScriptedBackend.from_list(load_golden(name))


def make_figure_campaign() -> state.Campaign:
    """Ivan plus the castle guard at full health, as the figure presumes."""
    campaign = state.create_campaign(
        "fantasy",
        "bandits have kidnapped a child from a nearby village",
        "Ivan",
        "A wielder of earth, wind, and fire.",
        EngineVersion.V2,
        42,
    )
    state.upsert_character(
        campaign, "Castle Guard", "A vigilant guard of the kingdom.", CharType.HUMANOID
    )
    return campaign


def make_engine(tmp_path, backend, **kwargs) -> GmEngine:
    return GmEngine(
        store=CampaignStore(tmp_path),
        backend=backend,
        options=RequestOptions(temperature=0.0),
        clock=LogicalClock(),
        **kwargs,
    )


@pytest.fixture
def figure_campaign():
    return make_figure_campaign()


# One visible pass/fail line per acceptance criterion, printed in the summary.
_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  {status}  {name}")
