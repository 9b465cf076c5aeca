"""Acceptance suite: every primary criterion at its stated tolerance.

Each test is one criterion; the terminal summary prints one pass/fail line per
criterion (see conftest). Everything runs offline against scripted backends.
"""

from __future__ import annotations

import json
import random
import re
import time

import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    ARCHIVIST_FIG_ENV_JSON,
    ARCHIVIST_FIG_FINAL,
    ARCHIVIST_FIG_INPUT,
    ARCHIVIST_FIG_NARRATIVE,
    GOLDEN_DIR,
    NARRATOR_FIG_BATTLE_JSON,
    NARRATOR_FIG_DAMAGE_SENTENCE,
    NARRATOR_FIG_FINAL,
    NARRATOR_FIG_INPUT,
    final_text,
    make_figure_campaign,
    tool_call_text,
)
from episodes import (
    COMBAT,
    CONVERSE,
    DEFEAT_V2,
    EXPLORE,
    HEAL,
    OBJECT,
    PLAYER,
    SCENARIO,
    SETTING,
    V1_SEED,
    V2_SEED,
    defeat_enemy_v1,
    start_episode,
)
from solo_gm import state
from solo_gm.assets import load_prompt
from solo_gm.cli import main as cli_main
from solo_gm.combat import ForcedRng, GameRng, HitChance, hit_probability, roll_hit
from solo_gm.llm import ScriptedBackend
from solo_gm.narrator import (
    NarratorTurnContext,
    TurnCombatLedger,
    battle_tool,
    heal_character_tool,
    wound_character_tool,
)
from solo_gm.react import (
    CORRECTIVE_OBSERVATION,
    ParseError,
    ParsedFinal,
    PromptTemplate,
    ReactStep,
    Termination,
    ToolRegistry,
    ToolSpec,
    parse_history,
    parse_model_output,
    render_history,
    run_loop,
)
from solo_gm.report import run_context_growth
from solo_gm.state import ActionKind, CharType, EngineVersion, HealthState
from solo_gm.v1 import combat_prompt_name, system_prompt
from solo_gm.v2 import v2_turn

pytestmark = pytest.mark.filterwarnings("ignore::DeprecationWarning")


def test_narrator_figure_replay(figure_campaign):
    """Battle observation and final narrative reproduce the worked example byte-exactly."""
    backend = ScriptedBackend.from_list(
        [
            {"response": tool_call_text("Battle", NARRATOR_FIG_BATTLE_JSON)},
            {"response": final_text(NARRATOR_FIG_FINAL)},
            {"response": final_text("Nothing new to archive.")},
        ]
    )
    started = time.perf_counter()
    record = v2_turn(
        figure_campaign, ActionKind.DO, NARRATOR_FIG_INPUT, backend, ForcedRng([0.0, 0.99])
    )
    elapsed = time.perf_counter() - started
    observation = record.narrator_trajectory.steps[0].observation
    assert NARRATOR_FIG_DAMAGE_SENTENCE in observation
    assert record.narrative == NARRATOR_FIG_FINAL
    guard = figure_campaign.find_character("Castle Guard")
    assert (guard.current_hp, guard.max_hp) == (28, 40)
    assert elapsed < 1.0


def test_archivist_figure_replay(figure_campaign):
    """The worked archive example creates the located environment verbatim."""
    backend = ScriptedBackend.from_list(
        [
            {"response": final_text(ARCHIVIST_FIG_NARRATIVE)},
            {"response": tool_call_text("UpdateEnvironment", ARCHIVIST_FIG_ENV_JSON)},
            {"response": final_text(ARCHIVIST_FIG_FINAL)},
        ]
    )
    started = time.perf_counter()
    record = v2_turn(figure_campaign, ActionKind.DO, ARCHIVIST_FIG_INPUT, backend, ForcedRng([]))
    elapsed = time.perf_counter() - started
    barracks = figure_campaign.find_environment("Encampment Barracks")
    assert barracks is not None and barracks.is_player_here
    assert record.archivist_trajectory.final_answer == ARCHIVIST_FIG_FINAL
    assert elapsed < 1.0


SAFE_TEXT = st.text(
    alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters=" ,.'-?!"),
    min_size=1,
    max_size=50,
).map(lambda s: " ".join(s.split())).filter(bool)
WELL_FORMED_STEPS = st.lists(
    st.builds(
        ReactStep,
        thought=SAFE_TEXT,
        action=st.sampled_from(["Battle", "WoundCharacter", "HealCharacter"]),
        action_input=st.dictionaries(st.sampled_from(["a", "b"]), SAFE_TEXT, min_size=1).map(
            json.dumps
        ),
        observation=SAFE_TEXT,
    ),
    max_size=5,
)
MARKERLESS_TEXT = st.text(
    alphabet=st.characters(blacklist_characters=":", blacklist_categories=("Cs",)), max_size=80
)


def test_react_grammar():
    """100-case round-trip, malformed handling, and missing [END] tolerance."""

    @settings(max_examples=100)
    @given(steps=WELL_FORMED_STEPS)
    def round_trip(steps):
        assert parse_history(render_history(steps)) == steps

    round_trip()

    @settings(max_examples=100)
    @given(text=MARKERLESS_TEXT)
    def malformed_raises(text):
        with pytest.raises(ParseError):
            parse_model_output(text)

    malformed_raises()

    # Malformed output gets exactly one corrective retry inside the loop.
    registry = ToolRegistry([ToolSpec("Battle", "d", lambda c, r, x: "ok")])
    backend = ScriptedBackend.from_list(
        [{"response": "no markers at all"}, {"response": final_text("Recovered.")}]
    )
    trajectory = run_loop(PromptTemplate("steps: {history}"), {}, registry, backend, None, None)
    assert trajectory.terminated is Termination.FINAL_ANSWER
    assert trajectory.parse_failures == ["no markers at all"]
    assert trajectory.steps[0].observation == CORRECTIVE_OBSERVATION

    parsed = parse_model_output("Thought: done\nFinal Answer: Onward.")
    assert isinstance(parsed, ParsedFinal) and not parsed.has_end_marker


def five_character_roster():
    campaign = state.create_campaign(
        "fantasy", "arena", "Pell", "A pit fighter.", EngineVersion.V2, 17
    )
    state.upsert_character(campaign, "Brigand", "a road brigand", CharType.HUMANOID)
    state.upsert_character(campaign, "Giant Rat", "a fat rat", CharType.SMALL_MONSTER)
    state.upsert_character(campaign, "Ogre", "a slow ogre", CharType.LARGE_MONSTER)
    state.upsert_character(campaign, "Lich King", "a bone tyrant", CharType.BOSS)
    return campaign


def test_tool_contract_suite():
    """1,000 random tool-call sequences: bounds, locks, and absorbing death hold."""
    rng = random.Random(20260810)
    started = time.perf_counter()
    violations = 0
    for sequence in range(1_000):
        campaign = five_character_roster()
        names = [c.name for c in campaign.characters]
        died: set[str] = set()
        for _turn in range(rng.randint(1, 3)):
            ledger = TurnCombatLedger()
            ctx = NarratorTurnContext(ledger=ledger, rng=GameRng(rng.getrandbits(32)))
            battled: set[frozenset] = set()
            wounded: set[str] = set()
            healed: set[str] = set()
            for _call in range(rng.randint(1, 6)):
                kind = rng.choice(["battle", "wound", "heal"])
                target_name = rng.choice(names)
                before = {c.id: c.current_hp for c in campaign.characters}
                if kind == "battle":
                    other = rng.choice([n for n in names if n != target_name])
                    payload = json.dumps(
                        {
                            "participant1": {"name": target_name, "description": ""},
                            "participant2": {"name": other, "description": ""},
                            "participant1HitChance": rng.choice(
                                ["high", "medium", "low", "impossible"]
                            ),
                            "participant2HitChance": rng.choice(["high", "low"]),
                            "participant1DamageSeverity": rng.choice(
                                ["harmless", "low", "medium", "high", "extraordinary"]
                            ),
                            "participant2DamageSeverity": "medium",
                        }
                    )
                    observation = battle_tool(campaign, payload, ctx)
                    pair = frozenset(
                        (campaign.find_character(target_name).id, campaign.find_character(other).id)
                    )
                    if "fights" in observation:
                        assert pair not in battled, "pair lock violated"
                        battled.add(pair)
                    else:
                        assert before == {c.id: c.current_hp for c in campaign.characters}
                elif kind == "wound":
                    payload = json.dumps(
                        {"input": f"{target_name} stumbles into the spike pit",
                         "severity": rng.choice(["low", "medium", "high", "extraordinary"])}
                    )
                    observation = wound_character_tool(campaign, payload, ctx)
                    target = campaign.find_character(target_name)
                    if "is wounded and takes" in observation:
                        assert target.id not in wounded, "wound once-per-character violated"
                        assert not any(target.id in pair for pair in battled), (
                            "wound-excludes-battling violated"
                        )
                        wounded.add(target.id)
                    else:
                        assert before == {c.id: c.current_hp for c in campaign.characters}
                else:
                    payload = json.dumps(
                        {"input": f"{target_name} sips a glowing tonic",
                         "magnitude": rng.choice(["low", "medium", "high", "extraordinary"])}
                    )
                    observation = heal_character_tool(campaign, payload, ctx)
                    target = campaign.find_character(target_name)
                    if "is healed and regains" in observation:
                        assert target.id not in healed, "heal once-per-character violated"
                        assert target.name not in died, "a dead character was healed"
                        healed.add(target.id)
                    else:
                        assert before == {c.id: c.current_hp for c in campaign.characters}
                for character in campaign.characters:
                    assert 0 <= character.current_hp <= character.max_hp, "HP out of bounds"
                    if character.name in died:
                        assert character.health_state is HealthState.DEAD
                        assert character.current_hp == 0, "death was not absorbing"
                    elif (
                        character.health_state is HealthState.DEAD and not character.is_player
                    ):
                        died.add(character.name)
    elapsed = time.perf_counter() - started
    assert violations == 0
    assert elapsed < 10.0, f"tool contract suite took {elapsed:.1f}s"


def test_hit_statistics():
    """10,000 trials per level: rates within ±0.02 and the 0.05 floor within ±0.01."""
    expected = {HitChance.HIGH: 0.90, HitChance.MEDIUM: 0.65, HitChance.LOW: 0.30,
                HitChance.IMPOSSIBLE: 0.00}
    for chance, base in expected.items():
        stream = GameRng(5).split(f"acc:{chance.value}:0")
        rate = sum(roll_hit(stream, chance, 0) for _ in range(10_000)) / 10_000
        assert abs(rate - base) <= 0.02, (chance, rate)
    for chance in (HitChance.HIGH, HitChance.MEDIUM, HitChance.LOW):
        probabilities = [hit_probability(chance, prior) for prior in range(8)]
        assert probabilities == sorted(probabilities, reverse=True)
    floor_stream = GameRng(5).split("acc:floor")
    floor_rate = sum(roll_hit(floor_stream, HitChance.HIGH, 6) for _ in range(10_000)) / 10_000
    assert abs(floor_rate - 0.05) <= 0.01


def test_v1_combat_matrix():
    """Each forced 2x2 outcome selects exactly its prompt, byte-identical to the asset."""
    cases = {
        (True, True): ("CombatHitHit", "The player's attack always hits.",
                       "The opponent's attack always hits."),
        (True, False): ("CombatHitMiss", "The player's attack always hits.",
                        "The opponent's attack will miss."),
        (False, True): ("CombatMissHit", "The player's attack always misses.",
                        "The opponent's attack always hits."),
        (False, False): ("CombatMissMiss", "The player's attack always misses.",
                         "The opponent's attack always misses."),
    }
    from solo_gm.v1 import SYSTEM_PROMPTS

    seen = set()
    for (player_hit, opponent_hit), (name, player_line, opponent_line) in cases.items():
        assert combat_prompt_name(player_hit, opponent_hit) == name
        text = system_prompt(name)
        assert text == load_prompt(SYSTEM_PROMPTS[name])
        assert player_line in text and opponent_line in text
        seen.add(name)
    assert len(seen) == 4


def test_context_growth_contrast():
    """v1 requests grow strictly; v2 context stays under rawWindow + summary cap."""
    data = run_context_growth(turns=20, seed=11)
    v1_sizes = data["v1RequestChars"]
    assert len(v1_sizes) == 20
    assert all(later > earlier for earlier, later in zip(v1_sizes, v1_sizes[1:]))
    assert data["v2TotalMessageChars"] > 8_000  # the trigger was genuinely exceeded
    assert data["v2SummaryApplied"]
    assert all(size <= data["bound"] for size in data["v2ContextChars"])
    # The architectural difference in one comparison: v1 ends far beyond the
    # bound that v2 never crosses.
    assert v1_sizes[-1] > data["bound"]


def assert_task_states(engine, campaign_id, engine_version):
    """Drive the six tasks, asserting world state after each."""
    campaign = engine.get_campaign(campaign_id)
    player_max = campaign.player_character.max_hp

    engine.take_turn(campaign_id, *EXPLORE)
    campaign = engine.get_campaign(campaign_id)
    cellar = campaign.find_environment("Tavern Cellar")
    assert cellar is not None and cellar.is_player_here
    assert not campaign.find_environment("Gilded Goose Tavern").is_player_here

    engine.take_turn(campaign_id, *OBJECT)
    campaign = engine.get_campaign(campaign_id)
    hurt_player_hp = campaign.player_character.current_hp
    assert hurt_player_hp < player_max

    engine.take_turn(campaign_id, *CONVERSE)
    campaign = engine.get_campaign(campaign_id)
    bram = campaign.find_character("Innkeeper Bram")
    assert bram is not None and bram.char_type is CharType.HUMANOID

    engine.take_turn(campaign_id, *COMBAT)
    campaign = engine.get_campaign(campaign_id)
    rat = campaign.find_character("Giant Rat")
    assert rat is not None and rat.char_type is CharType.SMALL_MONSTER
    assert rat.current_hp <= rat.max_hp

    if engine_version is EngineVersion.V1:
        defeat_enemy_v1(engine, campaign_id)
    else:
        engine.take_turn(campaign_id, *DEFEAT_V2)
    campaign = engine.get_campaign(campaign_id)
    rat = campaign.find_character("Giant Rat")
    assert rat.current_hp == 0 and rat.health_state is HealthState.DEAD

    before_heal = engine.get_campaign(campaign_id).player_character.current_hp
    engine.take_turn(campaign_id, *HEAL)
    campaign = engine.get_campaign(campaign_id)
    healed = campaign.player_character.current_hp
    assert healed == min(player_max, before_heal + (4 if engine_version is EngineVersion.V2 else 8))
    assert healed > before_heal or before_heal == player_max


def test_six_task_episode(tmp_path):
    """Explore, interact, converse, fight, defeat, heal: both engines, state checked per task."""
    started = time.perf_counter()
    for engine_version, seed in ((EngineVersion.V2, V2_SEED), (EngineVersion.V1, V1_SEED)):
        engine, campaign_id = start_episode(
            engine_version, tmp_path / engine_version.value, seed
        )
        assert_task_states(engine, campaign_id, engine_version)
    assert time.perf_counter() - started < 5.0


def test_replay_determinism(tmp_path):
    """`gm replay` on the six-task episode twice produces identical transcript hashes."""
    from episodes import run_episode

    engine, campaign_id = run_episode(EngineVersion.V2, tmp_path)
    runner = CliRunner()
    args = ["replay", "--campaign", campaign_id, "--script",
            str(GOLDEN_DIR / "six_task_v2.json"), "--data-dir", str(tmp_path)]
    first = runner.invoke(cli_main, args, catch_exceptions=False)
    second = runner.invoke(cli_main, args, catch_exceptions=False)
    assert first.exit_code == 0 and second.exit_code == 0, first.output + second.output
    pattern = re.compile(r"transcript hash: ([0-9a-f]{64})")
    assert pattern.search(first.output).group(1) == pattern.search(second.output).group(1)


def test_persistence_resume_equals_uninterrupted(tmp_path):
    """Save/load mid-episode, resume, and finish: final state matches a straight run."""
    from conftest import golden_backend, make_engine
    from episodes import run_episode

    uninterrupted_engine, uninterrupted_id = run_episode(EngineVersion.V2, tmp_path / "a")
    uninterrupted = uninterrupted_engine.get_campaign(uninterrupted_id)

    # First half of the episode, then the process "dies".
    first_engine, campaign_id = start_episode(EngineVersion.V2, tmp_path / "b", V2_SEED)
    for turn in (EXPLORE, OBJECT, CONVERSE):
        first_engine.take_turn(campaign_id, *turn)

    # Resume from disk with a fresh engine and a fresh script.
    resumed_engine = make_engine(tmp_path / "b", golden_backend("six_task_v2"))
    loaded = resumed_engine.get_campaign(campaign_id)
    assert loaded.find_character("Innkeeper Bram") is not None  # mid-episode state restored
    for turn in (COMBAT, DEFEAT_V2, HEAL):
        resumed_engine.take_turn(campaign_id, *turn)

    resumed = resumed_engine.get_campaign(campaign_id)
    assert resumed.structural_content() == uninterrupted.structural_content()
