"""The static prompt-pipeline engine: prompt selection, pre-rolled combat, merging."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from solo_gm import state, v1
from solo_gm.assets import load_prompt
from solo_gm.combat import ForcedRng
from solo_gm.llm import ChatRole, ScriptedBackend
from solo_gm.state import ActionKind, CharType, EngineVersion, HealthState, Role


def make_campaign():
    return state.create_campaign(
        "fantasy", "rats in the cellar", "Aria", "A wary sellsword.", EngineVersion.V1, 99
    )


def v1_response(narrative="The tale continues.", characters=None, environment=None, opponent=""):
    return json.dumps(
        {
            "narrative": narrative,
            "characters": characters or [],
            "environment": environment or {},
            "opponent": opponent,
        }
    )


def scripted(*responses):
    return ScriptedBackend.from_list([{"response": r} for r in responses])


# --- request building ---------------------------------------------------------


def test_request_contains_history_plus_two():
    campaign = make_campaign()
    for index in range(2):
        state.append_message(campaign, Role.PLAYER, ActionKind.DO, f"act {index}")
        state.append_message(campaign, Role.GAME_MASTER, ActionKind.NONE, f"reply {index}")
    request = v1.build_v1_request("SYSTEM", campaign, "new input")
    assert len(request.messages) == 6
    assert request.messages[0].role is ChatRole.SYSTEM
    assert request.messages[0].content == "SYSTEM"
    assert [m.role for m in request.messages[1:5]] == [
        ChatRole.USER, ChatRole.ASSISTANT, ChatRole.USER, ChatRole.ASSISTANT,
    ]
    assert request.messages[-1].content == "new input"


def test_game_start_request_has_two_messages():
    campaign = make_campaign()
    request = v1.build_v1_request("SYSTEM", campaign, "begin")
    assert len(request.messages) == 2


def test_request_size_strictly_increases_across_turns():
    campaign = make_campaign()
    backend = scripted(
        v1_response("An opening of reasonable length for the chronicle."),
        '{"hurt": false, "heal": false}',
        v1_response("The second reply, a little longer than the first one was."),
        '{"hurt": false, "heal": false}',
        v1_response("A third reply that further extends the tale."),
    )
    sizes = []
    result = v1.v1_turn(campaign, ActionKind.GAME_START, "begin the chronicle", backend, ForcedRng([]))
    sizes.append(result.record["requestChars"])
    for text in ("I walk east.", "I walk west."):
        result = v1.v1_turn(campaign, ActionKind.DO, text, backend, ForcedRng([]))
        sizes.append(result.record["requestChars"])
    assert sizes[0] < sizes[1] < sizes[2]


# --- do / say ----------------------------------------------------------------


def test_do_turn_hurt_verdict_applies_damage_before_narrative():
    campaign = make_campaign()
    backend = scripted('{"hurt": true, "heal": false}', v1_response("Ouch."))
    result = v1.v1_turn(campaign, ActionKind.DO, "I stab myself", backend, ForcedRng([]))
    assert campaign.player_character.current_hp == 32
    assert result.record["hurtHeal"] == {"hurt": True, "heal": False}
    # The hurt/heal verdict request precedes the narrative request.
    assert backend.transcript[0].messages[0].content == load_prompt("v1/do_action_hurt_or_heal.txt")
    assert backend.transcript[1].messages[0].content == load_prompt("v1/do_action.txt")


def test_do_turn_heal_verdict_restores_hp():
    campaign = make_campaign()
    state.apply_hp_delta(campaign, campaign.player_character_id, -20)
    backend = scripted('{"hurt": false, "heal": true}', v1_response("Ah, relief."))
    v1.v1_turn(campaign, ActionKind.DO, "I take a short rest", backend, ForcedRng([]))
    assert campaign.player_character.current_hp == 28


def test_do_turn_hurt_and_heal_both_apply():
    campaign = make_campaign()
    backend = scripted('{"hurt": true, "heal": true}', v1_response("A strange potion."))
    v1.v1_turn(campaign, ActionKind.DO, "I drink the bubbling vial", backend, ForcedRng([]))
    assert campaign.player_character.current_hp == 40


def test_say_turn_uses_say_prompt_and_merges_characters():
    campaign = make_campaign()
    backend = scripted(
        v1_response(
            "The blacksmith nods.",
            characters=[{"name": "Blacksmith", "description": "burly", "type": "Humanoid"}],
        )
    )
    result = v1.v1_turn(campaign, ActionKind.SAY, "hello there", backend, ForcedRng([]))
    assert backend.transcript[0].messages[0].content == load_prompt("v1/say_action.txt")
    assert campaign.find_character("Blacksmith") is not None
    assert result.narrative == "The blacksmith nods."
    kinds = [(m.role, m.action_kind) for m in campaign.messages]
    assert kinds == [(Role.PLAYER, ActionKind.SAY), (Role.GAME_MASTER, ActionKind.NONE)]


def test_v1_creature_labels_map_to_canonical_tiers():
    campaign = make_campaign()
    backend = scripted(
        v1_response(
            "Beasts gather.",
            characters=[
                {"name": "Imp", "description": "small", "type": "SmallCreature"},
                {"name": "Troll", "description": "large", "type": "LargeCreature"},
                {"name": "Wyrm", "description": "vast", "type": "Monster"},
            ],
        )
    )
    v1.v1_turn(campaign, ActionKind.SAY, "who goes there?", backend, ForcedRng([]))
    assert campaign.find_character("Imp").char_type is CharType.SMALL_MONSTER
    assert campaign.find_character("Troll").char_type is CharType.LARGE_MONSTER
    assert campaign.find_character("Wyrm").char_type is CharType.BOSS


def test_environment_merge_locates_player():
    campaign = make_campaign()
    backend = scripted(
        v1_response("You arrive.", environment={"name": "Mill", "description": "dusty"})
    )
    v1.v1_turn(campaign, ActionKind.SAY, "onward", backend, ForcedRng([]))
    mill = campaign.find_environment("Mill")
    assert mill is not None and mill.is_player_here


# --- attack matrix -----------------------------------------------------------

MATRIX_CASES = [
    ((0.0, 0.0), "CombatHitHit", "combat_hit_hit"),
    ((0.0, 0.99), "CombatHitMiss", "combat_hit_miss"),
    ((0.99, 0.0), "CombatMissHit", "combat_miss_hit"),
    ((0.99, 0.99), "CombatMissMiss", "combat_miss_miss"),
]


@pytest.mark.parametrize("rolls,prompt_name,asset", MATRIX_CASES)
def test_attack_selects_exact_combat_prompt(rolls, prompt_name, asset):
    campaign = make_campaign()
    state.upsert_character(campaign, "Giant Rat", "a big rat", CharType.SMALL_MONSTER)
    backend = scripted(
        json.dumps({"opponent": "Giant Rat", "characters": []}),
        v1_response("Fur flies.", opponent="Giant Rat"),
    )
    result = v1.v1_turn(
        campaign, ActionKind.ATTACK, "I attack the rat", backend, ForcedRng(list(rolls))
    )
    assert result.record["systemPrompt"] == prompt_name
    flavor_system = backend.transcript[1].messages[0].content
    assert flavor_system == load_prompt(f"v1/{asset}.txt")
    assert result.record["rolls"] == {
        "playerHit": rolls[0] < v1.PLAYER_HIT_PROBABILITY,
        "opponentHit": rolls[1] < v1.OPPONENT_HIT_PROBABILITY,
    }


def test_attack_applies_damage_before_flavor_request():
    campaign = make_campaign()
    state.upsert_character(campaign, "Giant Rat", "a big rat", CharType.SMALL_MONSTER)
    backend = scripted(
        json.dumps({"opponent": "Giant Rat", "characters": []}),
        v1_response("Fur flies.", opponent="Giant Rat"),
    )
    v1.v1_turn(campaign, ActionKind.ATTACK, "I attack the rat", backend, ForcedRng([0.0, 0.0]))
    rat = campaign.find_character("Giant Rat")
    assert rat.current_hp == 12  # hit before the flavor request
    assert campaign.player_character.current_hp == 32
    flavor_user = backend.transcript[1].messages[-1].content
    assert "deals 8 damage to Giant Rat" in flavor_user
    assert "12/20" in flavor_user


def test_attack_creates_opponent_from_description_response():
    campaign = make_campaign()
    backend = scripted(
        json.dumps(
            {
                "opponent": "Gravekeeper Ghoul",
                "characters": [
                    {"name": "Gravekeeper Ghoul", "description": "hungry", "type": "Monster"}
                ],
            }
        ),
        v1_response("It lunges.", opponent="Gravekeeper Ghoul"),
    )
    v1.v1_turn(campaign, ActionKind.ATTACK, "I attack the shadow", backend, ForcedRng([0.99, 0.99]))
    ghoul = campaign.find_character("Gravekeeper Ghoul")
    assert ghoul is not None and ghoul.char_type is CharType.BOSS
    assert campaign.current_opponent_id == ghoul.id


def test_attack_reuses_current_opponent_when_unnamed():
    campaign = make_campaign()
    state.upsert_character(campaign, "Giant Rat", "a big rat", CharType.SMALL_MONSTER)
    backend = scripted(
        json.dumps({"opponent": "Giant Rat", "characters": []}),
        v1_response("First exchange.", opponent="Giant Rat"),
        json.dumps({"opponent": "", "characters": []}),
        v1_response("Second exchange.", opponent="Giant Rat"),
    )
    v1.v1_turn(campaign, ActionKind.ATTACK, "I attack the rat", backend, ForcedRng([0.99, 0.99]))
    result = v1.v1_turn(campaign, ActionKind.ATTACK, "I strike again", backend, ForcedRng([0.99, 0.99]))
    assert result.record["opponent"] == "Giant Rat"


def test_heavy_opponents_hit_harder():
    campaign = make_campaign()
    state.upsert_character(campaign, "Ogre Chief", "huge", CharType.LARGE_MONSTER)
    backend = scripted(
        json.dumps({"opponent": "Ogre Chief", "characters": []}),
        v1_response("Crunch.", opponent="Ogre Chief"),
    )
    v1.v1_turn(campaign, ActionKind.ATTACK, "I attack the ogre", backend, ForcedRng([0.99, 0.0]))
    assert campaign.player_character.current_hp == 28  # 12 = 8 * 1.5


# --- error handling ----------------------------------------------------------


def test_unparseable_response_retried_once_then_fails():
    campaign = make_campaign()
    backend = scripted("not json", "still not json")
    with pytest.raises(v1.V1TurnError) as excinfo:
        v1.v1_turn(campaign, ActionKind.SAY, "hello", backend, ForcedRng([]))
    assert excinfo.value.raw_text == "still not json"
    assert campaign.messages == []  # failed turns append nothing


def test_unparseable_then_corrected_succeeds():
    campaign = make_campaign()
    backend = scripted("not json", v1_response("Recovered."))
    result = v1.v1_turn(campaign, ActionKind.SAY, "hello", backend, ForcedRng([]))
    assert result.narrative == "Recovered."
    assert len(backend.transcript) == 2
    assert backend.transcript[1].messages[-1].content == v1.CORRECTIVE_NOTE


def test_missing_narrative_is_an_error():
    campaign = make_campaign()
    backend = scripted('{"characters": []}', '{"narrative": ""}')
    with pytest.raises(v1.V1TurnError):
        v1.v1_turn(campaign, ActionKind.SAY, "hi", backend, ForcedRng([]))


# --- architecture ------------------------------------------------------------


def test_v1_has_no_react_runtime_dependency():
    source = (Path(v1.__file__)).read_text(encoding="utf-8")
    import_lines = [
        line for line in source.splitlines() if line.startswith(("import ", "from "))
    ]
    assert not any("react" in line for line in import_lines), import_lines
    assert not any(
        token in source
        for token in ("run_loop", "parse_model_output", "ToolRegistry", "ReactTrajectory")
    )
