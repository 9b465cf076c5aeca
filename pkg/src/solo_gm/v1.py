"""The static prompt-pipeline game master.

Every turn selects exactly one system prompt, sends it with the entire
conversation history, and parses one monolithic JSON reply into narrative plus
state updates. Combat outcomes are pre-rolled by the engine and handed to the
model as facts, so the story can never disagree with the numbers. There is no
summarization here on purpose: the unbounded context growth is the baseline
behavior the agentic engine is measured against.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

from . import state
from .assets import load_prompt
from .llm import ChatMessage, ChatRequest, ChatRole, RequestOptions
from .matching import match_character
from .state import ActionKind, Campaign, Character, CharType, EngineVersion, Role

logger = logging.getLogger(__name__)

PLAYER_HIT_PROBABILITY = 0.7
OPPONENT_HIT_PROBABILITY = 0.5
BASE_DAMAGE = 8
HEAVY_ATTACKER_MULTIPLIER = 1.5

CORRECTIVE_NOTE = (
    "Your previous response was not valid JSON in the required structure. "
    "Respond again with only the JSON object."
)

SYSTEM_PROMPTS = {
    "GameStart": "v1/game_start.txt",
    "DoActionHurtOrHeal": "v1/do_action_hurt_or_heal.txt",
    "DoAction": "v1/do_action.txt",
    "SayAction": "v1/say_action.txt",
    "CombatOpponentDescription": "v1/combat_opponent_description.txt",
    "CombatHitHit": "v1/combat_hit_hit.txt",
    "CombatHitMiss": "v1/combat_hit_miss.txt",
    "CombatMissHit": "v1/combat_miss_hit.txt",
    "CombatMissMiss": "v1/combat_miss_miss.txt",
}

# The v1 prompts use a four-label creature vocabulary; the engine's canonical
# enum has five tiers, so the legacy labels map onto it.
CREATURE_LABEL_MAP = {
    "humanoid": CharType.HUMANOID,
    "smallcreature": CharType.SMALL_MONSTER,
    "largecreature": CharType.LARGE_MONSTER,
    "monster": CharType.BOSS,
}


class V1TurnError(Exception):
    def __init__(self, message: str, raw_text: str | None = None):
        super().__init__(message)
        self.raw_text = raw_text


def system_prompt(name: str) -> str:
    return load_prompt(SYSTEM_PROMPTS[name])


def combat_prompt_name(player_hit: bool, opponent_hit: bool) -> str:
    return {
        (True, True): "CombatHitHit",
        (True, False): "CombatHitMiss",
        (False, True): "CombatMissHit",
        (False, False): "CombatMissMiss",
    }[(player_hit, opponent_hit)]


def parse_creature_type(token: str) -> CharType:
    folded = token.strip().casefold()
    if folded in CREATURE_LABEL_MAP:
        return CREATURE_LABEL_MAP[folded]
    for char_type in CharType:
        if char_type.value.casefold() == folded:
            return char_type
    raise V1TurnError(f"unknown character type {token!r}")


@dataclass
class V1Response:
    narrative: str
    characters: list[dict] = field(default_factory=list)
    environment: dict | None = None
    opponent: str | None = None


def build_v1_request(
    prompt_text: str,
    campaign: Campaign,
    player_text: str,
    options: RequestOptions | None = None,
) -> ChatRequest:
    """One stateless query: system prompt, entire history, then the new input."""
    options = options or RequestOptions()
    messages = [ChatMessage(ChatRole.SYSTEM, prompt_text)]
    for message in campaign.messages:
        role = ChatRole.ASSISTANT if message.role is Role.GAME_MASTER else ChatRole.USER
        messages.append(ChatMessage(role, message.text))
    messages.append(ChatMessage(ChatRole.USER, player_text))
    return ChatRequest(
        messages=messages,
        model=options.model,
        temperature=options.temperature,
        max_tokens=options.max_tokens,
    )


def _complete_json(
    prompt_text: str,
    campaign: Campaign,
    player_text: str,
    backend,
    options: RequestOptions | None,
) -> tuple[dict, int]:
    """Query and parse JSON, with one corrective re-request on garbage output.

    Returns the parsed object and the size in characters of the request that
    produced it (the context-growth probe).
    """
    request = build_v1_request(prompt_text, campaign, player_text, options)
    reply = backend.complete(request)
    try:
        return json.loads(reply), request.content_chars()
    except json.JSONDecodeError:
        logger.warning("v1 reply was not valid JSON; issuing corrective re-request")
    retry = ChatRequest(
        messages=request.messages
        + [ChatMessage(ChatRole.ASSISTANT, reply), ChatMessage(ChatRole.SYSTEM, CORRECTIVE_NOTE)],
        model=request.model,
        temperature=request.temperature,
        max_tokens=request.max_tokens,
    )
    retry_reply = backend.complete(retry)
    try:
        return json.loads(retry_reply), request.content_chars()
    except json.JSONDecodeError as exc:
        logger.error("v1 reply unparseable after corrective retry: %r", retry_reply)
        raise V1TurnError(
            "the model's response was not valid JSON after a corrective retry",
            raw_text=retry_reply,
        ) from exc


def _parse_v1_response(data: dict) -> V1Response:
    narrative = data.get("narrative")
    if not isinstance(narrative, str) or not narrative.strip():
        raise V1TurnError("v1 response carried no narrative", raw_text=json.dumps(data))
    characters = data.get("characters") or []
    if not isinstance(characters, list):
        raise V1TurnError('"characters" must be a list', raw_text=json.dumps(data))
    environment = data.get("environment") or None
    if environment is not None and not isinstance(environment, dict):
        raise V1TurnError('"environment" must be an object', raw_text=json.dumps(data))
    opponent = data.get("opponent") or None
    if opponent is not None and not isinstance(opponent, str):
        opponent = None
    return V1Response(
        narrative=narrative, characters=characters, environment=environment, opponent=opponent
    )


def _merge_characters(campaign: Campaign, characters: list[dict]) -> None:
    for entry in characters:
        if not isinstance(entry, dict):
            continue
        name = entry.get("name", "")
        if not isinstance(name, str) or not name.strip():
            continue
        try:
            char_type = parse_creature_type(entry.get("type", "Humanoid"))
        except V1TurnError:
            char_type = CharType.HUMANOID
        description = entry.get("description", "")
        if not isinstance(description, str):
            description = ""
        if campaign.find_character(name) is not None and campaign.find_character(name).is_player:
            continue
        state.upsert_character(campaign, name, description, char_type)


def _merge_response(campaign: Campaign, response: V1Response) -> None:
    _merge_characters(campaign, response.characters)
    if response.environment and response.environment.get("name"):
        description = response.environment.get("description", "")
        if not isinstance(description, str):
            description = ""
        state.upsert_environment(
            campaign, str(response.environment["name"]), description, is_player_here=True
        )
    if response.opponent:
        matched = match_character(campaign, response.opponent, "")
        if matched is not None and not matched.is_player:
            campaign.current_opponent_id = matched.id


def _resolve_opponent(
    campaign: Campaign, player_text: str, backend, options: RequestOptions | None
) -> tuple[Character, int]:
    data, request_chars = _complete_json(
        system_prompt("CombatOpponentDescription"), campaign, player_text, backend, options
    )
    characters = data.get("characters") or []
    if isinstance(characters, list):
        _merge_characters(campaign, characters)
    name = data.get("opponent")
    if isinstance(name, str) and name.strip():
        matched = match_character(campaign, name, "")
        if matched is None:
            matched = state.upsert_character(campaign, name, "", CharType.HUMANOID)
        if not matched.is_player:
            campaign.current_opponent_id = matched.id
            return matched, request_chars
    if campaign.current_opponent_id is not None:
        return campaign.character_by_id(campaign.current_opponent_id), request_chars
    raise V1TurnError("could not determine who the player is attacking")


def _opponent_damage(opponent: Character) -> int:
    if opponent.char_type in (CharType.LARGE_MONSTER, CharType.BOSS):
        return round(BASE_DAMAGE * HEAVY_ATTACKER_MULTIPLIER)
    return BASE_DAMAGE


@dataclass
class V1TurnResult:
    narrative: str
    record: dict


def v1_turn(
    campaign: Campaign,
    action_kind: ActionKind,
    player_text: str,
    backend,
    rng,
    options: RequestOptions | None = None,
    now: str | None = None,
) -> V1TurnResult:
    """Run one v1 turn: pick the system prompt, query, parse, merge, log."""
    if campaign.engine is not EngineVersion.V1:
        raise V1TurnError("v1_turn requires a V1 campaign")
    record: dict = {"actionKind": action_kind.value}
    final_text = player_text

    if action_kind is ActionKind.GAME_START:
        prompt_name = "GameStart"
    elif action_kind is ActionKind.SAY:
        prompt_name = "SayAction"
    elif action_kind is ActionKind.DO:
        verdict, _ = _complete_json(
            system_prompt("DoActionHurtOrHeal"), campaign, player_text, backend, options
        )
        hurt = bool(verdict.get("hurt"))
        heal = bool(verdict.get("heal"))
        record["hurtHeal"] = {"hurt": hurt, "heal": heal}
        player = campaign.player_character
        if hurt:
            state.apply_hp_delta(campaign, player.id, -BASE_DAMAGE)
        if heal:
            state.apply_hp_delta(campaign, player.id, BASE_DAMAGE)
        prompt_name = "DoAction"
    elif action_kind is ActionKind.ATTACK:
        opponent, _ = _resolve_opponent(campaign, player_text, backend, options)
        player = campaign.player_character
        player_hit = rng.uniform() < PLAYER_HIT_PROBABILITY
        opponent_hit = rng.uniform() < OPPONENT_HIT_PROBABILITY
        info_lines = []
        if player_hit:
            state.apply_hp_delta(campaign, opponent.id, -BASE_DAMAGE)
            info_lines.append(
                f"The player's attack deals {BASE_DAMAGE} damage to {opponent.name}, "
                f"leaving them at {opponent.current_hp}/{opponent.max_hp} health points."
            )
        damage_taken = _opponent_damage(opponent)
        if opponent_hit:
            state.apply_hp_delta(campaign, player.id, -damage_taken)
            info_lines.append(
                f"{opponent.name}'s attack deals {damage_taken} damage to the player, "
                f"leaving them at {player.current_hp}/{player.max_hp} health points."
            )
        prompt_name = combat_prompt_name(player_hit, opponent_hit)
        record["rolls"] = {"playerHit": player_hit, "opponentHit": opponent_hit}
        record["opponent"] = opponent.name
        if info_lines:
            final_text = player_text + "\n\n" + "\n".join(info_lines)
    else:
        raise V1TurnError(f"v1 does not handle action kind {action_kind.value}")

    data, request_chars = _complete_json(
        system_prompt(prompt_name), campaign, final_text, backend, options
    )
    response = _parse_v1_response(data)
    record["systemPrompt"] = prompt_name
    record["requestChars"] = request_chars

    player_role = Role.SYSTEM if action_kind is ActionKind.GAME_START else Role.PLAYER
    state.append_message(campaign, player_role, action_kind, player_text, timestamp=now)
    state.append_message(campaign, Role.GAME_MASTER, ActionKind.NONE, response.narrative, timestamp=now)
    _merge_response(campaign, response)
    return V1TurnResult(narrative=response.narrative, record=record)
