"""Narrator agent tools: Battle, WoundCharacter, and HealCharacter.

Tool inputs arrive as the raw JSON the agent emitted; anything malformed
becomes an explanatory observation that the loop feeds back to the model
rather than an exception. Per-turn usage rules (pair lock, once-per-character
wound/heal, wound-excludes-battling) live in the turn ledger.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import combat, state
from .assets import load_prompt
from .combat import DamageSeverity, HealMagnitude, HitChance
from .llm import ChatMessage, ChatRequest, ChatRole
from .matching import find_target_in_text, match_character
from .react import ToolRegistry, ToolSpec
from .state import Campaign, Character, CharType, HealthState

PAIR_RESOLVED_SENTENCE = (
    "{a} and {b}'s battle has been resolved and this pair "
    "can not be used for the battle tool again."
)


@dataclass
class TurnCombatLedger:
    """Combat bookkeeping scoped to a single player turn."""

    resolved_pairs: set[frozenset] = field(default_factory=set)
    hits_by_character: dict[str, int] = field(default_factory=dict)
    wounded_this_turn: set[str] = field(default_factory=set)
    healed_this_turn: set[str] = field(default_factory=set)

    def record_hit(self, character_id: str) -> None:
        self.hits_by_character[character_id] = self.hits_by_character.get(character_id, 0) + 1

    def prior_hits(self, character_id: str) -> int:
        return self.hits_by_character.get(character_id, 0)

    def in_battle(self, character_id: str) -> bool:
        return any(character_id in pair for pair in self.resolved_pairs)


@dataclass
class NarratorTurnContext:
    ledger: TurnCombatLedger
    rng: object


class ToolInputError(Exception):
    """Raised internally while validating raw tool input; becomes an observation."""


def parse_raw_json(raw_input: str) -> dict:
    text = raw_input.strip()
    if text.startswith("```"):
        raise ToolInputError(
            "input was wrapped in a markdown code fence. Do not use markdown, "
            "only raw JSON as input."
        )
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ToolInputError(f"input is not valid JSON ({exc.msg}). Only raw JSON is accepted.")
    if not isinstance(data, dict):
        raise ToolInputError("input must be a JSON object.")
    return data


def _parse_enum(enum_cls, token, field_name: str, exclude=()):
    if not isinstance(token, str):
        raise ToolInputError(f'"{field_name}" must be a string.')
    try:
        value = enum_cls(token.strip().casefold())
    except ValueError:
        value = None
    if value is None or value in exclude:
        allowed = ", ".join(v.value for v in enum_cls if v not in exclude)
        raise ToolInputError(f'"{field_name}" must be one of: {allowed}.')
    return value


def _display_description(character: Character) -> str:
    return character.description.removesuffix(".")


def _hp_sentence(attacker: Character, target: Character, damage: int) -> str:
    return (
        f"{attacker.name} deals {damage} damage to {target.name}. "
        f"They have {target.current_hp} health points out of {target.max_hp} remaining."
    )


def _miss_sentence(attacker: Character, target: Character) -> str:
    return f"{attacker.name} misses their attack on {target.name}."


def _resolve_participant(campaign: Campaign, participant: dict) -> Character:
    if not isinstance(participant, dict):
        raise ToolInputError("participants must be JSON objects with name and description.")
    name = participant.get("name", "")
    description = participant.get("description", "")
    if not isinstance(name, str) or not name.strip():
        raise ToolInputError('participants need a non-empty "name".')
    if not isinstance(description, str):
        raise ToolInputError('participant "description" must be a string.')
    matched = match_character(campaign, name, description)
    if matched is not None:
        return matched
    # New combatants emerge mid-narrative: track them before resolving.
    return state.upsert_character(campaign, name, description, CharType.HUMANOID)


def battle_tool(campaign: Campaign, raw_input: str, ctx: NarratorTurnContext) -> str:
    """Resolve one exchange of attacks between two participants."""
    try:
        data = parse_raw_json(raw_input)
        for key in (
            "participant1",
            "participant2",
            "participant1HitChance",
            "participant2HitChance",
            "participant1DamageSeverity",
            "participant2DamageSeverity",
        ):
            if key not in data:
                raise ToolInputError(f'missing required field "{key}".')
        chance1 = _parse_enum(HitChance, data["participant1HitChance"], "participant1HitChance")
        chance2 = _parse_enum(HitChance, data["participant2HitChance"], "participant2HitChance")
        severity1 = _parse_enum(
            DamageSeverity, data["participant1DamageSeverity"], "participant1DamageSeverity"
        )
        severity2 = _parse_enum(
            DamageSeverity, data["participant2DamageSeverity"], "participant2DamageSeverity"
        )
        first = _resolve_participant(campaign, data["participant1"])
        second = _resolve_participant(campaign, data["participant2"])
    except ToolInputError as exc:
        return f"The Battle tool could not run: {exc}"
    if first.id == second.id:
        return (
            f"Both participants resolve to the same character ({first.name}); "
            "a battle needs two distinct characters."
        )
    pair = frozenset((first.id, second.id))
    if pair in ctx.ledger.resolved_pairs:
        return PAIR_RESOLVED_SENTENCE.format(a=first.name, b=second.name)

    sentences = []
    for attacker, target, chance, severity in (
        (first, second, chance1, severity1),
        (second, first, chance2, severity2),
    ):
        hit = combat.roll_hit(ctx.rng, chance, ctx.ledger.prior_hits(attacker.id))
        if hit:
            damage = combat.severity_damage(severity)
            state.apply_hp_delta(campaign, target.id, -damage)
            ctx.ledger.record_hit(attacker.id)
            sentences.append(_hp_sentence(attacker, target, damage))
        else:
            sentences.append(_miss_sentence(attacker, target))
    ctx.ledger.resolved_pairs.add(pair)
    sentences.append(PAIR_RESOLVED_SENTENCE.format(a=first.name, b=second.name))
    intro = (
        f'{first.name} described as "{_display_description(first)}" fights '
        f'{second.name} described as "{_display_description(second)}".'
    )
    return intro + "\n" + " ".join(sentences)


def wound_character_tool(campaign: Campaign, raw_input: str, ctx: NarratorTurnContext) -> str:
    """Inflict unavoidable damage outside of battle, once per character per turn."""
    try:
        data = parse_raw_json(raw_input)
        if "input" not in data or "severity" not in data:
            raise ToolInputError('the input must carry "input" and "severity" fields.')
        severity = _parse_enum(
            DamageSeverity, data["severity"], "severity", exclude=(DamageSeverity.HARMLESS,)
        )
        text = data["input"]
        if not isinstance(text, str):
            raise ToolInputError('"input" must be a string.')
    except ToolInputError as exc:
        return f"The WoundCharacter tool could not run: {exc}"
    target = find_target_in_text(campaign, text)
    if target is None:
        names = ", ".join(c.name for c in campaign.characters)
        return f"No character matching the input could be found. Characters in the game: {names}."
    if target.id in ctx.ledger.wounded_this_turn:
        return (
            f"{target.name} has already been wounded during this turn. "
            "Use this tool only once per character at most."
        )
    if ctx.ledger.in_battle(target.id):
        return (
            f"{target.name} is engaged in battle. Use this tool only if they "
            "are not engaged in battle."
        )
    damage = combat.severity_damage(severity)
    state.apply_hp_delta(campaign, target.id, -damage)
    ctx.ledger.wounded_this_turn.add(target.id)
    return (
        f"{target.name} is wounded and takes {damage} damage. They have "
        f"{target.current_hp} health points out of {target.max_hp} remaining."
    )


def heal_character_tool(campaign: Campaign, raw_input: str, ctx: NarratorTurnContext) -> str:
    """Restore HP through potions, spells, or rest, once per character per turn."""
    try:
        data = parse_raw_json(raw_input)
        if "input" not in data or "magnitude" not in data:
            raise ToolInputError('the input must carry "input" and "magnitude" fields.')
        magnitude = _parse_enum(HealMagnitude, data["magnitude"], "magnitude")
        text = data["input"]
        if not isinstance(text, str):
            raise ToolInputError('"input" must be a string.')
    except ToolInputError as exc:
        return f"The HealCharacter tool could not run: {exc}"
    target = find_target_in_text(campaign, text)
    if target is None:
        names = ", ".join(c.name for c in campaign.characters)
        return f"No character matching the input could be found. Characters in the game: {names}."
    if target.health_state is HealthState.DEAD:
        return f"{target.name} is dead and cannot be healed."
    if target.id in ctx.ledger.healed_this_turn:
        return (
            f"{target.name} has already been healed during this turn. "
            "Use this tool only once per character at most."
        )
    before = target.current_hp
    delta = combat.magnitude_healing(magnitude, target.max_hp, target.current_hp)
    state.apply_hp_delta(campaign, target.id, delta)
    ctx.ledger.healed_this_turn.add(target.id)
    regained = target.current_hp - before
    return (
        f"{target.name} is healed and regains {regained} health points. They have "
        f"{target.current_hp} health points out of {target.max_hp} remaining."
    )


def narrator_registry() -> ToolRegistry:
    return ToolRegistry(
        [
            ToolSpec("Battle", load_prompt("tools/battle.txt"), battle_tool),
            ToolSpec("WoundCharacter", load_prompt("tools/wound_character.txt"), wound_character_tool),
            ToolSpec("HealCharacter", load_prompt("tools/heal_character.txt"), heal_character_tool),
        ]
    )


def llm_match_character(
    backend,
    campaign: Campaign,
    name: str,
    description: str,
    model: str = "gpt-4",
) -> Character | None:
    """Optional LLM-backed matching strategy behind the same contract.

    Builds the character-lookup prompt with the battle matching instruction and
    maps the model's choice back onto the roster by exact name. The
    deterministic cascade in :mod:`solo_gm.matching` is the default; this
    exists for play sessions that prefer the model's judgement.
    """
    roster = json.dumps(
        {
            "characters": [
                {"name": c.name, "description": c.description, "type": c.char_type.value}
                for c in campaign.characters
            ]
        },
        ensure_ascii=False,
    )
    instruction = (
        f"{load_prompt('v2/battle_match_instruction.txt')} Find the character "
        f'corresponding to the following JSON description: {{"name": "{name}", '
        f'"description": "{description}"}}. Existing characters: {roster}.'
    )
    prompt = load_prompt("v2/find_character.txt").replace("{instruction}", instruction)
    reply = backend.complete(
        ChatRequest(messages=[ChatMessage(ChatRole.USER, prompt)], model=model, temperature=0.0)
    )
    try:
        choice = json.loads(reply.strip())
    except json.JSONDecodeError:
        return None
    if not isinstance(choice, dict) or not choice.get("name"):
        return None
    return campaign.find_character(choice["name"])
