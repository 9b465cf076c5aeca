"""Archivist agent tools: UpdateCharacter and UpdateEnvironment.

These project narrative text into persistent world state by delegating to the
campaign upserts. Each tool may touch a given entity name only once per
trajectory, and a dead character never comes back to life through an update.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import state
from .assets import load_prompt
from .narrator import ToolInputError, parse_raw_json
from .react import ToolRegistry, ToolSpec
from .state import Campaign, CharType, HealthState, fold_name

DYNAMIC_LIST_TOKEN = "[Dynamically updated list of characters]"

CHAR_CREATED = "A new character {name} has been created with the following description: {description}"
CHAR_UPDATED = "The character {name} has been updated with the following description: {description}"
ENV_CREATED = "A new environment {name} has been created with the following description: {description}"
ENV_UPDATED = "The environment {name} has been updated with the following description: {description}"


@dataclass
class ArchivistTurnContext:
    updated_characters: set[str] = field(default_factory=set)
    updated_environments: set[str] = field(default_factory=set)


def character_type_list(campaign: Campaign) -> str:
    """The dynamic list rendered into the UpdateCharacter description.

    Canonical type tokens first, then the current roster, so the agent sees
    both the valid enum values and who already exists.
    """
    tokens = [t.value for t in CharType] + [c.name for c in campaign.characters]
    return ", ".join(tokens)


def _parse_char_type(token) -> CharType:
    if isinstance(token, str):
        folded = token.strip().casefold()
        for char_type in CharType:
            if char_type.value.casefold() == folded:
                return char_type
    raise ToolInputError(f'"{token}" is not a valid type')


def _parse_health_state(token) -> HealthState:
    if isinstance(token, str):
        folded = token.strip().casefold()
        for health_state in HealthState:
            if health_state.value.casefold() == folded:
                return health_state
    valid = ", ".join(s.value for s in HealthState)
    raise ToolInputError(f'"{token}" is not a valid state. Valid states are: {valid}')


def update_character_tool(campaign: Campaign, raw_input: str, ctx: ArchivistTurnContext) -> str:
    try:
        data = parse_raw_json(raw_input)
        for key in ("name", "description", "type", "state"):
            if key not in data:
                raise ToolInputError(f'missing required field "{key}"')
        name = data["name"]
        description = data["description"]
        if not isinstance(name, str) or not name.strip():
            raise ToolInputError('"name" must be a non-empty string')
        if not isinstance(description, str):
            raise ToolInputError('"description" must be a string')
        try:
            char_type = _parse_char_type(data["type"])
        except ToolInputError:
            raise ToolInputError(
                f'"{data["type"]}" is not a valid type. Valid types are: '
                f"{{{character_type_list(campaign)}}}"
            )
        health_state = _parse_health_state(data["state"])
    except ToolInputError as exc:
        return f"The UpdateCharacter tool could not run: {exc}."
    folded = fold_name(name)
    if folded in ctx.updated_characters:
        return (
            f"{name} has already been updated in this trajectory. "
            "The tool should only be used once per character."
        )
    existing = campaign.find_character(name)
    if (
        existing is not None
        and existing.health_state is HealthState.DEAD
        and health_state is not HealthState.DEAD
    ):
        return f"{existing.name} is dead and cannot be brought back by an update."
    character = state.upsert_character(campaign, name, description, char_type, health_state)
    ctx.updated_characters.add(folded)
    template = CHAR_UPDATED if existing is not None else CHAR_CREATED
    return template.format(name=character.name, description=character.description)


def update_environment_tool(campaign: Campaign, raw_input: str, ctx: ArchivistTurnContext) -> str:
    try:
        data = parse_raw_json(raw_input)
        for key in ("name", "description", "isPlayerHere"):
            if key not in data:
                raise ToolInputError(f'missing required field "{key}"')
        name = data["name"]
        description = data["description"]
        is_player_here = data["isPlayerHere"]
        if not isinstance(name, str) or not name.strip():
            raise ToolInputError('"name" must be a non-empty string')
        if not isinstance(description, str):
            raise ToolInputError('"description" must be a string')
        if not isinstance(is_player_here, bool):
            raise ToolInputError('"isPlayerHere" must be true or false')
    except ToolInputError as exc:
        return f"The UpdateEnvironment tool could not run: {exc}."
    folded = fold_name(name)
    if folded in ctx.updated_environments:
        return (
            f"{name} has already been updated in this trajectory. "
            "The tool should only be used once per environment."
        )
    existing = campaign.find_environment(name)
    environment = state.upsert_environment(campaign, name, description, is_player_here)
    ctx.updated_environments.add(folded)
    template = ENV_UPDATED if existing is not None else ENV_CREATED
    return template.format(name=environment.name, description=environment.description)


def archivist_registry(campaign: Campaign) -> ToolRegistry:
    """Build the Archivist's registry; the character list is rendered now.

    The UpdateCharacter description embeds the current roster, so the registry
    is rebuilt at the start of every trajectory rather than shared.
    """
    character_description = load_prompt("tools/update_character.txt").replace(
        DYNAMIC_LIST_TOKEN, character_type_list(campaign)
    )
    return ToolRegistry(
        [
            ToolSpec("UpdateCharacter", character_description, update_character_tool),
            ToolSpec(
                "UpdateEnvironment",
                load_prompt("tools/update_environment.txt"),
                update_environment_tool,
            ),
        ]
    )
