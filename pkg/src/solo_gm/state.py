"""Campaign world state: characters, environments, the message log, and persistence.

This module is the single writer of world state for both game-master engines.
Everything that mutates a campaign (HP deltas, upserts, message appends) lives
here so the invariants — HP clamping, exclusive player location, gap-free
message ordering — are enforced in one place.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

SCHEMA_VERSION = 1


class EngineVersion(str, Enum):
    V1 = "V1"
    V2 = "V2"


class CharType(str, Enum):
    HUMANOID = "Humanoid"
    SMALL_MONSTER = "SmallMonster"
    MEDIUM_MONSTER = "MediumMonster"
    LARGE_MONSTER = "LargeMonster"
    BOSS = "Boss"


class HealthState(str, Enum):
    DEAD = "Dead"
    UNCONSCIOUS = "Unconscious"
    HEAVILY_WOUNDED = "HeavilyWounded"
    LIGHTLY_WOUNDED = "LightlyWounded"
    HEALTHY = "Healthy"


class Role(str, Enum):
    PLAYER = "Player"
    GAME_MASTER = "GameMaster"
    SYSTEM = "System"


class ActionKind(str, Enum):
    DO = "Do"
    SAY = "Say"
    ATTACK = "Attack"
    GAME_START = "GameStart"
    NONE = "None"


MAX_HP_BY_TYPE = {
    CharType.HUMANOID: 40,
    CharType.SMALL_MONSTER: 20,
    CharType.MEDIUM_MONSTER: 40,
    CharType.LARGE_MONSTER: 60,
    CharType.BOSS: 100,
}

# HP fraction that each archivist-settable health state snaps to.
STATE_MIDPOINT_FRACTION = {
    HealthState.HEALTHY: 0.875,
    HealthState.LIGHTLY_WOUNDED: 0.575,
    HealthState.HEAVILY_WOUNDED: 0.20,
    HealthState.UNCONSCIOUS: 0.0,
    HealthState.DEAD: 0.0,
}

# Pre-generated story prompts, offered when the player leaves the scenario blank.
STOCK_SCENARIOS = {
    "fantasy": [
        "Bandits have kidnapped a child from a nearby village.",
        "An ancient seal beneath the royal crypt has begun to crack.",
        "A dragon has been sighted circling the mountain monastery.",
    ],
    "mystery": [
        "A locked-room murder has shaken the manor on the moor.",
        "Ships keep vanishing in the fog outside the harbor town.",
    ],
    "post-apocalyptic": [
        "A caravan of survivors begs for an escort across the wastes.",
        "The water purifier of the last settlement has been stolen.",
    ],
}
DEFAULT_SCENARIOS = [
    "A stranger arrives at nightfall carrying a sealed letter addressed to you.",
]


class StateError(Exception):
    """Invalid operation against campaign state."""


class StorageError(Exception):
    """Campaign persistence failure (missing, corrupt, or duplicate files)."""


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def fold_name(name: str) -> str:
    """Identity key for characters and environments: case-folded, whitespace-collapsed."""
    return " ".join(name.split()).casefold()


def health_state_for(current_hp: int, max_hp: int, is_player: bool) -> HealthState:
    """Derive the health state from the HP fraction.

    Players never die outright: at zero HP they fall unconscious instead.
    """
    if current_hp <= 0:
        return HealthState.UNCONSCIOUS if is_player else HealthState.DEAD
    fraction = current_hp / max_hp
    if fraction <= 0.40:
        return HealthState.HEAVILY_WOUNDED
    if fraction <= 0.75:
        return HealthState.LIGHTLY_WOUNDED
    return HealthState.HEALTHY


def hp_for_state(state: HealthState, max_hp: int) -> int:
    """Band-midpoint HP used when a tool supplies a state instead of a number."""
    return round(STATE_MIDPOINT_FRACTION[state] * max_hp)


@dataclass
class Character:
    id: str
    name: str
    description: str
    char_type: CharType
    max_hp: int
    current_hp: int
    health_state: HealthState
    is_player: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "charType": self.char_type.value,
            "maxHp": self.max_hp,
            "currentHp": self.current_hp,
            "healthState": self.health_state.value,
            "isPlayer": self.is_player,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Character:
        return cls(
            id=data["id"],
            name=data["name"],
            description=data["description"],
            char_type=CharType(data["charType"]),
            max_hp=data["maxHp"],
            current_hp=data["currentHp"],
            health_state=HealthState(data["healthState"]),
            is_player=data["isPlayer"],
        )


@dataclass
class Environment:
    id: str
    name: str
    description: str
    is_player_here: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "isPlayerHere": self.is_player_here,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Environment:
        return cls(
            id=data["id"],
            name=data["name"],
            description=data["description"],
            is_player_here=data["isPlayerHere"],
        )


@dataclass
class Message:
    seq: int
    role: Role
    action_kind: ActionKind
    text: str
    timestamp: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "role": self.role.value,
            "actionKind": self.action_kind.value,
            "text": self.text,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Message:
        return cls(
            seq=data["seq"],
            role=Role(data["role"]),
            action_kind=ActionKind(data["actionKind"]),
            text=data["text"],
            timestamp=data["timestamp"],
        )


@dataclass
class Campaign:
    id: str
    setting: str
    start_scenario: str
    engine: EngineVersion
    player_character_id: str
    characters: list[Character] = field(default_factory=list)
    environments: list[Environment] = field(default_factory=list)
    messages: list[Message] = field(default_factory=list)
    summary: str = ""
    rng_seed: int = 0
    created_at: str = ""
    updated_at: str = ""
    current_opponent_id: str | None = None
    summarized_through_seq: int = 0
    entity_counter: int = 0

    @property
    def player_character(self) -> Character:
        return self.character_by_id(self.player_character_id)

    def character_by_id(self, character_id: str) -> Character:
        for character in self.characters:
            if character.id == character_id:
                return character
        raise StateError(f"unknown character id {character_id!r}")

    def find_character(self, name: str) -> Character | None:
        folded = fold_name(name)
        for character in self.characters:
            if fold_name(character.name) == folded:
                return character
        return None

    def find_environment(self, name: str) -> Environment | None:
        folded = fold_name(name)
        for environment in self.environments:
            if fold_name(environment.name) == folded:
                return environment
        return None

    def next_entity_id(self, prefix: str) -> str:
        self.entity_counter += 1
        return f"{prefix}{self.entity_counter}"

    def next_seq(self) -> int:
        return self.messages[-1].seq + 1 if self.messages else 1

    def to_dict(self) -> dict:
        return {
            "schemaVersion": SCHEMA_VERSION,
            "id": self.id,
            "setting": self.setting,
            "startScenario": self.start_scenario,
            "engine": self.engine.value,
            "playerCharacterId": self.player_character_id,
            "characters": [c.to_dict() for c in self.characters],
            "environments": [e.to_dict() for e in self.environments],
            "messages": [m.to_dict() for m in self.messages],
            "summary": self.summary,
            "rngSeed": self.rng_seed,
            "createdAt": self.created_at,
            "updatedAt": self.updated_at,
            "currentOpponentId": self.current_opponent_id,
            "summarizedThroughSeq": self.summarized_through_seq,
            "entityCounter": self.entity_counter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Campaign:
        version = data.get("schemaVersion")
        if version != SCHEMA_VERSION:
            raise StorageError(f"unsupported schemaVersion {version!r}")
        return cls(
            id=data["id"],
            setting=data["setting"],
            start_scenario=data["startScenario"],
            engine=EngineVersion(data["engine"]),
            player_character_id=data["playerCharacterId"],
            characters=[Character.from_dict(c) for c in data["characters"]],
            environments=[Environment.from_dict(e) for e in data["environments"]],
            messages=[Message.from_dict(m) for m in data["messages"]],
            summary=data["summary"],
            rng_seed=data["rngSeed"],
            created_at=data["createdAt"],
            updated_at=data["updatedAt"],
            current_opponent_id=data.get("currentOpponentId"),
            summarized_through_seq=data.get("summarizedThroughSeq", 0),
            entity_counter=data.get("entityCounter", 0),
        )

    def structural_content(self) -> dict:
        """Timestamp- and id-free view of the campaign, for equality across runs.

        Names are the entity identity, so the comparison keys off names instead
        of allocated ids, and drops wall-clock fields that legitimately differ
        between an interrupted and an uninterrupted run.
        """
        return {
            "setting": self.setting,
            "startScenario": self.start_scenario,
            "engine": self.engine.value,
            "summary": self.summary,
            "rngSeed": self.rng_seed,
            "playerName": self.player_character.name,
            "characters": sorted(
                (
                    c.name,
                    c.description,
                    c.char_type.value,
                    c.max_hp,
                    c.current_hp,
                    c.health_state.value,
                    c.is_player,
                )
                for c in self.characters
            ),
            "environments": sorted(
                (e.name, e.description, e.is_player_here) for e in self.environments
            ),
            "messages": [
                (m.seq, m.role.value, m.action_kind.value, m.text) for m in self.messages
            ],
        }


def pick_stock_scenario(setting: str, rng_seed: int) -> str:
    options = STOCK_SCENARIOS.get(setting.strip().casefold(), DEFAULT_SCENARIOS)
    return options[rng_seed % len(options)]


def create_campaign(
    setting: str,
    start_scenario: str,
    player_name: str,
    player_description: str,
    engine: EngineVersion,
    rng_seed: int,
    campaign_id: str | None = None,
    now: str | None = None,
) -> Campaign:
    """Create a campaign with its player character at full health.

    An empty start scenario selects one of the pre-generated story prompts
    for the setting, deterministically from the seed.
    """
    if not player_name.strip():
        raise StateError("player name must be non-empty")
    if not start_scenario.strip():
        start_scenario = pick_stock_scenario(setting, rng_seed)
    timestamp = now if now is not None else utc_now_iso()
    campaign = Campaign(
        id=campaign_id or uuid.uuid4().hex,
        setting=setting,
        start_scenario=start_scenario,
        engine=engine,
        player_character_id="",
        rng_seed=rng_seed,
        created_at=timestamp,
        updated_at=timestamp,
    )
    max_hp = MAX_HP_BY_TYPE[CharType.HUMANOID]
    player = Character(
        id=campaign.next_entity_id("c"),
        name=player_name,
        description=player_description,
        char_type=CharType.HUMANOID,
        max_hp=max_hp,
        current_hp=max_hp,
        health_state=HealthState.HEALTHY,
        is_player=True,
    )
    campaign.characters.append(player)
    campaign.player_character_id = player.id
    return campaign


def upsert_character(
    campaign: Campaign,
    name: str,
    description: str,
    char_type: CharType,
    health_state: HealthState | None = None,
    is_player: bool | None = None,
) -> Character:
    """Create or update a character, keyed by folded name.

    New characters start at their type's max HP, then snap to the band midpoint
    of the requested state. On update, HP is re-derived only when the state or
    type actually changes; a state of None leaves HP untouched.
    """
    if not name.strip():
        raise StateError("character name must be non-empty")
    existing = campaign.find_character(name)
    if existing is not None:
        if is_player is not None and is_player != existing.is_player:
            raise StateError("cannot change the isPlayer flag of an existing character")
        type_changed = char_type != existing.char_type
        state_changed = health_state is not None and health_state != existing.health_state
        existing.description = description
        if type_changed:
            existing.char_type = char_type
            existing.max_hp = MAX_HP_BY_TYPE[char_type]
        if state_changed or (type_changed and health_state is not None):
            existing.current_hp = hp_for_state(health_state, existing.max_hp)
            existing.health_state = health_state
        elif type_changed:
            existing.current_hp = min(existing.current_hp, existing.max_hp)
            existing.health_state = health_state_for(
                existing.current_hp, existing.max_hp, existing.is_player
            )
        return existing
    if is_player:
        raise StateError("campaigns have exactly one player character")
    max_hp = MAX_HP_BY_TYPE[char_type]
    current_hp = max_hp if health_state is None else hp_for_state(health_state, max_hp)
    character = Character(
        id=campaign.next_entity_id("c"),
        name=" ".join(name.split()),
        description=description,
        char_type=char_type,
        max_hp=max_hp,
        current_hp=current_hp,
        health_state=health_state_for(current_hp, max_hp, False)
        if health_state is None
        else health_state,
        is_player=False,
    )
    campaign.characters.append(character)
    return character


def upsert_environment(
    campaign: Campaign, name: str, description: str, is_player_here: bool
) -> Environment:
    """Create or update an environment, keyed by folded name.

    Marking one environment as the player's location clears the flag everywhere
    else, so at most one environment ever holds it.
    """
    if not name.strip():
        raise StateError("environment name must be non-empty")
    environment = campaign.find_environment(name)
    if environment is None:
        environment = Environment(
            id=campaign.next_entity_id("e"),
            name=" ".join(name.split()),
            description=description,
        )
        campaign.environments.append(environment)
    else:
        environment.description = description
    if is_player_here:
        for other in campaign.environments:
            other.is_player_here = False
    environment.is_player_here = is_player_here
    return environment


def apply_hp_delta(campaign: Campaign, character_id: str, delta: int) -> Character:
    """The single choke point for HP mutation: clamp, then re-derive the state."""
    character = campaign.character_by_id(character_id)
    character.current_hp = max(0, min(character.max_hp, character.current_hp + delta))
    character.health_state = health_state_for(
        character.current_hp, character.max_hp, character.is_player
    )
    return character


def append_message(
    campaign: Campaign,
    role: Role,
    action_kind: ActionKind,
    text: str,
    timestamp: str | None = None,
) -> Message:
    if role is Role.PLAYER and action_kind not in (
        ActionKind.DO,
        ActionKind.SAY,
        ActionKind.ATTACK,
    ):
        raise StateError(f"player messages cannot carry action kind {action_kind.value}")
    if role is Role.GAME_MASTER and action_kind is not ActionKind.NONE:
        raise StateError("game master messages carry no action kind")
    message = Message(
        seq=campaign.next_seq(),
        role=role,
        action_kind=action_kind,
        text=text,
        timestamp=timestamp if timestamp is not None else utc_now_iso(),
    )
    campaign.messages.append(message)
    return message


class CampaignStore:
    """One JSON document per campaign under a data directory.

    Writes are atomic (write to a temp file, then rename) so a crashed save
    never leaves a half-written campaign behind.
    """

    def __init__(self, data_dir: str | os.PathLike):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, campaign_id: str) -> Path:
        return self.data_dir / f"{campaign_id}.json"

    def trace_path_for(self, campaign_id: str) -> Path:
        return self.data_dir / f"{campaign_id}.trace.json"

    def create(self, campaign: Campaign) -> None:
        if self.path_for(campaign.id).exists():
            raise StorageError(f"campaign {campaign.id!r} already exists")
        self.save(campaign)

    def save(self, campaign: Campaign) -> None:
        self._write_json(self.path_for(campaign.id), campaign.to_dict())

    def load(self, campaign_id: str) -> Campaign:
        path = self.path_for(campaign_id)
        if not path.exists():
            raise StorageError(f"no saved campaign {campaign_id!r} in {self.data_dir}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StorageError(
                f"corrupt campaign file {path}: line {exc.lineno}: {exc.msg}"
            ) from exc
        try:
            return Campaign.from_dict(data)
        except (KeyError, ValueError) as exc:
            raise StorageError(f"invalid campaign file {path}: {exc}") from exc

    def delete(self, campaign_id: str) -> None:
        path = self.path_for(campaign_id)
        if not path.exists():
            raise StorageError(f"no saved campaign {campaign_id!r} in {self.data_dir}")
        path.unlink()
        trace = self.trace_path_for(campaign_id)
        if trace.exists():
            trace.unlink()

    def exists(self, campaign_id: str) -> bool:
        return self.path_for(campaign_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(
            p.stem for p in self.data_dir.glob("*.json") if not p.stem.endswith(".trace")
        )

    def save_trace(self, campaign_id: str, turns: list[dict]) -> None:
        self._write_json(
            self.trace_path_for(campaign_id), {"campaignId": campaign_id, "turns": turns}
        )

    def load_trace(self, campaign_id: str) -> dict:
        path = self.trace_path_for(campaign_id)
        if not path.exists():
            return {"campaignId": campaign_id, "turns": []}
        return json.loads(path.read_text(encoding="utf-8"))

    def _write_json(self, path: Path, payload: dict) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
        os.replace(tmp, path)
