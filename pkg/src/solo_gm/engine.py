"""Campaign lifecycle and turn orchestration shared by the HTTP service and CLI.

The engine owns the single-writer rule: turns against one campaign are
serialized by a per-campaign lock and rejected with a busy signal while one is
in flight, while distinct campaigns proceed concurrently. Each turn loads the
campaign from the store, runs the configured game-master pipeline, and only
persists on success, so a failed turn leaves no partial state behind.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field

from . import state, v1, v2
from .combat import GameRng
from .react import RequestOptions
from .state import ActionKind, Campaign, CampaignStore, EngineVersion, Role, fold_name


class BusyError(Exception):
    """A turn is already in flight for this campaign."""


class RealClock:
    def time(self) -> float:
        return time.time()

    def now(self) -> str:
        return state.utc_now_iso()


class LogicalClock:
    """Deterministic clock for replay: monotone counter instead of wall time."""

    def __init__(self):
        self._counter = 0

    def time(self) -> float:
        self._counter += 1
        return float(self._counter)

    def now(self) -> str:
        self._counter += 1
        return f"1970-01-01T00:00:00+00:00#{self._counter:06d}"


API_ACTION_KINDS = {
    "do": ActionKind.DO,
    "say": ActionKind.SAY,
    "attack": ActionKind.ATTACK,
}


def game_start_text(campaign: Campaign) -> str:
    player = campaign.player_character
    description = f": {player.description}" if player.description else ""
    return (
        f"Setting: {campaign.setting}. Scenario: {campaign.start_scenario} "
        f"The player character is {player.name}{description}"
    )


def transcript_hash(campaign: Campaign) -> str:
    digest = hashlib.sha256()
    for message in campaign.messages:
        digest.update(
            f"{message.role.value}|{message.action_kind.value}|{message.text}\n".encode("utf-8")
        )
    return digest.hexdigest()


def _snapshot(campaign: Campaign) -> dict:
    return {
        "characters": {
            fold_name(c.name): (c.name, c.description, c.char_type.value, c.current_hp, c.max_hp)
            for c in campaign.characters
        },
        "environments": {
            fold_name(e.name): (e.name, e.description, e.is_player_here)
            for e in campaign.environments
        },
    }


def _state_delta(before: dict, after: dict) -> dict:
    delta: dict = {
        "charactersCreated": [],
        "charactersUpdated": [],
        "environmentsCreated": [],
        "environmentsUpdated": [],
        "hpChanges": [],
    }
    for key, (name, description, char_type, hp, max_hp) in after["characters"].items():
        old = before["characters"].get(key)
        if old is None:
            delta["charactersCreated"].append(name)
            if hp != max_hp:  # created and damaged within the same turn
                delta["hpChanges"].append(
                    {"name": name, "delta": hp - max_hp, "currentHp": hp, "maxHp": max_hp}
                )
            continue
        if (old[1], old[2]) != (description, char_type):
            delta["charactersUpdated"].append(name)
        if old[3] != hp:
            delta["hpChanges"].append(
                {"name": name, "delta": hp - old[3], "currentHp": hp, "maxHp": max_hp}
            )
    for key, (name, description, is_here) in after["environments"].items():
        old = before["environments"].get(key)
        if old is None:
            delta["environmentsCreated"].append(name)
        elif (old[1], old[2]) != (description, is_here):
            delta["environmentsUpdated"].append(name)
    return delta


@dataclass
class TurnOutcome:
    narrative: str
    state_delta: dict
    record: dict
    campaign: Campaign


@dataclass
class GmEngine:
    store: CampaignStore
    backend: object
    options: RequestOptions = field(default_factory=RequestOptions)
    policy: v2.MemoryPolicy = field(default_factory=v2.MemoryPolicy)
    clock: object = field(default_factory=RealClock)
    max_steps: int = 8

    def __post_init__(self):
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, campaign_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(campaign_id, threading.Lock())

    def create_campaign(
        self,
        setting: str,
        start_scenario: str,
        player_name: str,
        player_description: str,
        engine: EngineVersion,
        rng_seed: int,
        campaign_id: str | None = None,
    ) -> tuple[Campaign, str]:
        """Create, persist, and play the opening turn; returns the introduction."""
        campaign = state.create_campaign(
            setting,
            start_scenario,
            player_name,
            player_description,
            engine,
            rng_seed,
            campaign_id=campaign_id,
            now=self.clock.now(),
        )
        self.store.create(campaign)
        outcome = self._run_turn(campaign.id, ActionKind.GAME_START, game_start_text(campaign))
        return outcome.campaign, outcome.narrative

    def take_turn(self, campaign_id: str, action_kind: str, text: str) -> TurnOutcome:
        kind = API_ACTION_KINDS.get(action_kind.strip().casefold())
        if kind is None:
            raise state.StateError(f"unknown action kind {action_kind!r}")
        return self._run_turn(campaign_id, kind, text)

    def _run_turn(self, campaign_id: str, kind: ActionKind, text: str) -> TurnOutcome:
        lock = self._lock_for(campaign_id)
        if not lock.acquire(blocking=False):
            raise BusyError(f"a turn is already in flight for campaign {campaign_id}")
        try:
            campaign = self.store.load(campaign_id)
            rng = GameRng(campaign.rng_seed).split(f"turn:{len(campaign.messages)}")
            before = _snapshot(campaign)
            turn_index = len(campaign.messages)
            if campaign.engine is EngineVersion.V1:
                result = v1.v1_turn(
                    campaign,
                    kind,
                    text,
                    self.backend,
                    rng,
                    options=self.options,
                    now=self.clock.now(),
                )
                narrative = result.narrative
                record = {
                    "turn": turn_index,
                    "engine": "V1",
                    "playerText": text,
                    "narrative": narrative,
                    **result.record,
                }
            else:
                # v2 folds attacks into Do: the Battle tool owns combat.
                v2_kind = ActionKind.DO if kind is ActionKind.ATTACK else kind
                turn_record = v2.v2_turn(
                    campaign,
                    v2_kind,
                    text,
                    self.backend,
                    rng,
                    policy=self.policy,
                    options=self.options,
                    max_steps=self.max_steps,
                    now=self.clock.now(),
                    clock=self.clock.time,
                )
                narrative = turn_record.narrative
                record = {"turn": turn_index, "engine": "V2", **turn_record.to_dict()}
            delta = _state_delta(before, _snapshot(campaign))
            record["stateDelta"] = delta
            campaign.updated_at = self.clock.now()
            self.store.save(campaign)
            trace = self.store.load_trace(campaign_id)
            trace["turns"].append(record)
            self.store.save_trace(campaign_id, trace["turns"])
            return TurnOutcome(
                narrative=narrative, state_delta=delta, record=record, campaign=campaign
            )
        finally:
            lock.release()

    def get_campaign(self, campaign_id: str) -> Campaign:
        return self.store.load(campaign_id)

    def get_trace(self, campaign_id: str) -> dict:
        return self.store.load_trace(campaign_id)

    def is_busy(self, campaign_id: str) -> bool:
        return self._lock_for(campaign_id).locked()


def replay_campaign(
    original: Campaign, backend, store: CampaignStore, options: RequestOptions | None = None
) -> tuple[Campaign, list[str]]:
    """Re-run a campaign's player inputs against a script and diff the transcript.

    Returns the replayed campaign and a list of divergence descriptions; an
    empty list means the replay reproduced every game-master message verbatim.
    """
    engine = GmEngine(
        store=store,
        backend=backend,
        options=options or RequestOptions(),
        clock=LogicalClock(),
    )
    campaign, _ = engine.create_campaign(
        original.setting,
        original.start_scenario,
        original.player_character.name,
        original.player_character.description,
        original.engine,
        original.rng_seed,
        campaign_id=f"replay-{original.id}",
    )
    for message in original.messages:
        if message.role is Role.PLAYER:
            engine.take_turn(campaign.id, message.action_kind.value.casefold(), message.text)
    replayed = store.load(campaign.id)
    divergences = []
    original_texts = [(m.role.value, m.text) for m in original.messages]
    replayed_texts = [(m.role.value, m.text) for m in replayed.messages]
    if len(original_texts) != len(replayed_texts):
        divergences.append(
            f"message count differs: original {len(original_texts)}, replay {len(replayed_texts)}"
        )
    for index, (original_msg, replayed_msg) in enumerate(zip(original_texts, replayed_texts)):
        if original_msg != replayed_msg:
            divergences.append(
                f"message {index} differs:\n  original: {original_msg}\n  replayed: {replayed_msg}"
            )
    return replayed, divergences
