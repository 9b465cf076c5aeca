"""The two-agent game master: a Narrator loop, then an Archivist loop.

Each turn the Narrator resolves the player's action into a narrative (calling
Battle / WoundCharacter / HealCharacter as needed), the exchange is committed
to the message log, and the Archivist projects the new narrative into world
state (UpdateCharacter / UpdateEnvironment). An Archivist failure never takes
the narrative down with it; the gap is logged and visible in the trace.

Memory stays bounded: the model sees the rolling summary plus a capped window
of verbatim recent history, and old history is folded into the summary by a
summarization request once the log outgrows the trigger.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

from . import state
from .archivist import ArchivistTurnContext, archivist_registry
from .assets import load_prompt
from .llm import BackendError, ChatMessage, ChatRequest, ChatRole
from .narrator import NarratorTurnContext, TurnCombatLedger, narrator_registry
from .react import (
    MAX_STEPS_DEFAULT,
    PromptTemplate,
    ReactLoopError,
    ReactTrajectory,
    RequestOptions,
    Termination,
    render_tool_catalog,
    run_loop,
)
from .state import ActionKind, Campaign, EngineVersion, Role

logger = logging.getLogger(__name__)

SUMMARIZE_INSTRUCTION = (
    "Summarize the following role-playing game events, preserving named "
    "characters, locations, goals, and unresolved threads:"
)

ACTION_PROMPTS = {
    ActionKind.GAME_START: "v2/game_start.txt",
    ActionKind.DO: "v2/do_action.txt",
    ActionKind.SAY: "v2/say_action.txt",
}


@dataclass
class MemoryPolicy:
    """Caps on what the agents get to see of the past."""

    raw_window: int = 6000
    summary_trigger: int = 8000
    summary_cap: int = 2000


@dataclass
class TurnRecord:
    player_message: str
    action_kind: ActionKind
    narrative: str
    narrator_trajectory: ReactTrajectory
    archivist_trajectory: ReactTrajectory | None
    state_delta: dict = field(default_factory=dict)
    context_chars: int = 0
    archivist_failed: bool = False
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "playerMessage": self.player_message,
            "actionKind": self.action_kind.value,
            "narrative": self.narrative,
            "narratorTrajectory": self.narrator_trajectory.to_dict(),
            "archivistTrajectory": self.archivist_trajectory.to_dict()
            if self.archivist_trajectory
            else None,
            "stateDelta": self.state_delta,
            "contextChars": self.context_chars,
            "archivistFailed": self.archivist_failed,
            "timings": self.timings,
        }


class V2TurnError(Exception):
    def __init__(self, message: str, trajectory: ReactTrajectory | None = None):
        super().__init__(message)
        self.trajectory = trajectory


def message_line(message: state.Message) -> str:
    if message.role is Role.GAME_MASTER:
        return f"Game Master: {message.text}"
    if message.role is Role.SYSTEM:
        return f"({message.action_kind.value}) {message.text}"
    return f"Player ({message.action_kind.value}): {message.text}"


def render_memory(campaign: Campaign, policy: MemoryPolicy) -> str:
    """The {summary} binding: folded summary plus the verbatim recent window.

    The window keeps the tail of the unsummarized history, capped at
    ``raw_window`` characters, so the rendered context stays bounded no matter
    how long the campaign runs.
    """
    recent = [m for m in campaign.messages if m.seq > campaign.summarized_through_seq]
    window = "\n".join(message_line(m) for m in recent)
    if len(window) > policy.raw_window:
        window = window[-policy.raw_window :]
    parts = [p for p in (campaign.summary, window) if p]
    return "\n".join(parts)


def roster_json(campaign: Campaign) -> tuple[str, str]:
    characters = json.dumps(
        [
            {"name": c.name, "description": c.description, "type": c.char_type.value}
            for c in campaign.characters
        ],
        ensure_ascii=False,
    )
    environments = json.dumps(
        [
            {"name": e.name, "description": e.description, "isPlayerHere": e.is_player_here}
            for e in campaign.environments
        ],
        ensure_ascii=False,
    )
    return characters, environments


def refresh_summary(
    campaign: Campaign,
    backend,
    policy: MemoryPolicy | None = None,
    options: RequestOptions | None = None,
) -> str:
    """Fold the oldest half of the raw window into the summary when it overflows.

    A backend failure leaves the summary untouched; the next turn retries.
    """
    policy = policy or MemoryPolicy()
    options = options or RequestOptions()
    unsummarized = [m for m in campaign.messages if m.seq > campaign.summarized_through_seq]
    total_chars = sum(len(m.text) for m in unsummarized)
    if total_chars <= policy.summary_trigger or not unsummarized:
        return campaign.summary
    folded: list[state.Message] = []
    folded_chars = 0
    for message in unsummarized:
        folded.append(message)
        folded_chars += len(message.text)
        if folded_chars >= total_chars / 2:
            break
    block = "\n".join(message_line(m) for m in folded)
    content = SUMMARIZE_INSTRUCTION + "\n\n"
    if campaign.summary:
        content += f"Previous summary: {campaign.summary}\n\n"
    content += block
    request = ChatRequest(
        messages=[ChatMessage(ChatRole.USER, content)],
        model=options.model,
        temperature=options.temperature,
        max_tokens=options.max_tokens,
    )
    try:
        summary = backend.complete(request).strip()
    except BackendError as exc:
        logger.warning("summary refresh failed, keeping previous summary: %s", exc)
        return campaign.summary
    campaign.summary = summary[: policy.summary_cap]
    campaign.summarized_through_seq = folded[-1].seq
    return campaign.summary


def v2_turn(
    campaign: Campaign,
    action_kind: ActionKind,
    player_text: str,
    backend,
    rng,
    policy: MemoryPolicy | None = None,
    options: RequestOptions | None = None,
    max_steps: int = MAX_STEPS_DEFAULT,
    now: str | None = None,
    clock=time.time,
) -> TurnRecord:
    """Run one full v2 turn: Narrator, commit messages, Archivist, summary."""
    if campaign.engine is not EngineVersion.V2:
        raise V2TurnError("v2_turn requires a V2 campaign")
    if action_kind not in ACTION_PROMPTS:
        raise V2TurnError(f"v2 does not handle action kind {action_kind.value}")
    policy = policy or MemoryPolicy()

    narrator_prompt = PromptTemplate(load_prompt("v2/narrator_react.txt"))
    registry = narrator_registry()
    tools_text, tool_names = render_tool_catalog(registry)
    memory = render_memory(campaign, policy)
    bindings = {
        "tools": tools_text,
        "tool_names": tool_names,
        "summary": memory,
        "action": load_prompt(ACTION_PROMPTS[action_kind]),
        "input": player_text,
    }
    ledger = TurnCombatLedger()
    narrator_ctx = NarratorTurnContext(ledger=ledger, rng=rng)
    try:
        narrator_trajectory = run_loop(
            narrator_prompt,
            bindings,
            registry,
            backend,
            campaign,
            narrator_ctx,
            max_steps=max_steps,
            options=options,
            clock=clock,
        )
    except ReactLoopError as exc:
        raise V2TurnError(f"narrator failed: {exc.cause}", exc.trajectory) from exc
    if narrator_trajectory.terminated is not Termination.FINAL_ANSWER:
        raise V2TurnError(
            f"narrator loop ended without a final answer ({narrator_trajectory.terminated.value})",
            narrator_trajectory,
        )
    narrative = narrator_trajectory.final_answer or ""

    player_role = Role.SYSTEM if action_kind is ActionKind.GAME_START else Role.PLAYER
    state.append_message(campaign, player_role, action_kind, player_text, timestamp=now)
    state.append_message(campaign, Role.GAME_MASTER, ActionKind.NONE, narrative, timestamp=now)

    archivist_prompt = PromptTemplate(load_prompt("v2/archivist_react.txt"))
    arch_registry = archivist_registry(campaign)
    arch_tools_text, arch_tool_names = render_tool_catalog(arch_registry)
    characters_json, environments_json = roster_json(campaign)
    arch_bindings = {
        "tools": arch_tools_text,
        "tool_names": arch_tool_names,
        "summary": memory,
        "input": f"Player input: {player_text} Narrator: {narrative}",
        "characters": characters_json,
        "environments": environments_json,
        "player_character": campaign.player_character.name,
    }
    archivist_trajectory: ReactTrajectory | None = None
    archivist_failed = False
    try:
        archivist_trajectory = run_loop(
            archivist_prompt,
            arch_bindings,
            arch_registry,
            backend,
            campaign,
            ArchivistTurnContext(),
            max_steps=max_steps,
            options=options,
            clock=clock,
        )
        if archivist_trajectory.terminated is Termination.ERROR:
            archivist_failed = True
    except ReactLoopError as exc:
        # The story has already been told; a lost archivist pass only costs
        # bookkeeping, which the trace surfaces.
        logger.warning("archivist failed after narrative delivery: %s", exc.cause)
        archivist_trajectory = exc.trajectory
        archivist_failed = True

    refresh_summary(campaign, backend, policy, options)

    timings = {
        "narratorStart": narrator_trajectory.started_at,
        "narratorEnd": narrator_trajectory.ended_at,
    }
    if archivist_trajectory is not None:
        timings["archivistStart"] = archivist_trajectory.started_at
        timings["archivistEnd"] = archivist_trajectory.ended_at
    return TurnRecord(
        player_message=player_text,
        action_kind=action_kind,
        narrative=narrative,
        narrator_trajectory=narrator_trajectory,
        archivist_trajectory=archivist_trajectory,
        context_chars=len(memory),
        archivist_failed=archivist_failed,
        timings=timings,
    )
