"""Deterministic character matching for tool inputs and free-text targets.

Replaces an LLM lookup with a fixed cascade: exact folded name, then partial
name (token subset), then description overlap. Name matches always outrank
description matches, and ties fall to the most recently mentioned character.
"""

from __future__ import annotations

import re

from .state import Campaign, Character, fold_name

_TOKEN_RE = re.compile(r"[a-z0-9']+")
_STOPWORDS = {"the", "a", "an", "of", "and", "to", "in", "is", "at"}
_FIRST_PERSON_RE = re.compile(r"\b(i|me|my|myself|mine)\b", re.IGNORECASE)

DESCRIPTION_JACCARD_THRESHOLD = 0.5


def _tokens(text: str) -> set[str]:
    return {t for t in _TOKEN_RE.findall(text.casefold()) if t not in _STOPWORDS}


def _last_mention_seq(campaign: Campaign, character: Character) -> int:
    """Highest message seq whose text mentions the character's name."""
    needle = fold_name(character.name)
    for message in reversed(campaign.messages):
        if needle in fold_name(message.text):
            return message.seq
    return -1


def _pick(campaign: Campaign, candidates: list[Character]) -> Character:
    if len(candidates) == 1:
        return candidates[0]
    order = {id(c): i for i, c in enumerate(campaign.characters)}
    return min(candidates, key=lambda c: (-_last_mention_seq(campaign, c), order[id(c)]))


def match_character(campaign: Campaign, name: str, description: str) -> Character | None:
    """Resolve a (name, description) pair to a roster character, or None.

    The name is authoritative: a partial name match wins even when the
    description disagrees. Descriptions only break in when no name matches.
    """
    folded = fold_name(name)
    if folded:
        exact = [c for c in campaign.characters if fold_name(c.name) == folded]
        if exact:
            return _pick(campaign, exact)
    name_tokens = _tokens(name)
    if name_tokens:
        partial = [
            c
            for c in campaign.characters
            if (lambda rt: bool(rt) and (name_tokens <= rt or rt <= name_tokens))(
                _tokens(c.name)
            )
        ]
        if partial:
            return _pick(campaign, partial)
    description_tokens = _tokens(description)
    if description_tokens:
        overlapping = []
        for character in campaign.characters:
            roster_tokens = _tokens(character.description)
            union = description_tokens | roster_tokens
            if not union:
                continue
            jaccard = len(description_tokens & roster_tokens) / len(union)
            if jaccard >= DESCRIPTION_JACCARD_THRESHOLD:
                overlapping.append(character)
        if overlapping:
            return _pick(campaign, overlapping)
    return None


def find_target_in_text(campaign: Campaign, text: str) -> Character | None:
    """Resolve the character a free-text player action refers to.

    Earliest-mentioned roster name wins; failing that, first-person pronouns
    resolve to the player character.
    """
    folded_text = text.casefold()
    best: tuple[int, int] | None = None
    best_character: Character | None = None
    for index, character in enumerate(campaign.characters):
        position = _earliest_name_position(folded_text, character.name)
        if position is None:
            continue
        key = (position, index)
        if best is None or key < best:
            best = key
            best_character = character
    if best_character is not None:
        return best_character
    if _FIRST_PERSON_RE.search(text):
        return campaign.player_character
    return None


def _earliest_name_position(folded_text: str, name: str) -> int | None:
    positions = []
    for token in _tokens(name):
        if len(token) < 3:
            continue
        match = re.search(rf"\b{re.escape(token)}\b", folded_text)
        if match:
            positions.append(match.start())
    return min(positions) if positions else None
