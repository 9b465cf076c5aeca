"""Seeded, categorical combat resolution shared by both engines.

Hit chances and effect sizes are categorical specifiers rather than dice
notation; all randomness flows through :class:`GameRng` so a campaign seed
replays bit-for-bit.
"""

from __future__ import annotations

import hashlib
import random
from enum import Enum


class HitChance(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    IMPOSSIBLE = "impossible"


class DamageSeverity(str, Enum):
    HARMLESS = "harmless"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    EXTRAORDINARY = "extraordinary"


class HealMagnitude(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    EXTRAORDINARY = "extraordinary"


BASE_HIT_PROBABILITY = {
    HitChance.HIGH: 0.90,
    HitChance.MEDIUM: 0.65,
    HitChance.LOW: 0.30,
    HitChance.IMPOSSIBLE: 0.0,
}

HIT_PENALTY_PER_PRIOR_HIT = 0.15
HIT_PROBABILITY_FLOOR = 0.05

DAMAGE_BY_SEVERITY = {
    DamageSeverity.HARMLESS: 0,
    DamageSeverity.LOW: 4,
    DamageSeverity.MEDIUM: 8,
    DamageSeverity.HIGH: 12,
    DamageSeverity.EXTRAORDINARY: 20,
}

HEALING_BY_MAGNITUDE = {
    HealMagnitude.LOW: 4,
    HealMagnitude.MEDIUM: 8,
    HealMagnitude.HIGH: 12,
}


class GameRng:
    """Deterministic uniform stream, splittable into per-turn child streams.

    Identical seed plus identical call sequence yields identical outputs.
    Children are derived by hashing the parent seed with a label, so turn
    streams are independent of how many draws earlier turns consumed.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._random = random.Random(seed)

    def uniform(self) -> float:
        """Next float in [0, 1)."""
        return self._random.random()

    def randint(self, low: int, high: int) -> int:
        return self._random.randint(low, high)

    def split(self, label: str) -> "GameRng":
        digest = hashlib.sha256(f"{self.seed}:{label}".encode("utf-8")).digest()
        return GameRng(int.from_bytes(digest[:8], "big"))


class ForcedRng:
    """Test double replaying a fixed queue of uniform draws."""

    def __init__(self, values: list[float]):
        self._values = list(values)

    def uniform(self) -> float:
        if not self._values:
            raise RuntimeError("forced rng exhausted")
        return self._values.pop(0)

    def split(self, label: str) -> "ForcedRng":
        return self


def hit_probability(chance: HitChance, prior_hits: int) -> float:
    """Hit probability after the accumulating per-hit penalty.

    Impossible is exactly zero; everything else is floored so repeat attackers
    are never guaranteed to miss.
    """
    if chance is HitChance.IMPOSSIBLE:
        return 0.0
    base = BASE_HIT_PROBABILITY[chance]
    return max(base - HIT_PENALTY_PER_PRIOR_HIT * prior_hits, HIT_PROBABILITY_FLOOR)


def roll_hit(rng, chance: HitChance, prior_hits: int = 0) -> bool:
    """Roll one attack. Always consumes exactly one draw, keeping replays aligned."""
    return rng.uniform() < hit_probability(chance, prior_hits)


def severity_damage(severity: DamageSeverity) -> int:
    return DAMAGE_BY_SEVERITY[severity]


def magnitude_healing(magnitude: HealMagnitude, max_hp: int, current_hp: int) -> int:
    """HP restored by a heal; extraordinary restores to full."""
    if max_hp < 1:
        raise ValueError("max_hp must be at least 1")
    if magnitude is HealMagnitude.EXTRAORDINARY:
        return max_hp - current_hp
    return HEALING_BY_MAGNITUDE[magnitude]
