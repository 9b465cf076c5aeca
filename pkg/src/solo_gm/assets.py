"""Access to the packaged prompt text assets."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_prompt(relative_path: str) -> str:
    """Read a prompt asset such as ``v2/narrator_react.txt`` verbatim."""
    root = resources.files("solo_gm").joinpath("prompts")
    return root.joinpath(relative_path).read_text(encoding="utf-8")
