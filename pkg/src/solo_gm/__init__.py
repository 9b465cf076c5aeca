"""Solo tabletop-RPG game master engine.

Two interchangeable game-master pipelines over one persistent campaign world:
a static prompt pipeline (v1) and a two-agent ReAct pipeline (v2), playable
over HTTP or in the terminal and fully testable offline through a scripted
chat-completion backend.
"""

__version__ = "0.1.0"
