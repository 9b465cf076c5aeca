"""ReAct trajectory grammar, prompt templates, tool registry, and loop executor.

The Narrator and Archivist agents both run through this module: a prompt
template is rendered with bindings plus the accumulated step history, the
model's reply is parsed against the Thought / Action / Action Input / Final
Answer grammar, tools are executed, and their observations feed the next
render. The serialized history uses the exact same grammar the model must
emit, so the model always sees its prior steps in the format it is asked for.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .llm import ChatMessage, ChatRequest, ChatRole, RequestOptions

MAX_STEPS_DEFAULT = 8
END_MARKER = "[END]"
STOP_SEQUENCES = ["Observation:", END_MARKER]

CORRECTIVE_OBSERVATION = (
    "Your response was malformed. Follow the Thought/Action/Action Input format "
    "or give a Final Answer."
)

_MARKER_RE = re.compile(
    r"^\s*(Thought|Action Input|Action|Final Answer|Observation):", re.MULTILINE
)
# Fallback for replies that run the grammar together on one line.
_INLINE_MARKER_RE = re.compile(r"(Thought|Action Input|Action|Final Answer|Observation):")
_PLACEHOLDER_RE = re.compile(r"\{(\w+)\}")


class ParseError(Exception):
    """Model output fits neither a tool call nor a final answer."""

    def __init__(self, raw_text: str):
        super().__init__(f"unparseable model output: {raw_text[:120]!r}")
        self.raw_text = raw_text


class Termination(str, Enum):
    FINAL_ANSWER = "FinalAnswer"
    STEP_LIMIT = "StepLimit"
    ERROR = "Error"


@dataclass
class ReactStep:
    thought: str
    action: str | None = None
    action_input: str | None = None
    observation: str | None = None

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "action": self.action,
            "actionInput": self.action_input,
            "observation": self.observation,
        }


@dataclass
class ReactTrajectory:
    steps: list[ReactStep] = field(default_factory=list)
    final_answer: str | None = None
    terminated: Termination = Termination.ERROR
    missing_end_marker: bool = False
    parse_failures: list[str] = field(default_factory=list)
    started_at: float = 0.0
    ended_at: float = 0.0

    def to_dict(self) -> dict:
        return {
            "steps": [step.to_dict() for step in self.steps],
            "finalAnswer": self.final_answer,
            "terminated": self.terminated.value,
            "missingEndMarker": self.missing_end_marker,
            "parseFailures": self.parse_failures,
            "startedAt": self.started_at,
            "endedAt": self.ended_at,
        }


@dataclass
class ToolSpec:
    """A named operation an agent may invoke mid-trajectory.

    ``run`` receives the campaign, the raw Action Input text, and the
    turn-scoped context object, and returns the observation text.
    """

    name: str
    description: str
    run: Callable[[object, str, object], str]

    def __post_init__(self):
        if not self.description.strip():
            raise ValueError(f"tool {self.name!r} needs a description")


class ToolRegistry:
    def __init__(self, tools: list[ToolSpec]):
        names = [tool.name for tool in tools]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate tool names in registry: {names}")
        self.tools = list(tools)

    def __iter__(self):
        return iter(self.tools)

    def __len__(self):
        return len(self.tools)

    def get(self, name: str) -> ToolSpec | None:
        for tool in self.tools:
            if tool.name == name:
                return tool
        return None

    @property
    def names(self) -> list[str]:
        return [tool.name for tool in self.tools]


def render_tool_catalog(registry: ToolRegistry) -> tuple[str, str]:
    """Return the {tools} block and the comma-separated {tool_names} list."""
    if len(registry) == 0:
        raise ValueError("cannot render an empty tool registry")
    tools_text = "\n".join(f"{tool.name}: {tool.description}" for tool in registry)
    tool_names = ", ".join(registry.names)
    return tools_text, tool_names


@dataclass
class PromptTemplate:
    """Template text with {placeholder} slots; every slot must bind at render time."""

    text: str

    def placeholders(self) -> set[str]:
        return set(_PLACEHOLDER_RE.findall(self.text))

    def render(self, bindings: dict[str, str]) -> str:
        missing = self.placeholders() - bindings.keys()
        if missing:
            raise ValueError(f"unbound placeholders: {sorted(missing)}")
        return _PLACEHOLDER_RE.sub(lambda m: bindings[m.group(1)], self.text)


@dataclass
class ParsedToolCall:
    thought: str
    action: str
    action_input: str


@dataclass
class ParsedFinal:
    thought: str
    answer: str
    has_end_marker: bool


def _marker_spans(text: str) -> list[tuple[str, int, int]]:
    """(marker name, content start, match start) for each grammar marker line."""
    return [(m.group(1), m.end(), m.start()) for m in _MARKER_RE.finditer(text)]


def _inline_marker_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(1), m.end(), m.start()) for m in _INLINE_MARKER_RE.finditer(text)]


def _segment(text: str, spans: list[tuple[str, int, int]], index: int) -> str:
    start = spans[index][1]
    end = spans[index + 1][2] if index + 1 < len(spans) else len(text)
    return text[start:end].strip()


def parse_model_output(text: str) -> ParsedToolCall | ParsedFinal:
    """Parse one model reply into a tool call or a final answer.

    Tolerates leading/trailing whitespace, strips the [END] terminator, and
    accepts a final answer missing its [END] (flagged for the trajectory).
    The first recognized construct wins when a reply contains both. Markers
    are expected at line starts; when none of the actionable ones appear
    there, the reply is rescanned for an all-on-one-line rendition.
    """
    spans = _marker_spans(text)
    if not any(marker in ("Action", "Final Answer") for marker, _, _ in spans):
        spans = _inline_marker_spans(text)
    thought = ""
    for index, (marker, _, _) in enumerate(spans):
        if marker == "Thought":
            thought = _segment(text, spans, index)
            break
    for index, (marker, _, _) in enumerate(spans):
        if marker == "Final Answer":
            answer = _segment(text, spans, index)
            has_end = END_MARKER in answer
            answer = answer.split(END_MARKER)[0].strip()
            return ParsedFinal(thought=thought, answer=answer, has_end_marker=has_end)
        if marker == "Action":
            action = _segment(text, spans, index)
            action_input = ""
            for later, (later_marker, _, _) in enumerate(spans):
                if later > index and later_marker == "Action Input":
                    action_input = _segment(text, spans, later)
                    break
            return ParsedToolCall(thought=thought, action=action, action_input=action_input)
    raise ParseError(text)


def render_history(steps: list[ReactStep]) -> str:
    """Serialize steps in the same grammar the model emits."""
    blocks = []
    for step in steps:
        lines = [f"Thought: {step.thought}"]
        if step.action is not None:
            lines.append(f"Action: {step.action}")
            lines.append(f"Action Input: {step.action_input or ''}")
        if step.observation is not None:
            lines.append(f"Observation: {step.observation}")
        blocks.append("\n".join(lines))
    return "\n".join(blocks)


def parse_history(text: str) -> list[ReactStep]:
    """Inverse of render_history, used by the round-trip property tests."""
    spans = _marker_spans(text)
    steps: list[ReactStep] = []
    current: ReactStep | None = None
    for index, (marker, _, _) in enumerate(spans):
        segment = _segment(text, spans, index)
        if marker == "Thought":
            current = ReactStep(thought=segment)
            steps.append(current)
        elif current is None:
            continue
        elif marker == "Action":
            current.action = segment
        elif marker == "Action Input":
            current.action_input = segment
        elif marker == "Observation":
            current.observation = segment
    return steps


class ReactLoopError(Exception):
    """Backend failure mid-loop; carries the partial trajectory."""

    def __init__(self, trajectory: ReactTrajectory, cause: Exception):
        super().__init__(f"react loop failed: {cause}")
        self.trajectory = trajectory
        self.cause = cause


def run_loop(
    prompt: PromptTemplate,
    bindings: dict[str, str],
    registry: ToolRegistry,
    backend,
    campaign,
    tool_ctx,
    max_steps: int = MAX_STEPS_DEFAULT,
    options: RequestOptions | None = None,
    clock=time.time,
) -> ReactTrajectory:
    """Drive one agent trajectory to a final answer, step limit, or error.

    Each iteration renders the prompt with the accumulated {history}, asks the
    backend, and parses the reply. Tool calls execute against the campaign and
    append their observation; unknown tools observe an explanatory message and
    still count toward the step budget. A malformed reply gets one corrective
    observation and retry per step before the loop gives up.
    """
    if len(registry) == 0:
        raise ValueError("run_loop needs a non-empty tool registry")
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    options = options or RequestOptions()
    trajectory = ReactTrajectory(started_at=clock())
    retried_this_step = False
    while len(trajectory.steps) < max_steps:
        rendered = prompt.render({**bindings, "history": render_history(trajectory.steps)})
        request = ChatRequest(
            messages=[ChatMessage(ChatRole.USER, rendered)],
            model=options.model,
            temperature=options.temperature,
            stop_sequences=list(STOP_SEQUENCES),
            max_tokens=options.max_tokens,
        )
        try:
            reply = backend.complete(request)
        except Exception as exc:
            trajectory.terminated = Termination.ERROR
            trajectory.ended_at = clock()
            raise ReactLoopError(trajectory, exc) from exc
        try:
            parsed = parse_model_output(reply)
        except ParseError as exc:
            trajectory.parse_failures.append(exc.raw_text)
            if retried_this_step:
                trajectory.terminated = Termination.ERROR
                trajectory.ended_at = clock()
                return trajectory
            retried_this_step = True
            trajectory.steps.append(
                ReactStep(thought="", observation=CORRECTIVE_OBSERVATION)
            )
            continue
        retried_this_step = False
        if isinstance(parsed, ParsedFinal):
            trajectory.final_answer = parsed.answer
            trajectory.missing_end_marker = not parsed.has_end_marker
            trajectory.terminated = Termination.FINAL_ANSWER
            trajectory.ended_at = clock()
            return trajectory
        tool = registry.get(parsed.action)
        if tool is None:
            _, tool_names = render_tool_catalog(registry)
            observation = f"Unknown tool {parsed.action}; available: {tool_names}"
        else:
            observation = tool.run(campaign, parsed.action_input, tool_ctx)
        trajectory.steps.append(
            ReactStep(
                thought=parsed.thought,
                action=parsed.action,
                action_input=parsed.action_input,
                observation=observation,
            )
        )
    trajectory.terminated = Termination.STEP_LIMIT
    trajectory.ended_at = clock()
    return trajectory
