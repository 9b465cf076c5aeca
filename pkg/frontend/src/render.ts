// DOM builders. All narrative and entity text is untrusted model output, so
// everything goes through textContent; nothing is ever assigned to innerHTML.

import type {
  CampaignResource,
  CampaignSummary,
  CharacterView,
  MessageView,
  Trace,
  TraceTurn,
  Trajectory,
} from "./api.js";
import { healthLabel, hpText } from "./health.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function bubble(role: "player" | "gm" | "system", text: string, kind?: string): HTMLElement {
  const node = el("div", `bubble ${role}`);
  if (kind) {
    node.appendChild(el("span", "kind", kind));
  }
  node.appendChild(document.createTextNode(text));
  return node;
}

export function renderTranscript(messages: MessageView[]): HTMLElement {
  const transcript = el("div", "transcript");
  for (const message of messages) {
    if (message.role === "Player") {
      transcript.appendChild(bubble("player", message.text, message.actionKind.toLowerCase()));
    } else if (message.role === "GameMaster") {
      transcript.appendChild(bubble("gm", message.text));
    } else {
      transcript.appendChild(bubble("system", `— ${message.actionKind} —`));
    }
  }
  return transcript;
}

function characterCard(character: CharacterView): HTMLElement {
  const label = healthLabel(character.currentHp, character.maxHp, character.isPlayer);
  const card = el("div", label === "Dead" ? "card dead" : "card");
  const title = character.isPlayer ? `${character.name} (you)` : character.name;
  card.appendChild(el("strong", undefined, title));
  card.appendChild(el("div", "hp", `HP ${hpText(character.currentHp, character.maxHp)}`));
  const bar = el("div", "hp-bar");
  const fill = el("div");
  fill.style.width = `${Math.round((character.currentHp / character.maxHp) * 100)}%`;
  bar.appendChild(fill);
  card.appendChild(bar);
  card.appendChild(el("div", "state", label));
  return card;
}

export function renderHpPanel(campaign: CampaignResource): HTMLElement {
  const panel = el("div", "panel hp-panel");
  panel.appendChild(el("h3", undefined, "Party"));
  const player = campaign.characters.find((c) => c.isPlayer);
  if (player) {
    panel.appendChild(characterCard(player));
  }
  return panel;
}

export function renderWorldPanel(campaign: CampaignResource): HTMLElement {
  const panel = el("div", "panel world-panel");
  panel.appendChild(el("h3", undefined, "World"));
  panel.appendChild(el("h4", undefined, "Characters"));
  for (const character of campaign.characters.filter((c) => !c.isPlayer)) {
    panel.appendChild(characterCard(character));
  }
  panel.appendChild(el("h4", undefined, "Environments"));
  const list = el("ul", "environments");
  for (const environment of campaign.environments) {
    const item = el("li", undefined, environment.name);
    if (environment.isPlayerHere) {
      item.appendChild(el("span", "here", " ◆ you are here"));
    }
    item.title = environment.description;
    list.appendChild(item);
  }
  if (campaign.environments.length === 0) {
    list.appendChild(el("li", "muted", "nowhere yet"));
  }
  panel.appendChild(list);
  return panel;
}

function renderTrajectory(name: string, trajectory: Trajectory | null | undefined): HTMLElement {
  const block = el("div", "trajectory");
  block.appendChild(el("h5", undefined, name));
  if (!trajectory) {
    block.appendChild(el("div", "muted", "no trajectory"));
    return block;
  }
  trajectory.steps.forEach((step, index) => {
    const node = el("div", "trace-step");
    node.appendChild(el("span", "label", `step ${index + 1}`));
    node.appendChild(el("div", undefined, `Thought: ${step.thought}`));
    if (step.action) {
      node.appendChild(el("div", undefined, `Action: ${step.action}`));
      node.appendChild(el("div", undefined, `Action Input: ${step.actionInput ?? ""}`));
    }
    if (step.observation) {
      node.appendChild(el("div", undefined, `Observation: ${step.observation}`));
    }
    block.appendChild(node);
  });
  block.appendChild(el("div", "muted", `→ ${trajectory.terminated}`));
  return block;
}

function renderTraceTurn(turn: TraceTurn): HTMLElement {
  const block = el("div", "trace-turn");
  block.appendChild(el("h4", undefined, `Turn ${turn.turn} (${turn.actionKind ?? "?"})`));
  if (turn.engine === "V1") {
    block.appendChild(
      el("div", "muted", `static engine — no trajectory (prompt: ${turn.systemPrompt ?? "?"})`),
    );
    return block;
  }
  block.appendChild(renderTrajectory("Narrator", turn.narratorTrajectory));
  block.appendChild(renderTrajectory("Archivist", turn.archivistTrajectory));
  return block;
}

export function renderTraceDrawer(trace: Trace): HTMLElement {
  const drawer = el("details", "drawer panel");
  drawer.appendChild(el("summary", undefined, "Debug: agent trajectories"));
  if (trace.turns.length === 0) {
    drawer.appendChild(el("div", "muted", "no turns yet"));
  }
  for (const turn of trace.turns) {
    drawer.appendChild(renderTraceTurn(turn));
  }
  return drawer;
}

export function renderCampaignList(
  campaigns: CampaignSummary[],
  onOpen: (id: string) => void,
): HTMLElement {
  const panel = el("div", "panel");
  panel.appendChild(el("h2", undefined, "Resume a campaign"));
  const list = el("ul", "campaign-list");
  const sorted = [...campaigns].sort((a, b) => (a.updatedAt < b.updatedAt ? 1 : -1));
  for (const campaign of sorted) {
    const item = el("li");
    const link = el("button", "ghost", `${campaign.setting} · ${campaign.engine}`);
    link.addEventListener("click", () => onOpen(campaign.id));
    item.appendChild(link);
    item.appendChild(el("span", "meta", campaign.updatedAt));
    list.appendChild(item);
  }
  if (campaigns.length === 0) {
    list.appendChild(el("li", "muted", "none yet — start one below"));
  }
  panel.appendChild(list);
  return panel;
}

export function showToast(message: string): void {
  const toast = el("div", "toast", message);
  document.body.appendChild(toast);
  setTimeout(() => toast.remove(), 4000);
}

export function renderBanner(message: string): HTMLElement {
  return el("div", "banner", message);
}
