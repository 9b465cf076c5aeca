// View controller: landing page, campaign creation, and the chat loop.
//
// The UI holds no state beyond the current view; reloading reconstructs
// everything from the GET endpoints, which is what makes campaign resume
// work. One turn may be pending at a time; the composer locks while the
// world resolves.

import { ApiError, GmApi } from "./api.js";
import type { ActionKind, CampaignResource } from "./api.js";
import {
  bubble,
  el,
  renderBanner,
  renderCampaignList,
  renderHpPanel,
  renderTraceDrawer,
  renderTranscript,
  renderWorldPanel,
  showToast,
} from "./render.js";

const SETTINGS = ["fantasy", "mystery", "post-apocalyptic"];

export class App {
  pending = false;

  constructor(
    private root: HTMLElement,
    private api: GmApi,
    private navigate: (hash: string) => void = (hash) => {
      window.location.hash = hash;
    },
  ) {}

  start(): void {
    window.addEventListener("hashchange", () => void this.route());
    void this.route();
  }

  async route(): Promise<void> {
    const match = /^#\/c\/(.+)$/.exec(window.location.hash);
    if (match) {
      await this.showCampaign(decodeURIComponent(match[1]));
    } else {
      await this.showLanding();
    }
  }

  async showLanding(): Promise<void> {
    this.root.replaceChildren();
    const title = el("h1");
    title.append("solo", el("span", undefined, "·gm"));
    this.root.appendChild(title);
    this.root.appendChild(
      el("p", "muted", "A game master that never cancels the session."),
    );
    const layout = el("div", "landing");
    try {
      const { campaigns } = await this.api.listCampaigns();
      layout.appendChild(renderCampaignList(campaigns, (id) => this.navigate(`#/c/${id}`)));
    } catch (error) {
      layout.appendChild(renderBanner(`could not list campaigns: ${describe(error)}`));
    }
    layout.appendChild(this.createForm());
    this.root.appendChild(layout);
  }

  private createForm(): HTMLElement {
    const panel = el("div", "panel");
    panel.appendChild(el("h2", undefined, "Start a new campaign"));
    const form = el("form");
    const errorLine = el("div", "form-error");
    errorLine.setAttribute("data-testid", "form-error");

    const settingSelect = el("select");
    for (const setting of SETTINGS) {
      const option = el("option", undefined, setting);
      option.value = setting;
      settingSelect.appendChild(option);
    }
    const scenarioInput = el("textarea");
    scenarioInput.placeholder = "Leave blank for a pre-generated story prompt";
    const nameInput = el("input");
    nameInput.name = "playerName";
    const descInput = el("input");
    const engineSelect = el("select");
    for (const engine of ["v2", "v1"] as const) {
      const option = el(
        "option",
        undefined,
        engine === "v2" ? "v2 — narrator & archivist agents" : "v1 — classic prompt pipeline",
      );
      option.value = engine;
      engineSelect.appendChild(option);
    }
    const seedInput = el("input");
    seedInput.type = "number";
    seedInput.placeholder = "random";

    const row = (label: string, field: HTMLElement) => {
      const wrapper = el("div", "form-row");
      wrapper.appendChild(el("label", undefined, label));
      wrapper.appendChild(field);
      return wrapper;
    };
    form.appendChild(row("Setting", settingSelect));
    form.appendChild(row("Opening scenario", scenarioInput));
    form.appendChild(row("Your character's name", nameInput));
    form.appendChild(row("Character description", descInput));
    form.appendChild(row("Game master engine", engineSelect));
    form.appendChild(row("Seed (optional, for replays)", seedInput));
    const submit = el("button", undefined, "Begin the adventure");
    submit.type = "submit";
    form.appendChild(submit);
    form.appendChild(errorLine);

    form.addEventListener("submit", (event) => {
      event.preventDefault();
      if (!nameInput.value.trim()) {
        errorLine.textContent = "your character needs a name";
        return;
      }
      errorLine.textContent = "";
      submit.disabled = true;
      void (async () => {
        try {
          const result = await this.api.createCampaign({
            setting: settingSelect.value,
            startScenario: scenarioInput.value,
            playerName: nameInput.value,
            playerDescription: descInput.value,
            engine: engineSelect.value as "v1" | "v2",
            seed: seedInput.value === "" ? undefined : Number(seedInput.value),
          });
          this.navigate(`#/c/${result.campaignId}`);
        } catch (error) {
          errorLine.textContent = describe(error);
        } finally {
          submit.disabled = false;
        }
      })();
    });
    panel.appendChild(form);
    return panel;
  }

  async showCampaign(id: string): Promise<void> {
    this.pending = false;
    this.root.replaceChildren();
    let campaign: CampaignResource;
    try {
      campaign = await this.api.getCampaign(id);
    } catch (error) {
      this.root.appendChild(renderBanner(`could not load campaign: ${describe(error)}`));
      return;
    }

    const layout = el("div", "game");
    const main = el("div", "panel main-panel");
    const side = el("div", "side");
    layout.appendChild(main);
    layout.appendChild(side);

    const header = el("h2", undefined, `${campaign.setting} · ${campaign.engine}`);
    const back = el("button", "ghost", "← all campaigns");
    back.addEventListener("click", () => this.navigate("#/"));
    main.appendChild(back);
    main.appendChild(header);
    const bannerSlot = el("div", "banner-slot");
    main.appendChild(bannerSlot);
    const transcript = renderTranscript(campaign.messages);
    main.appendChild(transcript);
    main.appendChild(this.composer(campaign, transcript, bannerSlot, side));

    await this.refreshPanels(campaign.id, side);
    this.root.appendChild(layout);
  }

  private composer(
    campaign: CampaignResource,
    transcript: HTMLElement,
    bannerSlot: HTMLElement,
    side: HTMLElement,
  ): HTMLElement {
    const composer = el("form", "composer");
    const kindSelect = el("select");
    kindSelect.setAttribute("data-testid", "action-kind");
    // v2 folds attacks into Do via the Battle tool, so the selector only
    // offers Attack on v1 campaigns.
    const kinds: ActionKind[] = campaign.engine === "V1" ? ["do", "say", "attack"] : ["do", "say"];
    for (const kind of kinds) {
      const option = el("option", undefined, kind);
      option.value = kind;
      kindSelect.appendChild(option);
    }
    const textInput = el("textarea");
    textInput.setAttribute("data-testid", "turn-text");
    textInput.placeholder = "What do you do?";
    const send = el("button", undefined, "Send");
    send.type = "submit";
    send.setAttribute("data-testid", "send");
    composer.appendChild(kindSelect);
    composer.appendChild(textInput);
    composer.appendChild(send);

    composer.addEventListener("submit", (event) => {
      event.preventDefault();
      const text = textInput.value.trim();
      if (!text || this.pending) {
        return; // double submits are dropped while a turn is pending
      }
      this.pending = true;
      send.disabled = true;
      textInput.value = "";
      transcript.appendChild(
        bubble("player", text, kindSelect.value as ActionKind),
      );
      const spinner = el("div", "spinner", "the world is resolving…");
      spinner.setAttribute("data-testid", "spinner");
      transcript.appendChild(spinner);
      bannerSlot.replaceChildren();
      void (async () => {
        try {
          const result = await this.api.sendTurn(
            campaign.id,
            kindSelect.value as ActionKind,
            text,
          );
          transcript.appendChild(bubble("gm", result.narrative));
          await this.refreshPanels(campaign.id, side);
        } catch (error) {
          if (error instanceof ApiError && error.status === 409) {
            showToast("the world is still resolving your last action");
          } else if (error instanceof ApiError && error.code === "ContentFiltered") {
            bannerSlot.appendChild(
              renderBanner(
                `the storyteller's content filter refused that action: ${error.message}`,
              ),
            );
          } else {
            bannerSlot.appendChild(renderBanner(describe(error)));
          }
        } finally {
          spinner.remove();
          this.pending = false;
          send.disabled = false;
        }
      })();
    });
    return composer;
  }

  private async refreshPanels(campaignId: string, side: HTMLElement): Promise<void> {
    try {
      const [campaign, trace] = await Promise.all([
        this.api.getCampaign(campaignId),
        this.api.getTrace(campaignId),
      ]);
      side.replaceChildren(
        renderHpPanel(campaign),
        renderWorldPanel(campaign),
        renderTraceDrawer(trace),
      );
    } catch {
      side.replaceChildren(renderBanner("world state unavailable"));
    }
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}
