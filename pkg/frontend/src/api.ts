// Typed client for the game service JSON API. The UI talks to nothing else.

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface CampaignSummary {
  id: string;
  setting: string;
  engine: string;
  updatedAt: string;
}

export interface CharacterView {
  id: string;
  name: string;
  description: string;
  charType: string;
  maxHp: number;
  currentHp: number;
  healthState: string;
  isPlayer: boolean;
}

export interface EnvironmentView {
  id: string;
  name: string;
  description: string;
  isPlayerHere: boolean;
}

export interface MessageView {
  seq: number;
  role: "Player" | "GameMaster" | "System";
  actionKind: string;
  text: string;
  timestamp: string;
}

export interface CampaignResource {
  id: string;
  setting: string;
  startScenario: string;
  engine: "V1" | "V2";
  playerCharacterId: string;
  characters: CharacterView[];
  environments: EnvironmentView[];
  messages: MessageView[];
  summary: string;
  rngSeed: number;
  updatedAt: string;
}

export interface CreateCampaignBody {
  setting: string;
  startScenario: string;
  playerName: string;
  playerDescription: string;
  engine: "v1" | "v2";
  seed?: number;
}

export interface CreateCampaignResult {
  campaignId: string;
  seed: number;
  narrative?: string;
}

export interface TurnResult {
  narrative: string;
  stateDelta: unknown;
  turn: number;
}

export interface TrajectoryStep {
  thought: string;
  action: string | null;
  actionInput: string | null;
  observation: string | null;
}

export interface Trajectory {
  steps: TrajectoryStep[];
  finalAnswer: string | null;
  terminated: string;
}

export interface TraceTurn {
  turn: number;
  engine: "V1" | "V2";
  actionKind?: string;
  narrative?: string;
  systemPrompt?: string;
  narratorTrajectory?: Trajectory | null;
  archivistTrajectory?: Trajectory | null;
}

export interface Trace {
  campaignId: string;
  turns: TraceTurn[];
}

export type ActionKind = "do" | "say" | "attack";

export class GmApi {
  constructor(private base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      let code = "Internal";
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { code?: string; message?: string };
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  listCampaigns(): Promise<{ campaigns: CampaignSummary[] }> {
    return this.request("/api/campaigns");
  }

  createCampaign(body: CreateCampaignBody): Promise<CreateCampaignResult> {
    return this.request("/api/campaigns?play=1", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  getCampaign(id: string): Promise<CampaignResource> {
    return this.request(`/api/campaigns/${encodeURIComponent(id)}`);
  }

  getTrace(id: string): Promise<Trace> {
    return this.request(`/api/campaigns/${encodeURIComponent(id)}/trace`);
  }

  sendTurn(id: string, actionKind: ActionKind, text: string): Promise<TurnResult> {
    return this.request(`/api/campaigns/${encodeURIComponent(id)}/messages`, {
      method: "POST",
      body: JSON.stringify({ actionKind, text }),
    });
  }

  deleteCampaign(id: string): Promise<void> {
    return this.request(`/api/campaigns/${encodeURIComponent(id)}`, { method: "DELETE" });
  }
}
