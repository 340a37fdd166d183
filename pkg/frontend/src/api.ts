/** Typed client for the voxplan session REST API. */

export interface LabelInfo {
  label: number;
  normal: string;
  area: number;
  plane: number;
}

export interface HistoryEntry {
  labels: number[];
  origin: string;
  timestamp: string;
  feedback: string | null;
  seed: number | null;
  parts: string[] | null;
  retry_count: number;
}

export interface PlanInfo {
  index: number;
  labels: number[];
  verdict: string;
  steps: number;
  warnings: string[];
  created_at: string;
}

export interface SessionState {
  id: string;
  prompt: string;
  status: string;
  labels?: LabelInfo[];
  omitted?: { normal: string; area: number; reason: string }[];
  current_labels: number[];
  history: HistoryEntry[];
  plans: PlanInfo[];
}

export interface ScenePolygon {
  points: number[][];
  depth: number;
  fill: string;
  label: number | null;
}

export interface SceneData {
  view: string;
  canvas: number[];
  font_px: number;
  polygons: ScenePolygon[];
  labels: { label: number; anchor: number[] }[];
}

export interface StrategyCard {
  labels?: number[];
  parts?: string[];
  seed?: number;
  error?: string;
}

export interface CompareResult {
  seed: number;
  rule: StrategyCard;
  random: StrategyCard;
  vlm: StrategyCard;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let code = "http_error";
    let message = `${resp.status} ${resp.statusText}`;
    try {
      const body = (await resp.json()) as { code?: string; message?: string };
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      /* non-JSON error body: keep defaults */
    }
    throw new ApiError(resp.status, code, message);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  getSession(id: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}`)).then((r) => asJson<SessionState>(r));
  }

  getScene(id: string, view: "A" | "B"): Promise<SceneData> {
    return fetch(this.url(`/sessions/${id}/scene?view=${view}`)).then((r) =>
      asJson<SceneData>(r),
    );
  }

  renderUrl(id: string, view: "A" | "B", labeled = true): string {
    return this.url(`/sessions/${id}/render?view=${view}&labeled=${labeled}`);
  }

  programUrl(id: string): string {
    return this.url(`/sessions/${id}/program`);
  }

  select(id: string, strategy: string, seed?: number): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/select`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(seed === undefined ? { strategy } : { strategy, seed }),
    }).then((r) => asJson<SessionState>(r));
  }

  feedback(id: string, text: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/feedback`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    }).then((r) => asJson<SessionState>(r));
  }

  compare(id: string, seed?: number): Promise<CompareResult> {
    return fetch(this.url(`/sessions/${id}/compare`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(seed === undefined ? {} : { seed }),
    }).then((r) => asJson<CompareResult>(r));
  }

  plan(id: string): Promise<SessionState> {
    return fetch(this.url(`/sessions/${id}/plan`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({}),
    }).then((r) => asJson<SessionState>(r));
  }
}
