/**
 * Typed client for the worldlines session service.
 *
 * The client is the last line of the isolation contract on this side of the
 * wire: any unanswered-trial payload carrying ground-truth fields (the arm,
 * dark flag or subsystem labels) is rejected before it can reach rendering
 * or caching code.
 */

export interface SessionRequest {
  experiment: string;
  planned_n: number;
  alpha?: number;
  stimulus_rate?: number;
  mode?: "SIMULATED" | "HUMAN";
  seed?: number;
  rule_texts?: string[];
  lottery_k?: number;
}

export interface TrialPayload {
  seq: number;
  scheduled_at_ms: number;
  render_token: string;
  prelude_tokens: string[];
}

export interface LiveStats {
  observed: number;
  planned_n: number;
  tally: Record<string, number>;
  heads: number;
  p_value: number | null;
  advisory: string | null;
}

export interface TallySummary {
  heads: number;
  total: number;
  head_token: string;
}

export interface Footer {
  tally: TallySummary;
  human_tally: TallySummary;
  p_value: number;
  human_p_value: number;
  decision: string;
  human_decision: string;
  retest_required: boolean;
  discrepancies: number;
  alpha: number;
  planned_n: number;
}

export interface SessionView {
  session_id: string;
  experiment: string;
  mode: string;
  planned_n: number;
  alpha: number;
  stimulus_rate: number;
  trials_issued: number;
  trials_observed: number;
  tally: Record<string, number>;
  p_value: number | null;
  advisory: string | null;
  calibration: Record<string, number> | null;
  plausibility: Record<string, Record<string, string>>;
  finalized: boolean;
  footer?: Footer;
}

/** Ground-truth fields that must never appear on an unanswered trial. */
const FORBIDDEN_TRIAL_FIELDS = ["stimulus", "arm", "is_dark", "labels", "delivered_qualia"];

export class IsolationViolation extends Error {}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<ResponseLike>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => fetch(...(args as [string]))
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let detail: string;
      try {
        const parsed = (await response.json()) as { detail?: string };
        detail = parsed.detail ?? JSON.stringify(parsed);
      } catch {
        detail = await response.text();
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(request: SessionRequest): Promise<string> {
    const body = await this.request<{ session_id: string }>("POST", "/sessions", request);
    return body.session_id;
  }

  async view(sessionId: string): Promise<SessionView> {
    return this.request<SessionView>("GET", `/sessions/${sessionId}`);
  }

  /**
   * Issue the next trial. Throws IsolationViolation if the payload smuggles
   * any ground-truth field; conforming payloads carry exactly the schedule
   * and the experience to render.
   */
  async nextTrial(sessionId: string): Promise<TrialPayload> {
    const raw = await this.request<Record<string, unknown>>(
      "GET",
      `/sessions/${sessionId}/next`
    );
    for (const field of FORBIDDEN_TRIAL_FIELDS) {
      if (field in raw) {
        throw new IsolationViolation(
          `trial payload for seq ${String(raw.seq)} leaked ground-truth field "${field}"`
        );
      }
    }
    return {
      seq: raw.seq as number,
      scheduled_at_ms: raw.scheduled_at_ms as number,
      render_token: raw.render_token as string,
      prelude_tokens: (raw.prelude_tokens as string[]) ?? [],
    };
  }

  async postObservation(
    sessionId: string,
    seq: number,
    token: string,
    tMs: number
  ): Promise<void> {
    await this.request("POST", `/sessions/${sessionId}/observations`, {
      seq,
      token,
      t_ms: Math.round(tMs),
    });
  }

  async liveStats(sessionId: string): Promise<LiveStats> {
    return this.request<LiveStats>("GET", `/sessions/${sessionId}/stats`);
  }

  async finalize(sessionId: string): Promise<Footer> {
    return this.request<Footer>("POST", `/sessions/${sessionId}/finalize`);
  }
}
