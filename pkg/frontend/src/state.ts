/**
 * View model for one live session. Server-authoritative: everything here is
 * refreshed from the API, and the discrepancy count stays hidden until the
 * session is finalized (before that the server does not even send it).
 */

import { ApiClient, Footer, LiveStats, SessionView } from "./api.js";

export interface HudState {
  sessionId: string;
  experiment: string;
  mode: string;
  observed: number;
  planned: number;
  tally: Record<string, number>;
  pValue: number | null;
  advisory: string | null;
  finalized: boolean;
  /** Only revealed after finalize. */
  discrepancies: number | null;
  decision: string | null;
  calibration: Record<string, number> | null;
}

export class SessionModel {
  private view: SessionView | null = null;
  private stats: LiveStats | null = null;

  constructor(private readonly api: ApiClient, readonly sessionId: string) {}

  async refresh(): Promise<HudState> {
    this.view = await this.api.view(this.sessionId);
    this.stats = await this.api.liveStats(this.sessionId);
    return this.hud();
  }

  async finalize(): Promise<Footer> {
    const footer = await this.api.finalize(this.sessionId);
    this.view = await this.api.view(this.sessionId);
    return footer;
  }

  hud(): HudState {
    if (!this.view) {
      throw new Error("refresh() before reading the HUD");
    }
    const footer = this.view.finalized ? this.view.footer ?? null : null;
    return {
      sessionId: this.view.session_id,
      experiment: this.view.experiment,
      mode: this.view.mode,
      observed: this.stats?.observed ?? this.view.trials_observed,
      planned: this.view.planned_n,
      tally: this.stats?.tally ?? this.view.tally,
      pValue: this.stats?.p_value ?? this.view.p_value,
      advisory: this.stats?.advisory ?? this.view.advisory,
      finalized: this.view.finalized,
      discrepancies: footer ? footer.discrepancies : null,
      decision: footer ? footer.decision : null,
      calibration: this.view.calibration,
    };
  }
}

export function formatPValue(p: number | null): string {
  if (p === null) {
    return "-";
  }
  if (p >= 0.001) {
    return p.toFixed(4);
  }
  return p.toExponential(2);
}

export function formatTally(tally: Record<string, number>): string {
  return Object.entries(tally)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([token, count]) => `${token}: ${count}`)
    .join("   ");
}
