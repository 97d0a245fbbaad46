/**
 * Rendering: full-viewport color flashes plus a small HUD. The DOM is hidden
 * behind the narrow Surface interface so the renderer is testable without a
 * browser.
 */

import { FlashRenderer } from "./scheduler.js";
import { HudState, formatPValue, formatTally } from "./state.js";

export interface Surface {
  setBackground(color: string): void;
  setText(region: "status" | "tally" | "prompt" | "final", text: string): void;
}

/** Token -> flash color. Unknown tokens flash neutral gray with a caption. */
export const PALETTE: Record<string, string> = {
  RED: "#c62828",
  BLUE: "#1565c0",
  PAIN: "#ffb300",
  NO_PAIN: "#455a64",
  WIN: "#2e7d32",
  LOSE: "#4e342e",
};

const IDLE = "#000000";

export class FlashView implements FlashRenderer {
  constructor(private readonly surface: Surface) {}

  flash(token: string, prelude: string[]): void {
    // steering stimuli (e.g. the surrogate shock) are captioned, the color
    // itself carries the outcome
    const caption = prelude.length ? `[${prelude.join(" ")}]` : "";
    this.surface.setText("status", caption);
    this.surface.setBackground(PALETTE[token] ?? "#616161");
  }

  clearFlash(): void {
    this.surface.setBackground(IDLE);
  }

  promptMissed(seq: number): void {
    this.surface.setText("prompt", `trial ${seq}: answer missed - press your key now`);
  }

  clearPrompt(): void {
    this.surface.setText("prompt", "");
  }

  renderHud(hud: HudState): void {
    const p = formatPValue(hud.pValue);
    this.surface.setText(
      "tally",
      `${hud.observed}/${hud.planned}   ${formatTally(hud.tally)}   p=${p}` +
        (hud.advisory ? `   ${hud.advisory}` : "")
    );
  }

  /** The partner's written calibration result, shown before the run. */
  renderCalibration(hud: HudState): void {
    if (!hud.calibration) {
      this.surface.setText("status", "calibration: none");
      return;
    }
    const c = hud.calibration;
    this.surface.setText(
      "status",
      `calibration: L=${c.counts_L} R=${c.counts_R} ratio=${Number(c.ratio).toFixed(4)} ` +
        `over ${c.windows} window(s)`
    );
  }

  renderFinal(hud: HudState): void {
    if (!hud.finalized) {
      this.surface.setText("final", "");
      return;
    }
    const parts = [
      `decision: ${hud.decision}`,
      `discrepancies: ${hud.discrepancies}`,
      `p=${formatPValue(hud.pValue)}`,
    ];
    this.surface.setText("final", parts.join("   "));
  }
}

/** Real-DOM surface (not exercised by tests; main.ts wires it). */
export class DomSurface implements Surface {
  private readonly regions = new Map<string, HTMLElement>();

  constructor(private readonly doc: Document) {
    const root = doc.body;
    root.style.margin = "0";
    root.style.height = "100vh";
    root.style.background = IDLE;
    root.style.color = "#eeeeee";
    root.style.fontFamily = "monospace";
    for (const region of ["status", "tally", "prompt", "final"]) {
      const el = doc.createElement("div");
      el.id = `wl-${region}`;
      el.style.padding = "4px 8px";
      root.appendChild(el);
      this.regions.set(region, el);
    }
  }

  setBackground(color: string): void {
    this.doc.body.style.background = color;
  }

  setText(region: "status" | "tally" | "prompt" | "final", text: string): void {
    const el = this.regions.get(region);
    if (el) {
      el.textContent = text;
    }
  }
}
