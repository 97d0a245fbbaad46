import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionModel, formatPValue, formatTally } from "../src/state.js";
import { MockServer } from "./mockServer.js";

async function completeAllTrials(api: ApiClient, sid: string, n: number) {
  for (let i = 0; i < n; i++) {
    const trial = await api.nextTrial(sid);
    await api.postObservation(sid, trial.seq, trial.render_token, i * 10);
  }
}

describe("SessionModel", () => {
  it("hides the discrepancy count until finalize", async () => {
    const server = new MockServer({ plannedN: 2 });
    const api = new ApiClient("http://mock", server.fetch);
    const model = new SessionModel(api, "mock-session");

    let hud = await model.refresh();
    expect(hud.discrepancies).toBeNull();
    expect(hud.decision).toBeNull();
    expect(hud.finalized).toBe(false);

    await completeAllTrials(api, "mock-session", 2);
    hud = await model.refresh();
    expect(hud.observed).toBe(2);
    expect(hud.discrepancies).toBeNull(); // still unrevealed

    await model.finalize();
    hud = model.hud();
    expect(hud.finalized).toBe(true);
    expect(hud.discrepancies).toBe(0);
    expect(hud.decision).toBe("BornNotRejected");
  });

  it("reports live tallies from the stats endpoint", async () => {
    const server = new MockServer({ plannedN: 3, tokens: ["RED", "RED", "BLUE"] });
    const api = new ApiClient("http://mock", server.fetch);
    const model = new SessionModel(api, "mock-session");
    await completeAllTrials(api, "mock-session", 3);
    const hud = await model.refresh();
    expect(hud.tally).toEqual({ RED: 2, BLUE: 1 });
    expect(hud.advisory).toBe("plan complete");
  });

  it("exposes the calibration report", async () => {
    const server = new MockServer({ plannedN: 1 });
    const api = new ApiClient("http://mock", server.fetch);
    const model = new SessionModel(api, "mock-session");
    const hud = await model.refresh();
    expect(hud.calibration).toMatchObject({ counts_L: 1, counts_R: 1 });
  });

  it("requires a refresh before reading the hud", () => {
    const server = new MockServer({ plannedN: 1 });
    const model = new SessionModel(new ApiClient("http://mock", server.fetch), "x");
    expect(() => model.hud()).toThrow("refresh");
  });
});

describe("formatting", () => {
  it("formats p-values across magnitudes", () => {
    expect(formatPValue(null)).toBe("-");
    expect(formatPValue(0.0215)).toBe("0.0215");
    expect(formatPValue(8.01e-9)).toBe("8.01e-9");
  });

  it("formats tallies deterministically", () => {
    expect(formatTally({ RED: 3, BLUE: 5 })).toBe("BLUE: 5   RED: 3");
  });
});
