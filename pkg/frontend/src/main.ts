/**
 * Browser entry point. Query parameters select the service and session:
 *
 *   index.html?base=http://127.0.0.1:8787&experiment=redness&n=60&rate=1&mode=HUMAN
 *
 * Flow: create the session, run the trial loop with keyboard capture, poll
 * live stats into the HUD once a second, finalize when the plan completes.
 */

import { ApiClient } from "./api.js";
import { DEFAULT_KEYMAP, attachKeyboard } from "./keys.js";
import { TrialLoop, realClock } from "./scheduler.js";
import { SessionModel } from "./state.js";
import { DomSurface, FlashView } from "./view.js";

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8787";
  const experiment = params.get("experiment") ?? "redness";
  const plannedN = Number(params.get("n") ?? "60");
  const rate = Number(params.get("rate") ?? "1");
  const mode = (params.get("mode") ?? "HUMAN") as "HUMAN" | "SIMULATED";
  const seed = Number(params.get("seed") ?? "0");

  const api = new ApiClient(base);
  const surface = new DomSurface(document);
  const view = new FlashView(surface);

  const sessionId = await api.createSession({
    experiment,
    planned_n: plannedN,
    stimulus_rate: rate,
    mode,
    seed,
  });
  const model = new SessionModel(api, sessionId);
  view.renderHud(await model.refresh());
  view.renderCalibration(model.hud());

  const loop = new TrialLoop(api, sessionId, view, realClock, {
    stimulusRateHz: rate,
  });
  const detach = attachKeyboard(window, DEFAULT_KEYMAP, (token) => loop.keypress(token));

  const poll = window.setInterval(async () => {
    try {
      view.renderHud(await model.refresh());
    } catch {
      // transient; the next poll retries
    }
  }, 1000);

  try {
    await loop.run(plannedN);
    await model.finalize();
    view.renderHud(await model.refresh());
    view.renderFinal(model.hud());
  } finally {
    window.clearInterval(poll);
    detach();
  }
}

start().catch((error) => {
  document.body.textContent = String(error);
});
