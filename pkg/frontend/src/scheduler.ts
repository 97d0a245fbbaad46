/**
 * The trial loop: fetch, wait for the scheduled instant, flash, capture one
 * keypress, post the observation, repeat.
 *
 * Schedule targets are anchored to the loop's start: trial seq renders at
 * epoch + scheduled_at_ms. The clock and renderer are injected so the loop
 * is testable at any rate, and every render is timestamped for the timing
 * audit (95% of flashes must land within +/-100 ms of schedule).
 */

import { ApiClient, ApiError, IsolationViolation, TrialPayload } from "./api.js";

export interface FlashRenderer {
  /** Show the trial's experience (prelude tokens are steering stimuli). */
  flash(token: string, prelude: string[]): void;
  clearFlash(): void;
  /** Ask the operator for the missed trial's answer before the next flash. */
  promptMissed(seq: number): void;
  clearPrompt(): void;
}

export interface Clock {
  now(): number;
  sleep(ms: number): Promise<void>;
}

export const realClock: Clock = {
  now: () => performance.now(),
  sleep: (ms) => new Promise((resolve) => setTimeout(resolve, Math.max(0, ms))),
};

export interface TimingRecord {
  seq: number;
  targetMs: number;
  renderedMs: number;
}

export interface TrialLoopOptions {
  /** Flash duration; the viewport returns to neutral afterwards. */
  flashMs?: number;
  /** Expected inter-flash interval, used for the missed-response prompt. */
  stimulusRateHz?: number;
  /** Network-failure handling: retries of the same trial fetch. */
  maxRetries?: number;
  retryDelayMs?: number;
}

interface KeyWaiter {
  resolve: (token: string) => void;
}

export class TrialLoop {
  private readonly flashMs: number;
  private readonly intervalMs: number;
  private readonly maxRetries: number;
  private readonly retryDelayMs: number;
  private waiter: KeyWaiter | null = null;
  private running = false;
  readonly timings: TimingRecord[] = [];
  /** Number of fetch retries performed (network pauses survived). */
  retries = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly renderer: FlashRenderer,
    private readonly clock: Clock = realClock,
    options: TrialLoopOptions = {}
  ) {
    this.flashMs = options.flashMs ?? 300;
    this.intervalMs = 1000 / (options.stimulusRateHz ?? 1);
    this.maxRetries = options.maxRetries ?? 5;
    this.retryDelayMs = options.retryDelayMs ?? 250;
  }

  /** Feed one keypress token (wired to the keyboard by the caller). */
  keypress(token: string): void {
    if (this.waiter) {
      const waiter = this.waiter;
      this.waiter = null;
      waiter.resolve(token);
    }
  }

  get isRunning(): boolean {
    return this.running;
  }

  /**
   * Run ``plannedN`` trials and return the render-timing audit trail.
   * A trial's fetch failing pauses the loop and resumes at the same seq.
   */
  async run(plannedN: number): Promise<TimingRecord[]> {
    this.running = true;
    const epoch = this.clock.now();
    try {
      for (let i = 0; i < plannedN; i++) {
        const trial = await this.fetchWithResume();
        const target = epoch + trial.scheduled_at_ms;
        const lead = target - this.clock.now();
        if (lead > 0) {
          await this.clock.sleep(lead);
        }
        this.renderer.flash(trial.render_token, trial.prelude_tokens);
        const renderedMs = this.clock.now() - epoch;
        this.timings.push({ seq: trial.seq, targetMs: trial.scheduled_at_ms, renderedMs });
        void this.clock.sleep(this.flashMs).then(() => this.renderer.clearFlash());

        const token = await this.awaitKey(trial, target);
        await this.api.postObservation(
          this.sessionId,
          trial.seq,
          token,
          this.clock.now() - epoch
        );
      }
      return this.timings;
    } finally {
      this.running = false;
    }
  }

  private async fetchWithResume(): Promise<TrialPayload> {
    for (let attempt = 0; ; attempt++) {
      try {
        return await this.api.nextTrial(this.sessionId);
      } catch (error) {
        if (attempt >= this.maxRetries || !isNetworkError(error)) {
          throw error;
        }
        this.retries += 1;
        await this.clock.sleep(this.retryDelayMs);
      }
    }
  }

  /**
   * Wait for the operator's key. If none arrives by the time the next flash
   * is due, show the missed-response prompt and keep waiting; the next
   * flash never pre-empts an unanswered trial.
   */
  private async awaitKey(trial: TrialPayload, target: number): Promise<string> {
    const deadline = target + this.intervalMs * 0.9;
    const key = new Promise<string>((resolve) => {
      this.waiter = { resolve };
    });
    const guard = this.clock
      .sleep(Math.max(0, deadline - this.clock.now()))
      .then(() => null as string | null);
    const token = await Promise.race([key, guard]);
    if (token !== null) {
      return token;
    }
    this.renderer.promptMissed(trial.seq);
    const answered = await key;
    this.renderer.clearPrompt();
    return answered;
  }
}

function isNetworkError(error: unknown): boolean {
  // fetch rejects with TypeError on network failure; an ApiError means the
  // server answered (retrying the same seq would not help) and an isolation
  // violation must never be retried into acceptance.
  return !(error instanceof ApiError) && !(error instanceof IsolationViolation);
}
