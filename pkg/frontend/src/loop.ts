/**
 * Client-clocked play loop: a drift-corrected timer fires at the configured
 * cadence, sends the latest pointer-derived intended control, and folds the
 * decoded response into the view. At most one step request is in flight; if
 * the previous one has not returned, the tick is counted as a stall instead
 * of piling up requests.
 */

import type { SessionClient } from "./client.js";
import type { StepResponse } from "./protocol.js";
import { applyStepResponse, type ViewState } from "./view.js";

export interface LoopOptions {
  client: SessionClient;
  sessionId: string;
  view: ViewState;
  /** Latest intended control for player 1 (pointer-derived). */
  controlSource: () => number[];
  stepsPerTick?: number;
  onStep?: (step: StepResponse) => void;
  onError?: (err: unknown) => void;
}

export interface LoopStats {
  ticks: number;
  completed: number;
  stalls: number;
  decodeErrors: number;
  startedAt: number;
  stoppedAt: number | null;
}

export class PlayLoop {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private stopped = false;
  readonly stats: LoopStats = {
    ticks: 0,
    completed: 0,
    stalls: 0,
    decodeErrors: 0,
    startedAt: 0,
    stoppedAt: null,
  };

  constructor(private readonly options: LoopOptions) {}

  start(): void {
    const intervalMs = 1000 / this.options.view.cadence;
    this.stats.startedAt = now();
    const tick = () => {
      if (this.stopped) return;
      const target = this.stats.startedAt + intervalMs * (this.stats.ticks + 1);
      this.timer = setTimeout(tick, Math.max(0, target - now()));
      this.stats.ticks += 1;
      void this.fire();
    };
    this.timer = setTimeout(tick, intervalMs);
  }

  private async fire(): Promise<void> {
    if (this.inFlight) {
      this.stats.stalls += 1;
      return;
    }
    this.inFlight = true;
    try {
      const step = await this.options.client.step(this.options.sessionId, {
        u1_intended: this.options.controlSource(),
        steps: this.options.stepsPerTick ?? 1,
      });
      applyStepResponse(this.options.view, step);
      this.stats.completed += 1;
      this.options.onStep?.(step);
    } catch (err) {
      if (err instanceof Error && err.name === "DecodeError") {
        this.stats.decodeErrors += 1;
        this.options.view.decodeErrors += 1;
      }
      this.options.onError?.(err);
    } finally {
      this.inFlight = false;
    }
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.stats.stoppedAt = now();
  }

  /** Achieved step rate (completed steps per second) since start. */
  achievedRate(): number {
    const end = this.stats.stoppedAt ?? now();
    const seconds = (end - this.stats.startedAt) / 1000;
    return seconds > 0 ? this.stats.completed / seconds : 0;
  }
}

function now(): number {
  return typeof performance !== "undefined" ? performance.now() : Date.now();
}
