/**
 * View state: everything renderFrame needs, nothing it has to fetch.
 *
 * The trajectory lives in a bounded ring buffer; fan/mu/horizon hold the
 * latest decoded step response. The world-to-screen transform is affine and
 * invertible by construction (positive pixel-per-unit scales).
 */

import type { FanEntry, ScenarioMeta, StepResponse } from "./protocol.js";

export interface Transform {
  /** world x (or t) to pixel: px = offsetX + scaleX * x */
  offsetX: number;
  scaleX: number;
  /** world y (state value) to pixel: py = offsetY - scaleY * y */
  offsetY: number;
  scaleY: number;
}

export interface TrajectorySample {
  t: number;
  phi: number[];
}

export interface ViewState {
  sessionId: string | null;
  scenario: ScenarioMeta | null;
  transform: Transform;
  trajectory: RingBuffer<TrajectorySample>;
  fan: FanEntry[];
  mu: string | null;
  horizonT1: number | null;
  anchor: number | null;
  cadence: number; // steps per second
  pendingConfig: { dt: number; blend: number };
  decodeErrors: number;
}

export class RingBuffer<T> {
  private items: T[] = [];

  constructor(public readonly capacity: number) {
    if (capacity < 1) throw new Error("capacity must be positive");
  }

  push(item: T): void {
    this.items.push(item);
    if (this.items.length > this.capacity) this.items.shift();
  }

  toArray(): T[] {
    return this.items.slice();
  }

  get length(): number {
    return this.items.length;
  }

  clear(): void {
    this.items = [];
  }
}

export function makeTransform(scaleX: number, scaleY: number, offsetX = 0, offsetY = 0): Transform {
  if (scaleX <= 0 || scaleY <= 0) throw new Error("transform scales must be positive");
  return { offsetX, scaleX, offsetY, scaleY };
}

export function worldToScreen(tf: Transform, x: number, y: number): [number, number] {
  return [tf.offsetX + tf.scaleX * x, tf.offsetY - tf.scaleY * y];
}

export function screenToWorld(tf: Transform, px: number, py: number): [number, number] {
  return [(px - tf.offsetX) / tf.scaleX, (tf.offsetY - py) / tf.scaleY];
}

export function initialViewState(capacity = 600, cadence = 20): ViewState {
  return {
    sessionId: null,
    scenario: null,
    transform: makeTransform(120, 80, 40, 200),
    trajectory: new RingBuffer<TrajectorySample>(capacity),
    fan: [],
    mu: null,
    horizonT1: null,
    anchor: null,
    cadence,
    pendingConfig: { dt: 0.1, blend: 1.0 },
    decodeErrors: 0,
  };
}

/** Fold one decoded step response into the view. */
export function applyStepResponse(view: ViewState, step: StepResponse): void {
  view.sessionId = step.session_id;
  view.scenario = step.scenario;
  for (let i = 0; i < step.advanced.t.length; i++) {
    view.trajectory.push({ t: step.advanced.t[i]!, phi: step.advanced.phi[i]! });
  }
  view.fan = step.fan;
  view.mu = step.mu;
  view.horizonT1 = step.horizon_t1;
  view.anchor = step.anchor;
}
