/**
 * Thin fetch client for the session service, plus an event-stream subscriber
 * built on fetch streaming (works in browsers and Node alike).
 */

import {
  decodeSessionCreated,
  decodeStepEvent,
  SseParser,
  type SessionCreated,
  type StepResponse,
} from "./protocol.js";

export interface SessionRequest {
  scenario: string;
  h?: number;
  warmup_steps?: number;
  predictor?: { dt?: number; blend?: number; T?: number };
  selection?: { mode: "none" | "pool"; size?: number };
  horizon?: { dt1: number; dt2: number; theta: number; t_max: number };
  seed?: number;
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function reject(response: Response): Promise<never> {
  let code = "unknown";
  let message = response.statusText;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(response.status, code, message);
}

export class SessionClient {
  constructor(public readonly baseUrl: string) {}

  async createSession(request: SessionRequest): Promise<SessionCreated> {
    const response = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) await reject(response);
    return decodeSessionCreated(await response.json());
  }

  async step(
    sessionId: string,
    body: { u_intended?: number[]; u1_intended?: number[]; steps: number },
  ): Promise<StepResponse> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/step`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await reject(response);
    return decodeStepEvent(await response.json());
  }

  async close(sessionId: string): Promise<void> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}`, {
      method: "DELETE",
    });
    if (!response.ok) await reject(response);
  }

  /**
   * Subscribe to the step mirror. Events are decoded and delivered in arrival
   * order; decode failures go to onError. Returns an abort handle.
   */
  subscribe(
    sessionId: string,
    handlers: {
      onStep: (step: StepResponse) => void;
      onError?: (err: unknown) => void;
      maxEvents?: number;
    },
  ): { done: Promise<void>; abort: () => void } {
    const controller = new AbortController();
    const query = handlers.maxEvents === undefined ? "" : `?max_events=${handlers.maxEvents}`;
    const done = (async () => {
      const response = await fetch(
        `${this.baseUrl}/sessions/${sessionId}/stream${query}`,
        { signal: controller.signal },
      );
      if (!response.ok || response.body === null) {
        await reject(response);
        return;
      }
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      const parser = new SseParser();
      for (;;) {
        const { done: finished, value } = await reader.read();
        if (finished) break;
        for (const event of parser.feed(decoder.decode(value, { stream: true }))) {
          if (event.event !== "step") continue;
          try {
            handlers.onStep(decodeStepEvent(event.data));
          } catch (err) {
            handlers.onError?.(err);
          }
        }
      }
    })().catch((err) => {
      if (!controller.signal.aborted) handlers.onError?.(err);
    });
    return { done, abort: () => controller.abort() };
  }
}
