/**
 * Typed decoding of the session service wire format.
 *
 * Every payload that crosses the HTTP or event-stream boundary goes through
 * decodeStepEvent / decodeSessionCreated before the UI touches it; malformed
 * payloads surface as DecodeError with the offending field path.
 */

export class DecodeError extends Error {
  constructor(public readonly path: string, message: string) {
    super(`${path}: ${message}`);
    this.name = "DecodeError";
  }
}

export interface PredictionStatus {
  kind: "complete" | "truncated";
  step: number | null;
  reason: string | null;
}

export interface PredictionPayload {
  anchor: number;
  grid: { t_start: number; h: number; count: number } | null;
  m: number;
  d: number;
  phi_hat: number[][];
  u_star: number[][];
  status: PredictionStatus;
}

export interface FanEntry {
  label: string;
  best: boolean;
  score: number | null;
  prediction: PredictionPayload;
}

export interface StateSnapshot {
  t: number;
  phi: number[];
  u: number[];
  uo: number[];
  sample_count: number;
}

export interface AdvancedSamples {
  t: number[];
  phi: number[][];
  u: number[][];
  uo: number[][];
}

export interface ScenarioMeta {
  name: string;
  state_dim: number;
  control_dims: number[];
  h: number;
  render: "state-vs-time" | "plane";
}

export interface StepResponse {
  session_id: string;
  step_counter: number;
  status: string;
  anchor: number;
  state: StateSnapshot;
  advanced: AdvancedSamples;
  fan: FanEntry[];
  mu: string;
  horizon_t1: number | null;
  scenario: ScenarioMeta;
}

export interface SessionCreated {
  session_id: string;
  state: StateSnapshot;
  scenario: ScenarioMeta;
  pool_size: number;
}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function num(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new DecodeError(path, "expected a finite number");
  }
  return value;
}

function numOrNull(value: unknown, path: string): number | null {
  if (value === null || value === undefined) return null;
  return num(value, path);
}

function str(value: unknown, path: string): string {
  if (typeof value !== "string") throw new DecodeError(path, "expected a string");
  return value;
}

function bool(value: unknown, path: string): boolean {
  if (typeof value !== "boolean") throw new DecodeError(path, "expected a boolean");
  return value;
}

function numArray(value: unknown, path: string): number[] {
  if (!Array.isArray(value)) throw new DecodeError(path, "expected an array");
  return value.map((x, i) => num(x, `${path}[${i}]`));
}

function matrix(value: unknown, path: string): number[][] {
  if (!Array.isArray(value)) throw new DecodeError(path, "expected an array");
  return value.map((row, i) => numArray(row, `${path}[${i}]`));
}

function field(record: Record<string, unknown>, key: string, path: string): unknown {
  if (!(key in record)) throw new DecodeError(`${path}${path ? "." : ""}${key}`, "missing");
  return record[key];
}

function decodeStatus(value: unknown, path: string): PredictionStatus {
  if (!isRecord(value)) throw new DecodeError(path, "expected an object");
  const kind = str(field(value, "kind", path), `${path}.kind`);
  if (kind !== "complete" && kind !== "truncated") {
    throw new DecodeError(`${path}.kind`, `unknown status kind ${kind}`);
  }
  const step = value.step === null || value.step === undefined ? null : num(value.step, `${path}.step`);
  const reason =
    value.reason === null || value.reason === undefined ? null : str(value.reason, `${path}.reason`);
  return { kind, step, reason };
}

function decodePrediction(value: unknown, path: string): PredictionPayload {
  if (!isRecord(value)) throw new DecodeError(path, "expected an object");
  const gridRaw = field(value, "grid", path);
  let grid: PredictionPayload["grid"] = null;
  if (gridRaw !== null) {
    if (!isRecord(gridRaw)) throw new DecodeError(`${path}.grid`, "expected an object or null");
    grid = {
      t_start: num(field(gridRaw, "t_start", `${path}.grid`), `${path}.grid.t_start`),
      h: num(field(gridRaw, "h", `${path}.grid`), `${path}.grid.h`),
      count: num(field(gridRaw, "count", `${path}.grid`), `${path}.grid.count`),
    };
  }
  return {
    anchor: num(field(value, "anchor", path), `${path}.anchor`),
    grid,
    m: num(field(value, "m", path), `${path}.m`),
    d: num(field(value, "d", path), `${path}.d`),
    phi_hat: matrix(field(value, "phi_hat", path), `${path}.phi_hat`),
    u_star: matrix(field(value, "u_star", path), `${path}.u_star`),
    status: decodeStatus(field(value, "status", path), `${path}.status`),
  };
}

function decodeState(value: unknown, path: string): StateSnapshot {
  if (!isRecord(value)) throw new DecodeError(path, "expected an object");
  return {
    t: num(field(value, "t", path), `${path}.t`),
    phi: numArray(field(value, "phi", path), `${path}.phi`),
    u: numArray(field(value, "u", path), `${path}.u`),
    uo: numArray(field(value, "uo", path), `${path}.uo`),
    sample_count: num(field(value, "sample_count", path), `${path}.sample_count`),
  };
}

function decodeScenario(value: unknown, path: string): ScenarioMeta {
  if (!isRecord(value)) throw new DecodeError(path, "expected an object");
  const render = str(field(value, "render", path), `${path}.render`);
  if (render !== "state-vs-time" && render !== "plane") {
    throw new DecodeError(`${path}.render`, `unknown render mode ${render}`);
  }
  return {
    name: str(field(value, "name", path), `${path}.name`),
    state_dim: num(field(value, "state_dim", path), `${path}.state_dim`),
    control_dims: numArray(field(value, "control_dims", path), `${path}.control_dims`),
    h: num(field(value, "h", path), `${path}.h`),
    render,
  };
}

export function decodeStepEvent(payload: unknown): StepResponse {
  const raw = typeof payload === "string" ? safeParse(payload) : payload;
  if (!isRecord(raw)) throw new DecodeError("", "expected a JSON object");
  const fanRaw = field(raw, "fan", "");
  if (!Array.isArray(fanRaw)) throw new DecodeError("fan", "expected an array");
  const fan = fanRaw.map((entry, i) => {
    if (!isRecord(entry)) throw new DecodeError(`fan[${i}]`, "expected an object");
    return {
      label: str(field(entry, "label", `fan[${i}]`), `fan[${i}].label`),
      best: bool(field(entry, "best", `fan[${i}]`), `fan[${i}].best`),
      score: numOrNull(entry.score, `fan[${i}].score`),
      prediction: decodePrediction(field(entry, "prediction", `fan[${i}]`), `fan[${i}].prediction`),
    };
  });
  const advancedRaw = field(raw, "advanced", "");
  if (!isRecord(advancedRaw)) throw new DecodeError("advanced", "expected an object");
  return {
    session_id: str(field(raw, "session_id", ""), "session_id"),
    step_counter: num(field(raw, "step_counter", ""), "step_counter"),
    status: str(field(raw, "status", ""), "status"),
    anchor: num(field(raw, "anchor", ""), "anchor"),
    state: decodeState(field(raw, "state", ""), "state"),
    advanced: {
      t: numArray(field(advancedRaw, "t", "advanced"), "advanced.t"),
      phi: matrix(field(advancedRaw, "phi", "advanced"), "advanced.phi"),
      u: matrix(field(advancedRaw, "u", "advanced"), "advanced.u"),
      uo: matrix(field(advancedRaw, "uo", "advanced"), "advanced.uo"),
    },
    fan,
    mu: str(field(raw, "mu", ""), "mu"),
    horizon_t1: numOrNull(raw.horizon_t1, "horizon_t1"),
    scenario: decodeScenario(field(raw, "scenario", ""), "scenario"),
  };
}

export function decodeSessionCreated(payload: unknown): SessionCreated {
  const raw = typeof payload === "string" ? safeParse(payload) : payload;
  if (!isRecord(raw)) throw new DecodeError("", "expected a JSON object");
  return {
    session_id: str(field(raw, "session_id", ""), "session_id"),
    state: decodeState(field(raw, "state", ""), "state"),
    scenario: decodeScenario(field(raw, "scenario", ""), "scenario"),
    pool_size: num(field(raw, "pool_size", ""), "pool_size"),
  };
}

function safeParse(text: string): unknown {
  try {
    return JSON.parse(text);
  } catch (err) {
    throw new DecodeError("", `invalid JSON: ${(err as Error).message}`);
  }
}

/** Incremental parser for a text/event-stream body: feed chunks, get events. */
export class SseParser {
  private buffer = "";

  feed(chunk: string): Array<{ event: string; data: string }> {
    this.buffer += chunk;
    const events: Array<{ event: string; data: string }> = [];
    let idx: number;
    while ((idx = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, idx);
      this.buffer = this.buffer.slice(idx + 2);
      let event = "message";
      const data: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith("event:")) event = line.slice(6).trim();
        else if (line.startsWith("data:")) data.push(line.slice(5).trimStart());
      }
      if (data.length > 0) events.push({ event, data: data.join("\n") });
    }
    return events;
  }
}
