import type { FanEntry, StepResponse } from "../src/protocol.js";

export function syntheticPrediction(
  points: number[],
  opts: { truncated?: boolean; tStart?: number; h?: number } = {},
): FanEntry["prediction"] {
  return {
    anchor: (opts.tStart ?? 1.0) - (opts.h ?? 0.02),
    grid:
      points.length === 0
        ? null
        : { t_start: opts.tStart ?? 1.0, h: opts.h ?? 0.02, count: points.length },
    m: 1,
    d: 2,
    phi_hat: points.map((v) => [v]),
    u_star: points.map(() => [0.2, -0.1]),
    status: opts.truncated
      ? { kind: "truncated", step: points.length + 1, reason: "SingularJacobian" }
      : { kind: "complete", step: null, reason: null },
  };
}

export function syntheticStep(fanSizes: number[] = [3, 3, 2]): StepResponse {
  return {
    session_id: "sess-0000",
    step_counter: 7,
    status: "active",
    anchor: 1.0,
    state: { t: 1.0, phi: [1.5], u: [0.9, -0.5], uo: [0.2, -0.1], sample_count: 51 },
    advanced: {
      t: [0.98, 1.0],
      phi: [[1.45], [1.5]],
      u: [[0.89, -0.49], [0.9, -0.5]],
      uo: [[0.2, -0.1], [0.2, -0.1]],
    },
    fan: fanSizes.map((n, i) => ({
      label: `finite:${i}`,
      best: i === 0,
      score: i === 2 ? null : 1e-3 * (i + 1),
      prediction: syntheticPrediction(
        Array.from({ length: n }, (_, k) => 1.5 + 0.01 * k * (i + 1)),
        { truncated: i === 2 },
      ),
    })),
    mu: "finite:0",
    horizon_t1: 1.24,
    scenario: {
      name: "linear-duel",
      state_dim: 1,
      control_dims: [1, 1],
      h: 0.02,
      render: "state-vs-time",
    },
  };
}
