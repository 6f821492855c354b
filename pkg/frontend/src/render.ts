/**
 * Pure rendering: ViewState in, draw list out.
 *
 * The draw list is plain data (polylines, markers, text, slider widgets), so
 * frames are snapshot-testable and the canvas painter stays trivial. Layer
 * order: trajectory, fan (best last, emphasized), horizon marker, side panel.
 */

import type { ViewState } from "./view.js";
import { worldToScreen } from "./view.js";

export type DrawOp =
  | {
      kind: "polyline";
      layer: "trajectory" | "fan";
      points: Array<[number, number]>;
      style: { color: string; width: number; dash: number[]; emphasis: boolean };
      label?: string;
      truncated?: boolean;
    }
  | { kind: "marker"; layer: "horizon"; at: [number, number]; style: { color: string }; label: string }
  | { kind: "text"; layer: "panel"; at: [number, number]; text: string }
  | {
      kind: "slider";
      layer: "panel";
      at: [number, number];
      name: "dt" | "blend";
      value: number;
      min: number;
      max: number;
    };

export type DrawList = DrawOp[];

const FAN_COLORS = ["#e0a43c", "#58b5e0", "#b07ee0", "#6fd08a", "#e06c78", "#9aa3ad"];
const PANEL_X = 660;

function stateOrdinate(phi: number[], render: "state-vs-time" | "plane"): [number, number] | null {
  if (render === "plane") {
    if (phi.length < 2) return null;
    return [phi[0]!, phi[1]!];
  }
  return phi.length > 0 ? [0, phi[0]!] : null;
}

function trajectoryPoints(view: ViewState): Array<[number, number]> {
  const render = view.scenario?.render ?? "state-vs-time";
  const points: Array<[number, number]> = [];
  for (const sample of view.trajectory.toArray()) {
    const coords = stateOrdinate(sample.phi, render);
    if (coords === null) continue;
    const [x, y] = render === "plane" ? coords : [sample.t, coords[1]];
    points.push(worldToScreen(view.transform, x, y));
  }
  return points;
}

function fanPolyline(view: ViewState, entryIndex: number): DrawOp | null {
  const entry = view.fan[entryIndex]!;
  const render = view.scenario?.render ?? "state-vs-time";
  const grid = entry.prediction.grid;
  const points: Array<[number, number]> = [];
  for (let i = 0; i < entry.prediction.phi_hat.length; i++) {
    const phi = entry.prediction.phi_hat[i]!;
    const coords = stateOrdinate(phi, render);
    if (coords === null) continue;
    const t = grid === null ? 0 : grid.t_start + grid.h * i;
    const [x, y] = render === "plane" ? coords : [t, coords[1]];
    points.push(worldToScreen(view.transform, x, y));
  }
  const truncated = entry.prediction.status.kind === "truncated";
  return {
    kind: "polyline",
    layer: "fan",
    points,
    style: {
      color: FAN_COLORS[entryIndex % FAN_COLORS.length]!,
      width: entry.best ? 3 : 1,
      dash: truncated ? [4, 4] : [],
      emphasis: entry.best,
    },
    label: entry.label,
    truncated,
  };
}

export function renderFrame(view: ViewState): DrawList {
  const ops: DrawList = [];

  const trajectory = trajectoryPoints(view);
  ops.push({
    kind: "polyline",
    layer: "trajectory",
    points: trajectory,
    style: { color: "#d8dee5", width: 2, dash: [], emphasis: false },
  });

  // fan: non-best first so the emphasized polyline paints on top
  const order = view.fan
    .map((entry, i) => ({ entry, i }))
    .sort((a, b) => Number(a.entry.best) - Number(b.entry.best));
  for (const { i } of order) {
    const op = fanPolyline(view, i);
    if (op !== null) ops.push(op);
  }

  if (view.horizonT1 !== null && view.anchor !== null) {
    const render = view.scenario?.render ?? "state-vs-time";
    const y = render === "plane" ? 0 : 0;
    ops.push({
      kind: "marker",
      layer: "horizon",
      at: worldToScreen(view.transform, view.horizonT1, y),
      style: { color: "#f05f57" },
      label: `t1=${view.horizonT1.toFixed(3)}`,
    });
  }

  // side panel: selected candidate, scores, decode health, slider widgets
  ops.push({
    kind: "text",
    layer: "panel",
    at: [PANEL_X, 24],
    text: view.mu === null ? "mu: (no prediction yet)" : `mu: ${view.mu}`,
  });
  if (view.fan.length === 0) {
    ops.push({ kind: "text", layer: "panel", at: [PANEL_X, 44], text: "fan: (empty)" });
  } else {
    view.fan.forEach((entry, i) => {
      const score =
        entry.score === null ? "-" : entry.score.toExponential(2);
      const mark = entry.best ? "*" : " ";
      const trunc = entry.prediction.status.kind === "truncated" ? " [truncated]" : "";
      ops.push({
        kind: "text",
        layer: "panel",
        at: [PANEL_X, 44 + 20 * i],
        text: `${mark} ${entry.label} score=${score}${trunc}`,
      });
    });
  }
  const sliderBase = 44 + 20 * Math.max(1, view.fan.length) + 16;
  ops.push({
    kind: "slider",
    layer: "panel",
    at: [PANEL_X, sliderBase],
    name: "dt",
    value: view.pendingConfig.dt,
    min: 0.02,
    max: 0.5,
  });
  ops.push({
    kind: "slider",
    layer: "panel",
    at: [PANEL_X, sliderBase + 28],
    name: "blend",
    value: view.pendingConfig.blend,
    min: 0,
    max: 1,
  });
  return ops;
}
